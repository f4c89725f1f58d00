#include "xmodal/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "xmodal/errors.hpp"
#include "xmodal/harness/stats.hpp"
#include "xmodal/volume_io.hpp"

namespace xmodal::harness {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Linear-interpolated quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

bool comparable(const GroupSummary& a, const GroupSummary& b) {
  if (a.test_set != b.test_set) return false;
  return (a.context == b.context) != (a.train_set == b.train_set);
}

}  // namespace

std::string group_label(const GroupSummary& g) {
  std::string s = g.train_set + " -> " + g.test_set;
  if (g.context >= 0) s += " (context " + std::to_string(g.context) + ")";
  return s;
}

Report summarize(const std::vector<MetricsRecord>& records) {
  Report rep;
  std::map<std::tuple<std::string, std::string, int>, std::size_t> index;
  for (const auto& r : records) {
    if (r.stage != "eval" || r.metric != "dice") continue;
    const auto key = std::make_tuple(r.train_set, r.test_set, r.context);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rep.groups.size()).first;
      GroupSummary g;
      g.train_set = r.train_set;
      g.test_set = r.test_set;
      g.context = r.context;
      rep.groups.push_back(std::move(g));
    }
    GroupSummary& g = rep.groups[it->second];
    g.keys.push_back(std::to_string(r.fold) + "/" + r.case_id);
    g.values.push_back(r.value);
  }
  for (auto& g : rep.groups) {
    g.mean = mean(g.values);
    g.std = sample_std(g.values);
    g.single_case = g.values.size() == 1;
  }

  for (std::size_t i = 0; i < rep.groups.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.groups.size(); ++j) {
      const GroupSummary& a = rep.groups[i];
      const GroupSummary& b = rep.groups[j];
      if (!comparable(a, b)) continue;
      std::map<std::string, double> bmap;
      for (std::size_t t = 0; t < b.keys.size(); ++t) bmap[b.keys[t]] = b.values[t];
      std::vector<double> va;
      std::vector<double> vb;
      for (std::size_t t = 0; t < a.keys.size(); ++t) {
        const auto hit = bmap.find(a.keys[t]);
        if (hit == bmap.end()) continue;
        va.push_back(a.values[t]);
        vb.push_back(hit->second);
      }
      Comparison c{group_label(a), group_label(b), va.size(), std::nullopt};
      if (va.size() >= 5) c.p_value = significance_test(va, vb);
      rep.comparisons.push_back(std::move(c));
    }
  }
  return rep;
}

std::string summary_tsv(const Report& r) {
  std::string out = "train_set\ttest_set\tcontext\tchannels\tn\tdice_mean\tdice_std\tdice\tflag\n";
  for (const auto& g : r.groups) {
    out += g.train_set + "\t" + g.test_set + "\t";
    out += (g.context >= 0 ? std::to_string(g.context) : "NA") + "\t";
    out += (g.context >= 0 ? std::to_string(1 + 2 * g.context) : "NA") + "\t";
    out += std::to_string(g.values.size()) + "\t" + fmt("%.6f", g.mean) + "\t" + fmt("%.6f", g.std) + "\t";
    out += fmt("%.2f", g.mean) + " ± " + fmt("%.2f", g.std) + "\t";
    out += g.single_case ? "single_case" : "";
    out += "\n";
  }
  return out;
}

std::string comparisons_tsv(const Report& r) {
  std::string out = "group_a\tgroup_b\tpairs\tp_value\n";
  for (const auto& c : r.comparisons) {
    out += c.group_a + "\t" + c.group_b + "\t" + std::to_string(c.pairs) + "\t";
    out += c.p_value ? fmt("%.6g", *c.p_value) : "NA";
    out += "\n";
  }
  return out;
}

std::string boxplot_svg(const Report& r, const std::string& metric) {
  constexpr double kLeft = 60;
  constexpr double kTop = 30;
  constexpr double kPlotH = 300;
  constexpr double kSlot = 140;
  const double width = kLeft + kSlot * static_cast<double>(std::max<std::size_t>(r.groups.size(), 1)) + 20;
  const double height = kTop + kPlotH + 90;
  auto y_of = [&](double v) { return kTop + kPlotH * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", width) + "\" height=\"" +
                  fmt("%.0f", height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt("%.1f", width / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" +
       xml_escape(metric) + "</text>\n";
  for (int t = 0; t <= 10; t += 2) {
    const double y = y_of(t / 10.0);
    s += "<line x1=\"" + fmt("%.1f", kLeft) + "\" x2=\"" + fmt("%.1f", width - 20) + "\" y1=\"" + fmt("%.1f", y) +
         "\" y2=\"" + fmt("%.1f", y) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + fmt("%.1f", kLeft - 6) + "\" y=\"" + fmt("%.1f", y + 4) + "\" text-anchor=\"end\">" +
         fmt("%.1f", t / 10.0) + "</text>\n";
  }
  for (std::size_t i = 0; i < r.groups.size(); ++i) {
    const GroupSummary& g = r.groups[i];
    std::vector<double> v = g.values;
    std::sort(v.begin(), v.end());
    const double q1 = quantile(v, 0.25);
    const double q2 = quantile(v, 0.5);
    const double q3 = quantile(v, 0.75);
    const double iqr = q3 - q1;
    double lo = q1;
    double hi = q3;
    for (double x : v) {
      if (x >= q1 - 1.5 * iqr) lo = std::min(lo, x);
      if (x <= q3 + 1.5 * iqr) hi = std::max(hi, x);
    }
    const double cx = kLeft + kSlot * (static_cast<double>(i) + 0.5);
    const double half = 28;
    auto line = [&](double x1, double y1, double x2, double y2) {
      s += "<line x1=\"" + fmt("%.1f", x1) + "\" y1=\"" + fmt("%.1f", y1) + "\" x2=\"" + fmt("%.1f", x2) + "\" y2=\"" +
           fmt("%.1f", y2) + "\" stroke=\"black\"/>\n";
    };
    line(cx, y_of(hi), cx, y_of(q3));
    line(cx, y_of(q1), cx, y_of(lo));
    line(cx - half / 2, y_of(hi), cx + half / 2, y_of(hi));
    line(cx - half / 2, y_of(lo), cx + half / 2, y_of(lo));
    s += "<rect x=\"" + fmt("%.1f", cx - half) + "\" y=\"" + fmt("%.1f", y_of(q3)) + "\" width=\"" +
         fmt("%.1f", 2 * half) + "\" height=\"" + fmt("%.1f", y_of(q1) - y_of(q3)) +
         "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    line(cx - half, y_of(q2), cx + half, y_of(q2));
    for (double x : v) {
      if (x < lo || x > hi) {
        s += "<circle cx=\"" + fmt("%.1f", cx) + "\" cy=\"" + fmt("%.1f", y_of(x)) +
             "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
      }
    }
    const double ty = kTop + kPlotH + 18;
    s += "<text x=\"" + fmt("%.1f", cx) + "\" y=\"" + fmt("%.1f", ty) + "\" text-anchor=\"middle\">" +
         xml_escape(g.train_set) + "</text>\n";
    s += "<text x=\"" + fmt("%.1f", cx) + "\" y=\"" + fmt("%.1f", ty + 14) + "\" text-anchor=\"middle\">on " +
         xml_escape(g.test_set) + (g.context >= 0 ? ", context " + std::to_string(g.context) : "") + "</text>\n";
    s += "<text x=\"" + fmt("%.1f", cx) + "\" y=\"" + fmt("%.1f", ty + 28) + "\" text-anchor=\"middle\">n=" +
         std::to_string(v.size()) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

Report emit_report(const std::filesystem::path& run_dir) {
  const auto records = read_metrics_dir(run_dir / "metrics");
  std::set<std::string> stages;
  bool wants_translate = false;
  for (const auto& r : records) {
    stages.insert(r.stage);
    if (r.stage == "eval" && r.train_set.rfind("SynCT", 0) == 0) wants_translate = true;
  }
  std::vector<std::string> required{"train-seg", "eval"};
  if (wants_translate) required.insert(required.begin(), "translate");
  std::string missing;
  for (const auto& st : required) {
    if (!stages.contains(st)) missing += (missing.empty() ? "" : ", ") + st;
  }
  if (!missing.empty()) {
    throw ReportError("metrics missing for stage(s): " + missing + " in " + (run_dir / "metrics").string());
  }

  Report rep = summarize(records);
  const auto dir = run_dir / "report";
  auto put = [&](const std::string& name, const std::string& text) {
    write_file_bytes(dir / name, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  };
  put("summary.tsv", summary_tsv(rep));
  put("comparisons.tsv", comparisons_tsv(rep));
  put("boxplot_dice.svg", boxplot_svg(rep, "Dice score"));
  return rep;
}

}  // namespace xmodal::harness
