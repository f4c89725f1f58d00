#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/harness/config.hpp"
#include "xmodal/harness/kfold.hpp"
#include "xmodal/harness/metrics.hpp"
#include "xmodal/harness/report.hpp"
#include "xmodal/harness/stats.hpp"

using namespace xmodal;
using namespace xmodal::harness;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> ids(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("case_" + std::to_string(i));
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xmodal_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

MetricsRecord dice(const std::string& train, const std::string& test, int ctx, int fold, const std::string& id,
                   double v) {
  MetricsRecord r;
  r.stage = "eval";
  r.metric = "dice";
  r.train_set = train;
  r.test_set = test;
  r.context = ctx;
  r.fold = fold;
  r.case_id = id;
  r.value = v;
  return r;
}

}  // namespace

TEST_CASE("config text round-trips") {
  ExperimentConfig c;
  c.run.id = "abc";
  c.run.seed = 18446744073709551615ULL;
  c.translator.lambda_identity = 2.5;
  c.translator.cycle_mode = CycleSelection::BOTH;
  c.window.enabled = false;
  c.sweep.contexts = "0,2";
  const std::string text = to_text(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(to_text(back) == text);
  CHECK(back.run.seed == c.run.seed);
  CHECK(back.translator.lambda_identity == 2.5);
  CHECK(back.sweep_contexts() == std::vector<int>{0, 2});
  CHECK(back.cycle_modes().size() == 2);
  CHECK(to_text(parse_config(to_text(ExperimentConfig{}))) == to_text(ExperimentConfig{}));
}

TEST_CASE("config parser accepts sections and comments") {
  const auto c = parse_config("# top\n[translator]\nsteps = 40  # short\n\n[run]\nid = x\n");
  CHECK(c.translator.steps == 40);
  CHECK(c.run.id == "x");
  CHECK(parse_config("translator.steps = 12\n").translator.steps == 12);
}

TEST_CASE("config parser names the offending line") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("run.id = a\nrun.bogus = 1\n").find("line 2") != std::string::npos);
  CHECK(message("run.seed = 1\nrun.seed = 2\n").find("line 2") != std::string::npos);
  CHECK(message("translator.steps = many\n").find("line 1") != std::string::npos);
  CHECK(message("window.enabled = maybe\n").find("line 1") != std::string::npos);
  CHECK(message("just words\n").find("line 1") != std::string::npos);
  CHECK_THROWS_AS(parse_config("translator.cycle_mode = l1\n"), ConfigError);
}

TEST_CASE("config validation rejects inconsistent values") {
  CHECK_NOTHROW(ExperimentConfig{}.validate());
  auto bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](ExperimentConfig& c) { c.data.height = 60; });
  bad([](ExperimentConfig& c) { c.segmenter.context = 4; });
  bad([](ExperimentConfig& c) { c.segmenter.steps = 150; });
  bad([](ExperimentConfig& c) { c.cv.folds = 1; });
  bad([](ExperimentConfig& c) { c.cv.folds = 30; });
  bad([](ExperimentConfig& c) { c.translator.lambda_cycle = -1; });
  bad([](ExperimentConfig& c) { c.augment.crop_min = 0.0; });
  bad([](ExperimentConfig& c) { c.segmenter.threshold = 1.0; });
}

TEST_CASE("schema lists every key once") {
  const auto schema = config_schema();
  std::set<std::string> keys;
  for (const auto& k : schema) CHECK(keys.insert(k.key).second);
  CHECK(keys.contains("translator.lambda_identity"));
  CHECK(keys.contains("cv.folds"));
}

TEST_CASE("k-fold split partitions the cases") {
  const auto cases = ids(12);
  const std::vector<int> one(12, 0);
  const auto r = kfold_split(cases, 6, one, 5);
  REQUIRE(r.folds.size() == 6);
  std::multiset<std::string> tested;
  for (const auto& f : r.folds) {
    CHECK(f.test.size() == 2);
    CHECK(f.train.size() == 10);
    for (const auto& t : f.test) {
      tested.insert(t);
      CHECK(std::find(f.train.begin(), f.train.end(), t) == f.train.end());
    }
  }
  CHECK(tested == std::multiset<std::string>(cases.begin(), cases.end()));
  CHECK(r.warnings.empty());
}

TEST_CASE("k-fold split balances strata") {
  const auto cases = ids(12);
  std::vector<int> strata(12);
  for (int i = 0; i < 12; ++i) strata[i] = i < 6 ? 0 : 1;
  const auto r = kfold_split(cases, 6, strata, 9);
  for (const auto& f : r.folds) {
    REQUIRE(f.test.size() == 2);
    int low = 0;
    for (const auto& t : f.test) low += std::stoi(t.substr(5)) < 6 ? 1 : 0;
    CHECK(low == 1);
  }
}

TEST_CASE("k-fold split is deterministic and sizes differ by at most one") {
  const auto cases = ids(23);
  const auto strata = tercile_strata([] {
    std::vector<double> v;
    for (int i = 0; i < 23; ++i) v.push_back(std::sin(i * 1.7));
    return v;
  }());
  const auto a = kfold_split(cases, 5, strata, 3);
  const auto b = kfold_split(cases, 5, strata, 3);
  const auto c = kfold_split(cases, 5, strata, 4);
  bool differs = false;
  std::size_t lo = 100, hi = 0;
  for (int f = 0; f < 5; ++f) {
    CHECK(a.folds[f].test == b.folds[f].test);
    differs = differs || a.folds[f].test != c.folds[f].test;
    lo = std::min(lo, a.folds[f].test.size());
    hi = std::max(hi, a.folds[f].test.size());
  }
  CHECK(differs);
  CHECK(hi - lo <= 1);
}

TEST_CASE("k-fold split errors and warnings") {
  CHECK_THROWS_AS(kfold_split(ids(4), 1, std::vector<int>(4, 0), 1), ArgumentError);
  CHECK_THROWS_AS(kfold_split(ids(4), 5, std::vector<int>(4, 0), 1), ArgumentError);
  CHECK_THROWS_AS(kfold_split(ids(4), 2, std::vector<int>(3, 0), 1), ArgumentError);
  CHECK_THROWS_AS(kfold_split({"a", "a", "b"}, 2, {0, 0, 0}, 1), ArgumentError);
  const auto r = kfold_split(ids(7), 3, {0, 0, 0, 0, 0, 1, 1}, 1);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("tercile strata") {
  CHECK(tercile_strata({5, 1, 9, 3, 7, 2}) == std::vector<int>{1, 0, 2, 1, 2, 0});
  CHECK(tercile_strata({1, 1, 1}) == std::vector<int>{0, 1, 2});
}

TEST_CASE("signed-rank test worked examples") {
  const std::vector<double> a{0.8, 0.7, 0.9, 0.85, 0.6, 0.75};
  CHECK(significance_test(a, a) == 1.0);
  std::vector<double> x(10), y(10);
  for (int i = 0; i < 10; ++i) {
    x[i] = 0.5 + 0.01 * i;
    y[i] = x[i] + 0.1 + 0.001 * i;
  }
  CHECK(significance_test(x, y) == doctest::Approx(2.0 / 1024.0).epsilon(1e-12));
  CHECK(significance_test(y, x) == doctest::Approx(2.0 / 1024.0).epsilon(1e-12));
  CHECK_THROWS_AS(significance_test(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 5}), ArgumentError);
  CHECK_THROWS_AS(significance_test(x, std::vector<double>{1, 2, 3, 4, 5}), ArgumentError);
}

TEST_CASE("signed-rank test agrees with full sign enumeration") {
  Rng rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(8));
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = std::round(rng.uniform(0, 10));
      b[i] = std::round(rng.uniform(0, 10)) + (trial % 3 == 0 ? 2 : 0);
    }
    std::size_t nonzero = 0;
    for (int i = 0; i < n; ++i) nonzero += a[i] != b[i];
    if (nonzero == 0) continue;
    CHECK(significance_test(a, b) == doctest::Approx(oracle::wilcoxon_enumerate(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("signed-rank normal approximation stays close to the exact tail") {
  std::vector<double> a(21), b(21);
  for (int i = 0; i < 21; ++i) {
    a[i] = i;
    b[i] = i + (i % 4 == 0 ? -1.0 : 1.0) * (1 + i * 0.1);
  }
  const double p = significance_test(a, b);
  CHECK(p > 0.0);
  CHECK(p < 0.2);
}

TEST_CASE("mean and sample deviation") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == 5.0);
  CHECK(sample_std(v) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(sample_std(std::vector<double>{3.0}) == 0.0);
}

TEST_CASE("metrics round-trip and torn lines") {
  const fs::path dir = scratch("metrics");
  MetricsRecord r = dice("MR", "MR", 1, 2, "mr_003", 0.875);
  {
    MetricsWriter w(dir / "a.ndjson", "run1");
    w.write(r);
    r.value = 0.5;
    w.write(r);
    MetricsRecord bad = r;
    bad.value = std::nan("");
    CHECK_THROWS_AS(w.write(bad), ArgumentError);
  }
  {
    std::ofstream torn(dir / "a.ndjson", std::ios::app);
    torn << "{\"run_id\": \"run1\", \"sta";
  }
  const auto got = read_metrics_file(dir / "a.ndjson");
  REQUIRE(got.size() == 2);
  CHECK(got[0].run_id == "run1");
  CHECK(got[0].value == 0.875);
  CHECK(got[1].case_id == "mr_003");
  CHECK(metrics_record_from_json(to_json(got[0])) == got[0]);
  {
    MetricsWriter w(dir / "a.ndjson", "run2", true);
    w.write(r);
  }
  CHECK(read_metrics_file(dir / "a.ndjson").size() == 1);
  fs::remove_all(dir);
}

TEST_CASE("summary groups, statistics and comparisons") {
  std::vector<MetricsRecord> recs;
  const std::vector<double> mr{0.9, 0.85, 0.88, 0.92, 0.8, 0.86};
  const std::vector<double> syn{0.7, 0.72, 0.65, 0.8, 0.6, 0.75};
  for (int i = 0; i < 6; ++i) {
    recs.push_back(dice("MR", "MR", 1, 0, "c" + std::to_string(i), mr[i]));
    recs.push_back(dice("MR", "MR", 2, 0, "c" + std::to_string(i), syn[i]));
  }
  recs.push_back(dice("SynCT-SSIM", "CT", 1, 0, "ct_000", 0.7));
  MetricsRecord noise = recs.front();
  noise.stage = "train-seg";
  recs.push_back(noise);

  const Report rep = summarize(recs);
  REQUIRE(rep.groups.size() == 3);
  CHECK(rep.groups[0].mean == doctest::Approx(mean(mr)));
  CHECK(rep.groups[0].std == doctest::Approx(sample_std(mr)));
  CHECK(rep.groups[2].single_case);
  CHECK_FALSE(rep.groups[0].single_case);
  REQUIRE(rep.comparisons.size() == 1);
  CHECK(rep.comparisons[0].pairs == 6);
  REQUIRE(rep.comparisons[0].p_value);
  CHECK(*rep.comparisons[0].p_value == doctest::Approx(significance_test(mr, syn)));

  const std::string tsv = summary_tsv(rep);
  CHECK(tsv.rfind("train_set\ttest_set\tcontext\tchannels\tn\tdice_mean\tdice_std\tdice\tflag\n", 0) == 0);
  CHECK(tsv.find("single_case") != std::string::npos);
  CHECK(comparisons_tsv(rep).find("\t6\t") != std::string::npos);
  const std::string svg = boxplot_svg(rep, "dice");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("few pairs leave the p-value empty") {
  std::vector<MetricsRecord> recs;
  for (int i = 0; i < 3; ++i) {
    recs.push_back(dice("MR", "MR", 0, 0, "c" + std::to_string(i), 0.5 + 0.1 * i));
    recs.push_back(dice("MR", "MR", 1, 0, "c" + std::to_string(i), 0.6 + 0.1 * i));
  }
  const Report rep = summarize(recs);
  REQUIRE(rep.comparisons.size() == 1);
  CHECK_FALSE(rep.comparisons[0].p_value);
  CHECK(comparisons_tsv(rep).find("NA") != std::string::npos);
}

TEST_CASE("report refuses runs with missing stages") {
  const fs::path dir = scratch("report");
  fs::create_directories(dir / "metrics");
  {
    MetricsWriter w(dir / "metrics" / "eval.ndjson", "r");
    w.write(dice("SynCT-MSE", "CT", 1, 0, "ct_000", 0.7));
  }
  try {
    emit_report(dir);
    FAIL("expected ReportError");
  } catch (const ReportError& e) {
    const std::string what = e.what();
    CHECK(what.find("translate") != std::string::npos);
    CHECK(what.find("train-seg") != std::string::npos);
  }
  {
    MetricsWriter w(dir / "metrics" / "other.ndjson", "r");
    MetricsRecord t;
    t.stage = "translate";
    t.metric = "gen_total";
    w.write(t);
    t.stage = "train-seg";
    t.metric = "loss";
    w.write(t);
  }
  const Report rep = emit_report(dir);
  CHECK(rep.groups.size() == 1);
  CHECK(fs::exists(dir / "report" / "summary.tsv"));
  CHECK(fs::exists(dir / "report" / "comparisons.tsv"));
  CHECK(fs::exists(dir / "report" / "boxplot_dice.svg"));
  fs::remove_all(dir);
}
