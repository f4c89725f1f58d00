#include <doctest.h>

#include "xmodal/checkpoint.hpp"
#include "xmodal/errors.hpp"

using namespace xmodal;

namespace {

Checkpoint sample() {
  Checkpoint ck;
  ck.kind = "test";
  ck.config = {{"width", 3}};
  ck.step = 42;
  ck.seed = 7;
  ck.extra = {{"note", "x"}};
  ck.add("a", nn::Shape{1, 2, 1, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  ck.add("b", nn::Shape{1, 1, 1, 1}, std::vector<float>{-0.5F});
  return ck;
}

std::size_t offset_of(const std::vector<std::uint8_t>& bytes) {
  try {
    (void)decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("expected FormatError");
  return 0;
}

}  // namespace

TEST_CASE("checkpoint container round-trips") {
  const auto bytes = encode_checkpoint(sample());
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.kind == "test");
  CHECK(back.step == 42);
  CHECK(back.seed == 7);
  CHECK(back.extra.at("note") == "x");
  CHECK(back.block("a").values == std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(back.block("b").shape == nn::Shape{1, 1, 1, 1});
  CHECK(encode_checkpoint(back) == bytes);
  CHECK_THROWS_AS(back.block("c"), ConfigError);
}

TEST_CASE("checkpoint corruption is located") {
  const auto good = encode_checkpoint(sample());
  auto magic = good;
  magic[1] = 'Q';
  CHECK(offset_of(magic) == 1);
  auto version = good;
  version[4] = 2;
  CHECK(offset_of(version) == 4);
  auto manifest = good;
  manifest[12] = '!';
  CHECK(offset_of(manifest) == 12);
  auto shorter = good;
  shorter.pop_back();
  CHECK(offset_of(shorter) > 12);
  CHECK_THROWS_AS(decode_checkpoint(std::vector<std::uint8_t>(good.begin(), good.begin() + 6)), FormatError);
}

TEST_CASE("compatibility checks") {
  const Checkpoint ck = sample();
  CHECK_NOTHROW(require_compatible(ck, "test", {{"width", 3}}));
  CHECK_THROWS_AS(require_compatible(ck, "other", {{"width", 3}}), ConfigError);
  CHECK_THROWS_AS(require_compatible(ck, "test", {{"width", 4}}), ConfigError);
}
