#include "support.hpp"

#include <atomic>
#include <set>
#include <vector>

#include "fontparts/binary_io.hpp"
#include "fontparts/common.hpp"
#include "fontparts/image.hpp"

using namespace fontparts;

TEST_CASE("derive_seed separates named streams") {
  CHECK(derive_seed(7, "train") == derive_seed(7, "train"));
  CHECK(derive_seed(7, "train") != derive_seed(7, "codebook"));
  CHECK(derive_seed(7, "train") != derive_seed(8, "train"));
  CHECK(derive_seed(7, "train", 0) != derive_seed(7, "train", 1));
}

TEST_CASE("uniform helpers stay in range") {
  Rng rng(3);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = uniform_index(rng, 5);
    REQUIRE(v < 5);
    seen.insert(v);
    const double u = uniform01(rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("standard_normal has roughly unit moments") {
  Rng rng(11);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(rng);
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.05);
  CHECK(std::abs(s2 / n - 1.0) < 0.05);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  for (unsigned threads : {1u, 4u}) {
    set_thread_count(threads);
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) REQUIRE(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                      if (i == 42) throw DataError("boom");
                    }),
                    DataError);
  }
  set_thread_count(0);
}

TEST_CASE("binary writer and reader round-trip") {
  BinaryWriter w;
  w.magic("TEST");
  w.u16(0xBEEF);
  w.u32(123456789);
  w.u64(0x0123456789ABCDEFull);
  w.f32(1.5f);
  w.f64(-2.25);
  w.string("glyph");
  const auto bytes = w.take();
  CHECK(bytes[4] == 0xEF);  // little-endian
  BinaryReader r(bytes, "mem");
  r.expect_magic("TEST");
  CHECK(r.u16() == 0xBEEF);
  CHECK(r.u32() == 123456789u);
  CHECK(r.u64() == 0x0123456789ABCDEFull);
  CHECK(r.f32() == 1.5f);
  CHECK(r.f64() == -2.25);
  CHECK(r.string() == "glyph");
  CHECK(r.remaining() == 0);
  CHECK_THROWS_AS(r.u32(), DataError);

  BinaryReader bad(bytes, "mem");
  CHECK_THROWS_AS(bad.expect_magic("NOPE"), DataError);
}

TEST_CASE("image files round-trip and polarity is normalized") {
  testing::TempDir dir("image");
  GrayImage img(7, 5, 255);
  img.at(3, 2) = 0;
  img.at(0, 0) = 17;
  write_pgm(dir / "a.pgm", img);
  write_png(dir / "a.png", img);
  for (const char* name : {"a.pgm", "a.png"}) {
    const auto back = read_gray_image(dir / name);
    CHECK(back.width == 7);
    CHECK(back.height == 5);
    CHECK(back.pixels == img.pixels);
  }
  CHECK_THROWS_AS(read_gray_image(dir / "missing.png"), DataError);

  GrayImage inverted(32, 32, 0);
  for (int y = 6; y < 26; ++y)
    for (int x = 6; x < 26; ++x) inverted.at(x, y) = 255;
  CHECK(normalize_polarity(inverted));
  CHECK(inverted.at(0, 0) == 255);
  CHECK(inverted.at(15, 15) == 0);
}

TEST_CASE("resize_bilinear keeps constants and aligns centers") {
  FloatImage c(10, 6, 0.25f);
  const auto r = resize_bilinear(c, 20, 12);
  for (float v : r.data) CHECK(v == doctest::Approx(0.25));
  FloatImage ramp(4, 1);
  for (int x = 0; x < 4; ++x) ramp.at(x, 0) = static_cast<float>(x);
  const auto up = resize_bilinear(ramp, 8, 1);
  CHECK(up.at(1, 0) == doctest::Approx(0.25));
  CHECK(up.at(2, 0) == doctest::Approx(0.75));
}
