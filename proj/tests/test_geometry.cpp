#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ganlab/geometry.hpp"

using namespace ganlab;
using geometry::BinaryImage;
using geometry::RectSpec;
using Catch::Approx;

TEST_CASE("render") {
  SECTION("empty spec list gives an all-zero image") {
    const auto img = geometry::render({});
    for (double p : img.pixels) CHECK(p == 0.0);
  }
  SECTION("one 8x8 rectangle fills exactly 64 pixels") {
    const auto img = geometry::render({RectSpec{0, 0, 8, 8}});
    int on = 0;
    for (double p : img.pixels) on += p == 1.0 ? 1 : 0;
    CHECK(on == 64);
  }
  SECTION("overlapping rectangles take the union") {
    const auto img = geometry::render({RectSpec{0, 0, 8, 8}, RectSpec{4, 4, 8, 8}});
    int on = 0;
    for (double p : img.pixels) on += p == 1.0 ? 1 : 0;
    CHECK(on < 128);
    CHECK(on == 64 + 64 - 16);
  }
  SECTION("out-of-bounds spec is rejected") {
    CHECK_THROWS_AS(geometry::render({RectSpec{28, 0, 8, 8}}), std::invalid_argument);
  }
}

TEST_CASE("count_rectangles") {
  SECTION("all-zero image") {
    const auto r = geometry::count_rectangles(BinaryImage(32, 32));
    CHECK(r.count == 0);
    CHECK(r.clean);
  }
  SECTION("two separated rectangles") {
    const auto img = geometry::render({RectSpec{1, 1, 8, 8}, RectSpec{20, 15, 8, 8}});
    const auto r = geometry::count_rectangles(img);
    CHECK(r.count == 2);
    CHECK(r.clean);
  }
  SECTION("wrong shape is counted as unclean") {
    BinaryImage img(32, 32);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 7; ++x) img.at(x, y) = 1.0;
    const auto r = geometry::count_rectangles(img);
    CHECK(r.count == 0);
    CHECK_FALSE(r.clean);
  }
  SECTION("a stray pixel breaks cleanliness but not the count") {
    auto img = geometry::render({RectSpec{1, 1, 8, 8}});
    img.at(20, 20) = 1.0;
    const auto r = geometry::count_rectangles(img);
    CHECK(r.count == 1);
    CHECK_FALSE(r.clean);
  }
  SECTION("diagonally touching rectangles do not merge") {
    const auto img = geometry::render({RectSpec{0, 0, 8, 8}, RectSpec{8, 8, 8, 8}});
    const auto r = geometry::count_rectangles(img);
    CHECK(r.count == 2);
    CHECK(r.clean);
  }
}

TEST_CASE("count_rectangles over randomly placed rectangles (property)") {
  // 200 seeded trials per k: rendering k separated rectangles always counts
  // back (k, clean)
  for (int k = 0; k <= 4; ++k) {
    for (int trial = 0; trial < 200; ++trial) {
      rng::Stream stream(rng::derive_seed(1000 + k, trial));
      const auto specs = geometry::sample_nonadjacent_rects(k, stream);
      const auto r = geometry::count_rectangles(geometry::render(specs));
      REQUIRE(r.count == k);
      REQUIRE(r.clean);
    }
  }
}

TEST_CASE("count_rectangles is translation invariant") {
  rng::Stream stream(77);
  const auto specs = geometry::sample_nonadjacent_rects(2, stream, 32, 32, 8, 8);
  int min_x = 32, min_y = 32, max_x = 0, max_y = 0;
  for (const auto& s : specs) {
    min_x = std::min(min_x, s.x);
    min_y = std::min(min_y, s.y);
    max_x = std::max(max_x, s.x + s.w);
    max_y = std::max(max_y, s.y + s.h);
  }
  const auto base = geometry::count_rectangles(geometry::render(specs));
  for (int dx = -min_x; dx + max_x <= 32; ++dx) {
    for (int dy = -min_y; dy + max_y <= 32; dy += 3) {
      auto moved = specs;
      for (auto& s : moved) {
        s.x += dx;
        s.y += dy;
      }
      const auto r = geometry::count_rectangles(geometry::render(moved));
      REQUIRE(r.count == base.count);
      REQUIRE(r.clean == base.clean);
    }
  }
}

TEST_CASE("generate_paired") {
  SECTION("dataset sizes") {
    CHECK(geometry::generate_paired(32, 3).images.size() == 64);
    CHECK(geometry::generate_paired(5, 3).sibling_pairs.size() == 5);
  }
  SECTION("every image has exactly two rectangles") {
    const auto ds = geometry::generate_paired(64, 9);
    for (const auto& img : ds.images) {
      const auto r = geometry::count_rectangles(img);
      REQUIRE(r.count == 2);
      REQUIRE(r.clean);
    }
  }
  SECTION("deterministic per seed") {
    const auto a = geometry::generate_paired(8, 42);
    const auto b = geometry::generate_paired(8, 42);
    REQUIRE(a.images.size() == b.images.size());
    for (std::size_t i = 0; i < a.images.size(); ++i)
      CHECK(a.images[i].pixels == b.images[i].pixels);
    const auto c = geometry::generate_paired(8, 43);
    bool any_differ = false;
    for (std::size_t i = 0; i < a.images.size(); ++i)
      if (a.images[i].pixels != c.images[i].pixels) any_differ = true;
    CHECK(any_differ);
  }
  SECTION("sibling OR has three rectangles, AND has one") {
    const auto ds = geometry::generate_paired(50, 2024);
    for (const auto& [i, j] : ds.sibling_pairs) {
      const auto& a = ds.images[i];
      const auto& b = ds.images[j];
      BinaryImage orred(a.width, a.height), anded(a.width, a.height);
      for (std::size_t p = 0; p < a.pixels.size(); ++p) {
        orred.pixels[p] = std::max(a.pixels[p], b.pixels[p]);
        anded.pixels[p] = std::min(a.pixels[p], b.pixels[p]);
      }
      const auto r_or = geometry::count_rectangles(orred);
      const auto r_and = geometry::count_rectangles(anded);
      REQUIRE(r_or.count == 3);
      REQUIRE(r_or.clean);
      REQUIRE(r_and.count == 1);
      REQUIRE(r_and.clean);
    }
  }
}

TEST_CASE("generate_plain produces the requested rectangle count") {
  const auto ds = geometry::generate_plain(2, 3, 5);
  CHECK(ds.images.size() == 2);
  CHECK(ds.target_count == 3);
  CHECK(ds.sibling_pairs.empty());
  for (const auto& img : ds.images) {
    const auto r = geometry::count_rectangles(img);
    CHECK(r.count == 3);
    CHECK(r.clean);
  }
  CHECK(ds.images[0].pixels != ds.images[1].pixels);
}

TEST_CASE("nearest_neighbor") {
  const auto ds = geometry::generate_paired(8, 31);
  SECTION("zero distance iff pixel-identical") {
    const auto hit = geometry::nearest_neighbor(ds.images[5], ds);
    CHECK(hit.index == 5);
    CHECK(hit.distance == 0.0);
    auto perturbed = ds.images[5];
    perturbed.pixels[17] = 1.0 - perturbed.pixels[17];
    const auto near = geometry::nearest_neighbor(perturbed, ds);
    CHECK(near.distance > 0.0);
  }
  SECTION("all-zero sample against 2-rect images: sqrt(128), tie broken to index 0") {
    const BinaryImage zero(32, 32);
    // exhaustive check: every image has 128 foreground pixels
    for (const auto& img : ds.images) {
      double sq = 0.0;
      for (double p : img.pixels) sq += p * p;
      REQUIRE(sq == 128.0);
    }
    const auto hit = geometry::nearest_neighbor(zero, ds);
    CHECK(hit.index == 0);
    CHECK(hit.distance == Approx(std::sqrt(128.0)));
  }
  SECTION("empty dataset is an error") {
    CHECK_THROWS_AS(geometry::nearest_neighbor(BinaryImage(32, 32), geometry::GeometryDataset{}),
                    std::invalid_argument);
  }
}
