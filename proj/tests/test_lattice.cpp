#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <limits>

#include "pseg/lattice.hpp"
#include "pseg/random.hpp"

using namespace pseg;

TEST_CASE("lattice flattening is row-major with the last axis fastest") {
  Lattice lat({4, 3});
  CHECK(lat.rank() == 2);
  CHECK(lat.size() == 12);
  CHECK(lat.flatten({1, 2, 0}) == 5);
  Coord c = lat.unflatten(5);
  CHECK(c[0] == 1);
  CHECK(c[1] == 2);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    CHECK(lat.flatten(lat.unflatten(i)) == i);
  }
  CHECK(lat.contains({3, 2, 0}));
  CHECK_FALSE(lat.contains({4, 0, 0}));
  CHECK_FALSE(lat.contains({0, -1, 0}));
}

TEST_CASE("lattice construction rejects bad dims") {
  CHECK_THROWS_AS(Lattice(std::vector<int>{}), ContractViolation);
  CHECK_THROWS_AS(Lattice({3, 0}), ContractViolation);
  CHECK_THROWS_AS(Lattice({1, 2, 3, 4}), ContractViolation);
}

TEST_CASE("patch extraction at boundaries") {
  Lattice lat({3});
  Image img(lat, {5, 7, 9});
  PatchShape clamp{{{{-1, 0, 0}}, {{0, 0, 0}}, {{1, 0, 0}}},
                   BoundaryPolicy::kClamp};
  PatchShape mirror{{{{-1, 0, 0}}, {{0, 0, 0}}, {{1, 0, 0}}},
                    BoundaryPolicy::kMirror};

  SUBCASE("interior patch needs no boundary handling") {
    CHECK(extract_patch(img, 1, clamp) == std::vector<double>{5, 7, 9});
    CHECK(extract_patch(img, 1, mirror) == std::vector<double>{5, 7, 9});
  }
  SUBCASE("clamp replicates the edge pixel") {
    CHECK(extract_patch(img, 0, clamp) == std::vector<double>{5, 5, 7});
    CHECK(extract_patch(img, 2, clamp) == std::vector<double>{7, 9, 9});
  }
  SUBCASE("mirror reflects across the edge pixel") {
    CHECK(extract_patch(img, 0, mirror) == std::vector<double>{7, 5, 7});
    CHECK(extract_patch(img, 2, mirror) == std::vector<double>{7, 9, 7});
  }
}

TEST_CASE("mirror folding handles offsets past one period") {
  Lattice lat({4});
  Image img(lat, {1, 2, 3, 4});
  // period is 2n-2 = 6: index 4 -> 2, 5 -> 1, 6 -> 0, -2 -> 2
  PatchShape far{{{{4, 0, 0}}, {{5, 0, 0}}, {{6, 0, 0}}, {{-2, 0, 0}}},
                 BoundaryPolicy::kMirror};
  CHECK(extract_patch(img, 0, far) == std::vector<double>{3, 2, 1, 3});
}

TEST_CASE("single-pixel patch returns the center value everywhere") {
  Lattice lat({3, 3});
  std::vector<double> vals(9);
  for (std::size_t i = 0; i < 9; ++i) vals[i] = static_cast<double>(i) * 1.5;
  Image img(lat, vals);
  PatchShape single = PatchShape::single_pixel();
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(extract_patch(img, i, single) == std::vector<double>{img.at(i)});
  }
}

TEST_CASE("centered box offsets are row-major") {
  PatchShape box = PatchShape::centered_box(2, 1);
  REQUIRE(box.dim() == 9);
  CHECK(box.offsets.front() == Coord{-1, -1, 0});
  CHECK(box.offsets[1] == Coord{-1, 0, 0});
  CHECK(box.offsets[4] == Coord{0, 0, 0});
  CHECK(box.offsets.back() == Coord{1, 1, 0});
}

TEST_CASE("patch extraction is translation-consistent in the interior") {
  Lattice lat({6, 6});
  RandomStream rng(11);
  std::vector<double> vals(lat.size());
  for (double& v : vals) v = rng.gaussian();
  Image img(lat, vals);
  PatchShape box = PatchShape::centered_box(2, 1);
  for (int r = 1; r <= 4; ++r) {
    for (int c = 1; c <= 4; ++c) {
      std::vector<double> patch = extract_patch(img, lat.flatten({r, c, 0}), box);
      for (std::size_t t = 0; t < box.dim(); ++t) {
        Coord shifted{r + box.offsets[t][0], c + box.offsets[t][1], 0};
        CHECK(patch[t] == img.at(lat.flatten(shifted)));
      }
    }
  }
}

TEST_CASE("squared distance") {
  std::vector<double> a{0, 0}, b{3, 4}, c{1, 0}, zero{0, 0};
  CHECK(squared_distance(a, a) == 0.0);
  CHECK(squared_distance(a, b) == 25.0);
  CHECK(squared_distance(c, zero) == 1.0);
  CHECK_THROWS_AS(squared_distance(std::vector<double>{1.0}, a),
                  ContractViolation);

  RandomStream rng(5);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> x(4), y(4);
    for (int t = 0; t < 4; ++t) {
      x[t] = rng.gaussian();
      y[t] = rng.gaussian();
    }
    double d = squared_distance(x, y);
    CHECK(d >= 0.0);
    CHECK(squared_distance(y, x) == d);
    CHECK(squared_distance(x, x) == 0.0);
  }
}

TEST_CASE("neighborhood pixels clip to the lattice in row-major order") {
  Lattice lat({3, 3});
  Neighborhood r1 = Neighborhood::box(1);

  SUBCASE("radius 0 is just the center") {
    Neighborhood r0 = Neighborhood::box(0);
    for (std::size_t i = 0; i < lat.size(); ++i) {
      CHECK(neighborhood_pixels(lat, i, r0) == std::vector<std::size_t>{i});
    }
  }
  SUBCASE("center of a 3x3 sees all nine pixels") {
    std::vector<std::size_t> all{0, 1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(neighborhood_pixels(lat, 4, r1) == all);
  }
  SUBCASE("corner keeps the in-lattice quadrant") {
    CHECK(neighborhood_pixels(lat, 0, r1) ==
          std::vector<std::size_t>{0, 1, 3, 4});
  }
  SUBCASE("interior size is the declared maximum") {
    Lattice big({9, 9});
    CHECK(r1.max_size(2) == 9);
    CHECK(neighborhood_pixels(big, big.flatten({4, 4, 0}), r1).size() == 9);
  }
  SUBCASE("center pixel is always included") {
    for (std::size_t i = 0; i < lat.size(); ++i) {
      std::vector<std::size_t> n = neighborhood_pixels(lat, i, r1);
      CHECK(std::find(n.begin(), n.end(), i) != n.end());
    }
  }
}

TEST_CASE("per-axis radii and explicit offsets") {
  Lattice lat({4, 4});
  Neighborhood rect = Neighborhood::box(std::vector<int>{0, 1});
  std::vector<std::size_t> row =
      neighborhood_pixels(lat, lat.flatten({2, 2, 0}), rect);
  CHECK(row == std::vector<std::size_t>{9, 10, 11});

  Neighborhood diag = Neighborhood::explicit_offsets(
      {Coord{0, 0, 0}, Coord{1, 1, 0}});
  CHECK(neighborhood_pixels(lat, lat.flatten({2, 2, 0}), diag) ==
        std::vector<std::size_t>{10, 15});
  CHECK(diag.max_size(2) == 2);
}

TEST_CASE("image and label image validation") {
  Lattice lat({2, 2});
  CHECK_THROWS_AS(Image(lat, {1.0, 2.0}), ContractViolation);
  CHECK_THROWS_AS(Image(lat, {1.0, 2.0, 3.0,
                              std::numeric_limits<double>::infinity()}),
                  ContractViolation);
  CHECK_THROWS_AS(LabelImage(lat, {1, -1, 1, 0}), ContractViolation);
  CHECK_THROWS_AS(LabelImage(lat, {1, -1, 1, 2}), ContractViolation);

  LabelImage ok = LabelImage::constant(lat, -1);
  CHECK(ok.labels == std::vector<std::int8_t>(4, -1));
  Image c = Image::constant(lat, 2.5);
  CHECK(c.values == std::vector<double>(4, 2.5));
}
