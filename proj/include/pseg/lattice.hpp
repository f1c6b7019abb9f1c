#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pseg/errors.hpp"

namespace pseg {

inline constexpr int kMaxRank = 3;

// Integer coordinate; axes beyond the lattice rank are zero.
using Coord = std::array<int, kMaxRank>;

// Finite uniformly sampled pixel grid with 1 to 3 axes. Pixels are addressed
// by flat row-major index (last axis fastest); that single flattening is the
// canonical pixel ordering everywhere in the library.
class Lattice {
 public:
  Lattice() = default;
  explicit Lattice(std::vector<int> dims);

  int rank() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t size() const { return size_; }

  bool contains(const Coord& c) const;
  std::size_t flatten(const Coord& c) const;
  Coord unflatten(std::size_t flat) const;

  bool operator==(const Lattice& other) const = default;

 private:
  std::vector<int> dims_;
  std::size_t size_ = 0;
};

enum class BoundaryPolicy { kClamp, kMirror };

// Ordered offset set defining a patch. The entry order fixes the layout of
// extracted patch vectors, so patches are reproducible.
struct PatchShape {
  std::vector<Coord> offsets;
  BoundaryPolicy boundary = BoundaryPolicy::kClamp;

  std::size_t dim() const { return offsets.size(); }

  // The one-pixel shape {0}.
  static PatchShape single_pixel(BoundaryPolicy boundary = BoundaryPolicy::kClamp);
  // Centered box of side 2*radius+1 per axis, offsets in row-major order.
  static PatchShape centered_box(int rank, int radius,
                                 BoundaryPolicy boundary = BoundaryPolicy::kClamp);

  bool operator==(const PatchShape& other) const = default;
};

// Maps an out-of-range coordinate back onto the lattice. Clamp replicates the
// edge pixel; mirror reflects across it (index -1 -> 1).
Coord resolve_boundary(const Lattice& lattice, Coord c, BoundaryPolicy policy);

// Real-valued image on a lattice; all values finite.
struct Image {
  Lattice lattice;
  std::vector<double> values;

  Image() = default;
  Image(Lattice lat, std::vector<double> vals);

  double at(std::size_t flat) const { return values[flat]; }
  static Image constant(const Lattice& lat, double value);
};

// Binary segmentation image; every entry is exactly +1 or -1.
struct LabelImage {
  Lattice lattice;
  std::vector<std::int8_t> labels;

  LabelImage() = default;
  LabelImage(Lattice lat, std::vector<std::int8_t> labs);

  std::int8_t at(std::size_t flat) const { return labels[flat]; }
  static LabelImage constant(const Lattice& lat, std::int8_t value);

  bool operator==(const LabelImage& other) const = default;
};

// Search region around a pixel: a centered box with per-axis radii, or an
// explicit offset list. Pixels falling outside the lattice are dropped.
class Neighborhood {
 public:
  static Neighborhood box(int radius);
  static Neighborhood box(std::vector<int> radii);
  static Neighborhood explicit_offsets(std::vector<Coord> offsets);

  // Offsets in row-major order for the given rank.
  std::vector<Coord> offsets(int rank) const;
  // Declared maximum size |N| before clipping.
  std::size_t max_size(int rank) const;

  bool is_box() const { return is_box_; }
  const std::vector<int>& radii() const { return radii_; }

  bool operator==(const Neighborhood& other) const = default;

 private:
  Neighborhood() = default;
  bool is_box_ = true;
  std::vector<int> radii_;       // box form; single entry applies to all axes
  std::vector<Coord> offsets_;   // explicit form
};

// N(i): the neighborhood's pixels clipped to the lattice, in row-major order.
std::vector<std::size_t> neighborhood_pixels(const Lattice& lattice,
                                             std::size_t center,
                                             const Neighborhood& spec);

template <typename T>
std::vector<T> extract_patch_values(const Lattice& lattice,
                                    std::span<const T> values,
                                    std::size_t center,
                                    const PatchShape& shape) {
  require_contract(center < lattice.size(), "patch center outside lattice");
  Coord base = lattice.unflatten(center);
  std::vector<T> patch(shape.dim());
  for (std::size_t t = 0; t < shape.dim(); ++t) {
    Coord c = base;
    for (int a = 0; a < lattice.rank(); ++a) c[a] += shape.offsets[t][a];
    c = resolve_boundary(lattice, c, shape.boundary);
    patch[t] = values[lattice.flatten(c)];
  }
  return patch;
}

std::vector<double> extract_patch(const Image& image, std::size_t center,
                                  const PatchShape& shape);
std::vector<std::int8_t> extract_patch(const LabelImage& image,
                                       std::size_t center,
                                       const PatchShape& shape);

// Squared Euclidean distance between equal-length vectors.
double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace pseg
