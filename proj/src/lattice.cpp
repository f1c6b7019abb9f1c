#include "pseg/lattice.hpp"

#include <algorithm>
#include <cstdlib>

namespace pseg {

Lattice::Lattice(std::vector<int> dims) : dims_(std::move(dims)) {
  require_contract(!dims_.empty() && dims_.size() <= kMaxRank,
                   "lattice rank must be 1 to 3");
  size_ = 1;
  for (int d : dims_) {
    require_contract(d > 0, "lattice extents must be positive");
    size_ *= static_cast<std::size_t>(d);
  }
}

bool Lattice::contains(const Coord& c) const {
  for (int a = 0; a < rank(); ++a) {
    if (c[a] < 0 || c[a] >= dims_[a]) return false;
  }
  return true;
}

std::size_t Lattice::flatten(const Coord& c) const {
  std::size_t flat = 0;
  for (int a = 0; a < rank(); ++a) {
    flat = flat * static_cast<std::size_t>(dims_[a]) +
           static_cast<std::size_t>(c[a]);
  }
  return flat;
}

Coord Lattice::unflatten(std::size_t flat) const {
  Coord c{0, 0, 0};
  for (int a = rank() - 1; a >= 0; --a) {
    auto d = static_cast<std::size_t>(dims_[a]);
    c[a] = static_cast<int>(flat % d);
    flat /= d;
  }
  return c;
}

PatchShape PatchShape::single_pixel(BoundaryPolicy boundary) {
  return PatchShape{{Coord{0, 0, 0}}, boundary};
}

PatchShape PatchShape::centered_box(int rank, int radius,
                                    BoundaryPolicy boundary) {
  require_contract(rank >= 1 && rank <= kMaxRank, "bad patch rank");
  require_contract(radius >= 0, "patch radius must be nonnegative");
  std::vector<Coord> offsets;
  int side = 2 * radius + 1;
  std::size_t count = 1;
  for (int a = 0; a < rank; ++a) count *= static_cast<std::size_t>(side);
  offsets.reserve(count);
  Coord off{0, 0, 0};
  for (std::size_t t = 0; t < count; ++t) {
    std::size_t rest = t;
    for (int a = rank - 1; a >= 0; --a) {
      off[a] = static_cast<int>(rest % side) - radius;
      rest /= side;
    }
    offsets.push_back(off);
  }
  return PatchShape{std::move(offsets), boundary};
}

namespace {

int fold_mirror(int x, int n) {
  if (n == 1) return 0;
  int period = 2 * n - 2;
  x = std::abs(x) % period;
  if (x >= n) x = period - x;
  return x;
}

}  // namespace

Coord resolve_boundary(const Lattice& lattice, Coord c, BoundaryPolicy policy) {
  for (int a = 0; a < lattice.rank(); ++a) {
    int n = lattice.dims()[a];
    if (c[a] >= 0 && c[a] < n) continue;
    switch (policy) {
      case BoundaryPolicy::kClamp:
        c[a] = std::clamp(c[a], 0, n - 1);
        break;
      case BoundaryPolicy::kMirror:
        c[a] = fold_mirror(c[a], n);
        break;
    }
  }
  return c;
}

Image::Image(Lattice lat, std::vector<double> vals)
    : lattice(std::move(lat)), values(std::move(vals)) {
  require_contract(values.size() == lattice.size(),
                   "image value count must equal lattice size");
  for (double v : values) {
    require_contract(std::isfinite(v), "image values must be finite");
  }
}

Image Image::constant(const Lattice& lat, double value) {
  return Image(lat, std::vector<double>(lat.size(), value));
}

LabelImage::LabelImage(Lattice lat, std::vector<std::int8_t> labs)
    : lattice(std::move(lat)), labels(std::move(labs)) {
  require_contract(labels.size() == lattice.size(),
                   "label count must equal lattice size");
  for (std::int8_t l : labels) {
    require_contract(l == 1 || l == -1, "labels must be +1 or -1");
  }
}

LabelImage LabelImage::constant(const Lattice& lat, std::int8_t value) {
  return LabelImage(lat, std::vector<std::int8_t>(lat.size(), value));
}

Neighborhood Neighborhood::box(int radius) {
  return box(std::vector<int>{radius});
}

Neighborhood Neighborhood::box(std::vector<int> radii) {
  require_contract(!radii.empty() && radii.size() <= kMaxRank,
                   "neighborhood radii must cover 1 to 3 axes");
  for (int r : radii) require_contract(r >= 0, "radius must be nonnegative");
  Neighborhood nb;
  nb.is_box_ = true;
  nb.radii_ = std::move(radii);
  return nb;
}

Neighborhood Neighborhood::explicit_offsets(std::vector<Coord> offsets) {
  require_contract(!offsets.empty(), "explicit neighborhood must be nonempty");
  Neighborhood nb;
  nb.is_box_ = false;
  nb.offsets_ = std::move(offsets);
  return nb;
}

std::vector<Coord> Neighborhood::offsets(int rank) const {
  if (!is_box_) return offsets_;
  std::vector<int> radii(static_cast<std::size_t>(rank));
  for (int a = 0; a < rank; ++a) {
    radii[a] = radii_.size() == 1 ? radii_[0] : radii_.at(a);
  }
  std::size_t count = 1;
  for (int a = 0; a < rank; ++a) {
    count *= static_cast<std::size_t>(2 * radii[a] + 1);
  }
  std::vector<Coord> out;
  out.reserve(count);
  Coord off{0, 0, 0};
  for (std::size_t t = 0; t < count; ++t) {
    std::size_t rest = t;
    for (int a = rank - 1; a >= 0; --a) {
      int side = 2 * radii[a] + 1;
      off[a] = static_cast<int>(rest % static_cast<std::size_t>(side)) - radii[a];
      rest /= static_cast<std::size_t>(side);
    }
    out.push_back(off);
  }
  return out;
}

std::size_t Neighborhood::max_size(int rank) const {
  if (!is_box_) return offsets_.size();
  std::size_t count = 1;
  for (int a = 0; a < rank; ++a) {
    int r = radii_.size() == 1 ? radii_[0] : radii_.at(a);
    count *= static_cast<std::size_t>(2 * r + 1);
  }
  return count;
}

std::vector<std::size_t> neighborhood_pixels(const Lattice& lattice,
                                             std::size_t center,
                                             const Neighborhood& spec) {
  require_contract(center < lattice.size(), "neighborhood center outside lattice");
  Coord base = lattice.unflatten(center);
  std::vector<std::size_t> pixels;
  for (const Coord& off : spec.offsets(lattice.rank())) {
    Coord c = base;
    for (int a = 0; a < lattice.rank(); ++a) c[a] += off[a];
    if (lattice.contains(c)) pixels.push_back(lattice.flatten(c));
  }
  return pixels;
}

std::vector<double> extract_patch(const Image& image, std::size_t center,
                                  const PatchShape& shape) {
  return extract_patch_values<double>(image.lattice, image.values, center, shape);
}

std::vector<std::int8_t> extract_patch(const LabelImage& image,
                                       std::size_t center,
                                       const PatchShape& shape) {
  return extract_patch_values<std::int8_t>(image.lattice, image.labels, center,
                                           shape);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_contract(a.size() == b.size(),
                   "squared_distance needs equal-length vectors");
  double sum = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    double diff = a[t] - b[t];
    sum += diff * diff;
  }
  return sum;
}

}  // namespace pseg
