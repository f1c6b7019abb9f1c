#include "pseg/pointwise.hpp"

#include <algorithm>
#include <cmath>

#include "pseg/parallel.hpp"

namespace pseg {

namespace {

void check_inputs(const Image& query, const TrainingSet& train,
                  const PointwiseConfig& cfg) {
  train.validate();
  require_contract(query.lattice == train.lattice(),
                   "query and training images must share a lattice");
  require_contract(cfg.theta > 0.0, "theta must be positive (or infinity)");
  require_contract(cfg.patch.dim() >= 1, "patch shape must be nonempty");
}

}  // namespace

double theta_for_sigma(double sigma) {
  require_contract(sigma > 0.0, "sigma must be positive");
  return 1.0 / (8.0 * sigma * sigma);
}

VotePair FactoredVotes::votes() const {
  double factor = std::exp(-min_exponent);
  return {factor * scaled_plus, factor * scaled_minus};
}

std::vector<VoteTerm> vote_terms(std::size_t pixel, const Image& query,
                                 const TrainingSet& train,
                                 const PointwiseConfig& cfg) {
  check_inputs(query, train, cfg);
  require_contract(std::isfinite(cfg.theta),
                   "vote terms need a finite theta");
  const auto neighbors =
      neighborhood_pixels(query.lattice, pixel, cfg.search);
  require_contract(!neighbors.empty(), "empty search neighborhood");
  std::vector<double> query_patch = extract_patch(query, pixel, cfg.patch);

  std::vector<VoteTerm> terms;
  terms.reserve(train.size() * neighbors.size());
  for (std::size_t u = 0; u < train.size(); ++u) {
    for (std::size_t j : neighbors) {
      std::vector<double> train_patch =
          extract_patch(train.intensities[u], j, cfg.patch);
      double dist = squared_distance(train_patch, query_patch);
      terms.push_back({cfg.theta * dist, train.labels[u].at(j)});
    }
  }
  return terms;
}

FactoredVotes accumulate_votes(std::span<const VoteTerm> terms) {
  require_contract(!terms.empty(), "no vote terms");
  double min_exponent = terms[0].exponent;
  for (const VoteTerm& t : terms) {
    min_exponent = std::min(min_exponent, t.exponent);
  }
  FactoredVotes out;
  out.min_exponent = min_exponent;
  for (const VoteTerm& t : terms) {
    double w = std::exp(-(t.exponent - min_exponent));
    if (t.label > 0) {
      out.scaled_plus += w;
    } else {
      out.scaled_minus += w;
    }
  }
  return out;
}

NearestMatch nn_label(std::size_t pixel, const Image& query,
                      const TrainingSet& train, const PointwiseConfig& cfg) {
  check_inputs(query, train, cfg);
  const auto neighbors =
      neighborhood_pixels(query.lattice, pixel, cfg.search);
  require_contract(!neighbors.empty(), "empty search neighborhood");
  std::vector<double> query_patch = extract_patch(query, pixel, cfg.patch);

  NearestMatch best;
  best.distance_sq = std::numeric_limits<double>::infinity();
  // scanning (u, j) in increasing order and taking strict improvements gives
  // the lexicographically smallest argmin
  for (std::size_t u = 0; u < train.size(); ++u) {
    for (std::size_t j : neighbors) {
      std::vector<double> train_patch =
          extract_patch(train.intensities[u], j, cfg.patch);
      double dist = squared_distance(train_patch, query_patch);
      if (dist < best.distance_sq) {
        best = {train.labels[u].at(j), u, j, dist};
      }
    }
  }
  return best;
}

FactoredVotes wmv_votes_factored(std::size_t pixel, const Image& query,
                                 const TrainingSet& train,
                                 const PointwiseConfig& cfg) {
  return accumulate_votes(vote_terms(pixel, query, train, cfg));
}

VotePair wmv_votes(std::size_t pixel, const Image& query,
                   const TrainingSet& train, const PointwiseConfig& cfg) {
  return wmv_votes_factored(pixel, query, train, cfg).votes();
}

std::int8_t wmv_label(std::size_t pixel, const Image& query,
                      const TrainingSet& train, const PointwiseConfig& cfg) {
  if (std::isinf(cfg.theta)) {
    return nn_label(pixel, query, train, cfg).label;
  }
  return wmv_votes_factored(pixel, query, train, cfg).label();
}

namespace {

// Patch cache for one tile of query pixels: extracts each needed training
// patch once, then replays the naive (u, j) scan against the cache so sums
// accumulate in the same order as the per-pixel path.
class TilePatchCache {
 public:
  TilePatchCache(const TrainingSet& train, const PatchShape& patch,
                 std::size_t lo_pixel, std::size_t hi_pixel,
                 const Neighborhood& search) {
    const Lattice& lattice = train.lattice();
    std::vector<bool> needed(lattice.size(), false);
    for (std::size_t i = lo_pixel; i < hi_pixel; ++i) {
      for (std::size_t j : neighborhood_pixels(lattice, i, search)) {
        needed[j] = true;
      }
    }
    slot_.assign(lattice.size(), SIZE_MAX);
    std::size_t count = 0;
    for (std::size_t j = 0; j < lattice.size(); ++j) {
      if (needed[j]) slot_[j] = count++;
    }
    dim_ = patch.dim();
    patches_.resize(train.size() * count * dim_);
    count_ = count;
    for (std::size_t u = 0; u < train.size(); ++u) {
      for (std::size_t j = 0; j < lattice.size(); ++j) {
        if (slot_[j] == SIZE_MAX) continue;
        std::vector<double> p = extract_patch(train.intensities[u], j, patch);
        std::copy(p.begin(), p.end(),
                  patches_.begin() +
                      static_cast<std::ptrdiff_t>((u * count_ + slot_[j]) * dim_));
      }
    }
  }

  std::span<const double> patch(std::size_t u, std::size_t j) const {
    return {patches_.data() + (u * count_ + slot_[j]) * dim_, dim_};
  }

 private:
  std::vector<std::size_t> slot_;
  std::vector<double> patches_;
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
};

std::int8_t label_from_cache(std::size_t pixel, const Image& query,
                             const TrainingSet& train,
                             const PointwiseConfig& cfg,
                             const TilePatchCache& cache) {
  const auto neighbors =
      neighborhood_pixels(query.lattice, pixel, cfg.search);
  require_contract(!neighbors.empty(), "empty search neighborhood");
  std::vector<double> query_patch = extract_patch(query, pixel, cfg.patch);

  if (std::isinf(cfg.theta)) {
    double best = std::numeric_limits<double>::infinity();
    std::int8_t label = 1;
    for (std::size_t u = 0; u < train.size(); ++u) {
      for (std::size_t j : neighbors) {
        double dist = squared_distance(cache.patch(u, j), query_patch);
        if (dist < best) {
          best = dist;
          label = train.labels[u].at(j);
        }
      }
    }
    return label;
  }

  std::vector<VoteTerm> terms;
  terms.reserve(train.size() * neighbors.size());
  for (std::size_t u = 0; u < train.size(); ++u) {
    for (std::size_t j : neighbors) {
      double dist = squared_distance(cache.patch(u, j), query_patch);
      terms.push_back({cfg.theta * dist, train.labels[u].at(j)});
    }
  }
  return accumulate_votes(terms).label();
}

}  // namespace

LabelImage segment_pointwise(const Image& query, const TrainingSet& train,
                             const PointwiseConfig& cfg, ScanMode mode,
                             int workers) {
  check_inputs(query, train, cfg);
  const Lattice& lattice = query.lattice;
  std::vector<std::int8_t> labels(lattice.size());

  if (mode == ScanMode::kNaive) {
    parallel_for(
        lattice.size(),
        [&](std::size_t i) { labels[i] = wmv_label(i, query, train, cfg); },
        workers);
    return LabelImage(lattice, std::move(labels));
  }

  constexpr std::size_t kTilePixels = 64;
  std::size_t tiles = (lattice.size() + kTilePixels - 1) / kTilePixels;
  parallel_for(
      tiles,
      [&](std::size_t tile) {
        std::size_t lo = tile * kTilePixels;
        std::size_t hi = std::min(lattice.size(), lo + kTilePixels);
        TilePatchCache cache(train, cfg.patch, lo, hi, cfg.search);
        for (std::size_t i = lo; i < hi; ++i) {
          labels[i] = label_from_cache(i, query, train, cfg, cache);
        }
      },
      workers);
  return LabelImage(lattice, std::move(labels));
}

double separation_gap(const TrainingSet& train, const Neighborhood& search,
                      const PatchShape& patch) {
  train.validate();
  const Lattice& lattice = train.lattice();
  std::size_t n = train.size();
  std::size_t dim = patch.dim();

  // all patches up front; the scan below touches each many times
  std::vector<double> patches(n * lattice.size() * dim);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      std::vector<double> p = extract_patch(train.intensities[u], i, patch);
      std::copy(p.begin(), p.end(),
                patches.begin() +
                    static_cast<std::ptrdiff_t>((u * lattice.size() + i) * dim));
    }
  }
  auto patch_at = [&](std::size_t u, std::size_t i) {
    return std::span<const double>(
        patches.data() + (u * lattice.size() + i) * dim, dim);
  };

  std::vector<std::vector<std::size_t>> neighbors(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    neighbors[i] = neighborhood_pixels(lattice, i, search);
  }

  double gap = std::numeric_limits<double>::infinity();
  if (dim == 1) {
    // Scalar patches: the closest cross-label pair between two pixels must
    // be adjacent in value order, so one merge walk over per-pixel sorted
    // values replaces the n x n scan. Same candidate set, same arithmetic,
    // so the result matches the quadratic scan exactly.
    struct Entry {
      double value;
      std::int8_t label;
    };
    std::vector<std::vector<Entry>> sorted(lattice.size());
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      sorted[i].resize(n);
      for (std::size_t u = 0; u < n; ++u) {
        sorted[i][u] = {patches[(u * lattice.size() + i) * dim],
                        train.labels[u].at(i)};
      }
      std::sort(sorted[i].begin(), sorted[i].end(),
                [](const Entry& a, const Entry& b) { return a.value < b.value; });
    }
    constexpr double kUnset = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      const std::vector<Entry>& a = sorted[i];
      for (std::size_t j : neighbors[i]) {
        const std::vector<Entry>& b = sorted[j];
        // last value seen from each side, per label
        double last_a[2] = {kUnset, kUnset};
        double last_b[2] = {kUnset, kUnset};
        std::size_t ia = 0, ib = 0;
        while (ia < n || ib < n) {
          bool take_a = ib == n || (ia < n && a[ia].value <= b[ib].value);
          const Entry& e = take_a ? a[ia++] : b[ib++];
          std::size_t mine = e.label > 0 ? 1 : 0;
          double other = take_a ? last_b[1 - mine] : last_a[1 - mine];
          if (other != kUnset) {
            double diff = e.value - other;
            gap = std::min(gap, diff * diff);
          }
          (take_a ? last_a : last_b)[mine] = e.value;
        }
      }
    }
    return gap;
  }

  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t i = 0; i < lattice.size(); ++i) {
        std::int8_t label_u = train.labels[u].at(i);
        auto pu = patch_at(u, i);
        for (std::size_t j : neighbors[i]) {
          if (label_u == train.labels[v].at(j)) continue;
          double dist = squared_distance(pu, patch_at(v, j));
          gap = std::min(gap, dist);
        }
      }
    }
  }
  return gap;
}

}  // namespace pseg
