#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pseg/lattice.hpp"
#include "pseg/model.hpp"

namespace pseg {

// theta = infinity selects nearest-neighbor labeling.
inline constexpr double kThetaInfinity = std::numeric_limits<double>::infinity();

// theta = 1/(8 sigma^2), the scale the error bound analysis uses.
double theta_for_sigma(double sigma);

struct PointwiseConfig {
  Neighborhood search = Neighborhood::box(1);
  PatchShape patch = PatchShape::single_pixel();
  double theta = kThetaInfinity;
};

struct NearestMatch {
  std::int8_t label = 1;
  std::size_t train_index = 0;  // u*
  std::size_t train_pixel = 0;  // j*
  double distance_sq = 0.0;
};

struct VotePair {
  double v_plus = 0.0;
  double v_minus = 0.0;
};

// One weighted-vote term: vote = exp(-exponent) toward `label`, with
// exponent = theta * ||Y_u[j] - Y[i]||^2. Terms are listed u-major, then j in
// row-major order, which fixes the accumulation order.
struct VoteTerm {
  double exponent = 0.0;
  std::int8_t label = 1;
};

// Votes in factored form, V_l = exp(-min_exponent) * scaled_l. Factoring out
// the smallest exponent keeps large theta from underflowing every term; label
// comparisons only need the scaled sums.
struct FactoredVotes {
  double min_exponent = 0.0;
  double scaled_plus = 0.0;
  double scaled_minus = 0.0;

  VotePair votes() const;
  std::int8_t label() const { return scaled_plus >= scaled_minus ? 1 : -1; }
};

std::vector<VoteTerm> vote_terms(std::size_t pixel, const Image& query,
                                 const TrainingSet& train,
                                 const PointwiseConfig& cfg);

FactoredVotes accumulate_votes(std::span<const VoteTerm> terms);

// Label of the training patch closest to the query patch; ties broken by
// smallest (train index, train pixel).
NearestMatch nn_label(std::size_t pixel, const Image& query,
                      const TrainingSet& train, const PointwiseConfig& cfg);

FactoredVotes wmv_votes_factored(std::size_t pixel, const Image& query,
                                 const TrainingSet& train,
                                 const PointwiseConfig& cfg);
VotePair wmv_votes(std::size_t pixel, const Image& query,
                   const TrainingSet& train, const PointwiseConfig& cfg);

// Higher-vote label; ties go to +1. theta = infinity delegates to nn_label.
std::int8_t wmv_label(std::size_t pixel, const Image& query,
                      const TrainingSet& train, const PointwiseConfig& cfg);

// kBlocked amortizes training-patch extraction over tiles of query pixels;
// it is bit-identical to the naive per-pixel scan.
enum class ScanMode { kNaive, kBlocked };

// Labels every pixel independently (weighted votes, or nearest neighbor when
// theta is infinite). The result does not depend on pixel visitation order or
// worker count.
LabelImage segment_pointwise(const Image& query, const TrainingSet& train,
                             const PointwiseConfig& cfg,
                             ScanMode mode = ScanMode::kBlocked,
                             int workers = 0);

// Minimum squared distance between training patches carrying different
// labels: min over u, v, i, j in N(i) with L_u(i) != L_v(j) of
// ||Y_u[i] - Y_v[j]||^2. Returns +infinity when no cross-label pair exists.
double separation_gap(const TrainingSet& train, const Neighborhood& search,
                      const PatchShape& patch);

}  // namespace pseg
