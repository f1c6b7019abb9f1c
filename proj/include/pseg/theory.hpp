#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pseg/model.hpp"
#include "pseg/pointwise.hpp"

#include "json.hpp"

namespace pseg {

// Inputs to the expected-pixel-error bound
//   |I| * C_max * exp(-n * rho_min / 8)  +  |N| * n * exp(-G / (16 sigma^2)).
struct BoundParams {
  std::size_t lattice_size = 0;       // |I|
  std::size_t component_count_max = 0;  // C_max
  std::size_t training_size = 0;      // n
  double rho_min = 0.0;
  std::size_t neighborhood_size = 0;  // |N|
  double gap = 0.0;                   // G; +infinity allowed
  double sigma = 0.0;
};

struct ErrorBound {
  double value = 0.0;
  double coverage_term = 0.0;  // decays as training grows
  double outlier_term = 0.0;   // grows with training, decays with the gap
  bool vacuous = false;        // value > 1 proves nothing
};

ErrorBound error_bound(const BoundParams& params);

// Smallest n making the coverage term <= eps/2:
// n >= (8 / rho_min) * ln(2 |I| C_max / eps).
std::size_t required_training_size(double eps, std::size_t lattice_size,
                                   std::size_t component_count_max,
                                   double rho_min);

// Gap threshold making the outlier term exactly eps/2:
// G = 16 sigma^2 * ln(2 |N| n / eps).
double required_gap(double eps, std::size_t neighborhood_size,
                    std::size_t training_size, double sigma);

enum class PointwiseAlgorithm { kNearestNeighbor, kWeightedMajorityVote };

struct MonteCarloConfig {
  PointwiseAlgorithm algorithm = PointwiseAlgorithm::kWeightedMajorityVote;
  std::size_t training_size = 1;
  double theta = kThetaInfinity;  // vote decay; ignored for nearest neighbor
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  // Search neighborhood N; defaults to the model's reference neighborhood N*.
  std::optional<Neighborhood> search;
  int workers = 0;
};

// One Monte Carlo run: per-trial pixel error rates and realized separation
// gaps, the aggregate binomial confidence interval over all pixel decisions,
// and the bound evaluated at the minimum realized gap.
struct TrialReport {
  std::string algorithm;
  std::size_t trials = 0;
  std::size_t training_size = 0;
  double theta = kThetaInfinity;
  double sigma = 0.0;
  std::size_t lattice_size = 0;
  std::size_t component_count_max = 0;
  double rho_min = 0.0;
  std::size_t neighborhood_size = 0;

  std::vector<double> error_rates;
  std::vector<double> gaps;
  double mean_error = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double min_gap = 0.0;
  ErrorBound bound;
};

// Runs `trials` independent rounds: fresh training set of size n, fresh test
// pair, segment, score. Refuses models that violate the jigsaw condition or
// search neighborhoods that do not contain the model's reference
// neighborhood (the bound's hypotheses would not hold).
TrialReport monte_carlo_error(const PointwiseModel& model,
                              const MonteCarloConfig& cfg);

// 95% binomial confidence interval for `successes` out of `count`: normal
// approximation, switching to the exact Clopper-Pearson endpoint when the
// empirical rate sits on 0 or 1.
std::pair<double, double> binomial_confidence(std::size_t successes,
                                              std::size_t count);

// Shortest-round-trip decimal rendering; infinities become "inf"/"-inf".
// Used for CSV cells so output bytes are platform-stable.
std::string format_double(double v);

nlohmann::json trial_report_json(const TrialReport& report);
std::string trial_report_csv_header();
std::string trial_report_csv_row(const TrialReport& report);

}  // namespace pseg
