#include "pseg/theory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "pseg/errors.hpp"
#include "pseg/parallel.hpp"
#include "pseg/pointwise.hpp"
#include "pseg/random.hpp"

namespace pseg {

namespace {

constexpr double kZ95 = 1.96;  // normal-approximation quantile

void check_params(const BoundParams& p) {
  require_contract(p.lattice_size >= 1, "bound: lattice size must be >= 1");
  require_contract(p.component_count_max >= 1, "bound: C_max must be >= 1");
  require_contract(p.training_size >= 1, "bound: training size must be >= 1");
  require_contract(p.rho_min > 0.0 && p.rho_min <= 1.0,
                   "bound: rho_min must be in (0, 1]");
  require_contract(p.neighborhood_size >= 1,
                   "bound: neighborhood size must be >= 1");
  require_contract(p.gap >= 0.0, "bound: gap must be >= 0");
  require_contract(p.sigma > 0.0, "bound: sigma must be > 0");
}

}  // namespace

ErrorBound error_bound(const BoundParams& p) {
  check_params(p);
  ErrorBound b;
  b.coverage_term = static_cast<double>(p.lattice_size) *
                    static_cast<double>(p.component_count_max) *
                    std::exp(-static_cast<double>(p.training_size) * p.rho_min / 8.0);
  // exp(-inf) = 0, so an infinite gap cleanly removes the outlier term.
  b.outlier_term = static_cast<double>(p.neighborhood_size) *
                   static_cast<double>(p.training_size) *
                   std::exp(-p.gap / (16.0 * p.sigma * p.sigma));
  b.value = b.coverage_term + b.outlier_term;
  b.vacuous = b.value > 1.0;
  return b;
}

std::size_t required_training_size(double eps, std::size_t lattice_size,
                                   std::size_t component_count_max,
                                   double rho_min) {
  require_contract(eps > 0.0 && eps < 1.0, "required n: eps must be in (0, 1)");
  require_contract(rho_min > 0.0 && rho_min <= 1.0,
                   "required n: rho_min must be in (0, 1]");
  require_contract(lattice_size >= 1 && component_count_max >= 1,
                   "required n: sizes must be >= 1");
  double n = (8.0 / rho_min) *
             std::log(2.0 * static_cast<double>(lattice_size) *
                      static_cast<double>(component_count_max) / eps);
  return static_cast<std::size_t>(std::ceil(n));
}

double required_gap(double eps, std::size_t neighborhood_size,
                    std::size_t training_size, double sigma) {
  require_contract(eps > 0.0 && eps < 1.0, "required gap: eps must be in (0, 1)");
  require_contract(neighborhood_size >= 1 && training_size >= 1,
                   "required gap: sizes must be >= 1");
  require_contract(sigma > 0.0, "required gap: sigma must be > 0");
  return 16.0 * sigma * sigma *
         std::log(2.0 * static_cast<double>(neighborhood_size) *
                  static_cast<double>(training_size) / eps);
}

std::pair<double, double> binomial_confidence(std::size_t successes,
                                              std::size_t count) {
  require_contract(count >= 1, "confidence interval: empty sample");
  require_contract(successes <= count, "confidence interval: successes > count");
  double n = static_cast<double>(count);
  double p = static_cast<double>(successes) / n;
  if (successes == 0) {
    // Exact Clopper-Pearson upper endpoint at zero observed successes.
    return {0.0, 1.0 - std::pow(0.025, 1.0 / n)};
  }
  if (successes == count) {
    return {std::pow(0.025, 1.0 / n), 1.0};
  }
  double half = kZ95 * std::sqrt(p * (1.0 - p) / n);
  return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

TrialReport monte_carlo_error(const PointwiseModel& model,
                              const MonteCarloConfig& cfg) {
  require_contract(cfg.trials >= 1, "monte carlo: need >= 1 trial");
  require_contract(cfg.training_size >= 1, "monte carlo: need >= 1 training pair");
  JigsawReport jigsaw = verify_jigsaw(model);
  require_contract(jigsaw.holds,
                   "monte carlo: model violates the jigsaw condition");

  const Lattice& lattice = model.lattice();
  Neighborhood search = cfg.search.value_or(model.jigsaw_neighborhood());
  // The bound requires N(i) to contain the reference neighborhood N*(i).
  std::size_t realized_n = 0;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    std::vector<std::size_t> big = neighborhood_pixels(lattice, i, search);
    std::vector<std::size_t> ref =
        neighborhood_pixels(lattice, i, model.jigsaw_neighborhood());
    std::sort(big.begin(), big.end());
    std::sort(ref.begin(), ref.end());
    require_contract(std::includes(big.begin(), big.end(), ref.begin(), ref.end()),
                     "monte carlo: search neighborhood does not cover N*");
    realized_n = std::max(realized_n, big.size());
  }

  PointwiseConfig seg_cfg;
  seg_cfg.search = search;
  seg_cfg.patch = model.patch();
  seg_cfg.theta = cfg.algorithm == PointwiseAlgorithm::kNearestNeighbor
                      ? kThetaInfinity
                      : cfg.theta;

  RandomStream root(cfg.seed);
  std::vector<std::size_t> mistakes(cfg.trials, 0);
  std::vector<double> gaps(cfg.trials, 0.0);
  parallel_for(cfg.trials, [&](std::size_t t) {
    RandomStream stream = root.split(t);
    TrainingSet train = sample_training_set(model, cfg.training_size, stream);
    auto [test_image, test_labels] = sample_pointwise_pair(model, stream);
    LabelImage out = segment_pointwise(test_image, train, seg_cfg);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      if (out.labels[i] != test_labels.labels[i]) ++wrong;
    }
    mistakes[t] = wrong;
    gaps[t] = separation_gap(train, search, model.patch());
  }, cfg.workers);

  TrialReport report;
  report.algorithm = cfg.algorithm == PointwiseAlgorithm::kNearestNeighbor
                         ? "nn"
                         : "wmv";
  report.trials = cfg.trials;
  report.training_size = cfg.training_size;
  report.theta = seg_cfg.theta;
  report.sigma = model.noise().sigma;
  report.lattice_size = lattice.size();
  report.component_count_max = model.component_count_max();
  report.rho_min = model.rho_min();
  report.neighborhood_size = realized_n;
  report.gaps = gaps;

  std::size_t total_wrong = 0;
  report.error_rates.resize(cfg.trials);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    total_wrong += mistakes[t];
    report.error_rates[t] =
        static_cast<double>(mistakes[t]) / static_cast<double>(lattice.size());
  }
  std::size_t decisions = cfg.trials * lattice.size();
  report.mean_error =
      static_cast<double>(total_wrong) / static_cast<double>(decisions);
  std::tie(report.ci_lower, report.ci_upper) =
      binomial_confidence(total_wrong, decisions);
  report.min_gap = *std::min_element(gaps.begin(), gaps.end());

  BoundParams bp;
  bp.lattice_size = lattice.size();
  bp.component_count_max = report.component_count_max;
  bp.training_size = cfg.training_size;
  bp.rho_min = report.rho_min;
  bp.neighborhood_size = realized_n;
  bp.gap = report.min_gap;
  bp.sigma = report.sigma;
  if (report.sigma == 0.0) {
    // Noiseless degenerate model: evaluate the bound in the sigma -> 0
    // limit, where the outlier term vanishes for any positive gap and is
    // |N| n for a zero gap. The doctored parameters below reproduce
    // exactly those limit values.
    bp.sigma = 1.0;
    bp.gap = report.min_gap > 0.0 ? std::numeric_limits<double>::infinity()
                                  : 0.0;
  }
  report.bound = error_bound(bp);
  return report;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

// JSON has no infinity literal; infinite gaps serialize as null.
nlohmann::json json_number(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

}  // namespace

nlohmann::json trial_report_json(const TrialReport& r) {
  nlohmann::json gaps = nlohmann::json::array();
  for (double g : r.gaps) gaps.push_back(json_number(g));
  return nlohmann::json{
      {"algorithm", r.algorithm},
      {"trials", r.trials},
      {"training_size", r.training_size},
      {"theta", json_number(r.theta)},
      {"sigma", r.sigma},
      {"lattice_size", r.lattice_size},
      {"component_count_max", r.component_count_max},
      {"rho_min", r.rho_min},
      {"neighborhood_size", r.neighborhood_size},
      {"error_rates", r.error_rates},
      {"gaps", gaps},
      {"mean_error", r.mean_error},
      {"ci_lower", r.ci_lower},
      {"ci_upper", r.ci_upper},
      {"min_gap", json_number(r.min_gap)},
      {"bound",
       {{"value", r.bound.value},
        {"coverage_term", r.bound.coverage_term},
        {"outlier_term", r.bound.outlier_term},
        {"vacuous", r.bound.vacuous}}},
  };
}

std::string trial_report_csv_header() {
  return "algorithm,trials,training_size,theta,sigma,lattice_size,"
         "component_count_max,rho_min,neighborhood_size,mean_error,ci_lower,"
         "ci_upper,min_gap,bound_value,coverage_term,outlier_term,vacuous";
}

std::string trial_report_csv_row(const TrialReport& r) {
  std::ostringstream out;
  out << r.algorithm << ',' << r.trials << ',' << r.training_size << ','
      << format_double(r.theta) << ',' << format_double(r.sigma) << ','
      << r.lattice_size << ',' << r.component_count_max << ','
      << format_double(r.rho_min) << ',' << r.neighborhood_size << ','
      << format_double(r.mean_error) << ',' << format_double(r.ci_lower) << ','
      << format_double(r.ci_upper) << ',' << format_double(r.min_gap) << ','
      << format_double(r.bound.value) << ','
      << format_double(r.bound.coverage_term) << ','
      << format_double(r.bound.outlier_term) << ','
      << (r.bound.vacuous ? 1 : 0);
  return out.str();
}

}  // namespace pseg
