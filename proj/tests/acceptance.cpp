// Acceptance gate: runs the ten release criteria end to end and prints one
// [PASS]/[FAIL] line each. Exits nonzero if anything fails. Criteria with a
// stated runtime budget fail when they blow it.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pseg/errors.hpp"
#include "pseg/experiment.hpp"
#include "pseg/image_io.hpp"
#include "pseg/lattice.hpp"
#include "pseg/metrics.hpp"
#include "pseg/model.hpp"
#include "pseg/model_io.hpp"
#include "pseg/multipoint.hpp"
#include "pseg/pointwise.hpp"
#include "pseg/random.hpp"
#include "pseg/theory.hpp"

#include "oracles.hpp"

namespace {

using namespace pseg;
namespace fs = std::filesystem;

struct Check {
  bool ok = true;
  std::string detail;  // failure reason, or a short success note

  void expect(bool condition, const std::string& why) {
    if (!condition && ok) {
      ok = false;
      detail = why;
    }
  }
  void note(const std::string& text) {
    if (ok) detail = text;
  }
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

MixtureComponent component(double weight, double mean, int label) {
  MixtureComponent c;
  c.weight = weight;
  c.mean = {mean};
  c.label = static_cast<std::int8_t>(label);
  return c;
}

// ---- 1. library vs naive double loop -------------------------------------

Check oracle_equivalence() {
  Check c;
  RandomStream root(2024);
  for (int k = 0; k < 50 && c.ok; ++k) {
    RandomStream rng = root.split(static_cast<std::uint64_t>(k));
    int rows = 2 + static_cast<int>(rng.next_u64() % 7);
    int cols = k % 3 == 0 ? 0 : 2 + static_cast<int>(rng.next_u64() % 7);
    std::size_t n = 1 + rng.next_u64() % 5;
    oracle::Instance inst = oracle::random_instance(rng, rows, cols, n);
    int rank = inst.query.lattice.rank();

    PointwiseConfig cfg;
    cfg.search = Neighborhood::box(1 + static_cast<int>(rng.next_u64() % 2));
    cfg.patch = k % 2 == 0 ? PatchShape::single_pixel()
                           : PatchShape::centered_box(rank, 1);
    ScanMode mode = k % 2 == 0 ? ScanMode::kNaive : ScanMode::kBlocked;

    cfg.theta = kThetaInfinity;
    c.expect(segment_pointwise(inst.query, inst.train, cfg, mode) ==
                 oracle::segment(inst.query, inst.train, cfg.search, cfg.patch,
                                 kThetaInfinity),
             "nn disagreed with the reference on instance " + std::to_string(k));
    cfg.theta = 0.7;
    c.expect(segment_pointwise(inst.query, inst.train, cfg, mode) ==
                 oracle::segment(inst.query, inst.train, cfg.search, cfg.patch,
                                 0.7),
             "wmv disagreed with the reference on instance " + std::to_string(k));
  }
  c.note("50 instances, nn and wmv");
  return c;
}

// ---- 2. huge vote decay collapses to nearest neighbor ---------------------

Check nn_limit() {
  Check c;
  RandomStream root(4099);
  for (int k = 0; k < 100 && c.ok; ++k) {
    RandomStream rng = root.split(static_cast<std::uint64_t>(k));
    int rows = 2 + static_cast<int>(rng.next_u64() % 7);
    int cols = k % 4 == 0 ? 0 : 2 + static_cast<int>(rng.next_u64() % 7);
    std::size_t n = 1 + rng.next_u64() % 5;
    oracle::Instance inst = oracle::random_instance(rng, rows, cols, n);
    int rank = inst.query.lattice.rank();

    PointwiseConfig cfg;
    cfg.search = Neighborhood::box(1 + static_cast<int>(rng.next_u64() % 2));
    cfg.patch = k % 2 == 0 ? PatchShape::single_pixel()
                           : PatchShape::centered_box(rank, 1);
    cfg.theta = 1e9;
    LabelImage sharp = segment_pointwise(inst.query, inst.train, cfg);
    cfg.theta = kThetaInfinity;
    LabelImage nn = segment_pointwise(inst.query, inst.train, cfg);
    c.expect(sharp == nn,
             "theta=1e9 differed from nn on instance " + std::to_string(k));
  }
  c.note("100 instances");
  return c;
}

// ---- 3. Monte Carlo stays under the error bound ---------------------------

Check bound_dominance() {
  Check c;
  struct Setup {
    const char* name;
    PointwiseModel model;
    double sigma;
  };
  NoiseSpec quarter{NoiseFamily::kGaussian, 0.25};
  NoiseSpec half{NoiseFamily::kGaussian, 0.5};

  // Shared two-component tables with well-separated means, plus one
  // per-block-table variant. Weights fix rho_min.
  std::vector<Setup> setups;
  setups.push_back(
      {"balanced-0.25",
       build_block_model(Lattice({8, 8}), 2,
                         {{component(0.5, 0.0, -1), component(0.5, 10.0, 1)}},
                         quarter),
       0.25});
  setups.push_back(
      {"skewed-0.5",
       build_block_model(Lattice({8, 8}), 2,
                         {{component(0.25, 0.0, -1), component(0.75, 20.0, 1)}},
                         half),
       0.5});
  std::vector<std::vector<MixtureComponent>> per_block;
  for (int b = 0; b < 4; ++b) {
    per_block.push_back(
        {component(0.5, b, -1), component(0.5, 20.0 + b, 1)});
  }
  setups.push_back(
      {"per-block-0.5",
       build_block_model(Lattice({6, 6}), 3, per_block, half), 0.5});

  double worst_margin = 1.0;
  for (const Setup& s : setups) {
    if (!c.ok) break;
    c.expect(verify_jigsaw(s.model).holds,
             std::string(s.name) + ": model failed its own hypothesis check");
    if (!c.ok) break;
    std::size_t n = required_training_size(0.1, s.model.lattice().size(),
                                           s.model.component_count_max(),
                                           s.model.rho_min());
    for (PointwiseAlgorithm alg : {PointwiseAlgorithm::kNearestNeighbor,
                                   PointwiseAlgorithm::kWeightedMajorityVote}) {
      MonteCarloConfig mc;
      mc.algorithm = alg;
      mc.training_size = n;
      mc.theta = theta_for_sigma(s.sigma);
      mc.trials = 200;
      mc.seed = 31;
      TrialReport report = monte_carlo_error(s.model, mc);
      const char* alg_name =
          alg == PointwiseAlgorithm::kNearestNeighbor ? "nn" : "wmv";
      c.expect(report.bound.value <= 0.2,
               std::string(s.name) + " " + alg_name +
                   fmt(": bound %.4f exceeds 0.2", report.bound.value));
      c.expect(report.ci_upper <= report.bound.value,
               std::string(s.name) + " " + alg_name +
                   fmt(": ci upper %.4f above bound %.4f", report.ci_upper,
                       report.bound.value));
      worst_margin =
          std::min(worst_margin, report.bound.value - report.ci_upper);
    }
  }
  c.note(fmt("3 configurations x {nn,wmv}, slimmest margin %.4f",
             worst_margin));
  return c;
}

// ---- 4. solved forms hit their target terms --------------------------------

Check corollary_identities() {
  Check c;
  for (double eps : {0.01, 0.1, 0.5}) {
    for (std::size_t lattice_size : {16u, 64u, 256u}) {
      for (std::size_t cmax : {1u, 2u, 4u}) {
        for (double rho : {0.1, 0.5, 1.0}) {
          std::size_t n = required_training_size(eps, lattice_size, cmax, rho);
          double term1 = static_cast<double>(lattice_size) *
                         static_cast<double>(cmax) *
                         std::exp(-static_cast<double>(n) * rho / 8.0);
          c.expect(term1 <= eps / 2.0 * (1.0 + 1e-12),
                   fmt("coverage term %.3e above eps/2 = %.3e", term1,
                       eps / 2.0));
        }
      }
    }
    for (std::size_t nsize : {9u, 25u}) {
      for (std::size_t n : {10u, 314u}) {
        for (double sigma : {0.25, 1.0}) {
          double gap = required_gap(eps, nsize, n, sigma);
          double term2 = static_cast<double>(nsize) * static_cast<double>(n) *
                         std::exp(-gap / (16.0 * sigma * sigma));
          c.expect(std::abs(term2 - eps / 2.0) <= 1e-9,
                   fmt("outlier term %.12f not eps/2 = %.12f", term2,
                       eps / 2.0));
        }
      }
    }
  }
  c.note("eps in {0.01, 0.1, 0.5} over 81 + 24 parameter tuples");
  return c;
}

// ---- 5. analytic gradients match finite differences ------------------------

Check gradient_checks() {
  Check c;
  RandomStream root(555);
  Lattice grid({4, 4});
  const double h = 1e-5;

  auto random_relaxed = [&](RandomStream& rng) {
    std::vector<double> v(grid.size());
    for (double& x : v) x = 0.9 * (2.0 * rng.uniform01() - 1.0);
    return RelaxedLabelImage(grid, v);
  };
  auto random_labels = [&](RandomStream& rng) {
    std::vector<std::int8_t> l(grid.size());
    for (auto& x : l) x = rng.uniform01() < 0.5 ? -1 : 1;
    return LabelImage(grid, l);
  };

  for (int k = 0; k < 20 && c.ok; ++k) {
    RandomStream rng = root.split(static_cast<std::uint64_t>(k));
    RelaxedLabelImage a = random_relaxed(rng);
    RelaxedLabelImage b = random_relaxed(rng);
    std::vector<double> grad = soft_dice_grad(a, b);
    for (std::size_t i = 0; i < grid.size() && c.ok; ++i) {
      double orig = a.values[i];
      a.values[i] = orig + h;
      double up = soft_dice(a, b);
      a.values[i] = orig - h;
      double down = soft_dice(a, b);
      a.values[i] = orig;
      double fd = (up - down) / (2.0 * h);
      c.expect(std::abs(grad[i] - fd) <=
                   1e-5 * std::max(1.0, std::abs(grad[i])),
               fmt("overlap gradient off by %.2e at instance %g",
                   std::abs(grad[i] - fd), k));
    }
  }
  for (int k = 0; k < 20 && c.ok; ++k) {
    RandomStream rng = root.split(1000 + static_cast<std::uint64_t>(k));
    RelaxedLabelImage labels = random_relaxed(rng);
    std::vector<LabelImage> train = {random_labels(rng), random_labels(rng),
                                     random_labels(rng)};
    double alpha = 1.5;
    std::vector<double> grad = label_prior_grad(labels, train, alpha);
    for (std::size_t i = 0; i < grid.size() && c.ok; ++i) {
      double orig = labels.values[i];
      labels.values[i] = orig + h;
      double up = label_prior_score(labels, train, alpha,
                                    LabelDistance::kSoftDiceComplement);
      labels.values[i] = orig - h;
      double down = label_prior_score(labels, train, alpha,
                                      LabelDistance::kSoftDiceComplement);
      labels.values[i] = orig;
      double fd = (up - down) / (2.0 * h);
      c.expect(std::abs(grad[i] - fd) <=
                   1e-5 * std::max(1.0, std::abs(grad[i])),
               fmt("prior gradient off by %.2e at instance %g",
                   std::abs(grad[i] - fd), k));
    }
  }
  c.note("20 + 20 random 4x4 instances, h = 1e-5");
  return c;
}

// ---- 6. solver reductions --------------------------------------------------

Check admm_reductions() {
  Check c;
  RandomStream root(808);

  // (a) alpha = beta = 0 with single-pixel label patches and frozen duals is
  // exactly weighted majority voting with theta = gamma.
  for (int k = 0; k < 20 && c.ok; ++k) {
    RandomStream rng = root.split(static_cast<std::uint64_t>(k));
    int rows = 3 + static_cast<int>(rng.next_u64() % 3);
    int cols = k % 3 == 0 ? 0 : 3 + static_cast<int>(rng.next_u64() % 3);
    oracle::Instance inst =
        oracle::random_instance(rng, rows, cols, 2 + rng.next_u64() % 3);
    int rank = inst.query.lattice.rank();
    double theta = k % 2 == 0 ? 0.5 : 1.25;

    AdmmConfig acfg;
    acfg.alpha = 0.0;
    acfg.beta = 0.0;
    acfg.gamma = theta;
    acfg.intensity_patch = k % 2 == 0 ? PatchShape::single_pixel()
                                      : PatchShape::centered_box(rank, 1);
    acfg.label_patch = PatchShape::single_pixel();
    acfg.search = Neighborhood::box(1);
    acfg.block_side = 1;
    acfg.freeze_duals = true;
    acfg.max_outer_iterations = 5;
    acfg.init = k % 2 == 0 ? AdmmConfig::Init::kWeightedMajority
                           : AdmmConfig::Init::kColdStart;
    AdmmResult res = admm_segment(inst.query, inst.train, acfg);

    PointwiseConfig pcfg;
    pcfg.search = acfg.search;
    pcfg.patch = acfg.intensity_patch;
    pcfg.theta = theta;
    c.expect(res.diagnostics.converged && res.diagnostics.iterations == 1,
             "decoupled solver took more than one pass on instance " +
                 std::to_string(k));
    c.expect(res.labels == segment_pointwise(inst.query, inst.train, pcfg),
             "decoupled solver differed from wmv on instance " +
                 std::to_string(k));
  }

  // (b) with alpha = 0 the averaging merge and the projected-gradient merge
  // run to convergence agree.
  Lattice grid({4, 4});
  PatchShape label_patch = PatchShape::centered_box(2, 1);
  for (int k = 0; k < 20 && c.ok; ++k) {
    RandomStream rng = root.split(500 + static_cast<std::uint64_t>(k));
    AdmmConfig mcfg;
    mcfg.alpha = 0.0;
    mcfg.beta = k % 3 == 0 ? 0.4 : (k % 3 == 1 ? 1.0 : 1.7);
    mcfg.label_patch = label_patch;
    mcfg.step_size = 0.1;

    AdmmState state;
    std::vector<double> relaxed(grid.size());
    for (double& v : relaxed) v = 0.9 * (2.0 * rng.uniform01() - 1.0);
    state.relaxed = RelaxedLabelImage(grid, relaxed);
    state.local_estimates.resize(grid.size());
    state.duals.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      state.local_estimates[i].resize(label_patch.dim());
      state.duals[i].resize(label_patch.dim());
      for (std::size_t t = 0; t < label_patch.dim(); ++t) {
        state.local_estimates[i][t] = rng.uniform01() < 0.5 ? -1 : 1;
        state.duals[i][t] = 0.3 * rng.gaussian();
      }
    }

    AdmmState closed = state;
    merge_closed_form(closed, mcfg);
    AdmmState gradient = state;
    merge_projected_gradient(gradient, {}, mcfg, 4000);
    double diff = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      diff = std::max(diff, std::abs(closed.relaxed.values[i] -
                                     gradient.relaxed.values[i]));
    }
    c.expect(diff <= 1e-8,
             fmt("merge strategies %.2e apart on instance %g", diff, k));
  }
  c.note("20 decoupling + 20 merge-agreement instances");
  return c;
}

// ---- 7. algorithm ordering on the synthetic suite ---------------------------

Check qualitative_trend() {
  Check c;
  Lattice grid({16, 16});
  auto source = [&](auto&& inside) {
    std::vector<std::int8_t> labels(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      Coord p = grid.unflatten(i);
      labels[i] = inside(p[0], p[1]) ? 1 : -1;
    }
    LatentSource s;
    s.probability = 1.0 / 3.0;
    s.labels = LabelImage(grid, labels);
    return s;
  };
  std::vector<LatentSource> sources;
  sources.push_back(source([](int, int col) { return col < 8; }));
  sources.push_back(source([](int row, int) { return row < 8; }));
  sources.push_back(source(
      [](int row, int col) { return row >= 4 && row < 12 && col >= 4 && col < 12; }));

  // exp(-alpha)/(1+exp(-alpha)) = 0.05 per-pixel flips.
  LatentSourceModel model(std::move(sources), std::log(19.0),
                          LabelDistance::kHamming, PatchShape::single_pixel(),
                          1.0, 0.0, NoiseSpec{NoiseFamily::kGaussian, 0.5});

  ExperimentConfig cfg(model);
  cfg.n_train = 20;
  cfg.n_trials = 20;
  cfg.algorithms = {"mv", "nn", "wmv", "admm"};
  cfg.seed = 77;
  cfg.params.patch_radius = 1;
  cfg.params.search_radius = 2;
  cfg.params.label_patch_radius = 1;
  cfg.params.block_side = 4;
  cfg.params.beta = 0.5;
  cfg.params.max_outer = 30;
  ExperimentResult result = run_experiment(cfg);

  auto mean_dice = [&](const char* alg) {
    return result.summary["metrics"][alg]["dice"]["mean"].get<double>();
  };
  for (const char* alg : {"mv", "nn", "wmv", "admm"}) {
    c.expect(result.summary["metrics"][alg]["failures"] == 0,
             std::string(alg) + " had failing trials");
  }
  if (!c.ok) return c;
  double mv = mean_dice("mv"), nn = mean_dice("nn"), wmv = mean_dice("wmv"),
         admm = mean_dice("admm");
  c.expect(nn >= mv, fmt("nn %.4f below mv %.4f", nn, mv));
  c.expect(wmv >= nn, fmt("wmv %.4f below nn %.4f", wmv, nn));
  c.expect(admm >= wmv, fmt("admm %.4f below wmv %.4f", admm, wmv));
  c.expect(admm - mv >= 0.02,
           fmt("admm %.4f only %.4f ahead of mv", admm, admm - mv));
  c.note(fmt("dice mv %.4f <= ", mv) + fmt("nn %.4f <= ", nn) +
         fmt("wmv %.4f <= ", wmv) + fmt("admm %.4f", admm));
  return c;
}

// ---- 8. noiseless instances are recovered exactly ---------------------------

Check noiseless_recovery() {
  Check c;
  PointwiseModel pw = build_block_model(
      Lattice({6, 6}), 2, {{component(0.5, 0.0, -1), component(0.5, 10.0, 1)}},
      NoiseSpec{NoiseFamily::kGaussian, 0.0});

  for (std::uint64_t seed = 1; seed <= 5 && c.ok; ++seed) {
    RandomStream rng(seed);
    TrainingSet train = sample_training_set(pw, 4, rng);
    auto [query, truth] = sample_pointwise_pair(pw, rng);

    PointwiseConfig pcfg;
    pcfg.search = Neighborhood::box(2);
    pcfg.patch = PatchShape::single_pixel();
    pcfg.theta = kThetaInfinity;
    c.expect(pixel_error_rate(segment_pointwise(query, train, pcfg), truth) ==
                 0.0,
             "nn missed on seed " + std::to_string(seed));
    pcfg.theta = 1.0;
    c.expect(pixel_error_rate(segment_pointwise(query, train, pcfg), truth) ==
                 0.0,
             "wmv missed on seed " + std::to_string(seed));

    AdmmConfig acfg;
    acfg.gamma = 1.0;
    acfg.intensity_patch = PatchShape::single_pixel();
    acfg.label_patch = PatchShape::single_pixel();
    acfg.search = Neighborhood::box(2);
    acfg.block_side = 2;
    AdmmResult res = admm_segment(query, train, acfg);
    c.expect(res.diagnostics.converged &&
                 pixel_error_rate(res.labels, truth) == 0.0,
             "admm missed on seed " + std::to_string(seed));
  }
  c.note("nn, wmv, admm over 5 seeds");
  return c;
}

// ---- 9. bit-identical reruns ------------------------------------------------

Check determinism() {
  Check c;
  PointwiseModel pw = build_block_model(
      Lattice({6, 6}), 2, {{component(0.5, 0.0, -1), component(0.5, 8.0, 1)}},
      NoiseSpec{NoiseFamily::kGaussian, 0.25});

  // Sampler: same seed, same draws.
  RandomStream r1(42), r2(42);
  TrainingSet t1 = sample_training_set(pw, 3, r1);
  TrainingSet t2 = sample_training_set(pw, 3, r2);
  for (std::size_t u = 0; u < 3; ++u) {
    c.expect(t1.intensities[u].values == t2.intensities[u].values &&
                 t1.labels[u] == t2.labels[u],
             "sampler drifted between identical seeds");
  }

  // Segmenters: worker count must not matter.
  RandomStream r3(43);
  auto [query, truth] = sample_pointwise_pair(pw, r3);
  PointwiseConfig pcfg;
  pcfg.search = Neighborhood::box(2);
  pcfg.patch = PatchShape::single_pixel();
  pcfg.theta = 2.0;
  c.expect(segment_pointwise(query, t1, pcfg, ScanMode::kBlocked, 1) ==
               segment_pointwise(query, t1, pcfg, ScanMode::kBlocked, 4),
           "pointwise labels changed with the worker count");

  AdmmConfig acfg;
  acfg.gamma = 2.0;
  acfg.beta = 0.5;
  acfg.intensity_patch = PatchShape::single_pixel();
  acfg.label_patch = PatchShape::centered_box(2, 1);
  acfg.search = Neighborhood::box(2);
  acfg.block_side = 2;
  acfg.max_outer_iterations = 10;
  AdmmResult a1 = admm_segment(query, t1, acfg, 1);
  AdmmResult a4 = admm_segment(query, t1, acfg, 4);
  c.expect(a1.labels == a4.labels &&
               a1.relaxed.values == a4.relaxed.values &&
               a1.diagnostics.primal_residuals ==
                   a4.diagnostics.primal_residuals,
           "admm iterates changed with the worker count");

  // Monte Carlo and the experiment runner, across runs and worker counts.
  MonteCarloConfig mc;
  mc.algorithm = PointwiseAlgorithm::kWeightedMajorityVote;
  mc.training_size = 6;
  mc.theta = 2.0;
  mc.trials = 10;
  mc.seed = 44;
  mc.workers = 1;
  TrialReport mc1 = monte_carlo_error(pw, mc);
  mc.workers = 4;
  TrialReport mc4 = monte_carlo_error(pw, mc);
  c.expect(mc1.error_rates == mc4.error_rates && mc1.gaps == mc4.gaps &&
               mc1.mean_error == mc4.mean_error,
           "Monte Carlo results changed with the worker count");

  ExperimentConfig ecfg(pw);
  ecfg.n_train = 4;
  ecfg.n_trials = 3;
  ecfg.algorithms = {"mv", "nn", "wmv", "admm"};
  ecfg.seed = 45;
  ecfg.params.block_side = 2;
  ecfg.params.max_outer = 8;
  ExperimentResult e1 = run_experiment(ecfg);
  setenv("PSEG_WORKERS", "4", 1);
  ExperimentResult e4 = run_experiment(ecfg);
  setenv("PSEG_WORKERS", "1", 1);
  ExperimentResult e5 = run_experiment(ecfg);
  unsetenv("PSEG_WORKERS");
  c.expect(e1.csv == e4.csv && e1.csv == e5.csv && e1.summary == e4.summary,
           "experiment output changed across runs or worker counts");

  c.note("sampler, segmenters, Monte Carlo, experiment runner");
  return c;
}

// ---- 10. files and exit codes ----------------------------------------------

int run_cli(const fs::path& dir, const std::string& args) {
  std::string cmd = std::string(PSEG_CLI_PATH) + " " + args + " > " +
                    (dir / "out.txt").string() + " 2>&1";
  int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

Check files_and_cli() {
  Check c;
  fs::path dir = fs::temp_directory_path() / "pseg-acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Container round trip, byte-for-byte on the rewrite.
  Image img(Lattice({2, 3}), {0.5, -3.25, 1024.125, 0.0, 2.0, -7.5});
  write_image(dir / "img.pseg", img);
  Image back = read_image(dir / "img.pseg");
  c.expect(back.values == img.values && back.lattice == img.lattice,
           "intensity image changed across a round trip");
  write_image(dir / "img2.pseg", back);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
  };
  c.expect(bytes(dir / "img.pseg") == bytes(dir / "img2.pseg"),
           "intensity rewrite produced different bytes");

  LabelImage labels(Lattice({2, 2}), {1, -1, -1, 1});
  write_label_image(dir / "lab.pseg", labels);
  c.expect(read_label_image(dir / "lab.pseg") == labels,
           "label image changed across a round trip");

  GenerativeModel model = build_block_model(
      Lattice({6, 6}), 2, {{component(0.5, 0.0, -1), component(0.5, 8.0, 1)}},
      NoiseSpec{NoiseFamily::kGaussian, 0.25});
  save_model(dir / "model.json", model);
  c.expect(model_json(load_model(dir / "model.json")) == model_json(model),
           "model description changed across a round trip");

  // CLI happy path: generate -> segment -> verify all exit 0.
  c.expect(run_cli(dir, "generate --model " + (dir / "model.json").string() +
                            " --out " + (dir / "data").string() +
                            " --train 4 --tests 1 --seed 3") == 0,
           "generate did not exit 0");
  c.expect(run_cli(dir, "segment --method wmv --query " +
                            (dir / "data" / "test_000.intensity.pseg").string() +
                            " --manifest " +
                            (dir / "data" / "manifest.json").string() +
                            " --out " + (dir / "seg.pseg").string() +
                            " --theta 2") == 0,
           "segment did not exit 0");
  c.expect(run_cli(dir, "verify --model " + (dir / "model.json").string()) == 0,
           "verify did not exit 0");

  // Exit 2: malformed settings.
  c.expect(run_cli(dir, "bound --no-such-flag 1") == 2,
           "unknown flag did not exit 2");
  std::ofstream(dir / "broken.json") << "{oops";
  c.expect(run_cli(dir, "verify --model " + (dir / "broken.json").string()) ==
               2,
           "malformed model file did not exit 2");

  // Exit 3: violated model hypothesis.
  std::ofstream(dir / "bad_model.json") << R"({
    "type": "pointwise", "dims": [2], "rho_min": 1.0, "patch_radius": 0,
    "jigsaw_offsets": [[1]],
    "noise": {"family": "gaussian", "sigma": 0.5},
    "pixels": [[{"weight": 1.0, "mean": 0.0, "label": 1}],
               [{"weight": 1.0, "mean": 5.0, "label": 1}]]
  })";
  c.expect(run_cli(dir, "verify --model " + (dir / "bad_model.json").string()) ==
               3,
           "hypothesis violation did not exit 3");

  // Exit 4: starved solver.
  c.expect(run_cli(dir, "segment --method admm --query " +
                            (dir / "data" / "test_000.intensity.pseg").string() +
                            " --manifest " +
                            (dir / "data" / "manifest.json").string() +
                            " --out " + (dir / "seg4.pseg").string() +
                            " --label-patch-radius 1 --block-side 2" +
                            " --max-outer 1 --primal-tol 1e-12 --init cold") ==
               4,
           "nonconvergence did not exit 4");

  c.note("round trips plus exit codes 0/2/3/4");
  return c;
}

}  // namespace

int main() {
  struct Entry {
    int index;
    const char* name;
    Check (*fn)();
    double budget_seconds;  // 0: no stated budget
  };
  const Entry entries[] = {
      {1, "library matches the naive reference", oracle_equivalence, 10.0},
      {2, "huge vote decay equals nearest neighbor", nn_limit, 30.0},
      {3, "Monte Carlo error stays under the bound", bound_dominance, 300.0},
      {4, "solved forms hit their target terms", corollary_identities, 1.0},
      {5, "gradients match finite differences", gradient_checks, 5.0},
      {6, "solver reductions hold", admm_reductions, 60.0},
      {7, "algorithm ordering on the synthetic suite", qualitative_trend,
       300.0},
      {8, "noiseless instances recovered exactly", noiseless_recovery, 10.0},
      {9, "bit-identical across runs and workers", determinism, 0.0},
      {10, "file round trips and CLI exit codes", files_and_cli, 0.0},
  };

  int failed = 0;
  for (const Entry& e : entries) {
    auto start = std::chrono::steady_clock::now();
    Check c;
    try {
      c = e.fn();
    } catch (const std::exception& ex) {
      c.ok = false;
      c.detail = std::string("threw: ") + ex.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (c.ok && e.budget_seconds > 0.0 && elapsed > e.budget_seconds) {
      c.ok = false;
      c.detail = fmt("over the %.0f s budget", e.budget_seconds);
    }
    std::printf("[%s] criterion %2d: %s (%.1f s)%s%s\n",
                c.ok ? "PASS" : "FAIL", e.index, e.name, elapsed,
                c.detail.empty() ? "" : " -- ", c.detail.c_str());
    std::fflush(stdout);
    if (!c.ok) ++failed;
  }
  if (failed > 0) {
    std::printf("%d of 10 criteria failed\n", failed);
    return 1;
  }
  std::printf("all 10 criteria passed\n");
  return 0;
}
