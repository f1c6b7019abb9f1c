// Command-line front end: dataset generation, the four segmentation
// algorithms on image files, gap/bound evaluation, model verification, and
// the experiment runner. Exit codes: 0 ok, 2 config/schema error, 3 contract
// violation, 4 admm failed to converge.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pseg/errors.hpp"
#include "pseg/experiment.hpp"
#include "pseg/image_io.hpp"
#include "pseg/metrics.hpp"
#include "pseg/model_io.hpp"
#include "pseg/multipoint.hpp"
#include "pseg/parallel.hpp"
#include "pseg/pointwise.hpp"
#include "pseg/random.hpp"
#include "pseg/theory.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string numbered_name(const char* stem, std::size_t index,
                          const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.%s.pseg", stem, index, kind);
  return buf;
}

// ---- generate ----------------------------------------------------------

struct GenerateOptions {
  std::string model_path;
  std::string out_dir;
  std::size_t n_train = 10;
  std::size_t n_tests = 1;
  std::uint64_t seed = 0;
};

int run_generate(const GenerateOptions& opt) {
  pseg::GenerativeModel model = pseg::load_model(opt.model_path);
  fs::create_directories(opt.out_dir);
  pseg::RandomStream stream{opt.seed};

  json manifest;
  manifest["seed"] = opt.seed;
  manifest["lattice"] = pseg::model_lattice(model).dims();
  manifest["model"] = pseg::model_json(model);

  pseg::TrainingSet train = pseg::sample_training_set(model, opt.n_train, stream);
  json train_entries = json::array();
  for (std::size_t u = 0; u < train.size(); ++u) {
    std::string intensity = numbered_name("train", u, "intensity");
    std::string labels = numbered_name("train", u, "labels");
    pseg::write_image(fs::path(opt.out_dir) / intensity, train.intensities[u]);
    pseg::write_label_image(fs::path(opt.out_dir) / labels, train.labels[u]);
    train_entries.push_back(json{{"intensity", intensity}, {"labels", labels}});
  }
  manifest["train"] = std::move(train_entries);

  json test_entries = json::array();
  for (std::size_t t = 0; t < opt.n_tests; ++t) {
    auto [intensity_img, label_img] = pseg::sample_pair(model, stream);
    std::string intensity = numbered_name("test", t, "intensity");
    std::string labels = numbered_name("test", t, "labels");
    pseg::write_image(fs::path(opt.out_dir) / intensity, intensity_img);
    pseg::write_label_image(fs::path(opt.out_dir) / labels, label_img);
    test_entries.push_back(json{{"intensity", intensity}, {"labels", labels}});
  }
  manifest["tests"] = std::move(test_entries);

  std::ofstream out(fs::path(opt.out_dir) / "manifest.json", std::ios::trunc);
  pseg::require_config(out.good(), "cannot write manifest.json");
  out << manifest.dump(2) << '\n';
  std::cout << (fs::path(opt.out_dir) / "manifest.json").string() << '\n';
  return 0;
}

// ---- shared training-set loading ---------------------------------------

struct TrainingInputs {
  std::string manifest_path;
  std::vector<std::string> intensity_paths;
  std::vector<std::string> label_paths;
};

pseg::TrainingSet load_training(const TrainingInputs& in) {
  pseg::TrainingSet train;
  if (!in.manifest_path.empty()) {
    pseg::require_config(in.intensity_paths.empty() && in.label_paths.empty(),
                         "give either --manifest or explicit training files");
    std::ifstream f(in.manifest_path);
    pseg::require_config(f.good(), "cannot open manifest: " + in.manifest_path);
    json doc;
    try {
      doc = json::parse(f);
    } catch (const json::exception& e) {
      throw pseg::ConfigError(in.manifest_path + ": invalid JSON: " + e.what());
    }
    pseg::require_config(doc.contains("train") && doc["train"].is_array() &&
                             !doc["train"].empty(),
                         "manifest: missing nonempty 'train' array");
    fs::path base = fs::path(in.manifest_path).parent_path();
    for (const json& entry : doc["train"]) {
      pseg::require_config(entry.contains("intensity") && entry.contains("labels"),
                           "manifest: train entries need intensity and labels");
      train.push_back(
          pseg::read_image(base / entry["intensity"].get<std::string>()),
          pseg::read_label_image(base / entry["labels"].get<std::string>()));
    }
    return train;
  }
  pseg::require_config(!in.intensity_paths.empty(),
                       "no training data: give --manifest or --train-intensity/--train-labels");
  pseg::require_config(in.intensity_paths.size() == in.label_paths.size(),
                       "--train-intensity and --train-labels counts differ");
  for (std::size_t u = 0; u < in.intensity_paths.size(); ++u) {
    train.push_back(pseg::read_image(in.intensity_paths[u]),
                    pseg::read_label_image(in.label_paths[u]));
  }
  return train;
}

// ---- segment ------------------------------------------------------------

struct SegmentOptions {
  std::string method = "wmv";
  std::string query_path;
  TrainingInputs train;
  std::string out_path;
  std::string diagnostics_path;
  int search_radius = 1;
  int patch_radius = 0;
  int label_patch_radius = 0;
  int block_side = 3;
  double theta = 1.0;
  double gamma = 1.0;
  double alpha = 0.0;
  double beta = 1.0;
  int max_outer = 50;
  double primal_tol = 1e-3;
  double step_size = 0.1;
  int inner_iters = 10;
  std::string init = "wmv";
};

int run_segment(const SegmentOptions& opt) {
  pseg::TrainingSet train = load_training(opt.train);
  train.validate();
  int rank = train.lattice().rank();

  pseg::LabelImage result;
  bool converged = true;
  if (opt.method == "mv") {
    result = pseg::majority_vote_baseline(train);
  } else {
    pseg::Image query = pseg::read_image(opt.query_path);
    pseg::PatchShape patch =
        opt.patch_radius == 0
            ? pseg::PatchShape::single_pixel()
            : pseg::PatchShape::centered_box(rank, opt.patch_radius);
    if (opt.method == "nn" || opt.method == "wmv") {
      pseg::PointwiseConfig cfg;
      cfg.search = pseg::Neighborhood::box(opt.search_radius);
      cfg.patch = patch;
      cfg.theta = opt.method == "nn" ? pseg::kThetaInfinity : opt.theta;
      result = pseg::segment_pointwise(query, train, cfg);
    } else {
      pseg::AdmmConfig cfg;
      cfg.alpha = opt.alpha;
      cfg.beta = opt.beta;
      cfg.gamma = opt.gamma;
      cfg.intensity_patch = patch;
      cfg.label_patch =
          opt.label_patch_radius == 0
              ? pseg::PatchShape::single_pixel()
              : pseg::PatchShape::centered_box(rank, opt.label_patch_radius);
      cfg.search = pseg::Neighborhood::box(opt.search_radius);
      cfg.block_side = opt.block_side;
      cfg.max_outer_iterations = opt.max_outer;
      cfg.primal_tolerance = opt.primal_tol;
      cfg.step_size = opt.step_size;
      cfg.inner_iterations = opt.inner_iters;
      cfg.init = opt.init == "cold" ? pseg::AdmmConfig::Init::kColdStart
                                    : pseg::AdmmConfig::Init::kWeightedMajority;
      pseg::AdmmResult res = pseg::admm_segment(query, train, cfg);
      result = res.labels;
      converged = res.diagnostics.converged;
      if (!opt.diagnostics_path.empty()) {
        std::ofstream diag(opt.diagnostics_path, std::ios::trunc);
        pseg::require_config(diag.good(),
                             "cannot write: " + opt.diagnostics_path);
        diag << "iteration,primal_residual,objective\n";
        for (std::size_t t = 0;
             t < res.diagnostics.primal_residuals.size(); ++t) {
          diag << (t + 1) << ','
               << pseg::format_double(res.diagnostics.primal_residuals[t])
               << ',' << pseg::format_double(res.diagnostics.objectives[t])
               << '\n';
        }
      }
    }
  }
  pseg::write_label_image(opt.out_path, result);
  std::cout << opt.out_path << '\n';
  return converged ? 0 : 4;
}

// ---- gap ----------------------------------------------------------------

struct GapOptions {
  TrainingInputs train;
  int search_radius = 1;
  int patch_radius = 0;
};

int run_gap(const GapOptions& opt) {
  pseg::TrainingSet train = load_training(opt.train);
  train.validate();
  int rank = train.lattice().rank();
  pseg::PatchShape patch =
      opt.patch_radius == 0
          ? pseg::PatchShape::single_pixel()
          : pseg::PatchShape::centered_box(rank, opt.patch_radius);
  double gap = pseg::separation_gap(
      train, pseg::Neighborhood::box(opt.search_radius), patch);
  std::cout << pseg::format_double(gap) << '\n';
  return 0;
}

// ---- bound --------------------------------------------------------------

struct BoundOptions {
  std::size_t lattice_size = 0;
  std::size_t cmax = 0;
  std::size_t n = 0;
  double rho_min = 0.0;
  std::size_t nsize = 0;
  double gap = -1.0;
  bool gap_infinite = false;
  double sigma = 0.0;
  double solve_n_eps = -1.0;
  double solve_gap_eps = -1.0;
};

int run_bound(const BoundOptions& opt) {
  json out = json::object();
  bool solved = false;
  if (opt.solve_n_eps >= 0.0) {
    out["required_n"] = pseg::required_training_size(
        opt.solve_n_eps, opt.lattice_size, opt.cmax, opt.rho_min);
    solved = true;
  }
  if (opt.solve_gap_eps >= 0.0) {
    out["required_gap"] = pseg::required_gap(opt.solve_gap_eps, opt.nsize,
                                             opt.n, opt.sigma);
    solved = true;
  }
  if (!solved) {
    pseg::BoundParams p;
    p.lattice_size = opt.lattice_size;
    p.component_count_max = opt.cmax;
    p.training_size = opt.n;
    p.rho_min = opt.rho_min;
    p.neighborhood_size = opt.nsize;
    pseg::require_config(opt.gap_infinite || opt.gap >= 0.0,
                         "bound: give --gap or --gap-infinite");
    p.gap = opt.gap_infinite ? std::numeric_limits<double>::infinity()
                             : opt.gap;
    p.sigma = opt.sigma;
    pseg::ErrorBound b = pseg::error_bound(p);
    out = json{{"value", b.value},
               {"coverage_term", b.coverage_term},
               {"outlier_term", b.outlier_term},
               {"vacuous", b.vacuous}};
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---- verify -------------------------------------------------------------

struct VerifyOptions {
  std::string model_path;
  bool monte_carlo = false;
  std::string algorithm = "wmv";
  std::size_t n = 1;
  double theta = -1.0;  // <0: derive from sigma
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  int search_radius = -1;  // <0: model's reference neighborhood
  std::string csv_path;
};

int run_verify(const VerifyOptions& opt) {
  pseg::GenerativeModel model = pseg::load_model(opt.model_path);
  const auto* pointwise = std::get_if<pseg::PointwiseModel>(&model);
  pseg::require_config(pointwise != nullptr,
                       "verify: needs a pointwise (mixture) model");

  pseg::JigsawReport jigsaw = pseg::verify_jigsaw(*pointwise);
  if (!jigsaw.holds) {
    json violations = json::array();
    for (const pseg::JigsawViolation& v : jigsaw.violations) {
      violations.push_back(json{{"pixel", v.pixel}, {"component", v.component}});
    }
    std::cout << json{{"jigsaw_holds", false}, {"violations", violations}}.dump(2)
              << '\n';
    return 3;
  }
  if (!opt.monte_carlo) {
    std::cout << json{{"jigsaw_holds", true}}.dump(2) << '\n';
    return 0;
  }

  pseg::MonteCarloConfig cfg;
  pseg::require_config(opt.algorithm == "nn" || opt.algorithm == "wmv",
                       "verify: --algorithm must be nn or wmv");
  cfg.algorithm = opt.algorithm == "nn"
                      ? pseg::PointwiseAlgorithm::kNearestNeighbor
                      : pseg::PointwiseAlgorithm::kWeightedMajorityVote;
  cfg.training_size = opt.n;
  double sigma = pointwise->noise().sigma;
  cfg.theta = opt.theta >= 0.0
                  ? opt.theta
                  : (sigma > 0.0 ? pseg::theta_for_sigma(sigma) : 1.0);
  cfg.trials = opt.trials;
  cfg.seed = opt.seed;
  if (opt.search_radius >= 0) {
    cfg.search = pseg::Neighborhood::box(opt.search_radius);
  }
  pseg::TrialReport report = pseg::monte_carlo_error(*pointwise, cfg);
  std::cout << pseg::trial_report_json(report).dump(2) << '\n';
  if (!opt.csv_path.empty()) {
    std::ofstream csv(opt.csv_path, std::ios::trunc);
    pseg::require_config(csv.good(), "cannot write: " + opt.csv_path);
    csv << pseg::trial_report_csv_header() << '\n'
        << pseg::trial_report_csv_row(report) << '\n';
  }
  return 0;
}

// ---- experiment -----------------------------------------------------------

int run_experiment_cmd(const std::string& config_path) {
  pseg::ExperimentConfig cfg = pseg::load_experiment_config(config_path);
  pseg::ExperimentResult result = pseg::run_experiment(cfg);
  std::cout << result.summary.dump(2) << '\n';
  return result.admm_all_nonconverged ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patch-based image segmentation toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  GenerateOptions gen;
  CLI::App* generate = app.add_subcommand(
      "generate", "sample a dataset from a model description");
  generate->add_option("--model", gen.model_path, "model JSON file")->required();
  generate->add_option("--out", gen.out_dir, "output directory")->required();
  generate->add_option("--train", gen.n_train, "number of training pairs");
  generate->add_option("--tests", gen.n_tests, "number of test pairs");
  generate->add_option("--seed", gen.seed, "random seed");
  generate->callback([&] { rc = run_generate(gen); });

  SegmentOptions seg;
  CLI::App* segment =
      app.add_subcommand("segment", "segment a query image from files");
  segment->add_option("--method", seg.method, "mv | nn | wmv | admm")
      ->check(CLI::IsMember({"mv", "nn", "wmv", "admm"}));
  segment->add_option("--query", seg.query_path, "query intensity image");
  segment->add_option("--manifest", seg.train.manifest_path,
                      "dataset manifest with training pairs");
  segment->add_option("--train-intensity", seg.train.intensity_paths,
                      "training intensity image (repeatable)");
  segment->add_option("--train-labels", seg.train.label_paths,
                      "training label image (repeatable)");
  segment->add_option("--out", seg.out_path, "output label image")->required();
  segment->add_option("--diagnostics", seg.diagnostics_path,
                      "admm residual/objective trace CSV");
  segment->add_option("--search-radius", seg.search_radius, "neighborhood radius");
  segment->add_option("--patch-radius", seg.patch_radius, "intensity patch radius");
  segment->add_option("--label-patch-radius", seg.label_patch_radius,
                      "label patch radius (admm)");
  segment->add_option("--block-side", seg.block_side, "kde block side (admm)");
  segment->add_option("--theta", seg.theta, "wmv vote decay");
  segment->add_option("--gamma", seg.gamma, "kde bandwidth (admm)");
  segment->add_option("--alpha", seg.alpha, "global label prior strength (admm)");
  segment->add_option("--beta", seg.beta, "consensus penalty (admm)");
  segment->add_option("--max-outer", seg.max_outer, "admm outer iterations");
  segment->add_option("--primal-tol", seg.primal_tol, "admm primal tolerance");
  segment->add_option("--step-size", seg.step_size, "merge gradient step");
  segment->add_option("--inner-iters", seg.inner_iters, "merge gradient iterations");
  segment->add_option("--init", seg.init, "admm initialization: wmv | cold")
      ->check(CLI::IsMember({"wmv", "cold"}));
  segment->callback([&] {
    pseg::require_config(seg.method == "mv" || !seg.query_path.empty(),
                         "segment: --query is required for nn/wmv/admm");
    rc = run_segment(seg);
  });

  GapOptions gap;
  CLI::App* gap_cmd = app.add_subcommand(
      "gap", "separation gap of a training set");
  gap_cmd->add_option("--manifest", gap.train.manifest_path, "dataset manifest");
  gap_cmd->add_option("--train-intensity", gap.train.intensity_paths,
                      "training intensity image (repeatable)");
  gap_cmd->add_option("--train-labels", gap.train.label_paths,
                      "training label image (repeatable)");
  gap_cmd->add_option("--search-radius", gap.search_radius, "neighborhood radius");
  gap_cmd->add_option("--patch-radius", gap.patch_radius, "intensity patch radius");
  gap_cmd->callback([&] { rc = run_gap(gap); });

  BoundOptions bound;
  CLI::App* bound_cmd = app.add_subcommand(
      "bound", "evaluate the expected-error bound or solve its corollaries");
  bound_cmd->add_option("--lattice-size", bound.lattice_size, "|I|");
  bound_cmd->add_option("--cmax", bound.cmax, "max components per pixel");
  bound_cmd->add_option("--n", bound.n, "training set size");
  bound_cmd->add_option("--rho-min", bound.rho_min, "minimum mixture weight");
  bound_cmd->add_option("--nsize", bound.nsize, "neighborhood size |N|");
  bound_cmd->add_option("--gap", bound.gap, "separation gap");
  bound_cmd->add_flag("--gap-infinite", bound.gap_infinite,
                      "treat the gap as infinite");
  bound_cmd->add_option("--sigma", bound.sigma, "sub-gaussian noise parameter");
  bound_cmd->add_option("--solve-n", bound.solve_n_eps,
                        "training size needed for this error target");
  bound_cmd->add_option("--solve-gap", bound.solve_gap_eps,
                        "gap needed for this error target");
  bound_cmd->callback([&] { rc = run_bound(bound); });

  VerifyOptions verify;
  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "check model hypotheses; optionally bound-test by Monte Carlo");
  verify_cmd->add_option("--model", verify.model_path, "model JSON file")
      ->required();
  verify_cmd->add_flag("--mc", verify.monte_carlo, "run the Monte Carlo check");
  verify_cmd->add_option("--algorithm", verify.algorithm, "nn | wmv");
  verify_cmd->add_option("--n", verify.n, "training set size per trial");
  verify_cmd->add_option("--theta", verify.theta,
                         "wmv vote decay (default 1/(8 sigma^2))");
  verify_cmd->add_option("--trials", verify.trials, "Monte Carlo trials");
  verify_cmd->add_option("--seed", verify.seed, "random seed");
  verify_cmd->add_option("--search-radius", verify.search_radius,
                         "search neighborhood radius (default: model's)");
  verify_cmd->add_option("--csv", verify.csv_path, "also write a CSV row here");
  verify_cmd->callback([&] { rc = run_verify(verify); });

  std::string experiment_config;
  CLI::App* experiment = app.add_subcommand(
      "experiment", "run the multi-algorithm comparison from a config file");
  experiment->add_option("--config", experiment_config, "experiment JSON config")
      ->required();
  experiment->callback([&] { rc = run_experiment_cmd(experiment_config); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  } catch (const pseg::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const pseg::ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return rc;
}
