#include "pseg/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pseg/errors.hpp"
#include "pseg/image_io.hpp"
#include "pseg/metrics.hpp"
#include "pseg/model_io.hpp"
#include "pseg/multipoint.hpp"
#include "pseg/parallel.hpp"
#include "pseg/pointwise.hpp"
#include "pseg/random.hpp"
#include "pseg/theory.hpp"

namespace pseg {

namespace {

using nlohmann::json;

const std::vector<std::string> kCanonicalAlgorithms = {"mv", "nn", "wmv",
                                                       "admm"};

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  require_config(obj.is_object(), where + " must be a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    require_config(known, where + ": unknown key '" + item.key() + "'");
  }
}

double get_number(const json& obj, const char* key, double fallback,
                  const std::string& where) {
  if (!obj.contains(key)) return fallback;
  require_config(obj.at(key).is_number(),
                 where + ": '" + key + "' must be a number");
  return obj.at(key).get<double>();
}

int get_int(const json& obj, const char* key, int fallback,
            const std::string& where) {
  if (!obj.contains(key)) return fallback;
  require_config(obj.at(key).is_number_integer(),
                 where + ": '" + key + "' must be an integer");
  return obj.at(key).get<int>();
}

ExperimentParams parse_params(const json& doc, const std::string& where) {
  check_keys(doc,
             {"patch_radius", "label_patch_radius", "search_radius",
              "block_side", "theta", "gamma", "alpha", "beta", "max_outer",
              "primal_tol", "step_size", "inner_iters", "init"},
             where);
  ExperimentParams p;
  p.patch_radius = get_int(doc, "patch_radius", p.patch_radius, where);
  p.label_patch_radius =
      get_int(doc, "label_patch_radius", p.label_patch_radius, where);
  p.search_radius = get_int(doc, "search_radius", p.search_radius, where);
  p.block_side = get_int(doc, "block_side", p.block_side, where);
  if (doc.contains("theta")) p.theta = get_number(doc, "theta", 0.0, where);
  if (doc.contains("gamma")) p.gamma = get_number(doc, "gamma", 0.0, where);
  p.alpha = get_number(doc, "alpha", p.alpha, where);
  p.beta = get_number(doc, "beta", p.beta, where);
  p.max_outer = get_int(doc, "max_outer", p.max_outer, where);
  p.primal_tol = get_number(doc, "primal_tol", p.primal_tol, where);
  p.step_size = get_number(doc, "step_size", p.step_size, where);
  p.inner_iters = get_int(doc, "inner_iters", p.inner_iters, where);
  if (doc.contains("init")) {
    p.init = doc.at("init").get<std::string>();
    require_config(p.init == "wmv" || p.init == "cold",
                   where + ": init must be 'wmv' or 'cold'");
  }
  require_config(p.patch_radius >= 0 && p.label_patch_radius >= 0 &&
                     p.search_radius >= 0,
                 where + ": radii must be >= 0");
  return p;
}

GridSpec parse_grid(const json& doc, std::size_t n_train,
                    const std::string& where) {
  check_keys(doc,
             {"gammas", "betas", "alphas", "search_radii", "train_indices",
              "val_indices"},
             where);
  GridSpec g;
  auto numbers = [&](const char* key, std::vector<double>& out,
                     double fallback) {
    if (!doc.contains(key)) {
      out = {fallback};
      return;
    }
    const json& arr = doc.at(key);
    require_config(arr.is_array() && !arr.empty(),
                   where + ": '" + key + "' must be a nonempty array");
    for (const json& v : arr) {
      require_config(v.is_number(), where + ": '" + key + "' entries must be numbers");
      out.push_back(v.get<double>());
    }
  };
  numbers("gammas", g.gammas, 1.0);
  numbers("betas", g.betas, 1.0);
  numbers("alphas", g.alphas, 0.0);
  if (doc.contains("search_radii")) {
    for (const json& v : doc.at("search_radii")) {
      require_config(v.is_number_integer() && v.get<int>() >= 0,
                     where + ": search_radii entries must be integers >= 0");
      g.search_radii.push_back(v.get<int>());
    }
    require_config(!g.search_radii.empty(),
                   where + ": search_radii must be nonempty");
  } else {
    g.search_radii = {1};
  }
  auto indices = [&](const char* key, std::vector<std::size_t>& out) {
    const json& arr = doc.contains(key) ? doc.at(key) : json();
    require_config(arr.is_array() && !arr.empty(),
                   where + ": '" + key + "' must be a nonempty array");
    for (const json& v : arr) {
      require_config(v.is_number_integer() && v.get<long long>() >= 0,
                     where + ": '" + key + "' entries must be integers >= 0");
      std::size_t idx = v.get<std::size_t>();
      require_config(idx < n_train,
                     where + ": '" + key + "' index past the sampled pool");
      out.push_back(idx);
    }
  };
  indices("train_indices", g.train_indices);
  indices("val_indices", g.val_indices);
  for (std::size_t t : g.train_indices) {
    for (std::size_t v : g.val_indices) {
      require_config(t != v, where + ": train and validation indices overlap");
    }
  }
  return g;
}

double model_sigma(const GenerativeModel& model) {
  return std::visit([](const auto& m) { return m.noise().sigma; }, model);
}

struct ResolvedParams {
  PatchShape intensity_patch;
  PatchShape label_patch;
  Neighborhood search = Neighborhood::box(1);
  double theta = 1.0;
  double gamma = 1.0;
};

ResolvedParams resolve_params(const ExperimentConfig& cfg, int rank) {
  ResolvedParams r;
  r.intensity_patch =
      cfg.params.patch_radius == 0
          ? PatchShape::single_pixel()
          : PatchShape::centered_box(rank, cfg.params.patch_radius);
  r.label_patch =
      cfg.params.label_patch_radius == 0
          ? PatchShape::single_pixel()
          : PatchShape::centered_box(rank, cfg.params.label_patch_radius);
  r.search = Neighborhood::box(cfg.params.search_radius);
  double sigma = model_sigma(cfg.model);
  r.theta = cfg.params.theta.value_or(sigma > 0.0 ? theta_for_sigma(sigma)
                                                  : 1.0);
  r.gamma = cfg.params.gamma.value_or(r.theta);
  return r;
}

AdmmConfig admm_config_from(const ExperimentConfig& cfg,
                            const ResolvedParams& r) {
  AdmmConfig a;
  a.alpha = cfg.params.alpha;
  a.beta = cfg.params.beta;
  a.gamma = r.gamma;
  a.intensity_patch = r.intensity_patch;
  a.label_patch = r.label_patch;
  a.search = r.search;
  a.block_side = cfg.params.block_side;
  a.distance = LabelDistance::kSoftDiceComplement;
  a.max_outer_iterations = cfg.params.max_outer;
  a.primal_tolerance = cfg.params.primal_tol;
  a.step_size = cfg.params.step_size;
  a.inner_iterations = cfg.params.inner_iters;
  a.init = cfg.params.init == "cold" ? AdmmConfig::Init::kColdStart
                                     : AdmmConfig::Init::kWeightedMajority;
  return a;
}

TrialRow score_row(std::size_t trial, const std::string& algorithm,
                   const LabelImage& out, const LabelImage& truth,
                   bool converged) {
  TrialRow row;
  row.trial = trial;
  row.algorithm = algorithm;
  row.dice = dice_overlap(out, truth);
  row.pixel_error = pixel_error_rate(out, truth);
  row.converged = converged;
  return row;
}

TrialRow run_algorithm(std::size_t trial, const std::string& algorithm,
                       const Image& query, const LabelImage& truth,
                       const TrainingSet& train, const ExperimentConfig& cfg,
                       const ResolvedParams& r) {
  try {
    if (algorithm == "mv") {
      return score_row(trial, algorithm, majority_vote_baseline(train), truth,
                       true);
    }
    if (algorithm == "nn" || algorithm == "wmv") {
      PointwiseConfig pc;
      pc.search = r.search;
      pc.patch = r.intensity_patch;
      pc.theta = algorithm == "nn" ? kThetaInfinity : r.theta;
      return score_row(trial, algorithm,
                       segment_pointwise(query, train, pc, ScanMode::kNaive, 1),
                       truth, true);
    }
    AdmmResult res = admm_segment(query, train, admm_config_from(cfg, r), 1);
    return score_row(trial, algorithm, res.labels, truth,
                     res.diagnostics.converged);
  } catch (const ConfigError&) {
    // Bad settings are deterministic across trials; fail the run outright
    // rather than emitting one failure row per trial.
    throw;
  } catch (const std::exception& e) {
    TrialRow row;
    row.trial = trial;
    row.algorithm = algorithm;
    row.failed = true;
    row.converged = false;
    row.message = e.what();
    return row;
  }
}

std::string csv_safe(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

std::string rows_csv(const std::vector<TrialRow>& rows) {
  std::ostringstream out;
  out << "trial,algorithm,dice,pixel_error,converged,failed,message\n";
  for (const TrialRow& row : rows) {
    out << row.trial << ',' << row.algorithm << ',';
    if (row.failed) {
      out << ",,";
    } else {
      out << format_double(row.dice) << ',' << format_double(row.pixel_error)
          << ',';
    }
    out << (row.converged ? 1 : 0) << ',' << (row.failed ? 1 : 0) << ','
        << csv_safe(row.message) << '\n';
  }
  return out.str();
}

json stats_json(std::vector<double> values) {
  if (values.empty()) return nullptr;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  std::size_t mid = values.size() / 2;
  double median = values.size() % 2 == 1
                      ? values[mid]
                      : 0.5 * (values[mid - 1] + values[mid]);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  double half = 0.0;
  if (values.size() > 1) {
    var /= static_cast<double>(values.size() - 1);
    half = 1.96 * std::sqrt(var / static_cast<double>(values.size()));
  }
  return json{{"mean", mean},
              {"median", median},
              {"ci_lower", mean - half},
              {"ci_upper", mean + half}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  require_config(out.good(), "cannot write: " + path.string());
  out << text;
  require_config(out.good(), "write failed: " + path.string());
}

ExperimentResult run_grid(const ExperimentConfig& cfg) {
  const GridSpec& grid = *cfg.grid;
  for (const std::string& a : cfg.algorithms) {
    require_config(a == "wmv" || a == "admm",
                   "experiment: grid mode supports wmv and admm only");
  }

  RandomStream root(cfg.seed);
  RandomStream pool_stream = root.split(0);
  TrainingSet pool = sample_training_set(cfg.model, cfg.n_train, pool_stream);
  TrainingSet train;
  for (std::size_t idx : grid.train_indices) {
    train.push_back(pool.intensities[idx], pool.labels[idx]);
  }

  struct GridPoint {
    double gamma, beta, alpha;
    int radius;
  };
  std::vector<GridPoint> points;
  for (double g : grid.gammas) {
    for (double b : grid.betas) {
      for (double a : grid.alphas) {
        for (int rad : grid.search_radii) points.push_back({g, b, a, rad});
      }
    }
  }

  struct GridRow {
    GridPoint point;
    std::string algorithm;
    double mean_dice = 0.0;
    double mean_error = 0.0;
  };
  std::vector<GridRow> rows(points.size() * cfg.algorithms.size());
  parallel_for(points.size(), [&](std::size_t p) {
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
      ExperimentConfig point_cfg = cfg;
      point_cfg.params.gamma = points[p].gamma;
      point_cfg.params.theta = points[p].gamma;  // wmv sweeps its decay too
      point_cfg.params.beta = points[p].beta;
      point_cfg.params.alpha = points[p].alpha;
      point_cfg.params.search_radius = points[p].radius;
      ResolvedParams r = resolve_params(point_cfg, model_lattice(cfg.model).rank());
      double dice_sum = 0.0, err_sum = 0.0;
      for (std::size_t v : grid.val_indices) {
        TrialRow row = run_algorithm(v, cfg.algorithms[a], pool.intensities[v],
                                     pool.labels[v], train, point_cfg, r);
        require_config(!row.failed, "experiment grid: " + row.message);
        dice_sum += row.dice;
        err_sum += row.pixel_error;
      }
      GridRow& out = rows[p * cfg.algorithms.size() + a];
      out.point = points[p];
      out.algorithm = cfg.algorithms[a];
      out.mean_dice = dice_sum / static_cast<double>(grid.val_indices.size());
      out.mean_error = err_sum / static_cast<double>(grid.val_indices.size());
    }
  });

  std::ostringstream csv;
  csv << "gamma,beta,alpha,search_radius,algorithm,mean_dice,mean_pixel_error\n";
  for (const GridRow& row : rows) {
    csv << format_double(row.point.gamma) << ',' << format_double(row.point.beta)
        << ',' << format_double(row.point.alpha) << ',' << row.point.radius
        << ',' << row.algorithm << ',' << format_double(row.mean_dice) << ','
        << format_double(row.mean_error) << '\n';
  }

  json best = json::object();
  for (const std::string& a : cfg.algorithms) {
    const GridRow* top = nullptr;
    for (const GridRow& row : rows) {
      if (row.algorithm != a) continue;
      if (top == nullptr || row.mean_dice > top->mean_dice) top = &row;
    }
    best[a] = json{{"gamma", top->point.gamma},
                   {"beta", top->point.beta},
                   {"alpha", top->point.alpha},
                   {"search_radius", top->point.radius},
                   {"mean_dice", top->mean_dice},
                   {"mean_pixel_error", top->mean_error}};
  }

  ExperimentResult result;
  result.grid_csv = csv.str();
  result.summary = json{{"seed", cfg.seed},
                        {"n_train", cfg.n_train},
                        {"pool_size", cfg.n_train},
                        {"algorithms", cfg.algorithms},
                        {"grid_points", points.size()},
                        {"grid_best", best}};
  if (cfg.output_dir) {
    std::filesystem::create_directories(*cfg.output_dir);
    write_text(*cfg.output_dir / "grid.csv", *result.grid_csv);
    write_text(*cfg.output_dir / "summary.json", result.summary.dump(2) + "\n");
  }
  return result;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc,
                                         const std::filesystem::path& base_dir) {
  check_keys(doc,
             {"model", "model_path", "n_train", "n_trials", "algorithms",
              "seed", "output_dir", "params", "grid"},
             "experiment");
  bool inline_model = doc.contains("model");
  bool path_model = doc.contains("model_path");
  require_config(inline_model != path_model,
                 "experiment: give exactly one of 'model' or 'model_path'");
  GenerativeModel model =
      inline_model
          ? parse_model_json(doc.at("model"), base_dir)
          : load_model([&] {
              std::filesystem::path p = doc.at("model_path").get<std::string>();
              return p.is_relative() ? base_dir / p : p;
            }());

  ExperimentConfig cfg(std::move(model));
  cfg.n_train = static_cast<std::size_t>(get_int(doc, "n_train", 1, "experiment"));
  cfg.n_trials =
      static_cast<std::size_t>(get_int(doc, "n_trials", 1, "experiment"));
  require_config(cfg.n_train >= 1, "experiment: n_train must be >= 1");
  require_config(cfg.n_trials >= 1, "experiment: n_trials must be >= 1");
  if (doc.contains("seed")) {
    require_config(doc.at("seed").is_number_integer() &&
                       doc.at("seed").get<long long>() >= 0,
                   "experiment: seed must be a non-negative integer");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }

  const json& algs = doc.contains("algorithms") ? doc.at("algorithms") : json();
  require_config(algs.is_array() && !algs.empty(),
                 "experiment: algorithms must be a nonempty array");
  for (const std::string& name : kCanonicalAlgorithms) {
    for (const json& a : algs) {
      require_config(a.is_string(), "experiment: algorithm names must be strings");
      if (a.get<std::string>() == name) {
        cfg.algorithms.push_back(name);
        break;
      }
    }
  }
  for (const json& a : algs) {
    bool known = std::find(kCanonicalAlgorithms.begin(),
                           kCanonicalAlgorithms.end(),
                           a.get<std::string>()) != kCanonicalAlgorithms.end();
    require_config(known, "experiment: unknown algorithm '" +
                              a.get<std::string>() + "'");
  }

  if (doc.contains("output_dir")) {
    std::filesystem::path p = doc.at("output_dir").get<std::string>();
    cfg.output_dir = p.is_relative() ? base_dir / p : p;
  }
  if (doc.contains("params")) {
    cfg.params = parse_params(doc.at("params"), "experiment.params");
  }
  if (doc.contains("grid")) {
    cfg.grid = parse_grid(doc.at("grid"), cfg.n_train, "experiment.grid");
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  require_config(in.good(), "cannot open experiment config: " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(file.string() + ": invalid JSON: " + e.what());
  }
  return parse_experiment_config(doc, file.parent_path());
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  require_config(!cfg.algorithms.empty(),
                 "experiment: no recognized algorithms requested");
  if (cfg.grid) return run_grid(cfg);
  ResolvedParams resolved =
      resolve_params(cfg, model_lattice(cfg.model).rank());

  RandomStream root(cfg.seed);
  std::size_t per_trial = cfg.algorithms.size();
  std::vector<TrialRow> rows(cfg.n_trials * per_trial);
  parallel_for(cfg.n_trials, [&](std::size_t t) {
    RandomStream stream = root.split(t);
    TrainingSet train = sample_training_set(cfg.model, cfg.n_train, stream);
    auto [query, truth] = sample_pair(cfg.model, stream);
    for (std::size_t a = 0; a < per_trial; ++a) {
      rows[t * per_trial + a] = run_algorithm(t, cfg.algorithms[a], query,
                                              truth, train, cfg, resolved);
    }
  });

  ExperimentResult result;
  result.rows = std::move(rows);
  result.csv = rows_csv(result.rows);

  json metrics = json::object();
  bool admm_requested = false;
  std::size_t admm_converged = 0, admm_rows = 0;
  for (const std::string& name : cfg.algorithms) {
    std::vector<double> dice, err;
    std::size_t failures = 0;
    for (const TrialRow& row : result.rows) {
      if (row.algorithm != name) continue;
      if (row.failed) {
        ++failures;
        continue;
      }
      dice.push_back(row.dice);
      err.push_back(row.pixel_error);
      if (name == "admm" && row.converged) ++admm_converged;
    }
    json entry{{"dice", stats_json(dice)},
               {"pixel_error", stats_json(err)},
               {"failures", failures}};
    if (name == "admm") {
      admm_requested = true;
      admm_rows = dice.size() + failures;
      entry["converged_trials"] = admm_converged;
    }
    metrics[name] = std::move(entry);
  }
  result.admm_all_nonconverged = admm_requested && admm_converged == 0 &&
                                 admm_rows > 0;
  result.summary = json{{"seed", cfg.seed},
                        {"n_train", cfg.n_train},
                        {"n_trials", cfg.n_trials},
                        {"algorithms", cfg.algorithms},
                        {"metrics", std::move(metrics)}};

  if (cfg.output_dir) {
    std::filesystem::create_directories(*cfg.output_dir);
    write_text(*cfg.output_dir / "results.csv", result.csv);
    write_text(*cfg.output_dir / "summary.json", result.summary.dump(2) + "\n");
  }
  return result;
}

}  // namespace pseg
