#include "pseg/multipoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "pseg/errors.hpp"
#include "pseg/parallel.hpp"
#include "pseg/pointwise.hpp"

namespace pseg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clip_unit(double v) { return std::min(1.0, std::max(-1.0, v)); }

// Flat indices of the patch pixels at `center`, boundary-resolved, in offset
// order. Entry t is the pixel that stores L[center][t].
std::vector<std::size_t> patch_targets(const Lattice& lattice,
                                       std::size_t center,
                                       const PatchShape& shape) {
  Coord base = lattice.unflatten(center);
  std::vector<std::size_t> targets(shape.dim());
  for (std::size_t t = 0; t < shape.dim(); ++t) {
    Coord c = base;
    for (int a = 0; a < lattice.rank(); ++a) c[a] += shape.offsets[t][a];
    targets[t] = lattice.flatten(resolve_boundary(lattice, c, shape.boundary));
  }
  return targets;
}

// Candidate order: lexicographic with +1 ranked before -1, so the
// smallest-index tie rule favors foreground.
bool candidate_before(const std::vector<std::int8_t>& a,
                      const std::vector<std::int8_t>& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] != b[k]) return a[k] > b[k];
  }
  return false;
}

void check_admm_config(const AdmmConfig& cfg) {
  require_config(cfg.alpha >= 0.0, "admm: alpha must be >= 0");
  require_config(cfg.beta >= 0.0, "admm: beta must be >= 0");
  require_config(cfg.gamma > 0.0, "admm: gamma must be > 0");
  require_config(cfg.intensity_patch.dim() > 0, "admm: empty intensity patch");
  require_config(cfg.label_patch.dim() > 0, "admm: empty label patch");
  require_config(cfg.block_side >= 1, "admm: block side must be >= 1");
  require_config(cfg.max_outer_iterations >= 1, "admm: need >= 1 outer iteration");
  require_config(cfg.primal_tolerance > 0.0, "admm: tolerance must be > 0");
  require_config(cfg.step_size > 0.0, "admm: step size must be > 0");
  require_config(cfg.inner_iterations >= 1, "admm: need >= 1 inner iteration");
}

}  // namespace

RelaxedLabelImage::RelaxedLabelImage(Lattice lat, std::vector<double> vals)
    : lattice(std::move(lat)), values(std::move(vals)) {
  require_contract(values.size() == lattice.size(),
                   "relaxed label image: value count != lattice size");
  for (double v : values) {
    require_contract(std::isfinite(v) && v >= -1.0 && v <= 1.0,
                     "relaxed label image: value outside [-1, 1]");
  }
}

LabelImage RelaxedLabelImage::binarize() const {
  std::vector<std::int8_t> labs(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    labs[i] = values[i] >= 0.0 ? std::int8_t{1} : std::int8_t{-1};
  }
  return LabelImage(lattice, std::move(labs));
}

RelaxedLabelImage RelaxedLabelImage::from_labels(const LabelImage& labels) {
  std::vector<double> vals(labels.labels.begin(), labels.labels.end());
  return RelaxedLabelImage(labels.lattice, std::move(vals));
}

double soft_dice(const RelaxedLabelImage& a, const RelaxedLabelImage& b) {
  require_contract(a.lattice == b.lattice, "soft_dice: lattice mismatch");
  double cross = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double x = 0.5 * (a.values[i] + 1.0);
    double y = 0.5 * (b.values[i] + 1.0);
    cross += x * y;
    sa += x * x;
    sb += y * y;
  }
  double den = sa + sb;
  if (den == 0.0) return 1.0;  // both all background
  return 2.0 * cross / den;
}

std::vector<double> soft_dice_grad(const RelaxedLabelImage& a,
                                   const RelaxedLabelImage& b) {
  require_contract(a.lattice == b.lattice, "soft_dice_grad: lattice mismatch");
  std::size_t count = a.values.size();
  double cross = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    double x = 0.5 * (a.values[i] + 1.0);
    double y = 0.5 * (b.values[i] + 1.0);
    cross += x * y;
    sa += x * x;
    sb += y * y;
  }
  double den = sa + sb;
  std::vector<double> grad(count, 0.0);
  if (den == 0.0) return grad;  // constant-1 region
  for (std::size_t i = 0; i < count; ++i) {
    double x = 0.5 * (a.values[i] + 1.0);
    double y = 0.5 * (b.values[i] + 1.0);
    // d(dice)/dx times dx/dL = 1/2.
    grad[i] = 0.5 * (2.0 * y * den - 4.0 * cross * x) / (den * den);
  }
  return grad;
}

double label_distance(const RelaxedLabelImage& a, const LabelImage& b,
                      LabelDistance kind) {
  require_contract(a.lattice == b.lattice, "label_distance: lattice mismatch");
  if (kind == LabelDistance::kSoftDiceComplement) {
    return 1.0 - soft_dice(a, RelaxedLabelImage::from_labels(b));
  }
  // Normalized Hamming on the binarized image.
  LabelImage bin = a.binarize();
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < bin.labels.size(); ++i) {
    if (bin.labels[i] != b.labels[i]) ++mismatches;
  }
  return static_cast<double>(mismatches) / static_cast<double>(bin.labels.size());
}

double label_prior_score(const RelaxedLabelImage& labels,
                         const std::vector<LabelImage>& train_labels,
                         double alpha, LabelDistance distance) {
  require_contract(!train_labels.empty(), "label prior: no training labels");
  std::vector<double> exponents(train_labels.size());
  double max_e = kNegInf;
  for (std::size_t u = 0; u < train_labels.size(); ++u) {
    exponents[u] = -alpha * label_distance(labels, train_labels[u], distance);
    max_e = std::max(max_e, exponents[u]);
  }
  double sum = 0.0;
  for (double e : exponents) sum += std::exp(e - max_e);
  return max_e + std::log(sum / static_cast<double>(train_labels.size()));
}

std::vector<double> label_prior_weights(const RelaxedLabelImage& labels,
                                        const std::vector<LabelImage>& train_labels,
                                        double alpha, LabelDistance distance) {
  require_contract(!train_labels.empty(), "label prior: no training labels");
  std::vector<double> w(train_labels.size());
  double max_e = kNegInf;
  for (std::size_t u = 0; u < train_labels.size(); ++u) {
    w[u] = -alpha * label_distance(labels, train_labels[u], distance);
    max_e = std::max(max_e, w[u]);
  }
  double sum = 0.0;
  for (double& e : w) {
    e = std::exp(e - max_e);
    sum += e;
  }
  for (double& e : w) e /= sum;
  return w;
}

std::vector<double> label_prior_grad(const RelaxedLabelImage& labels,
                                     const std::vector<LabelImage>& train_labels,
                                     double alpha) {
  std::vector<double> w = label_prior_weights(labels, train_labels, alpha,
                                              LabelDistance::kSoftDiceComplement);
  std::vector<double> grad(labels.values.size(), 0.0);
  // d = 1 - dice, so the chain contributes -alpha * w_u * (-dice_grad).
  for (std::size_t u = 0; u < train_labels.size(); ++u) {
    std::vector<double> g =
        soft_dice_grad(labels, RelaxedLabelImage::from_labels(train_labels[u]));
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += alpha * w[u] * g[i];
  }
  return grad;
}

KdePatchPrior KdePatchPrior::build(const TrainingSet& train,
                                   const Lattice& lattice,
                                   const KdeConfig& cfg) {
  train.validate();
  require_contract(train.lattice() == lattice, "kde: training lattice mismatch");
  require_config(cfg.gamma > 0.0, "kde: gamma must be > 0");
  require_config(cfg.block_side >= 1, "kde: block side must be >= 1");
  require_config(cfg.intensity_patch.dim() > 0 && cfg.label_patch.dim() > 0,
                 "kde: empty patch shape");

  KdePatchPrior prior;
  prior.cfg_ = cfg;
  prior.lattice_ = lattice;

  int rank = lattice.rank();
  std::vector<int> grid(rank);
  for (int a = 0; a < rank; ++a) {
    grid[a] = (lattice.dims()[a] + cfg.block_side - 1) / cfg.block_side;
  }
  Lattice block_grid(grid);

  prior.block_of_pixel_.resize(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    Coord c = lattice.unflatten(i);
    Coord b{};
    for (int a = 0; a < rank; ++a) b[a] = c[a] / cfg.block_side;
    prior.block_of_pixel_[i] = block_grid.flatten(b);
  }

  prior.blocks_.resize(block_grid.size());
  for (std::size_t blk = 0; blk < block_grid.size(); ++blk) {
    // All pixels in a block share the kernel density estimate built around
    // the block's center pixel.
    Coord bc = block_grid.unflatten(blk);
    Coord center{};
    for (int a = 0; a < rank; ++a) {
      center[a] = std::min(bc[a] * cfg.block_side + cfg.block_side / 2,
                           lattice.dims()[a] - 1);
    }
    std::size_t center_flat = lattice.flatten(center);
    std::vector<std::size_t> window =
        neighborhood_pixels(lattice, center_flat, cfg.search);

    std::vector<Candidate>& cands = prior.blocks_[blk];
    for (std::size_t u = 0; u < train.size(); ++u) {
      for (std::size_t j : window) {
        std::vector<std::int8_t> lab =
            extract_patch(train.labels[u], j, cfg.label_patch);
        std::vector<double> intens =
            extract_patch(train.intensities[u], j, cfg.intensity_patch);
        auto it = std::find_if(cands.begin(), cands.end(),
                               [&](const Candidate& c) { return c.labels == lab; });
        if (it == cands.end()) {
          cands.push_back(Candidate{std::move(lab), {std::move(intens)}});
        } else {
          it->intensity_patches.push_back(std::move(intens));
        }
      }
    }
    require_contract(!cands.empty(), "kde: empty candidate set for block");
    std::sort(cands.begin(), cands.end(),
              [](const Candidate& a, const Candidate& b) {
                return candidate_before(a.labels, b.labels);
              });
  }
  return prior;
}

double KdePatchPrior::candidate_log_score(std::size_t block,
                                          std::size_t candidate,
                                          std::span<const double> query) const {
  require_contract(block < blocks_.size(), "kde: block id out of range");
  require_contract(candidate < blocks_[block].size(),
                   "kde: candidate index out of range");
  const Candidate& cand = blocks_[block][candidate];
  require_contract(query.size() == cfg_.intensity_patch.dim(),
                   "kde: query patch dimension mismatch");
  double max_e = kNegInf;
  std::vector<double> exponents;
  exponents.reserve(cand.intensity_patches.size());
  for (const std::vector<double>& p : cand.intensity_patches) {
    double e = -cfg_.gamma * squared_distance(query, p);
    exponents.push_back(e);
    max_e = std::max(max_e, e);
  }
  double sum = 0.0;
  for (double e : exponents) sum += std::exp(e - max_e);
  return max_e + std::log(sum);
}

double kde_log_score(const KdePatchPrior& prior, std::span<const double> query,
                     std::span<const std::int8_t> label_patch,
                     std::size_t block) {
  const std::vector<KdePatchPrior::Candidate>& cands = prior.candidates(block);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    if (std::equal(label_patch.begin(), label_patch.end(),
                   cands[c].labels.begin(), cands[c].labels.end())) {
      return prior.candidate_log_score(block, c, query);
    }
  }
  return kNegInf;
}

void update_local_estimates(AdmmState& state, const Image& query,
                            const KdePatchPrior& prior, const AdmmConfig& cfg,
                            int workers) {
  const Lattice& lattice = state.relaxed.lattice;
  std::size_t pixel_count = lattice.size();
  double inv_size = 1.0 / static_cast<double>(pixel_count);
  state.local_estimates.resize(pixel_count);
  state.local_candidate_index.resize(pixel_count);

  parallel_for(pixel_count, [&](std::size_t i) {
    std::vector<double> q = extract_patch(query, i, cfg.intensity_patch);
    std::vector<double> target(cfg.label_patch.dim());
    std::vector<std::size_t> targets =
        patch_targets(lattice, i, cfg.label_patch);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      target[k] = state.relaxed.values[targets[k]] + state.duals[i][k];
    }

    std::size_t block = prior.block_of(i);
    const std::vector<KdePatchPrior::Candidate>& cands = prior.candidates(block);
    std::size_t best = 0;
    double best_score = kNegInf;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      double penalty = 0.0;
      for (std::size_t k = 0; k < target.size(); ++k) {
        double diff = static_cast<double>(cands[c].labels[k]) - target[k];
        penalty += diff * diff;
      }
      double score = inv_size * prior.candidate_log_score(block, c, q) -
                     0.5 * cfg.beta * penalty;
      if (score > best_score) {  // ties keep the smallest candidate index
        best_score = score;
        best = c;
      }
    }
    state.local_estimates[i] = cands[best].labels;
    state.local_candidate_index[i] = best;
  }, workers);
}

void merge_closed_form(AdmmState& state, const AdmmConfig& cfg) {
  const Lattice& lattice = state.relaxed.lattice;
  std::vector<double> sums(lattice.size(), 0.0);
  std::vector<std::size_t> counts(lattice.size(), 0);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    std::vector<std::size_t> targets =
        patch_targets(lattice, i, cfg.label_patch);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      sums[targets[k]] += static_cast<double>(state.local_estimates[i][k]) -
                          state.duals[i][k];
      counts[targets[k]] += 1;
    }
  }
  for (std::size_t p = 0; p < lattice.size(); ++p) {
    if (counts[p] == 0) continue;  // no covering patch: leave the pixel as-is
    state.relaxed.values[p] =
        clip_unit(sums[p] / static_cast<double>(counts[p]));
  }
}

double merge_objective(const AdmmState& state,
                       const std::vector<LabelImage>& train_labels,
                       const AdmmConfig& cfg) {
  const Lattice& lattice = state.relaxed.lattice;
  double value = cfg.alpha > 0.0
                     ? label_prior_score(state.relaxed, train_labels, cfg.alpha,
                                         cfg.distance)
                     : 0.0;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    std::vector<std::size_t> targets =
        patch_targets(lattice, i, cfg.label_patch);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      double diff = state.relaxed.values[targets[k]] -
                    static_cast<double>(state.local_estimates[i][k]) +
                    state.duals[i][k];
      value -= 0.5 * cfg.beta * diff * diff;
    }
  }
  return value;
}

void merge_projected_gradient(AdmmState& state,
                              const std::vector<LabelImage>& train_labels,
                              const AdmmConfig& cfg, int iterations) {
  require_contract(cfg.alpha == 0.0 ||
                       cfg.distance == LabelDistance::kSoftDiceComplement,
                   "gradient merge needs a differentiable label distance");
  const Lattice& lattice = state.relaxed.lattice;
  constexpr int kMaxHalvings = 30;

  double eta = cfg.step_size;
  double current = merge_objective(state, train_labels, cfg);
  for (int it = 0; it < iterations; ++it) {
    // Gradient of the penalty: every patch entry mapping to pixel p pulls
    // L(p) toward xi_i[k] - u_i[k].
    std::vector<double> grad(lattice.size(), 0.0);
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      std::vector<std::size_t> targets =
          patch_targets(lattice, i, cfg.label_patch);
      for (std::size_t k = 0; k < targets.size(); ++k) {
        double diff = state.relaxed.values[targets[k]] -
                      static_cast<double>(state.local_estimates[i][k]) +
                      state.duals[i][k];
        grad[targets[k]] -= cfg.beta * diff;
      }
    }
    if (cfg.alpha > 0.0) {
      std::vector<double> pg =
          label_prior_grad(state.relaxed, train_labels, cfg.alpha);
      for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += pg[p];
    }

    std::vector<double> backup = state.relaxed.values;
    bool moved = false;
    for (int h = 0; h < kMaxHalvings; ++h) {
      for (std::size_t p = 0; p < grad.size(); ++p) {
        state.relaxed.values[p] = clip_unit(backup[p] + eta * grad[p]);
      }
      double trial = merge_objective(state, train_labels, cfg);
      // Accept non-decreasing steps up to floating-point noise. Near the
      // optimum the objective is flat to machine precision while the iterate
      // is still ~sqrt(eps) away; halving on one-ulp decreases would freeze
      // the iterate there.
      if (trial >= current - 1e-12 * (1.0 + std::abs(current))) {
        current = trial;
        moved = true;
        break;
      }
      eta *= 0.5;  // backtrack: objective clearly decreased
    }
    if (!moved) {
      state.relaxed.values = backup;  // no acceptable step; keep the iterate
      break;
    }
  }
}

void merge_local_estimates(AdmmState& state,
                           const std::vector<LabelImage>& train_labels,
                           const AdmmConfig& cfg) {
  if (cfg.alpha == 0.0) {
    merge_closed_form(state, cfg);
  } else {
    merge_projected_gradient(state, train_labels, cfg, cfg.inner_iterations);
  }
}

void update_duals(AdmmState& state, const AdmmConfig& cfg) {
  if (cfg.freeze_duals) return;
  const Lattice& lattice = state.relaxed.lattice;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    std::vector<std::size_t> targets =
        patch_targets(lattice, i, cfg.label_patch);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      state.duals[i][k] += state.relaxed.values[targets[k]] -
                           static_cast<double>(state.local_estimates[i][k]);
    }
  }
}

double primal_residual(const AdmmState& state, const AdmmConfig& cfg) {
  const Lattice& lattice = state.relaxed.lattice;
  double worst = 0.0;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    std::vector<std::size_t> targets =
        patch_targets(lattice, i, cfg.label_patch);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      double diff = std::abs(state.relaxed.values[targets[k]] -
                             static_cast<double>(state.local_estimates[i][k]));
      worst = std::max(worst, diff);
    }
  }
  return worst;
}

AdmmResult admm_segment(const Image& query, const TrainingSet& train,
                        const AdmmConfig& cfg, int workers) {
  check_admm_config(cfg);
  train.validate();
  const Lattice& lattice = query.lattice;
  require_contract(train.lattice() == lattice,
                   "admm: query and training lattices differ");

  KdeConfig kde_cfg;
  kde_cfg.gamma = cfg.gamma;
  kde_cfg.search = cfg.search;
  kde_cfg.block_side = cfg.block_side;
  kde_cfg.intensity_patch = cfg.intensity_patch;
  kde_cfg.label_patch = cfg.label_patch;
  KdePatchPrior prior = KdePatchPrior::build(train, lattice, kde_cfg);

  AdmmState state;
  if (cfg.init == AdmmConfig::Init::kWeightedMajority) {
    PointwiseConfig init_cfg;
    init_cfg.search = cfg.search;
    init_cfg.patch = cfg.intensity_patch;
    init_cfg.theta = cfg.gamma;
    state.relaxed = RelaxedLabelImage::from_labels(
        segment_pointwise(query, train, init_cfg, ScanMode::kNaive, workers));
  } else {
    state.relaxed =
        RelaxedLabelImage::from_labels(LabelImage::constant(lattice, -1));
  }
  state.duals.assign(lattice.size(),
                     std::vector<double>(cfg.label_patch.dim(), 0.0));

  double inv_size = 1.0 / static_cast<double>(lattice.size());
  AdmmResult result;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < cfg.max_outer_iterations; ++outer) {
    state.iteration = outer + 1;
    update_local_estimates(state, query, prior, cfg, workers);
    merge_local_estimates(state, train.labels, cfg);
    double residual = primal_residual(state, cfg);
    update_duals(state, cfg);

    // EPLL-style objective at the current split point (L, xi).
    double objective = label_prior_score(state.relaxed, train.labels,
                                         cfg.alpha, cfg.distance);
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      std::vector<double> q = extract_patch(query, i, cfg.intensity_patch);
      objective += inv_size * prior.candidate_log_score(
                                  prior.block_of(i),
                                  state.local_candidate_index[i], q);
    }
    result.diagnostics.primal_residuals.push_back(residual);
    result.diagnostics.objectives.push_back(objective);
    result.diagnostics.iterations = state.iteration;

    if (residual < best_residual) {
      best_residual = residual;
      result.relaxed = state.relaxed;
    }
    if (residual <= cfg.primal_tolerance) {
      result.diagnostics.converged = true;
      result.relaxed = state.relaxed;
      break;
    }
  }
  result.labels = result.relaxed.binarize();
  return result;
}

}  // namespace pseg
