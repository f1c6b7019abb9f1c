#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pseg/lattice.hpp"
#include "pseg/model.hpp"

namespace pseg {

// Label image relaxed to [-1, 1] per pixel so overlap terms become
// differentiable. Binarization maps v >= 0 to +1.
struct RelaxedLabelImage {
  Lattice lattice;
  std::vector<double> values;

  RelaxedLabelImage() = default;
  RelaxedLabelImage(Lattice lat, std::vector<double> vals);

  double at(std::size_t flat) const { return values[flat]; }
  LabelImage binarize() const;
  static RelaxedLabelImage from_labels(const LabelImage& labels);
};

// 2<L~,G~> / (<L~,L~> + <G~,G~>) with L~ = (L+1)/2. Returns 1 when both
// images are all background (0/0 case).
double soft_dice(const RelaxedLabelImage& a, const RelaxedLabelImage& b);

// Exact gradient of soft_dice with respect to the first argument's values;
// zero vector in the all-background degenerate case.
std::vector<double> soft_dice_grad(const RelaxedLabelImage& a,
                                   const RelaxedLabelImage& b);

double label_distance(const RelaxedLabelImage& a, const LabelImage& b,
                      LabelDistance kind);

// log( (1/n) sum_u exp(-alpha * d(L, L_u)) ): how compatible a relaxed label
// image is with the training label images under the perturbation kernel.
// Computed max-factored for stability.
double label_prior_score(const RelaxedLabelImage& labels,
                         const std::vector<LabelImage>& train_labels,
                         double alpha, LabelDistance distance);

// Softmax weights w_u over training label images, proportional to
// exp(-alpha * d(L, L_u)); they sum to 1.
std::vector<double> label_prior_weights(const RelaxedLabelImage& labels,
                                        const std::vector<LabelImage>& train_labels,
                                        double alpha, LabelDistance distance);

// Gradient of label_prior_score; requires the differentiable soft-Dice
// distance.
std::vector<double> label_prior_grad(const RelaxedLabelImage& labels,
                                     const std::vector<LabelImage>& train_labels,
                                     double alpha);

struct KdeConfig {
  double gamma = 1.0;
  Neighborhood search = Neighborhood::box(1);
  int block_side = 3;
  PatchShape intensity_patch;
  PatchShape label_patch;
};

// Kernel density patch prior, shared per block. Each block's candidate set
// holds the deduplicated training label patches seen in the block's search
// window, each keeping every associated intensity patch (the kernel sums
// over (u, j) pairs, so intensity multiplicity is preserved). Candidates are
// ordered lexicographically with +1 ranked before -1, so argmax ties resolve
// toward foreground.
class KdePatchPrior {
 public:
  struct Candidate {
    std::vector<std::int8_t> labels;
    std::vector<std::vector<double>> intensity_patches;
  };

  static KdePatchPrior build(const TrainingSet& train, const Lattice& lattice,
                             const KdeConfig& cfg);

  const KdeConfig& config() const { return cfg_; }
  const Lattice& lattice() const { return lattice_; }
  std::size_t block_count() const { return blocks_.size(); }
  std::size_t block_of(std::size_t pixel) const { return block_of_pixel_[pixel]; }
  const std::vector<Candidate>& candidates(std::size_t block) const {
    return blocks_[block];
  }

  // log sum_{(u,j): L_u[j] = candidate} exp(-gamma ||query - Y_u[j]||^2),
  // max-factored; the label-independent Gaussian normalizer is dropped.
  double candidate_log_score(std::size_t block, std::size_t candidate,
                             std::span<const double> query) const;

 private:
  KdeConfig cfg_;
  Lattice lattice_;
  std::vector<std::vector<Candidate>> blocks_;
  std::vector<std::size_t> block_of_pixel_;
};

// Score of a label patch under the block's kernel density estimate;
// -infinity when the patch is not one of the block's candidates.
double kde_log_score(const KdePatchPrior& prior, std::span<const double> query,
                     std::span<const std::int8_t> label_patch,
                     std::size_t block);

struct AdmmConfig {
  double alpha = 0.0;   // global pull toward training label images
  double beta = 1.0;    // consensus penalty
  double gamma = 1.0;   // kernel bandwidth
  PatchShape intensity_patch;                      // d
  PatchShape label_patch;                          // d'
  Neighborhood search = Neighborhood::box(1);      // N
  int block_side = 3;
  LabelDistance distance = LabelDistance::kSoftDiceComplement;
  int max_outer_iterations = 50;
  double primal_tolerance = 1e-3;
  double step_size = 0.1;       // merge gradient step, halved on decrease
  int inner_iterations = 10;    // merge gradient iterations per outer pass
  bool freeze_duals = false;
  enum class Init { kWeightedMajority, kColdStart };
  Init init = Init::kWeightedMajority;
  std::uint64_t seed = 0;  // reserved; all updates are deterministic
};

// Optimization variables: the relaxed label image L, one local label-patch
// estimate and scaled dual per pixel.
struct AdmmState {
  RelaxedLabelImage relaxed;
  std::vector<std::vector<std::int8_t>> local_estimates;
  std::vector<std::size_t> local_candidate_index;
  std::vector<std::vector<double>> duals;
  int iteration = 0;
};

// For each pixel, picks the candidate label patch maximizing
// (1/|I|) * kde_log_score - (beta/2) ||xi - (L[i] + u_i)||^2. Pixels are
// independent; ties go to the smallest candidate index.
void update_local_estimates(AdmmState& state, const Image& query,
                            const KdePatchPrior& prior, const AdmmConfig& cfg,
                            int workers = 0);

// Merges local estimates into L. With alpha = 0 this is the closed form:
// each pixel becomes the clipped average of the (xi_i - u_i) entries of every
// patch covering it. With alpha > 0, projected gradient ascent on
// label_prior_score(L) - (beta/2) sum_i ||L[i] - xi_i + u_i||^2.
void merge_local_estimates(AdmmState& state,
                           const std::vector<LabelImage>& train_labels,
                           const AdmmConfig& cfg);

// The two merge strategies, callable directly so they can be checked against
// each other (at alpha = 0 the gradient path run to convergence must land on
// the closed form).
void merge_closed_form(AdmmState& state, const AdmmConfig& cfg);
void merge_projected_gradient(AdmmState& state,
                              const std::vector<LabelImage>& train_labels,
                              const AdmmConfig& cfg, int iterations);

// Value of the merge-step objective F(L;alpha) - (beta/2) sum_i
// ||L[i] - xi_i + u_i||^2 at the state's current L.
double merge_objective(const AdmmState& state,
                       const std::vector<LabelImage>& train_labels,
                       const AdmmConfig& cfg);

// Scaled dual ascent: u_i += L[i] - xi_i.
void update_duals(AdmmState& state, const AdmmConfig& cfg);

// max_i ||L[i] - xi_i||_inf.
double primal_residual(const AdmmState& state, const AdmmConfig& cfg);

struct AdmmDiagnostics {
  std::vector<double> primal_residuals;
  std::vector<double> objectives;
  bool converged = false;
  int iterations = 0;
};

struct AdmmResult {
  LabelImage labels;
  RelaxedLabelImage relaxed;
  AdmmDiagnostics diagnostics;
};

// Full multipoint segmentation: initialize L (weighted-majority voting with
// theta = gamma, or cold start), then iterate local estimation, merging, and
// dual updates until the primal residual falls below tolerance. On
// non-convergence, returns the best (smallest-residual) iterate with the
// converged flag unset.
AdmmResult admm_segment(const Image& query, const TrainingSet& train,
                        const AdmmConfig& cfg, int workers = 0);

}  // namespace pseg
