#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "pseg/lattice.hpp"
#include "pseg/random.hpp"

namespace pseg {

enum class NoiseFamily { kGaussian, kUniform };

// Zero-mean noise with sub-Gaussian parameter sigma: N(0, sigma^2) or
// Uniform[-sigma, sigma]. Both satisfy E[e^{sX}] <= e^{s^2 sigma^2 / 2}.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::kGaussian;
  double sigma = 0.0;

  double sample(RandomStream& rng) const;

  bool operator==(const NoiseSpec& other) const = default;
};

struct MixtureComponent {
  double weight = 0.0;
  std::vector<double> mean;
  std::int8_t label = 1;

  bool operator==(const MixtureComponent& other) const = default;
};

// Mixture of mean-patch/label components plus shared additive noise; one of
// these sits at every pixel of a PointwiseModel.
struct PixelMixtureModel {
  std::vector<MixtureComponent> components;
  NoiseSpec noise;

  bool operator==(const PixelMixtureModel& other) const = default;
};

// Per-pixel mixture models over a lattice, together with the declared
// minimum component weight and the neighborhood within which components
// must repeat (checked by verify_jigsaw).
class PointwiseModel {
 public:
  PointwiseModel(Lattice lattice, PatchShape patch,
                 std::vector<PixelMixtureModel> pixel_models, double rho_min,
                 Neighborhood jigsaw_neighborhood);

  const Lattice& lattice() const { return lattice_; }
  const PatchShape& patch() const { return patch_; }
  const PixelMixtureModel& pixel_model(std::size_t pixel) const {
    return pixel_models_[pixel];
  }
  const std::vector<PixelMixtureModel>& pixel_models() const {
    return pixel_models_;
  }
  double rho_min() const { return rho_min_; }
  const Neighborhood& jigsaw_neighborhood() const { return jigsaw_neighborhood_; }
  const NoiseSpec& noise() const { return pixel_models_.front().noise; }

  // C_max: the largest component count at any pixel.
  std::size_t component_count_max() const;

 private:
  Lattice lattice_;
  PatchShape patch_;
  std::vector<PixelMixtureModel> pixel_models_;
  double rho_min_ = 0.0;
  Neighborhood jigsaw_neighborhood_ = Neighborhood::box(0);
};

struct JigsawViolation {
  std::size_t pixel = 0;
  std::size_t component = 0;
};

struct JigsawReport {
  bool holds = true;
  std::vector<JigsawViolation> violations;
};

// Checks that every component at pixel i reappears (same mean and label,
// weight >= rho_min) at some neighbor in the model's declared neighborhood.
// Mean equality is exact up to 1e-12 per entry.
JigsawReport verify_jigsaw(const PointwiseModel& model);

// Builds a model whose pixels share one mixture model within each block of
// side `block_side` per axis. `block_components` holds one component table
// per block in row-major block order, or a single table shared by all
// blocks. The declared neighborhood is the centered box of radius
// `block_side`, which covers the whole block of any pixel, so the returned
// model always passes verify_jigsaw. Component means must be scalar.
PointwiseModel build_block_model(
    const Lattice& lattice, int block_side,
    const std::vector<std::vector<MixtureComponent>>& block_components,
    const NoiseSpec& noise);

// How a relaxed label patch distance enters the perturbation kernel
// exp(-alpha * d): pixel-count (Hamming) or one minus soft Dice overlap.
enum class LabelDistance { kHamming, kSoftDiceComplement };

struct LatentSource {
  double probability = 0.0;
  LabelImage labels;
};

// Hierarchical generative model: a canonical label image is drawn among k
// sources, perturbed pixelwise, and mapped to intensities plus noise.
class LatentSourceModel {
 public:
  LatentSourceModel(std::vector<LatentSource> sources, double alpha,
                    LabelDistance distance, PatchShape label_patch,
                    double foreground_intensity, double background_intensity,
                    NoiseSpec noise);

  const std::vector<LatentSource>& sources() const { return sources_; }
  std::size_t source_count() const { return sources_.size(); }
  double alpha() const { return alpha_; }
  LabelDistance distance() const { return distance_; }
  const PatchShape& label_patch() const { return label_patch_; }
  double intensity_for(std::int8_t label) const {
    return label > 0 ? foreground_intensity_ : background_intensity_;
  }
  double foreground_intensity() const { return foreground_intensity_; }
  double background_intensity() const { return background_intensity_; }
  const NoiseSpec& noise() const { return noise_; }
  const Lattice& lattice() const { return sources_.front().labels.lattice; }

  // Per-pixel flip probability under the Hamming kernel:
  // exp(-alpha) / (1 + exp(-alpha)).
  double flip_probability() const;

 private:
  std::vector<LatentSource> sources_;
  double alpha_ = 0.0;
  LabelDistance distance_ = LabelDistance::kHamming;
  PatchShape label_patch_;
  double foreground_intensity_ = 1.0;
  double background_intensity_ = 0.0;
  NoiseSpec noise_;
};

// n intensity-label image pairs on a common lattice.
struct TrainingSet {
  std::vector<Image> intensities;
  std::vector<LabelImage> labels;

  std::size_t size() const { return intensities.size(); }
  const Lattice& lattice() const { return intensities.front().lattice; }

  void push_back(Image intensity, LabelImage label);
  void validate() const;
};

// Draws one intensity-label pair. Requires scalar component means: each
// pixel independently picks a component, takes its label, and emits the
// scalar mean plus noise, so patches extracted from the composed image are
// mean-patch plus i.i.d. noise.
std::pair<Image, LabelImage> sample_pointwise_pair(const PointwiseModel& model,
                                                   RandomStream& rng);

struct LatentSamplePair {
  Image intensity;
  LabelImage labels;
  std::size_t source = 0;
};

// Draws source g ~ pi, flips each pixel of the source labels independently
// with probability exp(-alpha)/(1+exp(-alpha)), then maps labels to
// intensities plus noise. Exact sampling exists only for the Hamming
// distance; other distance kinds are rejected.
LatentSamplePair sample_latent_source_pair(const LatentSourceModel& model,
                                           RandomStream& rng);

TrainingSet sample_training_set(const PointwiseModel& model, std::size_t n,
                                RandomStream& rng);
TrainingSet sample_training_set(const LatentSourceModel& model, std::size_t n,
                                RandomStream& rng);

using GenerativeModel = std::variant<PointwiseModel, LatentSourceModel>;

std::pair<Image, LabelImage> sample_pair(const GenerativeModel& model,
                                         RandomStream& rng);
TrainingSet sample_training_set(const GenerativeModel& model, std::size_t n,
                                RandomStream& rng);
const Lattice& model_lattice(const GenerativeModel& model);

}  // namespace pseg
