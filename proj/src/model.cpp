#include "pseg/model.hpp"

#include <algorithm>
#include <cmath>

namespace pseg {

namespace {

constexpr double kWeightSumTolerance = 1e-9;
constexpr double kMeanMatchTolerance = 1e-12;

void validate_pixel_model(const PixelMixtureModel& m, std::size_t patch_dim,
                          double rho_min) {
  require_contract(!m.components.empty(),
                   "pixel mixture model needs at least one component");
  double total = 0.0;
  for (const MixtureComponent& c : m.components) {
    require_contract(c.weight > 0.0, "component weights must be positive");
    require_contract(c.weight >= rho_min,
                     "component weight below declared rho_min");
    require_contract(c.label == 1 || c.label == -1,
                     "component labels must be +1 or -1");
    require_contract(c.mean.size() == patch_dim,
                     "component mean length must match the patch shape");
    total += c.weight;
  }
  require_contract(std::abs(total - 1.0) <= kWeightSumTolerance,
                   "component weights must sum to 1");
  require_contract(m.noise.sigma >= 0.0, "noise sigma must be nonnegative");
}

bool means_match(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (std::abs(a[t] - b[t]) > kMeanMatchTolerance) return false;
  }
  return true;
}

}  // namespace

double NoiseSpec::sample(RandomStream& rng) const {
  switch (family) {
    case NoiseFamily::kGaussian:
      return sigma * rng.gaussian();
    case NoiseFamily::kUniform:
      return rng.uniform_symmetric(sigma);
  }
  return 0.0;
}

PointwiseModel::PointwiseModel(Lattice lattice, PatchShape patch,
                               std::vector<PixelMixtureModel> pixel_models,
                               double rho_min, Neighborhood jigsaw_neighborhood)
    : lattice_(std::move(lattice)),
      patch_(std::move(patch)),
      pixel_models_(std::move(pixel_models)),
      rho_min_(rho_min),
      jigsaw_neighborhood_(std::move(jigsaw_neighborhood)) {
  require_contract(pixel_models_.size() == lattice_.size(),
                   "every pixel needs a mixture model");
  require_contract(rho_min_ > 0.0 && rho_min_ <= 1.0,
                   "rho_min must lie in (0, 1]");
  require_contract(patch_.dim() >= 1, "patch shape must be nonempty");
  for (const auto& m : pixel_models_) {
    validate_pixel_model(m, patch_.dim(), rho_min_);
    require_contract(m.noise == pixel_models_.front().noise,
                     "all pixels must share one noise spec");
  }
}

std::size_t PointwiseModel::component_count_max() const {
  std::size_t cmax = 0;
  for (const auto& m : pixel_models_) {
    cmax = std::max(cmax, m.components.size());
  }
  return cmax;
}

JigsawReport verify_jigsaw(const PointwiseModel& model) {
  JigsawReport report;
  const Lattice& lattice = model.lattice();
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const auto neighbors =
        neighborhood_pixels(lattice, i, model.jigsaw_neighborhood());
    const auto& components = model.pixel_model(i).components;
    for (std::size_t c = 0; c < components.size(); ++c) {
      bool found = false;
      for (std::size_t j : neighbors) {
        for (const MixtureComponent& other : model.pixel_model(j).components) {
          if (other.label == components[c].label &&
              other.weight >= model.rho_min() &&
              means_match(other.mean, components[c].mean)) {
            found = true;
            break;
          }
        }
        if (found) break;
      }
      if (!found) {
        report.holds = false;
        report.violations.push_back({i, c});
      }
    }
  }
  return report;
}

PointwiseModel build_block_model(
    const Lattice& lattice, int block_side,
    const std::vector<std::vector<MixtureComponent>>& block_components,
    const NoiseSpec& noise) {
  require_contract(block_side >= 1, "block side must be at least 1");
  require_contract(!block_components.empty(), "component table must be nonempty");

  std::size_t block_count = 1;
  std::vector<int> blocks_per_axis(static_cast<std::size_t>(lattice.rank()));
  for (int a = 0; a < lattice.rank(); ++a) {
    blocks_per_axis[a] = (lattice.dims()[a] + block_side - 1) / block_side;
    block_count *= static_cast<std::size_t>(blocks_per_axis[a]);
  }
  require_contract(
      block_components.size() == 1 || block_components.size() == block_count,
      "need one component table per block, or a single shared table");

  double rho_min = 1.0;
  for (const auto& table : block_components) {
    require_contract(!table.empty(), "empty component table");
    for (const MixtureComponent& c : table) {
      require_contract(c.mean.size() == 1,
                       "block model components use scalar means");
      rho_min = std::min(rho_min, c.weight);
    }
  }

  std::vector<PixelMixtureModel> pixel_models(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    Coord c = lattice.unflatten(i);
    std::size_t block = 0;
    for (int a = 0; a < lattice.rank(); ++a) {
      block = block * static_cast<std::size_t>(blocks_per_axis[a]) +
              static_cast<std::size_t>(c[a] / block_side);
    }
    const auto& table = block_components.size() == 1 ? block_components[0]
                                                     : block_components[block];
    pixel_models[i] = PixelMixtureModel{table, noise};
  }

  return PointwiseModel(lattice, PatchShape::single_pixel(),
                        std::move(pixel_models), rho_min,
                        Neighborhood::box(block_side));
}

LatentSourceModel::LatentSourceModel(std::vector<LatentSource> sources,
                                     double alpha, LabelDistance distance,
                                     PatchShape label_patch,
                                     double foreground_intensity,
                                     double background_intensity,
                                     NoiseSpec noise)
    : sources_(std::move(sources)),
      alpha_(alpha),
      distance_(distance),
      label_patch_(std::move(label_patch)),
      foreground_intensity_(foreground_intensity),
      background_intensity_(background_intensity),
      noise_(noise) {
  require_contract(!sources_.empty(), "need at least one latent source");
  require_contract(alpha_ >= 0.0, "alpha must be nonnegative");
  require_contract(noise_.sigma >= 0.0, "noise sigma must be nonnegative");
  double total = 0.0;
  for (const LatentSource& s : sources_) {
    require_contract(s.probability > 0.0, "source probabilities must be positive");
    require_contract(s.labels.lattice == sources_.front().labels.lattice,
                     "all latent label images must share one lattice");
    total += s.probability;
  }
  require_contract(std::abs(total - 1.0) <= kWeightSumTolerance,
                   "source probabilities must sum to 1");
}

double LatentSourceModel::flip_probability() const {
  double e = std::exp(-alpha_);
  return e / (1.0 + e);
}

void TrainingSet::push_back(Image intensity, LabelImage label) {
  require_contract(intensity.lattice == label.lattice,
                   "pair images must share a lattice");
  if (!intensities.empty()) {
    require_contract(intensity.lattice == lattice(),
                     "training pairs must share one lattice");
  }
  intensities.push_back(std::move(intensity));
  labels.push_back(std::move(label));
}

void TrainingSet::validate() const {
  require_contract(!intensities.empty(), "training set must be nonempty");
  require_contract(intensities.size() == labels.size(),
                   "intensity/label counts differ");
  for (std::size_t u = 0; u < size(); ++u) {
    require_contract(intensities[u].lattice == lattice() &&
                         labels[u].lattice == lattice(),
                     "training pairs must share one lattice");
  }
}

std::pair<Image, LabelImage> sample_pointwise_pair(const PointwiseModel& model,
                                                   RandomStream& rng) {
  require_contract(model.patch().dim() == 1,
                   "sampling needs scalar (single-pixel) component means");
  const Lattice& lattice = model.lattice();
  std::vector<double> values(lattice.size());
  std::vector<std::int8_t> labels(lattice.size());
  std::vector<double> weights;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const auto& components = model.pixel_model(i).components;
    weights.resize(components.size());
    for (std::size_t c = 0; c < components.size(); ++c) {
      weights[c] = components[c].weight;
    }
    std::size_t c = rng.categorical(weights);
    labels[i] = components[c].label;
    values[i] = components[c].mean[0] + model.noise().sample(rng);
  }
  return {Image(lattice, std::move(values)),
          LabelImage(lattice, std::move(labels))};
}

LatentSamplePair sample_latent_source_pair(const LatentSourceModel& model,
                                           RandomStream& rng) {
  require_contract(model.distance() == LabelDistance::kHamming,
                   "exact sampling exists only for the Hamming distance");
  const Lattice& lattice = model.lattice();

  std::vector<double> probs(model.source_count());
  for (std::size_t g = 0; g < model.source_count(); ++g) {
    probs[g] = model.sources()[g].probability;
  }
  std::size_t g = rng.categorical(probs);
  const LabelImage& canonical = model.sources()[g].labels;

  double flip = model.flip_probability();
  std::vector<std::int8_t> labels(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    bool flipped = rng.uniform01() < flip;
    labels[i] = flipped ? static_cast<std::int8_t>(-canonical.at(i))
                        : canonical.at(i);
  }

  std::vector<double> values(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    values[i] = model.intensity_for(labels[i]) + model.noise().sample(rng);
  }

  return {Image(lattice, std::move(values)),
          LabelImage(lattice, std::move(labels)), g};
}

TrainingSet sample_training_set(const PointwiseModel& model, std::size_t n,
                                RandomStream& rng) {
  require_contract(n >= 1, "training set size must be at least 1");
  TrainingSet train;
  for (std::size_t u = 0; u < n; ++u) {
    auto [intensity, labels] = sample_pointwise_pair(model, rng);
    train.push_back(std::move(intensity), std::move(labels));
  }
  return train;
}

TrainingSet sample_training_set(const LatentSourceModel& model, std::size_t n,
                                RandomStream& rng) {
  require_contract(n >= 1, "training set size must be at least 1");
  TrainingSet train;
  for (std::size_t u = 0; u < n; ++u) {
    LatentSamplePair pair = sample_latent_source_pair(model, rng);
    train.push_back(std::move(pair.intensity), std::move(pair.labels));
  }
  return train;
}

std::pair<Image, LabelImage> sample_pair(const GenerativeModel& model,
                                         RandomStream& rng) {
  if (const auto* pw = std::get_if<PointwiseModel>(&model)) {
    return sample_pointwise_pair(*pw, rng);
  }
  LatentSamplePair pair =
      sample_latent_source_pair(std::get<LatentSourceModel>(model), rng);
  return {std::move(pair.intensity), std::move(pair.labels)};
}

TrainingSet sample_training_set(const GenerativeModel& model, std::size_t n,
                                RandomStream& rng) {
  if (const auto* pw = std::get_if<PointwiseModel>(&model)) {
    return sample_training_set(*pw, n, rng);
  }
  return sample_training_set(std::get<LatentSourceModel>(model), n, rng);
}

const Lattice& model_lattice(const GenerativeModel& model) {
  if (const auto* pw = std::get_if<PointwiseModel>(&model)) {
    return pw->lattice();
  }
  return std::get<LatentSourceModel>(model).lattice();
}

}  // namespace pseg
