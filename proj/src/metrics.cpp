#include "pseg/metrics.hpp"

#include "pseg/errors.hpp"
#include "pseg/multipoint.hpp"

namespace pseg {

double dice_overlap(const LabelImage& a, const LabelImage& b) {
  // Same arithmetic as the relaxed overlap so the two agree bit-for-bit on
  // hard inputs.
  return soft_dice(RelaxedLabelImage::from_labels(a),
                   RelaxedLabelImage::from_labels(b));
}

double pixel_error_rate(const LabelImage& a, const LabelImage& b) {
  require_contract(a.lattice == b.lattice, "pixel error: lattice mismatch");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (a.labels[i] != b.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(a.labels.size());
}

LabelImage majority_vote_baseline(const TrainingSet& train) {
  train.validate();
  const Lattice& lattice = train.lattice();
  std::vector<std::int8_t> out(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    long sum = 0;
    for (const LabelImage& lab : train.labels) sum += lab.labels[i];
    out[i] = sum >= 0 ? std::int8_t{1} : std::int8_t{-1};
  }
  return LabelImage(lattice, std::move(out));
}

}  // namespace pseg
