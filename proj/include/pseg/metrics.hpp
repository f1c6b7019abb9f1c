#pragma once

#include "pseg/lattice.hpp"
#include "pseg/model.hpp"

namespace pseg {

// Dice overlap of two hard segmentations; both-all-background counts as 1.
double dice_overlap(const LabelImage& a, const LabelImage& b);

// Fraction of pixels whose labels differ.
double pixel_error_rate(const LabelImage& a, const LabelImage& b);

// Per-pixel majority vote over the training label images, ignoring the
// intensities entirely; mean >= 0 binarizes to +1.
LabelImage majority_vote_baseline(const TrainingSet& train);

}  // namespace pseg
