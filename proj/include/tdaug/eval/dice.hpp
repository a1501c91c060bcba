#pragma once

#include <string>
#include <vector>

#include "tdaug/data/volume.hpp"

namespace tdaug {

// Dice similarity over binary 3D masks: 2|P ∩ G| / (|P| + |G|).
// Convention: both masks empty -> 1.0 (perfect agreement on absence);
// one empty, other not -> 0.0.
double dice_binary(const std::vector<LabelMat>& pred, const std::vector<LabelMat>& gt,
                   int class_id);

// Per-foreground-structure Dice between predicted and ground-truth volumes.
std::vector<double> dice_per_structure(const LabelVolume& pred, const LabelVolume& gt);

}  // namespace tdaug
