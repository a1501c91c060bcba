#include "tdaug/eval/dice.hpp"

#include <stdexcept>

namespace tdaug {

double dice_binary(const std::vector<LabelMat>& pred, const std::vector<LabelMat>& gt,
                   int class_id) {
  if (pred.size() != gt.size()) throw std::invalid_argument("dice: depth mismatch");
  long long p_count = 0, g_count = 0, inter = 0;
  for (std::size_t z = 0; z < pred.size(); ++z) {
    if (pred[z].rows() != gt[z].rows() || pred[z].cols() != gt[z].cols())
      throw std::invalid_argument("dice: slice shape mismatch");
    for (Eigen::Index y = 0; y < pred[z].rows(); ++y)
      for (Eigen::Index x = 0; x < pred[z].cols(); ++x) {
        const bool p = pred[z](y, x) == class_id;
        const bool g = gt[z](y, x) == class_id;
        p_count += p;
        g_count += g;
        inter += p && g;
      }
  }
  if (p_count + g_count == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(p_count + g_count);
}

std::vector<double> dice_per_structure(const LabelVolume& pred, const LabelVolume& gt) {
  if (pred.num_classes != gt.num_classes)
    throw std::invalid_argument("dice_per_structure: class count mismatch");
  std::vector<double> out;
  for (int c = 1; c < gt.num_classes; ++c)
    out.push_back(dice_binary(pred.slices, gt.slices, c));
  return out;
}

}  // namespace tdaug
