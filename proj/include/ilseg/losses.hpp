#pragma once

#include "ilseg/tensor.hpp"

namespace ilseg {

template <class T>
struct ScalarLoss {
    double value = 0.0;
    std::vector<T> grad;  // d value / d pred, per element
};

// Two-class generalized Dice loss with foreground = pred and background =
// 1 - pred; class weights w_l = 1/((sum_n r_ln)^2 + eps), eps = 1e-6.
template <class T>
ScalarLoss<T> generalized_dice_loss(const std::vector<T>& pred, const std::vector<T>& target);

// Mean, over voxels, of -[y log p + (1-y) log(1-p)] with soft targets y and
// pred clamped to [1e-7, 1-1e-7].
template <class T>
ScalarLoss<T> soft_bce(const std::vector<T>& pred, const std::vector<T>& target);

// L = L_seg + lambda * L_IL over the (up to) two prediction channels.
template <class T>
struct CombinedLoss {
    double total = 0.0;
    double seg_component = 0.0;
    double il_component = 0.0;
    double lambda = 0.0;
    Tensor5<T> grad_probs;  // shape-matches the prediction tensor
};

// probs: [1, C, Z, Y, X] with channel 0 = segmentation and channel 1 = the
// intensity-likelihood head. y_il == nullptr selects Seg mode (IL term
// skipped; probs must then have a single channel). With y_il given, probs
// must carry the IL channel.
template <class T>
CombinedLoss<T> combined_loss(const Tensor5<T>& probs, const Tensor5<T>& y_seg,
                              const Tensor5<T>* y_il, double lambda);

}  // namespace ilseg
