#include "ilseg/losses.hpp"

#include <cmath>

namespace ilseg {

template <class T>
ScalarLoss<T> generalized_dice_loss(const std::vector<T>& pred, const std::vector<T>& target) {
    if (pred.size() != target.size() || pred.empty())
        throw DataError("generalized_dice_loss: shape mismatch");
    constexpr double eps = 1e-6;
    const size_t n = pred.size();

    double sum_r_fg = 0.0, sum_r_bg = 0.0;
    double inter_fg = 0.0, inter_bg = 0.0;
    double sum_p_fg = 0.0, sum_p_bg = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double p = static_cast<double>(pred[i]);
        const double r = static_cast<double>(target[i]);
        sum_r_fg += r;
        sum_r_bg += 1.0 - r;
        inter_fg += r * p;
        inter_bg += (1.0 - r) * (1.0 - p);
        sum_p_fg += p;
        sum_p_bg += 1.0 - p;
    }
    const double w_fg = 1.0 / (sum_r_fg * sum_r_fg + eps);
    const double w_bg = 1.0 / (sum_r_bg * sum_r_bg + eps);
    const double num = w_fg * inter_fg + w_bg * inter_bg;
    const double den = w_fg * (sum_r_fg + sum_p_fg) + w_bg * (sum_r_bg + sum_p_bg);

    ScalarLoss<T> out;
    out.value = 1.0 - 2.0 * num / den;
    out.grad.resize(n);
    const double dden = w_fg - w_bg;  // d den / d p_i, same for every voxel
    const double inv_den2 = 1.0 / (den * den);
    for (size_t i = 0; i < n; ++i) {
        const double r = static_cast<double>(target[i]);
        const double dnum = w_fg * r - w_bg * (1.0 - r);
        out.grad[i] = static_cast<T>(-2.0 * (dnum * den - num * dden) * inv_den2);
    }
    return out;
}

template <class T>
ScalarLoss<T> soft_bce(const std::vector<T>& pred, const std::vector<T>& target) {
    if (pred.size() != target.size() || pred.empty())
        throw DataError("soft_bce: shape mismatch");
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    const size_t n = pred.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    ScalarLoss<T> out;
    out.grad.resize(n);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double y = static_cast<double>(target[i]);
        const double p_raw = static_cast<double>(pred[i]);
        const double p = std::min(hi, std::max(lo, p_raw));
        acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        // Clamped voxels sit on a flat of the clamp, so their gradient is 0.
        const double g = (p_raw > lo && p_raw < hi) ? (-y / p + (1.0 - y) / (1.0 - p)) * inv_n
                                                    : 0.0;
        out.grad[i] = static_cast<T>(g);
    }
    out.value = acc * inv_n;
    return out;
}

template <class T>
CombinedLoss<T> combined_loss(const Tensor5<T>& probs, const Tensor5<T>& y_seg,
                              const Tensor5<T>* y_il, double lambda) {
    const int64_t C = probs.dims[1];
    const int64_t S = probs.spatial();
    if (probs.dims[0] != 1) throw DataError("combined_loss: batch must be 1");
    if (y_seg.numel() != S) throw DataError("combined_loss: y_seg shape mismatch");
    if (y_il == nullptr) {
        if (lambda > 0.0 && C > 1)
            throw ConfigError("combined_loss: IL target missing with lambda > 0");
    } else {
        if (C < 2) throw ConfigError("combined_loss: prediction lacks the IL channel");
        if (y_il->numel() != S) throw DataError("combined_loss: y_il shape mismatch");
    }

    auto channel = [&](const Tensor5<T>& t, int64_t c) {
        const T* base = &t.data[static_cast<size_t>(t.offset(0, c))];
        return std::vector<T>(base, base + S);
    };

    CombinedLoss<T> out;
    out.lambda = lambda;
    out.grad_probs = probs.zeros_like();

    ScalarLoss<T> seg = generalized_dice_loss(channel(probs, 0), y_seg.data);
    out.seg_component = seg.value;
    for (int64_t i = 0; i < S; ++i)
        out.grad_probs.data[static_cast<size_t>(i)] = seg.grad[static_cast<size_t>(i)];

    if (y_il != nullptr) {
        ScalarLoss<T> il = soft_bce(channel(probs, 1), y_il->data);
        out.il_component = il.value;
        T* g = &out.grad_probs.data[static_cast<size_t>(out.grad_probs.offset(0, 1))];
        for (int64_t i = 0; i < S; ++i)
            g[i] = static_cast<T>(lambda) * il.grad[static_cast<size_t>(i)];
    }
    out.total = out.seg_component + lambda * out.il_component;
    return out;
}

#define ILSEG_INSTANTIATE_LOSSES(T)                                                         \
    template ScalarLoss<T> generalized_dice_loss<T>(const std::vector<T>&,                  \
                                                    const std::vector<T>&);                 \
    template ScalarLoss<T> soft_bce<T>(const std::vector<T>&, const std::vector<T>&);       \
    template CombinedLoss<T> combined_loss<T>(const Tensor5<T>&, const Tensor5<T>&,         \
                                              const Tensor5<T>*, double);

ILSEG_INSTANTIATE_LOSSES(float)
ILSEG_INSTANTIATE_LOSSES(double)

}  // namespace ilseg
