#pragma once

#include "ilseg/tensor.hpp"

namespace ilseg {

// Differentiable primitives for the 3D U-Net. All forward/backward passes use
// a fixed summation order, so results are bit-reproducible given identical
// inputs. Instantiated for float and double (64-bit mode drives the
// finite-difference gradient checks).

// stride 1; pad is 1 for 3x3x3 kernels and 0 for 1x1x1. x: [n,ic,Z,Y,X],
// w: [oc,ic,kz,ky,kx], b: [oc]; output spatial dim = D + 2*pad - k + 1.
template <class T>
Tensor5<T> conv3d_forward(const Tensor5<T>& x, const Tensor5<T>& w, const std::vector<T>& b,
                          int64_t pad);

template <class T>
struct Conv3dGrads {
    Tensor5<T> gx;
    Tensor5<T> gw;
    std::vector<T> gb;
};

template <class T>
Conv3dGrads<T> conv3d_backward(const Tensor5<T>& x, const Tensor5<T>& w, const Tensor5<T>& gy,
                               int64_t pad);

// Normalizes each (sample, group) slice to zero mean / unit variance with
// eps = 1e-5, then applies the per-channel affine (gamma, beta).
template <class T>
struct GroupNormCache {
    std::vector<T> mean;    // per (n, group)
    std::vector<T> invstd;  // per (n, group)
};

template <class T>
Tensor5<T> groupnorm_forward(const Tensor5<T>& x, const std::vector<T>& gamma,
                             const std::vector<T>& beta, int64_t groups,
                             GroupNormCache<T>* cache);

template <class T>
struct GroupNormGrads {
    Tensor5<T> gx;
    std::vector<T> ggamma;
    std::vector<T> gbeta;
};

template <class T>
GroupNormGrads<T> groupnorm_backward(const Tensor5<T>& x, const std::vector<T>& gamma,
                                     int64_t groups, const GroupNormCache<T>& cache,
                                     const Tensor5<T>& gy);

template <class T>
Tensor5<T> relu_forward(const Tensor5<T>& x);

// Uses the forward output as the mask (y > 0 iff x > 0).
template <class T>
Tensor5<T> relu_backward(const Tensor5<T>& y, const Tensor5<T>& gy);

// Factor-2 max pooling per spatial axis; spatial dims must be even. argmax
// records the flat input index feeding each output element.
template <class T>
Tensor5<T> maxpool2_forward(const Tensor5<T>& x, std::vector<int64_t>* argmax);

template <class T>
Tensor5<T> maxpool2_backward(const std::vector<int64_t>& argmax,
                             const std::array<int64_t, 5>& input_dims, const Tensor5<T>& gy);

// Nearest-neighbor repetition by 2 per spatial axis.
template <class T>
Tensor5<T> upsample2_forward(const Tensor5<T>& x);

template <class T>
Tensor5<T> upsample2_backward(const Tensor5<T>& gy);

// Channel concatenation [a | b]; shapes must agree elsewhere.
template <class T>
Tensor5<T> concat_forward(const Tensor5<T>& a, const Tensor5<T>& b);

template <class T>
void concat_backward(const Tensor5<T>& gy, int64_t channels_a, Tensor5<T>* ga, Tensor5<T>* gb);

// Logits are clamped to |x| <= 30 before exponentiation, so outputs are
// strictly inside (0,1).
template <class T>
Tensor5<T> sigmoid_forward(const Tensor5<T>& x);

template <class T>
Tensor5<T> sigmoid_backward(const Tensor5<T>& y, const Tensor5<T>& gy);

}  // namespace ilseg
