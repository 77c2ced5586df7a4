#include "ilseg/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ilseg {

namespace {

void check_conv_shapes(const std::array<int64_t, 5>& x, const std::array<int64_t, 5>& w,
                       size_t bias_size, int64_t pad) {
    if (x[1] != w[1]) throw DataError("conv3d: input channels do not match weight");
    if (static_cast<int64_t>(bias_size) != w[0]) throw DataError("conv3d: bias size mismatch");
    if (w[2] != w[3] || w[3] != w[4]) throw DataError("conv3d: kernel must be cubic");
    if (!((w[2] == 3 && pad == 1) || (w[2] == 1 && pad == 0)))
        throw DataError("conv3d: only 3x3x3/pad1 and 1x1x1/pad0 are supported");
    for (int a = 2; a < 5; ++a)
        if (x[static_cast<size_t>(a)] + 2 * pad - w[2] + 1 < 1)
            throw DataError("conv3d: input too small for kernel");
}

// Fixed-lane dot product: four interleaved accumulators combined in a fixed
// order, deterministic and vectorizable.
template <class T>
T dot_rows(const T* a, const T* b, int64_t n) {
    T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return ((s0 + s1) + s2) + s3;
}

}  // namespace

template <class T>
Tensor5<T> conv3d_forward(const Tensor5<T>& x, const Tensor5<T>& w, const std::vector<T>& b,
                          int64_t pad) {
    check_conv_shapes(x.dims, w.dims, b.size(), pad);
    const int64_t N = x.dims[0], IC = x.dims[1], Z = x.dims[2], Y = x.dims[3], X = x.dims[4];
    const int64_t OC = w.dims[0], K = w.dims[2];
    const int64_t ZO = Z + 2 * pad - K + 1, YO = Y + 2 * pad - K + 1, XO = X + 2 * pad - K + 1;
    Tensor5<T> out(N, OC, ZO, YO, XO);

    for (int64_t n = 0; n < N; ++n) {
        for (int64_t oc = 0; oc < OC; ++oc) {
            T* out_base = &out.data[static_cast<size_t>(out.offset(n, oc))];
            std::fill(out_base, out_base + ZO * YO * XO, b[static_cast<size_t>(oc)]);
            for (int64_t ic = 0; ic < IC; ++ic) {
                const T* in_base = &x.data[static_cast<size_t>(x.offset(n, ic))];
                for (int64_t kz = 0; kz < K; ++kz) {
                    const int64_t tz = kz - pad;
                    const int64_t z_lo = std::max<int64_t>(0, -tz);
                    const int64_t z_hi = std::min(ZO, Z - tz);  // exclusive
                    for (int64_t ky = 0; ky < K; ++ky) {
                        const int64_t ty = ky - pad;
                        const int64_t y_lo = std::max<int64_t>(0, -ty);
                        const int64_t y_hi = std::min(YO, Y - ty);
                        for (int64_t kx = 0; kx < K; ++kx) {
                            const int64_t tx = kx - pad;
                            const int64_t x_lo = std::max<int64_t>(0, -tx);
                            const int64_t x_hi = std::min(XO, X - tx);
                            if (x_lo >= x_hi) continue;
                            const T wv = w.at(oc, ic, kz, ky, kx);
                            if (wv == T(0)) continue;
                            for (int64_t z = z_lo; z < z_hi; ++z)
                                for (int64_t y = y_lo; y < y_hi; ++y) {
                                    T* dst = out_base + (z * YO + y) * XO + x_lo;
                                    const T* src =
                                        in_base + ((z + tz) * Y + (y + ty)) * X + (x_lo + tx);
                                    for (int64_t i = 0; i < x_hi - x_lo; ++i)
                                        dst[i] += wv * src[i];
                                }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <class T>
Conv3dGrads<T> conv3d_backward(const Tensor5<T>& x, const Tensor5<T>& w, const Tensor5<T>& gy,
                               int64_t pad) {
    const int64_t N = x.dims[0], IC = x.dims[1], Z = x.dims[2], Y = x.dims[3], X = x.dims[4];
    const int64_t OC = w.dims[0], K = w.dims[2];
    const int64_t ZO = gy.dims[2], YO = gy.dims[3], XO = gy.dims[4];

    Conv3dGrads<T> g;
    g.gx = x.zeros_like();
    g.gw = w.zeros_like();
    g.gb.assign(static_cast<size_t>(OC), T(0));

    // Bias gradient: plain sums over the output map.
    for (int64_t n = 0; n < N; ++n)
        for (int64_t oc = 0; oc < OC; ++oc) {
            const T* gy_base = &gy.data[static_cast<size_t>(gy.offset(n, oc))];
            T acc = 0;
            for (int64_t i = 0; i < ZO * YO * XO; ++i) acc += gy_base[i];
            g.gb[static_cast<size_t>(oc)] += acc;
        }

    // Weight gradient: one row-dot per (oc, ic, tap, z, y).
    for (int64_t n = 0; n < N; ++n)
        for (int64_t oc = 0; oc < OC; ++oc) {
            const T* gy_base = &gy.data[static_cast<size_t>(gy.offset(n, oc))];
            for (int64_t ic = 0; ic < IC; ++ic) {
                const T* in_base = &x.data[static_cast<size_t>(x.offset(n, ic))];
                for (int64_t kz = 0; kz < K; ++kz) {
                    const int64_t tz = kz - pad;
                    const int64_t z_lo = std::max<int64_t>(0, -tz);
                    const int64_t z_hi = std::min(ZO, Z - tz);
                    for (int64_t ky = 0; ky < K; ++ky) {
                        const int64_t ty = ky - pad;
                        const int64_t y_lo = std::max<int64_t>(0, -ty);
                        const int64_t y_hi = std::min(YO, Y - ty);
                        for (int64_t kx = 0; kx < K; ++kx) {
                            const int64_t tx = kx - pad;
                            const int64_t x_lo = std::max<int64_t>(0, -tx);
                            const int64_t x_hi = std::min(XO, X - tx);
                            if (x_lo >= x_hi) continue;
                            T acc = 0;
                            for (int64_t z = z_lo; z < z_hi; ++z)
                                for (int64_t y = y_lo; y < y_hi; ++y)
                                    acc += dot_rows(
                                        gy_base + (z * YO + y) * XO + x_lo,
                                        in_base + ((z + tz) * Y + (y + ty)) * X + (x_lo + tx),
                                        x_hi - x_lo);
                            g.gw.at(oc, ic, kz, ky, kx) += acc;
                        }
                    }
                }
            }
        }

    // Input gradient: scatter gy through the kernel (correlation transpose).
    for (int64_t n = 0; n < N; ++n)
        for (int64_t ic = 0; ic < IC; ++ic) {
            T* gx_base = &g.gx.data[static_cast<size_t>(g.gx.offset(n, ic))];
            for (int64_t oc = 0; oc < OC; ++oc) {
                const T* gy_base = &gy.data[static_cast<size_t>(gy.offset(n, oc))];
                for (int64_t kz = 0; kz < K; ++kz) {
                    const int64_t tz = kz - pad;
                    // input zi receives from output z = zi - tz when valid
                    const int64_t zi_lo = std::max<int64_t>(0, tz);
                    const int64_t zi_hi = std::min(Z, ZO + tz);
                    for (int64_t ky = 0; ky < K; ++ky) {
                        const int64_t ty = ky - pad;
                        const int64_t yi_lo = std::max<int64_t>(0, ty);
                        const int64_t yi_hi = std::min(Y, YO + ty);
                        for (int64_t kx = 0; kx < K; ++kx) {
                            const int64_t tx = kx - pad;
                            const int64_t xi_lo = std::max<int64_t>(0, tx);
                            const int64_t xi_hi = std::min(X, XO + tx);
                            if (xi_lo >= xi_hi) continue;
                            const T wv = w.at(oc, ic, kz, ky, kx);
                            if (wv == T(0)) continue;
                            for (int64_t zi = zi_lo; zi < zi_hi; ++zi)
                                for (int64_t yi = yi_lo; yi < yi_hi; ++yi) {
                                    T* dst = gx_base + (zi * Y + yi) * X + xi_lo;
                                    const T* src = gy_base +
                                                   ((zi - tz) * YO + (yi - ty)) * XO +
                                                   (xi_lo - tx);
                                    for (int64_t i = 0; i < xi_hi - xi_lo; ++i)
                                        dst[i] += wv * src[i];
                                }
                        }
                    }
                }
            }
        }
    return g;
}

template <class T>
Tensor5<T> groupnorm_forward(const Tensor5<T>& x, const std::vector<T>& gamma,
                             const std::vector<T>& beta, int64_t groups,
                             GroupNormCache<T>* cache) {
    const int64_t N = x.dims[0], C = x.dims[1], S = x.spatial();
    if (C % groups != 0) throw DataError("groupnorm: channels not divisible by groups");
    if (static_cast<int64_t>(gamma.size()) != C || static_cast<int64_t>(beta.size()) != C)
        throw DataError("groupnorm: affine size mismatch");
    const int64_t CG = C / groups;
    const int64_t M = CG * S;
    const T eps = T(1e-5);

    Tensor5<T> y = x.zeros_like();
    if (cache) {
        cache->mean.assign(static_cast<size_t>(N * groups), T(0));
        cache->invstd.assign(static_cast<size_t>(N * groups), T(0));
    }
    for (int64_t n = 0; n < N; ++n)
        for (int64_t g = 0; g < groups; ++g) {
            const T* src = &x.data[static_cast<size_t>(x.offset(n, g * CG))];
            T sum = 0;
            for (int64_t i = 0; i < M; ++i) sum += src[i];
            const T mean = sum / static_cast<T>(M);
            T varsum = 0;
            for (int64_t i = 0; i < M; ++i) varsum += (src[i] - mean) * (src[i] - mean);
            const T invstd = T(1) / std::sqrt(varsum / static_cast<T>(M) + eps);
            if (cache) {
                cache->mean[static_cast<size_t>(n * groups + g)] = mean;
                cache->invstd[static_cast<size_t>(n * groups + g)] = invstd;
            }
            for (int64_t cg = 0; cg < CG; ++cg) {
                const int64_t c = g * CG + cg;
                const T ga = gamma[static_cast<size_t>(c)], be = beta[static_cast<size_t>(c)];
                const T* xs = &x.data[static_cast<size_t>(x.offset(n, c))];
                T* ys = &y.data[static_cast<size_t>(y.offset(n, c))];
                for (int64_t i = 0; i < S; ++i) ys[i] = ga * ((xs[i] - mean) * invstd) + be;
            }
        }
    return y;
}

template <class T>
GroupNormGrads<T> groupnorm_backward(const Tensor5<T>& x, const std::vector<T>& gamma,
                                     int64_t groups, const GroupNormCache<T>& cache,
                                     const Tensor5<T>& gy) {
    const int64_t N = x.dims[0], C = x.dims[1], S = x.spatial();
    const int64_t CG = C / groups;
    const int64_t M = CG * S;

    GroupNormGrads<T> g;
    g.gx = x.zeros_like();
    g.ggamma.assign(static_cast<size_t>(C), T(0));
    g.gbeta.assign(static_cast<size_t>(C), T(0));

    for (int64_t n = 0; n < N; ++n)
        for (int64_t grp = 0; grp < groups; ++grp) {
            const T mean = cache.mean[static_cast<size_t>(n * groups + grp)];
            const T invstd = cache.invstd[static_cast<size_t>(n * groups + grp)];
            // dxhat = gy * gamma; accumulate sums over the (n, group) slice.
            T sum_dxhat = 0, sum_dxhat_xhat = 0;
            for (int64_t cg = 0; cg < CG; ++cg) {
                const int64_t c = grp * CG + cg;
                const T ga = gamma[static_cast<size_t>(c)];
                const T* xs = &x.data[static_cast<size_t>(x.offset(n, c))];
                const T* gys = &gy.data[static_cast<size_t>(gy.offset(n, c))];
                T sg = 0, sgx = 0;
                for (int64_t i = 0; i < S; ++i) {
                    const T xhat = (xs[i] - mean) * invstd;
                    sg += gys[i];
                    sgx += gys[i] * xhat;
                }
                g.gbeta[static_cast<size_t>(c)] += sg;
                g.ggamma[static_cast<size_t>(c)] += sgx;
                sum_dxhat += ga * sg;
                sum_dxhat_xhat += ga * sgx;
            }
            const T inv_m = T(1) / static_cast<T>(M);
            for (int64_t cg = 0; cg < CG; ++cg) {
                const int64_t c = grp * CG + cg;
                const T ga = gamma[static_cast<size_t>(c)];
                const T* xs = &x.data[static_cast<size_t>(x.offset(n, c))];
                const T* gys = &gy.data[static_cast<size_t>(gy.offset(n, c))];
                T* gxs = &g.gx.data[static_cast<size_t>(g.gx.offset(n, c))];
                for (int64_t i = 0; i < S; ++i) {
                    const T xhat = (xs[i] - mean) * invstd;
                    const T dxhat = gys[i] * ga;
                    gxs[i] = invstd * (dxhat - inv_m * (sum_dxhat + xhat * sum_dxhat_xhat));
                }
            }
        }
    return g;
}

template <class T>
Tensor5<T> relu_forward(const Tensor5<T>& x) {
    Tensor5<T> y = x.zeros_like();
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return y;
}

template <class T>
Tensor5<T> relu_backward(const Tensor5<T>& y, const Tensor5<T>& gy) {
    Tensor5<T> gx = y.zeros_like();
    for (size_t i = 0; i < y.data.size(); ++i) gx.data[i] = y.data[i] > T(0) ? gy.data[i] : T(0);
    return gx;
}

template <class T>
Tensor5<T> maxpool2_forward(const Tensor5<T>& x, std::vector<int64_t>* argmax) {
    const int64_t N = x.dims[0], C = x.dims[1], Z = x.dims[2], Y = x.dims[3], X = x.dims[4];
    if (Z % 2 || Y % 2 || X % 2) throw DataError("maxpool2: spatial dims must be even");
    Tensor5<T> y(N, C, Z / 2, Y / 2, X / 2);
    if (argmax) argmax->assign(static_cast<size_t>(y.numel()), 0);
    int64_t oi = 0;
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t z = 0; z < Z / 2; ++z)
                for (int64_t yy = 0; yy < Y / 2; ++yy)
                    for (int64_t xx = 0; xx < X / 2; ++xx, ++oi) {
                        T best = -std::numeric_limits<T>::infinity();
                        int64_t best_idx = 0;
                        for (int64_t dz = 0; dz < 2; ++dz)
                            for (int64_t dy = 0; dy < 2; ++dy)
                                for (int64_t dx = 0; dx < 2; ++dx) {
                                    int64_t idx =
                                        x.offset(n, c, 2 * z + dz, 2 * yy + dy, 2 * xx + dx);
                                    T v = x.data[static_cast<size_t>(idx)];
                                    if (v > best) {
                                        best = v;
                                        best_idx = idx;
                                    }
                                }
                        y.data[static_cast<size_t>(oi)] = best;
                        if (argmax) (*argmax)[static_cast<size_t>(oi)] = best_idx;
                    }
    return y;
}

template <class T>
Tensor5<T> maxpool2_backward(const std::vector<int64_t>& argmax,
                             const std::array<int64_t, 5>& input_dims, const Tensor5<T>& gy) {
    Tensor5<T> gx;
    gx.dims = input_dims;
    gx.data.assign(static_cast<size_t>(gx.numel()), T(0));
    for (size_t i = 0; i < gy.data.size(); ++i)
        gx.data[static_cast<size_t>(argmax[i])] += gy.data[i];
    return gx;
}

template <class T>
Tensor5<T> upsample2_forward(const Tensor5<T>& x) {
    const int64_t N = x.dims[0], C = x.dims[1], Z = x.dims[2], Y = x.dims[3], X = x.dims[4];
    Tensor5<T> y(N, C, 2 * Z, 2 * Y, 2 * X);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t z = 0; z < 2 * Z; ++z)
                for (int64_t yy = 0; yy < 2 * Y; ++yy) {
                    const T* src = &x.data[static_cast<size_t>(x.offset(n, c, z / 2, yy / 2))];
                    T* dst = &y.data[static_cast<size_t>(y.offset(n, c, z, yy))];
                    for (int64_t xx = 0; xx < 2 * X; ++xx) dst[xx] = src[xx / 2];
                }
    return y;
}

template <class T>
Tensor5<T> upsample2_backward(const Tensor5<T>& gy) {
    const int64_t N = gy.dims[0], C = gy.dims[1];
    const int64_t Z = gy.dims[2] / 2, Y = gy.dims[3] / 2, X = gy.dims[4] / 2;
    Tensor5<T> gx(N, C, Z, Y, X);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t z = 0; z < Z; ++z)
                for (int64_t yy = 0; yy < Y; ++yy)
                    for (int64_t xx = 0; xx < X; ++xx) {
                        T acc = 0;
                        for (int64_t dz = 0; dz < 2; ++dz)
                            for (int64_t dy = 0; dy < 2; ++dy)
                                for (int64_t dx = 0; dx < 2; ++dx)
                                    acc += gy.at(n, c, 2 * z + dz, 2 * yy + dy, 2 * xx + dx);
                        gx.at(n, c, z, yy, xx) = acc;
                    }
    return gx;
}

template <class T>
Tensor5<T> concat_forward(const Tensor5<T>& a, const Tensor5<T>& b) {
    if (a.dims[0] != b.dims[0] || a.dims[2] != b.dims[2] || a.dims[3] != b.dims[3] ||
        a.dims[4] != b.dims[4])
        throw DataError("concat: non-channel dims must match");
    Tensor5<T> y(a.dims[0], a.dims[1] + b.dims[1], a.dims[2], a.dims[3], a.dims[4]);
    const int64_t S = a.spatial();
    for (int64_t n = 0; n < a.dims[0]; ++n) {
        for (int64_t c = 0; c < a.dims[1]; ++c)
            std::copy_n(&a.data[static_cast<size_t>(a.offset(n, c))], S,
                        &y.data[static_cast<size_t>(y.offset(n, c))]);
        for (int64_t c = 0; c < b.dims[1]; ++c)
            std::copy_n(&b.data[static_cast<size_t>(b.offset(n, c))], S,
                        &y.data[static_cast<size_t>(y.offset(n, a.dims[1] + c))]);
    }
    return y;
}

template <class T>
void concat_backward(const Tensor5<T>& gy, int64_t channels_a, Tensor5<T>* ga, Tensor5<T>* gb) {
    const int64_t N = gy.dims[0], S = gy.spatial();
    const int64_t CB = gy.dims[1] - channels_a;
    *ga = Tensor5<T>(N, channels_a, gy.dims[2], gy.dims[3], gy.dims[4]);
    *gb = Tensor5<T>(N, CB, gy.dims[2], gy.dims[3], gy.dims[4]);
    for (int64_t n = 0; n < N; ++n) {
        for (int64_t c = 0; c < channels_a; ++c)
            std::copy_n(&gy.data[static_cast<size_t>(gy.offset(n, c))], S,
                        &ga->data[static_cast<size_t>(ga->offset(n, c))]);
        for (int64_t c = 0; c < CB; ++c)
            std::copy_n(&gy.data[static_cast<size_t>(gy.offset(n, channels_a + c))], S,
                        &gb->data[static_cast<size_t>(gb->offset(n, c))]);
    }
}

template <class T>
Tensor5<T> sigmoid_forward(const Tensor5<T>& x) {
    Tensor5<T> y = x.zeros_like();
    for (size_t i = 0; i < x.data.size(); ++i) {
        T v = std::min(T(30), std::max(T(-30), x.data[i]));
        y.data[i] = T(1) / (T(1) + std::exp(-v));
    }
    return y;
}

template <class T>
Tensor5<T> sigmoid_backward(const Tensor5<T>& y, const Tensor5<T>& gy) {
    Tensor5<T> gx = y.zeros_like();
    for (size_t i = 0; i < y.data.size(); ++i)
        gx.data[i] = gy.data[i] * y.data[i] * (T(1) - y.data[i]);
    return gx;
}

#define ILSEG_INSTANTIATE_NN_OPS(T)                                                               \
    template Tensor5<T> conv3d_forward<T>(const Tensor5<T>&, const Tensor5<T>&,                   \
                                          const std::vector<T>&, int64_t);                        \
    template Conv3dGrads<T> conv3d_backward<T>(const Tensor5<T>&, const Tensor5<T>&,              \
                                               const Tensor5<T>&, int64_t);                       \
    template Tensor5<T> groupnorm_forward<T>(const Tensor5<T>&, const std::vector<T>&,            \
                                             const std::vector<T>&, int64_t, GroupNormCache<T>*); \
    template GroupNormGrads<T> groupnorm_backward<T>(const Tensor5<T>&, const std::vector<T>&,    \
                                                     int64_t, const GroupNormCache<T>&,           \
                                                     const Tensor5<T>&);                          \
    template Tensor5<T> relu_forward<T>(const Tensor5<T>&);                                       \
    template Tensor5<T> relu_backward<T>(const Tensor5<T>&, const Tensor5<T>&);                   \
    template Tensor5<T> maxpool2_forward<T>(const Tensor5<T>&, std::vector<int64_t>*);            \
    template Tensor5<T> maxpool2_backward<T>(const std::vector<int64_t>&,                         \
                                             const std::array<int64_t, 5>&, const Tensor5<T>&);   \
    template Tensor5<T> upsample2_forward<T>(const Tensor5<T>&);                                  \
    template Tensor5<T> upsample2_backward<T>(const Tensor5<T>&);                                 \
    template Tensor5<T> concat_forward<T>(const Tensor5<T>&, const Tensor5<T>&);                  \
    template void concat_backward<T>(const Tensor5<T>&, int64_t, Tensor5<T>*, Tensor5<T>*);       \
    template Tensor5<T> sigmoid_forward<T>(const Tensor5<T>&);                                    \
    template Tensor5<T> sigmoid_backward<T>(const Tensor5<T>&, const Tensor5<T>&);

ILSEG_INSTANTIATE_NN_OPS(float)
ILSEG_INSTANTIATE_NN_OPS(double)

}  // namespace ilseg
