#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ilseg/common.hpp"

namespace ilseg {

// Dense 5D tensor, dims (batch, channels, z, y, x), x fastest. Also used for
// conv weights as (out_ch, in_ch, kz, ky, kx). grad is optional and, when
// present, shape-matches data.
template <class T>
struct Tensor5 {
    std::array<int64_t, 5> dims{0, 0, 0, 0, 0};
    std::vector<T> data;
    std::vector<T> grad;

    Tensor5() = default;
    Tensor5(int64_t n, int64_t c, int64_t z, int64_t y, int64_t x, T fill = T(0))
        : dims{n, c, z, y, x} {
        data.assign(static_cast<size_t>(numel()), fill);
    }

    int64_t numel() const { return dims[0] * dims[1] * dims[2] * dims[3] * dims[4]; }
    int64_t spatial() const { return dims[2] * dims[3] * dims[4]; }

    int64_t offset(int64_t n, int64_t c, int64_t z = 0, int64_t y = 0, int64_t x = 0) const {
        return (((n * dims[1] + c) * dims[2] + z) * dims[3] + y) * dims[4] + x;
    }
    T& at(int64_t n, int64_t c, int64_t z, int64_t y, int64_t x) {
        return data[static_cast<size_t>(offset(n, c, z, y, x))];
    }
    T at(int64_t n, int64_t c, int64_t z, int64_t y, int64_t x) const {
        return data[static_cast<size_t>(offset(n, c, z, y, x))];
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }

    Tensor5<T> zeros_like() const {
        Tensor5<T> t;
        t.dims = dims;
        t.data.assign(data.size(), T(0));
        return t;
    }
};

}  // namespace ilseg
