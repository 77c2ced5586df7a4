#include "ilseg/diffusion.hpp"

#include <cmath>

namespace ilseg {

void DiffusionParams::validate() const {
    if (iterations < 1) throw ConfigError("diffusion iterations must be >= 1");
    if (!(step > 0.0 && step <= 1.0 / 6.0 + 1e-12))
        throw ConfigError("diffusion step must lie in (0, 1/6]");
    if (!(scale_sigma > 0.0)) throw ConfigError("diffusion scale_sigma must be positive");
}

Volume diffuse(const Volume& v, const DiffusionParams& p) {
    p.validate();
    v.validate();

    const int64_t nz = v.shape[0], ny = v.shape[1], nx = v.shape[2];
    const double sigma_t = p.scale_sigma * std::sqrt(5.0);
    const bool tukey = p.edge_stop == EdgeStop::tukey;
    auto g = [&](double d) -> double {
        if (tukey) {
            double r = d / sigma_t;
            if (r < -1.0 || r > 1.0) return 0.0;
            double q = 1.0 - r * r;
            return q * q;
        }
        double r = d / p.scale_sigma;
        return std::exp(-r * r);
    };

    std::vector<double> cur(v.data.begin(), v.data.end());
    std::vector<double> next(cur.size());
    const double step = p.step;
    const int64_t sz = ny * nx, sy = nx, sx = 1;

    for (int it = 0; it < p.iterations; ++it) {
        next = cur;
        // One pass per axis; each interior face contributes +flux to the low
        // voxel and -flux to the high voxel, so the update is conservative.
        // Neumann boundaries: faces beyond the grid carry zero difference.
        auto sweep = [&](int64_t n_axis, int64_t stride, int64_t n_outer_a, int64_t stride_a,
                         int64_t n_outer_b, int64_t stride_b) {
            for (int64_t a = 0; a < n_outer_a; ++a)
                for (int64_t b = 0; b < n_outer_b; ++b) {
                    int64_t base = a * stride_a + b * stride_b;
                    for (int64_t i = 0; i + 1 < n_axis; ++i) {
                        int64_t lo = base + i * stride;
                        int64_t hi = lo + stride;
                        double d = cur[static_cast<size_t>(hi)] - cur[static_cast<size_t>(lo)];
                        double flux = step * g(d) * d;
                        next[static_cast<size_t>(lo)] += flux;
                        next[static_cast<size_t>(hi)] -= flux;
                    }
                }
        };
        sweep(nz, sz, ny, sy, nx, sx);
        sweep(ny, sy, nz, sz, nx, sx);
        sweep(nx, sx, nz, sz, ny, sy);
        cur.swap(next);
    }

    Volume out;
    out.shape = v.shape;
    out.spacing_mm = v.spacing_mm;
    out.data.resize(cur.size());
    for (size_t i = 0; i < cur.size(); ++i) out.data[i] = static_cast<float>(cur[i]);
    return out;
}

}  // namespace ilseg
