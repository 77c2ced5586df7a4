#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ilseg/diffusion.hpp"
#include "ilseg/volume.hpp"

namespace ilseg {

// Intensities harvested from smoothed volumes inside GT masks.
struct IntensitySample {
    std::vector<double> values;
    int source_count = 0;
};

// Rescaled Gaussian-KDE over lesion intensities. Samples are compressed into
// a 1 HU-spaced weighted histogram so evaluation is O(bins) per query;
// norm_max is the pre-rescale KDE maximum located on a 0.5 HU grid spanning
// [min-3h, max+3h], which makes the grid maximum of evaluate() equal 1.
struct LikelihoodModel {
    std::vector<double> bin_centers;  // 1 HU spacing (raw samples when uncompressed)
    std::vector<double> bin_weights;
    double bandwidth = 0.0;
    double norm_max = 0.0;
    double shift = 0.0;
    std::string bandwidth_rule = "scott";

    // Kernel sum at (x - shift), divided by norm_max, clamped to [0,1].
    double evaluate(double x) const;

    // Evaluation grid the normalization was computed on.
    std::vector<double> support_grid() const;
};

IntensitySample harvest_intensities(const std::vector<std::pair<const Volume*, const MaskVolume*>>& pairs,
                                    const DiffusionParams& d);

// Same harvest when the smoothed volumes are already available.
IntensitySample harvest_smoothed(const std::vector<std::pair<const Volume*, const MaskVolume*>>& smoothed_pairs);

// Gaussian KDE with Scott's rule bandwidth h = std(values) * n^(-1/5).
// Requires >= 2 samples with nonzero variance. With compress=false the raw
// samples are kept as unit-weight centers (exact KDE).
LikelihoodModel fit_kde(const IntensitySample& s, bool compress = true);

// Voxelwise evaluate() of the smoothed image: out[i] = m.evaluate(diffuse(v,d)[i]).
SoftVolume likelihood_volume(const Volume& v, const LikelihoodModel& m, const DiffusionParams& d);

// Variant applied to an already-smoothed volume.
SoftVolume likelihood_volume_smoothed(const Volume& smoothed, const LikelihoodModel& m);

// Copy of m with shift increased by delta; evaluate(x+delta) equals the
// original evaluate(x) exactly.
LikelihoodModel shifted(const LikelihoodModel& m, double delta);

// Model file: JSON {"kind":"gaussian-kde","bandwidth":h,"bin_centers":[...],
// "bin_weights":[...],"norm_max":c,"shift":s,"bandwidth_rule":"scott"}.
void save_model(const LikelihoodModel& m, const std::string& path);
LikelihoodModel load_model(const std::string& path);

// CSV of (intensity, likelihood) over the support grid.
void write_curve_csv(const LikelihoodModel& m, const std::string& path);

}  // namespace ilseg
