#pragma once

#include <string>

#include "ilseg/volume.hpp"

namespace ilseg {

// Synthetic dataset spec. Defaults are desk-scale: ~14-520 mm^3 lesions over
// a textured background whose upper range overlaps the confuser band, so
// intensity alone cannot separate lesions from everything else.
struct PhantomSpec {
    Index3 shape{48, 48, 48};
    double spacing_mm = 1.0;
    int lesion_count_min = 1;
    int lesion_count_max = 3;
    double lesion_radius_min_vox = 1.5;
    double lesion_radius_max_vox = 5.0;
    double lesion_intensity_mean = 120.0;
    double lesion_intensity_std = 15.0;
    double background_texture_scale = 8.0;
    double background_lo = -50.0;
    double background_hi = 200.0;
    int confuser_count = 2;
    double noise_std = 10.0;
    uint64_t seed = 0;

    void validate() const;
};

struct PhantomCase {
    Volume volume;
    MaskVolume mask;
    std::vector<int64_t> lesion_voxel_counts;  // per lesion, before overlap merging
};

// Deterministic given spec.seed. Background is a smoothed random blob field
// mapped into [background_lo, background_hi]; confusers are ellipsoids in the
// upper background band excluded from the mask; lesions are ellipsoids with
// per-voxel N(lesion_intensity) values, drawn last so the mask (their union)
// stays consistent; Gaussian noise_std is added everywhere at the end.
PhantomCase generate(const PhantomSpec& spec);

// Writes n SVOL pairs (seeds seed+i) plus a manifest JSON listing paths,
// per-case seeds and lesion volumes in mm^3. Returns the manifest path.
std::string generate_dataset(const PhantomSpec& spec, int n, const std::string& out_dir);

PhantomSpec phantom_spec_from_json(const std::string& text);
std::string phantom_spec_to_json(const PhantomSpec& spec);

struct DatasetCase {
    std::string volume_path;
    std::string mask_path;
    uint64_t seed = 0;
    std::vector<double> lesion_volumes_mm3;
};

struct DatasetManifest {
    std::vector<DatasetCase> cases;
    std::string spec_json;  // spec snapshot as written
};

DatasetManifest load_dataset_manifest(const std::string& path);

}  // namespace ilseg
