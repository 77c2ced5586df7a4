#include "ilseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "json.hpp"

namespace ilseg {

namespace {

struct Ellipsoid {
    double cz, cy, cx;
    double rz, ry, rx;
};

// Paints per-voxel values into the bounding box of e; returns voxel count.
template <class Fn>
int64_t paint_ellipsoid(Volume& vol, const Ellipsoid& e, Fn&& value_at) {
    int64_t count = 0;
    int64_t z0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(e.cz - e.rz)));
    int64_t z1 = std::min(vol.shape[0] - 1, static_cast<int64_t>(std::ceil(e.cz + e.rz)));
    int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(e.cy - e.ry)));
    int64_t y1 = std::min(vol.shape[1] - 1, static_cast<int64_t>(std::ceil(e.cy + e.ry)));
    int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(e.cx - e.rx)));
    int64_t x1 = std::min(vol.shape[2] - 1, static_cast<int64_t>(std::ceil(e.cx + e.rx)));
    for (int64_t z = z0; z <= z1; ++z)
        for (int64_t y = y0; y <= y1; ++y)
            for (int64_t x = x0; x <= x1; ++x) {
                double dz = (static_cast<double>(z) - e.cz) / e.rz;
                double dy = (static_cast<double>(y) - e.cy) / e.ry;
                double dx = (static_cast<double>(x) - e.cx) / e.rx;
                if (dz * dz + dy * dy + dx * dx <= 1.0) {
                    value_at(z, y, x);
                    ++count;
                }
            }
    return count;
}

Ellipsoid random_ellipsoid(Rng& rng, const Index3& shape, double rmin, double rmax) {
    Ellipsoid e;
    e.rz = rng.uniform_real(rmin, rmax);
    e.ry = rng.uniform_real(rmin, rmax);
    e.rx = rng.uniform_real(rmin, rmax);
    if (2.0 * e.rz >= static_cast<double>(shape[0]) ||
        2.0 * e.ry >= static_cast<double>(shape[1]) ||
        2.0 * e.rx >= static_cast<double>(shape[2]))
        throw DataError("phantom lesion larger than volume");
    e.cz = rng.uniform_real(e.rz, static_cast<double>(shape[0]) - 1.0 - e.rz);
    e.cy = rng.uniform_real(e.ry, static_cast<double>(shape[1]) - 1.0 - e.ry);
    e.cx = rng.uniform_real(e.rx, static_cast<double>(shape[2]) - 1.0 - e.rx);
    return e;
}

// Coarse-grid noise upsampled trilinearly: smooth field with correlation
// length ~ texture_scale voxels.
std::vector<double> blob_field(Rng& rng, const Index3& shape, double texture_scale) {
    double cell = std::max(1.0, texture_scale);
    Index3 grid;
    for (int a = 0; a < 3; ++a)
        grid[a] = static_cast<int64_t>(std::ceil(static_cast<double>(shape[a]) / cell)) + 1;
    std::vector<double> coarse(static_cast<size_t>(numel(grid)));
    for (auto& v : coarse) v = rng.normal();
    std::vector<double> out(static_cast<size_t>(numel(shape)));
    for (int64_t z = 0; z < shape[0]; ++z) {
        double gz = static_cast<double>(z) / cell;
        int64_t z0 = std::min(static_cast<int64_t>(gz), grid[0] - 2);
        double fz = gz - static_cast<double>(z0);
        for (int64_t y = 0; y < shape[1]; ++y) {
            double gy = static_cast<double>(y) / cell;
            int64_t y0 = std::min(static_cast<int64_t>(gy), grid[1] - 2);
            double fy = gy - static_cast<double>(y0);
            for (int64_t x = 0; x < shape[2]; ++x) {
                double gx = static_cast<double>(x) / cell;
                int64_t x0 = std::min(static_cast<int64_t>(gx), grid[2] - 2);
                double fx = gx - static_cast<double>(x0);
                auto c = [&](int64_t dz, int64_t dy, int64_t dx) {
                    return coarse[static_cast<size_t>(
                        flat_index(grid, z0 + dz, y0 + dy, x0 + dx))];
                };
                double c00 = c(0, 0, 0) * (1 - fx) + c(0, 0, 1) * fx;
                double c01 = c(0, 1, 0) * (1 - fx) + c(0, 1, 1) * fx;
                double c10 = c(1, 0, 0) * (1 - fx) + c(1, 0, 1) * fx;
                double c11 = c(1, 1, 0) * (1 - fx) + c(1, 1, 1) * fx;
                double c0 = c00 * (1 - fy) + c01 * fy;
                double c1 = c10 * (1 - fy) + c11 * fy;
                out[static_cast<size_t>(flat_index(shape, z, y, x))] = c0 * (1 - fz) + c1 * fz;
            }
        }
    }
    return out;
}

}  // namespace

void PhantomSpec::validate() const {
    if (shape[0] <= 0 || shape[1] <= 0 || shape[2] <= 0)
        throw ConfigError("phantom shape must be positive");
    if (spacing_mm <= 0) throw ConfigError("phantom spacing must be positive");
    if (lesion_count_min < 1 || lesion_count_max < lesion_count_min)
        throw ConfigError("phantom lesion count range must be ordered with min >= 1");
    if (lesion_radius_min_vox < 1.0 || lesion_radius_max_vox < lesion_radius_min_vox)
        throw ConfigError("phantom lesion radius range must be ordered with min >= 1 voxel");
    if (lesion_intensity_std < 0 || noise_std < 0)
        throw ConfigError("phantom intensity/noise std must be non-negative");
    if (background_texture_scale <= 0) throw ConfigError("background texture scale must be positive");
    if (background_hi < background_lo) throw ConfigError("background range must be ordered");
    if (confuser_count < 0) throw ConfigError("confuser count must be >= 0");
}

PhantomCase generate(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    PhantomCase out;
    out.volume = Volume(spec.shape, {spec.spacing_mm, spec.spacing_mm, spec.spacing_mm});
    out.mask = MaskVolume(spec.shape);
    Volume& vol = out.volume;

    // Background: blob field standardized to its own mean/std, mapped so the
    // center lands at mid-range and +-3 sigma spans the range, then clamped.
    std::vector<double> field = blob_field(rng, spec.shape, spec.background_texture_scale);
    double mean = 0.0;
    for (double v : field) mean += v;
    mean /= static_cast<double>(field.size());
    double var = 0.0;
    for (double v : field) var += (v - mean) * (v - mean);
    var /= static_cast<double>(field.size());
    double sd = std::sqrt(std::max(var, 1e-12));
    const double mid = 0.5 * (spec.background_lo + spec.background_hi);
    const double span = (spec.background_hi - spec.background_lo) / 6.0;
    for (size_t i = 0; i < field.size(); ++i) {
        double v = mid + (field[i] - mean) / sd * span;
        v = std::min(spec.background_hi, std::max(spec.background_lo, v));
        vol.data[i] = static_cast<float>(v);
    }

    // Confusers: upper-background band, outside the lesion +-3 sigma band,
    // not in the mask.
    const double confuser_mean = spec.lesion_intensity_mean + 4.0 * spec.lesion_intensity_std;
    for (int i = 0; i < spec.confuser_count; ++i) {
        Ellipsoid e = random_ellipsoid(rng, spec.shape, spec.lesion_radius_min_vox,
                                       spec.lesion_radius_max_vox);
        paint_ellipsoid(vol, e, [&](int64_t z, int64_t y, int64_t x) {
            vol.at(z, y, x) =
                static_cast<float>(rng.normal(confuser_mean, spec.lesion_intensity_std));
        });
    }

    // Lesions last so overlaps with confusers resolve in favor of the mask.
    int k = spec.lesion_count_min +
            static_cast<int>(rng.uniform_int(spec.lesion_count_max - spec.lesion_count_min + 1));
    for (int i = 0; i < k; ++i) {
        Ellipsoid e = random_ellipsoid(rng, spec.shape, spec.lesion_radius_min_vox,
                                       spec.lesion_radius_max_vox);
        int64_t count = paint_ellipsoid(vol, e, [&](int64_t z, int64_t y, int64_t x) {
            vol.at(z, y, x) = static_cast<float>(
                rng.normal(spec.lesion_intensity_mean, spec.lesion_intensity_std));
            out.mask.at(z, y, x) = 1;
        });
        out.lesion_voxel_counts.push_back(count);
    }

    if (spec.noise_std > 0.0)
        for (auto& v : vol.data) v += static_cast<float>(rng.normal(0.0, spec.noise_std));

    if (out.mask.foreground_count() == 0)
        throw DataError("phantom generated an empty mask");  // unreachable: radii >= 1 voxel
    return out;
}

std::string phantom_spec_to_json(const PhantomSpec& spec) {
    nlohmann::json j;
    j["shape"] = {spec.shape[0], spec.shape[1], spec.shape[2]};
    j["spacing_mm"] = spec.spacing_mm;
    j["lesion_count_range"] = {spec.lesion_count_min, spec.lesion_count_max};
    j["lesion_radius_range_vox"] = {spec.lesion_radius_min_vox, spec.lesion_radius_max_vox};
    j["lesion_intensity"] = {spec.lesion_intensity_mean, spec.lesion_intensity_std};
    j["background_texture_scale"] = spec.background_texture_scale;
    j["background_range"] = {spec.background_lo, spec.background_hi};
    j["confuser_count"] = spec.confuser_count;
    j["noise_std"] = spec.noise_std;
    j["seed"] = spec.seed;
    return j.dump(2);
}

PhantomSpec phantom_spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid phantom spec JSON: ") + e.what());
    }
    PhantomSpec s;
    try {
        if (j.contains("shape")) {
            s.shape = {j["shape"].at(0).get<int64_t>(), j["shape"].at(1).get<int64_t>(),
                       j["shape"].at(2).get<int64_t>()};
        }
        s.spacing_mm = j.value("spacing_mm", s.spacing_mm);
        if (j.contains("lesion_count_range")) {
            s.lesion_count_min = j["lesion_count_range"].at(0).get<int>();
            s.lesion_count_max = j["lesion_count_range"].at(1).get<int>();
        }
        if (j.contains("lesion_radius_range_vox")) {
            s.lesion_radius_min_vox = j["lesion_radius_range_vox"].at(0).get<double>();
            s.lesion_radius_max_vox = j["lesion_radius_range_vox"].at(1).get<double>();
        }
        if (j.contains("lesion_intensity")) {
            s.lesion_intensity_mean = j["lesion_intensity"].at(0).get<double>();
            s.lesion_intensity_std = j["lesion_intensity"].at(1).get<double>();
        }
        s.background_texture_scale = j.value("background_texture_scale", s.background_texture_scale);
        if (j.contains("background_range")) {
            s.background_lo = j["background_range"].at(0).get<double>();
            s.background_hi = j["background_range"].at(1).get<double>();
        }
        s.confuser_count = j.value("confuser_count", s.confuser_count);
        s.noise_std = j.value("noise_std", s.noise_std);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad phantom spec field: ") + e.what());
    }
    s.validate();
    return s;
}

std::string generate_dataset(const PhantomSpec& spec, int n, const std::string& out_dir) {
    if (n < 1) throw ConfigError("dataset size must be >= 1");
    spec.validate();
    std::filesystem::create_directories(out_dir);

    nlohmann::json manifest;
    manifest["spec"] = nlohmann::json::parse(phantom_spec_to_json(spec));
    manifest["cases"] = nlohmann::json::array();
    const double voxel_mm3 = spec.spacing_mm * spec.spacing_mm * spec.spacing_mm;

    for (int i = 0; i < n; ++i) {
        PhantomSpec case_spec = spec;
        case_spec.seed = spec.seed + static_cast<uint64_t>(i);
        PhantomCase c = generate(case_spec);
        char name[64];
        std::snprintf(name, sizeof(name), "case_%03d", i);
        std::string vol_path = out_dir + "/" + name + ".vol.svol";
        std::string mask_path = out_dir + "/" + name + ".mask.svol";
        write_svol(c.volume, vol_path);
        write_svol(c.mask, mask_path, c.volume.spacing_mm);

        nlohmann::json entry;
        entry["volume"] = vol_path;
        entry["mask"] = mask_path;
        entry["seed"] = case_spec.seed;
        std::vector<double> vols;
        for (int64_t cnt : c.lesion_voxel_counts)
            vols.push_back(static_cast<double>(cnt) * voxel_mm3);
        entry["lesion_volumes_mm3"] = vols;
        manifest["cases"].push_back(entry);
    }

    std::string manifest_path = out_dir + "/manifest.json";
    write_file_text(manifest_path, manifest.dump(2) + "\n");
    return manifest_path;
}

DatasetManifest load_dataset_manifest(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid dataset manifest JSON in " + path + ": " + e.what());
    }
    DatasetManifest m;
    try {
        if (j.contains("spec")) m.spec_json = j["spec"].dump(2);
        for (const auto& entry : j.at("cases")) {
            DatasetCase c;
            c.volume_path = entry.at("volume").get<std::string>();
            c.mask_path = entry.at("mask").get<std::string>();
            c.seed = entry.value("seed", uint64_t(0));
            if (entry.contains("lesion_volumes_mm3"))
                c.lesion_volumes_mm3 = entry["lesion_volumes_mm3"].get<std::vector<double>>();
            m.cases.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad dataset manifest field in " + path + ": " + e.what());
    }
    if (m.cases.empty()) throw DataError("dataset manifest has no cases: " + path);
    return m;
}

}  // namespace ilseg
