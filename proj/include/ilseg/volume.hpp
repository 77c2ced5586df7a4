#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ilseg/common.hpp"

namespace ilseg {

// 3D scalar grid, (z, y, x) axis order, row-major with x fastest.
struct Volume {
    Index3 shape{0, 0, 0};
    Spacing3 spacing_mm{1.0, 1.0, 1.0};
    std::vector<float> data;

    Volume() = default;
    Volume(Index3 s, Spacing3 sp, float fill = 0.0f);

    int64_t size() const { return numel(shape); }
    float& at(int64_t z, int64_t y, int64_t x) { return data[flat_index(shape, z, y, x)]; }
    float at(int64_t z, int64_t y, int64_t x) const { return data[flat_index(shape, z, y, x)]; }

    // Checks shape/spacing/length invariants and that all values are finite.
    void validate() const;
};

// Binary grid aligned with a Volume; values are exactly 0 or 1.
struct MaskVolume {
    Index3 shape{0, 0, 0};
    std::vector<uint8_t> data;

    MaskVolume() = default;
    MaskVolume(Index3 s, uint8_t fill = 0);

    int64_t size() const { return numel(shape); }
    uint8_t& at(int64_t z, int64_t y, int64_t x) { return data[flat_index(shape, z, y, x)]; }
    uint8_t at(int64_t z, int64_t y, int64_t x) const { return data[flat_index(shape, z, y, x)]; }

    int64_t foreground_count() const;
    void validate() const;
};

// Real-valued grid with every value in [0, 1].
struct SoftVolume {
    Index3 shape{0, 0, 0};
    std::vector<float> data;

    SoftVolume() = default;
    SoftVolume(Index3 s, float fill = 0.0f);

    int64_t size() const { return numel(shape); }
    float& at(int64_t z, int64_t y, int64_t x) { return data[flat_index(shape, z, y, x)]; }
    float at(int64_t z, int64_t y, int64_t x) const { return data[flat_index(shape, z, y, x)]; }

    void validate() const;
};

// Trilinear resampling onto an isotropic target_mm grid. Output shape is
// round(shape * spacing / target_mm) per axis; out-of-source samples clamp to
// the boundary. Native-spacing input round-trips bit-exactly.
Volume resample_isotropic(const Volume& v, double target_mm);

// Nearest-neighbor counterpart for masks (values stay binary).
MaskVolume resample_mask(const MaskVolume& m, const Spacing3& spacing_mm, double target_mm);

Volume crop(const Volume& v, const Index3& lo, const Index3& hi);
MaskVolume crop(const MaskVolume& m, const Index3& lo, const Index3& hi);
SoftVolume crop(const SoftVolume& s, const Index3& lo, const Index3& hi);

struct SubvolumeSample {
    Volume vol;
    MaskVolume mask;
    Index3 offset{0, 0, 0};
};

// Window of exactly `size` guaranteed to contain at least one foreground
// voxel: picks a uniformly random foreground voxel, then a uniformly random
// window containing it, clamped to bounds. Deterministic given rng_seed.
SubvolumeSample sample_subvolume(const Volume& v, const MaskVolume& m, const Index3& size,
                                 uint64_t rng_seed);

// Offset-only variant used by the trainer to crop aligned auxiliary grids.
Index3 sample_subvolume_offset(const Index3& shape, const std::vector<int64_t>& fg_indices,
                               const Index3& size, uint64_t rng_seed);

// 180-degree rotation around z: x and y axes both reversed, z unchanged.
Volume rotate_z_180(const Volume& v);
MaskVolume rotate_z_180(const MaskVolume& m);
SoftVolume rotate_z_180(const SoftVolume& s);

// --- SVOL file format (bit-exact) ---------------------------------------
// 4 magic bytes "SVOL", u32 little-endian header length N, N bytes UTF-8 JSON
// header {"shape":[nz,ny,nx],"spacing_mm":[sz,sy,sx],"dtype":"f32"|"u8",
// "order":"zyx","endian":"little","kind":"volume"|"mask"|"soft"}, then the raw
// payload (f32 LE or u8) of exactly prod(shape)*dtype_size bytes.

enum class SvolErrorKind {
    bad_magic,
    bad_header,
    payload_size,
    non_finite,
    mask_domain,
    soft_domain,
};

struct SvolError : DataError {
    SvolErrorKind kind;
    SvolError(SvolErrorKind k, const std::string& msg) : DataError(msg), kind(k) {}
};

using SvolAny = std::variant<Volume, MaskVolume, SoftVolume>;

SvolAny read_svol(const std::string& path);
Volume read_volume(const std::string& path);
MaskVolume read_mask(const std::string& path);
SoftVolume read_soft(const std::string& path);

void write_svol(const Volume& v, const std::string& path);
void write_svol(const MaskVolume& m, const std::string& path, const Spacing3& spacing_mm = {1, 1, 1});
void write_svol(const SoftVolume& s, const std::string& path, const Spacing3& spacing_mm = {1, 1, 1});

}  // namespace ilseg
