#include "ilseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "json.hpp"

namespace ilseg {

namespace {

void check_shape(const Index3& s) {
    if (s[0] <= 0 || s[1] <= 0 || s[2] <= 0) throw DataError("volume shape must be positive");
}

template <class V>
V crop_impl(const V& v, const Index3& lo, const Index3& hi) {
    for (int a = 0; a < 3; ++a) {
        if (lo[a] < 0 || hi[a] > v.shape[a] || lo[a] >= hi[a])
            throw DataError("crop bounds out of range");
    }
    V out;
    out.shape = {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
    out.data.resize(static_cast<size_t>(numel(out.shape)));
    const int64_t nx = out.shape[2];
    for (int64_t z = 0; z < out.shape[0]; ++z)
        for (int64_t y = 0; y < out.shape[1]; ++y) {
            const auto* src = &v.data[flat_index(v.shape, z + lo[0], y + lo[1], lo[2])];
            auto* dst = &out.data[flat_index(out.shape, z, y, 0)];
            std::copy(src, src + nx, dst);
        }
    return out;
}

template <class V>
V rotate_impl(const V& v) {
    V out;
    out.shape = v.shape;
    out.data.resize(v.data.size());
    const int64_t nz = v.shape[0], ny = v.shape[1], nx = v.shape[2];
    for (int64_t z = 0; z < nz; ++z)
        for (int64_t y = 0; y < ny; ++y) {
            const auto* src = &v.data[flat_index(v.shape, z, ny - 1 - y, 0)];
            auto* dst = &out.data[flat_index(v.shape, z, y, 0)];
            for (int64_t x = 0; x < nx; ++x) dst[x] = src[nx - 1 - x];
        }
    return out;
}

}  // namespace

Volume::Volume(Index3 s, Spacing3 sp, float fill) : shape(s), spacing_mm(sp) {
    check_shape(s);
    if (spacing_mm[0] <= 0 || spacing_mm[1] <= 0 || spacing_mm[2] <= 0)
        throw DataError("voxel spacing must be positive");
    data.assign(static_cast<size_t>(numel(s)), fill);
}

void Volume::validate() const {
    check_shape(shape);
    if (spacing_mm[0] <= 0 || spacing_mm[1] <= 0 || spacing_mm[2] <= 0)
        throw DataError("voxel spacing must be positive");
    if (static_cast<int64_t>(data.size()) != size())
        throw DataError("volume data length does not match shape");
    for (float v : data)
        if (!std::isfinite(v)) throw DataError("volume contains non-finite values");
}

MaskVolume::MaskVolume(Index3 s, uint8_t fill) : shape(s) {
    check_shape(s);
    data.assign(static_cast<size_t>(numel(s)), fill);
}

int64_t MaskVolume::foreground_count() const {
    int64_t n = 0;
    for (uint8_t v : data) n += v;
    return n;
}

void MaskVolume::validate() const {
    check_shape(shape);
    if (static_cast<int64_t>(data.size()) != size())
        throw DataError("mask data length does not match shape");
    for (uint8_t v : data)
        if (v > 1) throw DataError("mask contains values outside {0,1}");
}

SoftVolume::SoftVolume(Index3 s, float fill) : shape(s) {
    check_shape(s);
    data.assign(static_cast<size_t>(numel(s)), fill);
}

void SoftVolume::validate() const {
    check_shape(shape);
    if (static_cast<int64_t>(data.size()) != size())
        throw DataError("soft volume data length does not match shape");
    for (float v : data)
        if (!(v >= 0.0f && v <= 1.0f)) throw DataError("soft volume values must lie in [0,1]");
}

Volume resample_isotropic(const Volume& v, double target_mm) {
    if (target_mm <= 0) throw DataError("target spacing must be positive");
    Index3 out_shape;
    for (int a = 0; a < 3; ++a) {
        out_shape[a] = static_cast<int64_t>(
            std::llround(static_cast<double>(v.shape[a]) * v.spacing_mm[a] / target_mm));
        if (out_shape[a] < 1) throw DataError("resample target produces a degenerate shape");
    }
    if (out_shape == v.shape && v.spacing_mm[0] == target_mm && v.spacing_mm[1] == target_mm &&
        v.spacing_mm[2] == target_mm) {
        return v;  // native spacing: identity, bit-exact
    }
    Volume out(out_shape, {target_mm, target_mm, target_mm});
    const int64_t nz = v.shape[0], ny = v.shape[1], nx = v.shape[2];
    auto clampi = [](int64_t i, int64_t n) { return std::min(std::max(i, int64_t(0)), n - 1); };
    for (int64_t z = 0; z < out_shape[0]; ++z) {
        double sz = static_cast<double>(z) * target_mm / v.spacing_mm[0];
        int64_t z0 = clampi(static_cast<int64_t>(std::floor(sz)), nz);
        int64_t z1 = clampi(z0 + 1, nz);
        double fz = std::min(std::max(sz - static_cast<double>(z0), 0.0), 1.0);
        for (int64_t y = 0; y < out_shape[1]; ++y) {
            double sy = static_cast<double>(y) * target_mm / v.spacing_mm[1];
            int64_t y0 = clampi(static_cast<int64_t>(std::floor(sy)), ny);
            int64_t y1 = clampi(y0 + 1, ny);
            double fy = std::min(std::max(sy - static_cast<double>(y0), 0.0), 1.0);
            for (int64_t x = 0; x < out_shape[2]; ++x) {
                double sx = static_cast<double>(x) * target_mm / v.spacing_mm[2];
                int64_t x0 = clampi(static_cast<int64_t>(std::floor(sx)), nx);
                int64_t x1 = clampi(x0 + 1, nx);
                double fx = std::min(std::max(sx - static_cast<double>(x0), 0.0), 1.0);
                double c000 = v.at(z0, y0, x0), c001 = v.at(z0, y0, x1);
                double c010 = v.at(z0, y1, x0), c011 = v.at(z0, y1, x1);
                double c100 = v.at(z1, y0, x0), c101 = v.at(z1, y0, x1);
                double c110 = v.at(z1, y1, x0), c111 = v.at(z1, y1, x1);
                double c00 = c000 * (1 - fx) + c001 * fx;
                double c01 = c010 * (1 - fx) + c011 * fx;
                double c10 = c100 * (1 - fx) + c101 * fx;
                double c11 = c110 * (1 - fx) + c111 * fx;
                double c0 = c00 * (1 - fy) + c01 * fy;
                double c1 = c10 * (1 - fy) + c11 * fy;
                out.at(z, y, x) = static_cast<float>(c0 * (1 - fz) + c1 * fz);
            }
        }
    }
    return out;
}

MaskVolume resample_mask(const MaskVolume& m, const Spacing3& spacing_mm, double target_mm) {
    if (target_mm <= 0) throw DataError("target spacing must be positive");
    Index3 out_shape;
    for (int a = 0; a < 3; ++a) {
        out_shape[a] = static_cast<int64_t>(
            std::llround(static_cast<double>(m.shape[a]) * spacing_mm[a] / target_mm));
        if (out_shape[a] < 1) throw DataError("resample target produces a degenerate shape");
    }
    MaskVolume out(out_shape);
    auto clampi = [](int64_t i, int64_t n) { return std::min(std::max(i, int64_t(0)), n - 1); };
    for (int64_t z = 0; z < out_shape[0]; ++z) {
        int64_t sz = clampi(
            static_cast<int64_t>(std::llround(static_cast<double>(z) * target_mm / spacing_mm[0])),
            m.shape[0]);
        for (int64_t y = 0; y < out_shape[1]; ++y) {
            int64_t sy = clampi(static_cast<int64_t>(std::llround(static_cast<double>(y) *
                                                                  target_mm / spacing_mm[1])),
                                m.shape[1]);
            for (int64_t x = 0; x < out_shape[2]; ++x) {
                int64_t sx = clampi(static_cast<int64_t>(std::llround(static_cast<double>(x) *
                                                                      target_mm / spacing_mm[2])),
                                    m.shape[2]);
                out.at(z, y, x) = m.at(sz, sy, sx);
            }
        }
    }
    return out;
}

Volume crop(const Volume& v, const Index3& lo, const Index3& hi) {
    Volume out = crop_impl(v, lo, hi);
    out.spacing_mm = v.spacing_mm;
    return out;
}

MaskVolume crop(const MaskVolume& m, const Index3& lo, const Index3& hi) {
    return crop_impl(m, lo, hi);
}

SoftVolume crop(const SoftVolume& s, const Index3& lo, const Index3& hi) {
    return crop_impl(s, lo, hi);
}

Index3 sample_subvolume_offset(const Index3& shape, const std::vector<int64_t>& fg_indices,
                               const Index3& size, uint64_t rng_seed) {
    if (fg_indices.empty()) throw DataError("sample_subvolume: mask has no foreground voxels");
    for (int a = 0; a < 3; ++a)
        if (size[a] > shape[a] || size[a] <= 0)
            throw DataError("sample_subvolume: window does not fit inside the volume");
    Rng rng(rng_seed);
    int64_t flat = fg_indices[static_cast<size_t>(rng.uniform_int(
        static_cast<int64_t>(fg_indices.size())))];
    Index3 fg{flat / (shape[1] * shape[2]), (flat / shape[2]) % shape[1], flat % shape[2]};
    Index3 offset;
    for (int a = 0; a < 3; ++a) {
        int64_t lo = std::max<int64_t>(0, fg[a] - size[a] + 1);
        int64_t hi = std::min(fg[a], shape[a] - size[a]);  // inclusive
        offset[a] = lo + rng.uniform_int(hi - lo + 1);
    }
    return offset;
}

SubvolumeSample sample_subvolume(const Volume& v, const MaskVolume& m, const Index3& size,
                                 uint64_t rng_seed) {
    if (v.shape != m.shape) throw DataError("sample_subvolume: volume and mask shapes differ");
    std::vector<int64_t> fg;
    for (int64_t i = 0; i < m.size(); ++i)
        if (m.data[static_cast<size_t>(i)]) fg.push_back(i);
    Index3 off = sample_subvolume_offset(v.shape, fg, size, rng_seed);
    Index3 hi{off[0] + size[0], off[1] + size[1], off[2] + size[2]};
    return SubvolumeSample{crop(v, off, hi), crop(m, off, hi), off};
}

Volume rotate_z_180(const Volume& v) {
    Volume out = rotate_impl(v);
    out.spacing_mm = v.spacing_mm;
    return out;
}

MaskVolume rotate_z_180(const MaskVolume& m) { return rotate_impl(m); }

SoftVolume rotate_z_180(const SoftVolume& s) { return rotate_impl(s); }

// --- SVOL I/O -------------------------------------------------------------

namespace {

using nlohmann::json;

void append_u32_le(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::vector<unsigned char> svol_bytes(const Index3& shape, const Spacing3& spacing,
                                      const char* dtype, const char* kind, const void* payload,
                                      size_t payload_size) {
    json header;
    header["shape"] = {shape[0], shape[1], shape[2]};
    header["spacing_mm"] = {spacing[0], spacing[1], spacing[2]};
    header["dtype"] = dtype;
    header["order"] = "zyx";
    header["endian"] = "little";
    header["kind"] = kind;
    std::string htext = header.dump();
    std::vector<unsigned char> out;
    out.reserve(8 + htext.size() + payload_size);
    out.insert(out.end(), {'S', 'V', 'O', 'L'});
    append_u32_le(out, static_cast<uint32_t>(htext.size()));
    out.insert(out.end(), htext.begin(), htext.end());
    const auto* p = static_cast<const unsigned char*>(payload);
    out.insert(out.end(), p, p + payload_size);
    return out;
}

struct SvolHeader {
    Index3 shape;
    Spacing3 spacing;
    std::string dtype;
    std::string kind;
    size_t payload_offset = 0;
};

SvolHeader parse_svol_header(const std::vector<unsigned char>& bytes, const std::string& path) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "SVOL", 4) != 0)
        throw SvolError(SvolErrorKind::bad_magic, "not an SVOL file (bad magic): " + path);
    uint32_t hlen = static_cast<uint32_t>(bytes[4]) | (static_cast<uint32_t>(bytes[5]) << 8) |
                    (static_cast<uint32_t>(bytes[6]) << 16) |
                    (static_cast<uint32_t>(bytes[7]) << 24);
    if (bytes.size() < 8 + static_cast<size_t>(hlen))
        throw SvolError(SvolErrorKind::bad_header, "truncated SVOL header: " + path);
    json header;
    try {
        header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    } catch (const json::exception& e) {
        throw SvolError(SvolErrorKind::bad_header,
                        "invalid SVOL header JSON in " + path + ": " + e.what());
    }
    SvolHeader h;
    try {
        auto sh = header.at("shape");
        auto sp = header.at("spacing_mm");
        h.shape = {sh.at(0).get<int64_t>(), sh.at(1).get<int64_t>(), sh.at(2).get<int64_t>()};
        h.spacing = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
        h.dtype = header.at("dtype").get<std::string>();
        h.kind = header.at("kind").get<std::string>();
        if (header.at("order").get<std::string>() != "zyx" ||
            header.at("endian").get<std::string>() != "little")
            throw SvolError(SvolErrorKind::bad_header, "unsupported SVOL layout in " + path);
    } catch (const json::exception& e) {
        throw SvolError(SvolErrorKind::bad_header,
                        "missing SVOL header field in " + path + ": " + e.what());
    }
    if (h.shape[0] <= 0 || h.shape[1] <= 0 || h.shape[2] <= 0)
        throw SvolError(SvolErrorKind::bad_header, "non-positive SVOL shape in " + path);
    if (h.dtype != "f32" && h.dtype != "u8")
        throw SvolError(SvolErrorKind::bad_header, "unknown SVOL dtype in " + path);
    if (h.kind != "volume" && h.kind != "mask" && h.kind != "soft")
        throw SvolError(SvolErrorKind::bad_header, "unknown SVOL kind in " + path);
    if ((h.kind == "mask") != (h.dtype == "u8"))
        throw SvolError(SvolErrorKind::bad_header, "SVOL kind/dtype mismatch in " + path);
    h.payload_offset = 8 + hlen;
    size_t dtype_size = h.dtype == "f32" ? 4 : 1;
    size_t expect = static_cast<size_t>(numel(h.shape)) * dtype_size;
    if (bytes.size() - h.payload_offset != expect)
        throw SvolError(SvolErrorKind::payload_size, "SVOL payload size mismatch in " + path);
    return h;
}

std::vector<float> payload_f32(const std::vector<unsigned char>& bytes, size_t offset, int64_t n) {
    std::vector<float> out(static_cast<size_t>(n));
    std::memcpy(out.data(), bytes.data() + offset, static_cast<size_t>(n) * 4);
    return out;
}

}  // namespace

SvolAny read_svol(const std::string& path) {
    auto bytes = read_file_bytes(path);
    SvolHeader h = parse_svol_header(bytes, path);
    if (h.kind == "volume") {
        Volume v;
        v.shape = h.shape;
        v.spacing_mm = h.spacing;
        v.data = payload_f32(bytes, h.payload_offset, numel(h.shape));
        for (float x : v.data)
            if (!std::isfinite(x))
                throw SvolError(SvolErrorKind::non_finite, "non-finite value in " + path);
        return v;
    }
    if (h.kind == "mask") {
        MaskVolume m;
        m.shape = h.shape;
        m.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload_offset), bytes.end());
        for (uint8_t x : m.data)
            if (x > 1)
                throw SvolError(SvolErrorKind::mask_domain,
                                "mask value outside {0,1} in " + path);
        return m;
    }
    SoftVolume s;
    s.shape = h.shape;
    s.data = payload_f32(bytes, h.payload_offset, numel(h.shape));
    for (float x : s.data) {
        if (!std::isfinite(x))
            throw SvolError(SvolErrorKind::non_finite, "non-finite value in " + path);
        if (x < 0.0f || x > 1.0f)
            throw SvolError(SvolErrorKind::soft_domain, "soft value outside [0,1] in " + path);
    }
    return s;
}

Volume read_volume(const std::string& path) {
    auto any = read_svol(path);
    if (auto* v = std::get_if<Volume>(&any)) return std::move(*v);
    throw SvolError(SvolErrorKind::bad_header, "expected kind=volume in " + path);
}

MaskVolume read_mask(const std::string& path) {
    auto any = read_svol(path);
    if (auto* m = std::get_if<MaskVolume>(&any)) return std::move(*m);
    throw SvolError(SvolErrorKind::bad_header, "expected kind=mask in " + path);
}

SoftVolume read_soft(const std::string& path) {
    auto any = read_svol(path);
    if (auto* s = std::get_if<SoftVolume>(&any)) return std::move(*s);
    throw SvolError(SvolErrorKind::bad_header, "expected kind=soft in " + path);
}

void write_svol(const Volume& v, const std::string& path) {
    v.validate();
    auto bytes = svol_bytes(v.shape, v.spacing_mm, "f32", "volume", v.data.data(),
                            v.data.size() * 4);
    write_file_bytes(path, bytes.data(), bytes.size());
}

void write_svol(const MaskVolume& m, const std::string& path, const Spacing3& spacing_mm) {
    m.validate();
    auto bytes = svol_bytes(m.shape, spacing_mm, "u8", "mask", m.data.data(), m.data.size());
    write_file_bytes(path, bytes.data(), bytes.size());
}

void write_svol(const SoftVolume& s, const std::string& path, const Spacing3& spacing_mm) {
    s.validate();
    auto bytes = svol_bytes(s.shape, spacing_mm, "f32", "soft", s.data.data(), s.data.size() * 4);
    write_file_bytes(path, bytes.data(), bytes.size());
}

}  // namespace ilseg
