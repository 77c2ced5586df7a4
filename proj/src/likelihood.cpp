#include "ilseg/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace ilseg {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Pre-rescale kernel-sum density over weighted centers.
double kde_density(const std::vector<double>& centers, const std::vector<double>& weights,
                   double total_weight, double h, double x) {
    double acc = 0.0;
    for (size_t i = 0; i < centers.size(); ++i) {
        double u = (x - centers[i]) / h;
        acc += weights[i] * std::exp(-0.5 * u * u);
    }
    return acc * kInvSqrt2Pi / (total_weight * h);
}

}  // namespace

double LikelihoodModel::evaluate(double x) const {
    double total = 0.0;
    for (double w : bin_weights) total += w;
    double d = kde_density(bin_centers, bin_weights, total, bandwidth, x - shift);
    double v = d / norm_max;
    return std::min(1.0, std::max(0.0, v));
}

std::vector<double> LikelihoodModel::support_grid() const {
    double lo = *std::min_element(bin_centers.begin(), bin_centers.end()) - 3.0 * bandwidth;
    double hi = *std::max_element(bin_centers.begin(), bin_centers.end()) + 3.0 * bandwidth;
    std::vector<double> grid;
    int64_t n = static_cast<int64_t>(std::floor((hi - lo) / 0.5)) + 1;
    grid.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) grid.push_back(lo + 0.5 * static_cast<double>(i));
    return grid;
}

IntensitySample harvest_smoothed(
    const std::vector<std::pair<const Volume*, const MaskVolume*>>& smoothed_pairs) {
    IntensitySample s;
    for (const auto& [vol, mask] : smoothed_pairs) {
        if (vol->shape != mask->shape)
            throw DataError("harvest_intensities: volume/mask shape mismatch");
        bool contributed = false;
        for (int64_t i = 0; i < mask->size(); ++i) {
            if (mask->data[static_cast<size_t>(i)]) {
                s.values.push_back(static_cast<double>(vol->data[static_cast<size_t>(i)]));
                contributed = true;
            }
        }
        if (contributed) ++s.source_count;
    }
    if (s.values.empty())
        throw DataError("harvest_intensities: no foreground voxels in any mask");
    return s;
}

IntensitySample harvest_intensities(
    const std::vector<std::pair<const Volume*, const MaskVolume*>>& pairs,
    const DiffusionParams& d) {
    std::vector<Volume> smoothed;
    smoothed.reserve(pairs.size());
    for (const auto& [vol, mask] : pairs) {
        if (vol->shape != mask->shape)
            throw DataError("harvest_intensities: volume/mask shape mismatch");
        smoothed.push_back(diffuse(*vol, d));
    }
    std::vector<std::pair<const Volume*, const MaskVolume*>> sp;
    for (size_t i = 0; i < pairs.size(); ++i) sp.emplace_back(&smoothed[i], pairs[i].second);
    return harvest_smoothed(sp);
}

LikelihoodModel fit_kde(const IntensitySample& s, bool compress) {
    const auto& v = s.values;
    if (v.size() < 2) throw DataError("fit_kde: need at least 2 samples");
    for (double x : v)
        if (!std::isfinite(x)) throw DataError("fit_kde: non-finite sample value");

    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= n;
    if (var <= 0.0) throw DataError("fit_kde: zero-variance sample");

    LikelihoodModel m;
    m.bandwidth = std::sqrt(var) * std::pow(n, -0.2);  // Scott's rule
    m.bandwidth_rule = "scott";
    m.shift = 0.0;

    const double vmin = *std::min_element(v.begin(), v.end());
    const double vmax = *std::max_element(v.begin(), v.end());
    if (compress) {
        // 1 HU-spaced weighted histogram spanning [min, max].
        int64_t nbins = static_cast<int64_t>(std::llround(vmax - vmin)) + 1;
        m.bin_centers.resize(static_cast<size_t>(nbins));
        m.bin_weights.assign(static_cast<size_t>(nbins), 0.0);
        for (int64_t k = 0; k < nbins; ++k)
            m.bin_centers[static_cast<size_t>(k)] = vmin + static_cast<double>(k);
        for (double x : v) {
            int64_t k = std::llround(x - vmin);
            k = std::min(std::max(k, int64_t(0)), nbins - 1);
            m.bin_weights[static_cast<size_t>(k)] += 1.0;
        }
    } else {
        m.bin_centers = v;
        m.bin_weights.assign(v.size(), 1.0);
    }

    m.norm_max = 1.0;  // placeholder so support_grid() works
    double best = 0.0;
    for (double x : m.support_grid()) {
        double d = kde_density(m.bin_centers, m.bin_weights, n, m.bandwidth, x);
        if (d > best) best = d;
    }
    m.norm_max = best;
    return m;
}

SoftVolume likelihood_volume_smoothed(const Volume& smoothed, const LikelihoodModel& m) {
    SoftVolume out;
    out.shape = smoothed.shape;
    out.data.resize(smoothed.data.size());
    for (size_t i = 0; i < smoothed.data.size(); ++i)
        out.data[i] = static_cast<float>(m.evaluate(static_cast<double>(smoothed.data[i])));
    return out;
}

SoftVolume likelihood_volume(const Volume& v, const LikelihoodModel& m, const DiffusionParams& d) {
    return likelihood_volume_smoothed(diffuse(v, d), m);
}

LikelihoodModel shifted(const LikelihoodModel& m, double delta) {
    LikelihoodModel out = m;
    out.shift = m.shift + delta;
    return out;
}

void save_model(const LikelihoodModel& m, const std::string& path) {
    nlohmann::json j;
    j["kind"] = "gaussian-kde";
    j["bandwidth"] = m.bandwidth;
    j["bin_centers"] = m.bin_centers;
    j["bin_weights"] = m.bin_weights;
    j["norm_max"] = m.norm_max;
    j["shift"] = m.shift;
    j["bandwidth_rule"] = m.bandwidth_rule;
    write_file_text(path, j.dump(2) + "\n");
}

LikelihoodModel load_model(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid likelihood model JSON in " + path + ": " + e.what());
    }
    LikelihoodModel m;
    try {
        if (j.at("kind").get<std::string>() != "gaussian-kde")
            throw DataError("unsupported likelihood model kind in " + path);
        m.bandwidth = j.at("bandwidth").get<double>();
        m.bin_centers = j.at("bin_centers").get<std::vector<double>>();
        m.bin_weights = j.at("bin_weights").get<std::vector<double>>();
        m.norm_max = j.at("norm_max").get<double>();
        m.shift = j.value("shift", 0.0);
        m.bandwidth_rule = j.value("bandwidth_rule", std::string("scott"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("missing likelihood model field in " + path + ": " + e.what());
    }
    if (!(m.bandwidth > 0.0)) throw DataError("likelihood model bandwidth must be positive");
    if (!(m.norm_max > 0.0)) throw DataError("likelihood model norm_max must be positive");
    if (m.bin_centers.empty() || m.bin_centers.size() != m.bin_weights.size())
        throw DataError("likelihood model bins are empty or mismatched");
    return m;
}

void write_curve_csv(const LikelihoodModel& m, const std::string& path) {
    std::string out = "intensity,likelihood\n";
    char buf[80];
    for (double x : m.support_grid()) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", x + m.shift, m.evaluate(x + m.shift));
        out += buf;
    }
    write_file_text(path, out);
}

}  // namespace ilseg
