#include "ilseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>

namespace ilseg {

namespace {

void check_same_shape(const MaskVolume& a, const MaskVolume& b) {
    if (a.shape != b.shape) throw DataError("dice: mask shapes differ");
}

double dice_from_counts(int64_t intersection, int64_t pred_count, int64_t gt_count) {
    if (pred_count + gt_count == 0) return 1.0;  // both empty
    return 2.0 * static_cast<double>(intersection) / static_cast<double>(pred_count + gt_count);
}

DiceSummary summarize(std::vector<double> values) {
    DiceSummary s;
    s.values = std::move(values);
    if (!s.values.empty()) {
        s.mean = mean(s.values);
        s.std = std_population(s.values);
    }
    return s;
}

}  // namespace

double dice(const MaskVolume& pred, const MaskVolume& gt) {
    check_same_shape(pred, gt);
    int64_t inter = 0, pc = 0, gc = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        pc += pred.data[i];
        gc += gt.data[i];
        inter += pred.data[i] & gt.data[i];
    }
    return dice_from_counts(inter, pc, gc);
}

double global_dice(const std::vector<CasePair>& cases) {
    if (cases.empty()) throw DataError("global_dice: no cases");
    int64_t inter = 0, pc = 0, gc = 0;
    for (const auto& c : cases) {
        check_same_shape(c.pred, c.gt);
        for (size_t i = 0; i < c.pred.data.size(); ++i) {
            pc += c.pred.data[i];
            gc += c.gt.data[i];
            inter += c.pred.data[i] & c.gt.data[i];
        }
    }
    return dice_from_counts(inter, pc, gc);
}

DiceSummary per_case_dice(const std::vector<CasePair>& cases) {
    if (cases.empty()) throw DataError("per_case_dice: no cases");
    std::vector<double> values;
    values.reserve(cases.size());
    for (const auto& c : cases) values.push_back(dice(c.pred, c.gt));
    return summarize(std::move(values));
}

std::vector<TumorInstance> extract_instances(const MaskVolume& gt, const Spacing3& spacing) {
    const int64_t nz = gt.shape[0], ny = gt.shape[1], nx = gt.shape[2];
    const double voxel_mm3 = spacing[0] * spacing[1] * spacing[2];
    std::vector<uint8_t> visited(gt.data.size(), 0);
    std::vector<TumorInstance> out;

    for (int64_t start = 0; start < gt.size(); ++start) {
        if (!gt.data[static_cast<size_t>(start)] || visited[static_cast<size_t>(start)]) continue;
        TumorInstance inst;
        std::deque<int64_t> queue{start};
        visited[static_cast<size_t>(start)] = 1;
        while (!queue.empty()) {
            int64_t cur = queue.front();
            queue.pop_front();
            inst.voxels.push_back(cur);
            int64_t z = cur / (ny * nx), y = (cur / nx) % ny, x = cur % nx;
            for (int64_t dz = -1; dz <= 1; ++dz)
                for (int64_t dy = -1; dy <= 1; ++dy)
                    for (int64_t dx = -1; dx <= 1; ++dx) {
                        if (dz == 0 && dy == 0 && dx == 0) continue;
                        int64_t zz = z + dz, yy = y + dy, xx = x + dx;
                        if (zz < 0 || zz >= nz || yy < 0 || yy >= ny || xx < 0 || xx >= nx)
                            continue;
                        int64_t n = flat_index(gt.shape, zz, yy, xx);
                        if (gt.data[static_cast<size_t>(n)] && !visited[static_cast<size_t>(n)]) {
                            visited[static_cast<size_t>(n)] = 1;
                            queue.push_back(n);
                        }
                    }
        }
        std::sort(inst.voxels.begin(), inst.voxels.end());
        inst.volume_mm3 = static_cast<double>(inst.voxels.size()) * voxel_mm3;
        inst.bbox_lo = {nz, ny, nx};
        inst.bbox_hi = {0, 0, 0};
        for (int64_t v : inst.voxels) {
            Index3 p{v / (ny * nx), (v / nx) % ny, v % nx};
            for (int a = 0; a < 3; ++a) {
                inst.bbox_lo[a] = std::min(inst.bbox_lo[a], p[a]);
                inst.bbox_hi[a] = std::max(inst.bbox_hi[a], p[a] + 1);
            }
        }
        out.push_back(std::move(inst));
    }
    return out;
}

DiceSummary per_tumor_dice(const std::vector<TumorInstance>& instances, const MaskVolume& pred,
                           int64_t margin_vox) {
    std::vector<double> values;
    values.reserve(instances.size());
    for (const auto& inst : instances) {
        Index3 lo, hi;
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::max<int64_t>(0, inst.bbox_lo[a] - margin_vox);
            hi[a] = std::min(pred.shape[a], inst.bbox_hi[a] + margin_vox);
        }
        int64_t pred_count = 0;
        for (int64_t z = lo[0]; z < hi[0]; ++z)
            for (int64_t y = lo[1]; y < hi[1]; ++y)
                for (int64_t x = lo[2]; x < hi[2]; ++x) pred_count += pred.at(z, y, x);
        int64_t inter = 0;
        for (int64_t v : inst.voxels) inter += pred.data[static_cast<size_t>(v)];
        values.push_back(dice_from_counts(inter, pred_count,
                                          static_cast<int64_t>(inst.voxels.size())));
    }
    return summarize(std::move(values));
}

std::vector<TumorInstance> size_filter(const std::vector<TumorInstance>& instances,
                                       double min_mm3) {
    std::vector<TumorInstance> out;
    for (const auto& inst : instances)
        if (inst.volume_mm3 >= min_mm3) out.push_back(inst);
    return out;
}

namespace {

std::string fmt_g(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
}

// Table-1 style "mean +- std" in percent, one decimal, sample std.
std::string fmt_pct_pair(const DiceSummary& s) {
    std::string out = format_fixed(100.0 * s.mean, 1);
    if (s.values.size() >= 2) out += " ± " + format_fixed(100.0 * std_sample(s.values), 1);
    return out;
}

// "—" where a p-value cannot be computed (zero-variance differences).
std::string p_cell(const std::vector<double>& ref, const std::vector<double>& other,
                   bool* ok = nullptr) {
    try {
        TTestResult r = paired_t_test(ref, other);
        if (ok) *ok = true;
        return fmt_g(r.p_two_sided);
    } catch (const DataError&) {
        if (ok) *ok = false;
        return "—";
    }
}

}  // namespace

ComparisonReport report(const std::vector<VariantMetrics>& rows, const ReportOptions& opt) {
    if (rows.empty()) throw DataError("report: no variant rows");

    const VariantMetrics* ref = nullptr;
    for (const auto& r : rows)
        if (r.variant == opt.reference_variant) ref = &r;
    const bool with_p = rows.size() > 1 && ref != nullptr;

    for (const auto& r : rows) {
        if (r.per_case.values.size() != rows.front().per_case.values.size() ||
            r.per_tumor.values.size() != rows.front().per_tumor.values.size() ||
            r.per_tumor_large.values.size() != rows.front().per_tumor_large.values.size())
            throw DataError("report: variants cover mismatched case/instance sets");
    }

    ComparisonReport rep;
    rep.rows = rows;

    std::string csv =
        "variant,global_dice,per_case_mean,per_case_std,per_tumor_mean,per_tumor_std,"
        "per_tumor_large_mean,per_tumor_large_std";
    if (with_p) csv += ",p_per_case,p_per_tumor,p_per_tumor_large";
    csv += "\n";
    auto sample_std_or_zero = [](const DiceSummary& s) {
        return s.values.size() >= 2 ? std_sample(s.values) : 0.0;
    };
    for (const auto& r : rows) {
        csv += r.variant + "," + fmt_g(r.global) + "," + fmt_g(r.per_case.mean) + "," +
               fmt_g(sample_std_or_zero(r.per_case)) + "," + fmt_g(r.per_tumor.mean) + "," +
               fmt_g(sample_std_or_zero(r.per_tumor)) + "," + fmt_g(r.per_tumor_large.mean) +
               "," + fmt_g(sample_std_or_zero(r.per_tumor_large));
        if (with_p) {
            if (&r == ref) {
                csv += ",—,—,—";
            } else {
                csv += "," + p_cell(ref->per_case.values, r.per_case.values);
                csv += "," + p_cell(ref->per_tumor.values, r.per_tumor.values);
                csv += "," + p_cell(ref->per_tumor_large.values, r.per_tumor_large.values);
            }
        }
        csv += "\n";
    }
    rep.csv = csv;

    std::string md = "| Method | Global Dice (%) | Per case Dice (%) |";
    if (with_p) md += " p-value |";
    md += " Per tumor Dice (%) |";
    if (with_p) md += " p-value |";
    md += " Per tumor (>=125 mm3) Dice (%) |";
    if (with_p) md += " p-value |";
    md += "\n|---|---|---|";
    if (with_p) md += "---|";
    md += "---|";
    if (with_p) md += "---|";
    md += "---|";
    if (with_p) md += "---|";
    md += "\n";
    for (const auto& r : rows) {
        md += "| " + r.variant + " | " + format_fixed(100.0 * r.global, 1) + " | " +
              fmt_pct_pair(r.per_case) + " | ";
        if (with_p) md += (&r == ref ? "—" : p_cell(ref->per_case.values, r.per_case.values)) + " | ";
        md += fmt_pct_pair(r.per_tumor) + " | ";
        if (with_p)
            md += (&r == ref ? "—" : p_cell(ref->per_tumor.values, r.per_tumor.values)) + " | ";
        md += fmt_pct_pair(r.per_tumor_large) + " |";
        if (with_p)
            md += " " + (&r == ref ? std::string("—")
                                   : p_cell(ref->per_tumor_large.values, r.per_tumor_large.values)) +
                  " |";
        md += "\n";
    }
    rep.markdown = md;
    return rep;
}

}  // namespace ilseg
