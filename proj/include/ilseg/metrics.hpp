#pragma once

#include <string>
#include <vector>

#include "ilseg/stats.hpp"
#include "ilseg/volume.hpp"

namespace ilseg {

// 2|P and G| / (|P|+|G|); 1.0 when both masks are empty.
double dice(const MaskVolume& pred, const MaskVolume& gt);

struct CasePair {
    MaskVolume pred;
    MaskVolume gt;
};

// Dice on pooled TP/FP/FN counts across all cases ("combining all CT scans
// into one").
double global_dice(const std::vector<CasePair>& cases);

struct DiceSummary {
    double mean = 0.0;
    double std = 0.0;  // population std; the rendered report uses sample std
    std::vector<double> values;
};

DiceSummary per_case_dice(const std::vector<CasePair>& cases);

// Connected component of a GT mask under 26-connectivity.
struct TumorInstance {
    int64_t case_id = 0;
    std::vector<int64_t> voxels;  // flat indices, sorted ascending
    double volume_mm3 = 0.0;
    Index3 bbox_lo{0, 0, 0};
    Index3 bbox_hi{0, 0, 0};  // exclusive
};

// Maximal 26-connected components, ordered by first (lowest flat) voxel.
std::vector<TumorInstance> extract_instances(const MaskVolume& gt, const Spacing3& spacing);

// Per instance: Dice between the instance's voxels and pred restricted to the
// instance bounding box dilated by margin_vox (clamped to bounds).
DiceSummary per_tumor_dice(const std::vector<TumorInstance>& instances, const MaskVolume& pred,
                           int64_t margin_vox = 5);

std::vector<TumorInstance> size_filter(const std::vector<TumorInstance>& instances,
                                       double min_mm3);

// One rendered row of the comparison table.
struct VariantMetrics {
    std::string variant;
    double global = 0.0;
    DiceSummary per_case;
    DiceSummary per_tumor;
    DiceSummary per_tumor_large;
};

struct ReportOptions {
    std::string reference_variant = "seg_il";  // p-values are computed vs this row
    double large_tumor_min_mm3 = 125.0;
    int64_t margin_vox = 5;
};

// Comparison table across variants with paired t-tests vs the reference.
// CSV columns: variant, global_dice, per_case_mean, per_case_std,
// per_tumor_mean, per_tumor_std, per_tumor_large_mean, per_tumor_large_std,
// p_per_case, p_per_tumor, p_per_tumor_large. Unavailable p-values render
// as an em dash. Stds in the rendered report are sample (n-1) stds.
struct ComparisonReport {
    std::vector<VariantMetrics> rows;
    std::string csv;
    std::string markdown;
};

ComparisonReport report(const std::vector<VariantMetrics>& rows, const ReportOptions& opt);

}  // namespace ilseg
