#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ilseg/likelihood.hpp"
#include "ilseg/metrics.hpp"
#include "ilseg/optim.hpp"
#include "ilseg/phantom.hpp"
#include "ilseg/unet.hpp"

namespace ilseg {

enum class Variant { seg, seg_pp, seg_il_in, seg_il, seg_il_shifted };

Variant variant_from_string(const std::string& name);
std::string variant_name(Variant v);
int64_t variant_in_channels(Variant v);
int64_t variant_out_channels(Variant v);
// seg_pp trains exactly like seg (the post-processing happens at prediction).
Variant trained_variant(Variant v);

struct ExperimentConfig {
    Variant variant = Variant::seg_il;
    Index3 subvolume{32, 32, 32};
    int64_t steps = 2000;
    double lr = 3e-4;
    double weight_decay = 5e-4;
    double lambda = 1.0;
    int folds = 5;
    uint64_t seed = 0;
    std::vector<int64_t> encoder_channels{4, 8, 16, 32};
    int64_t groupnorm_groups = 4;
    DiffusionParams diffusion{};
    std::string likelihood = "fit-per-fold";  // or a model JSON path
    double shift_delta = 100.0;
    std::string data_manifest;
    double input_offset = 75.0;
    double input_scale = 125.0;
    double threshold = 0.5;
    double aug_rot_prob = 0.5;
    int64_t margin_vox = 5;
    double large_tumor_min_mm3 = 125.0;
    int64_t overlap = 8;
    std::string precision = "f32";  // or "f64"
    int threads = 1;

    void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// Deterministic shuffled partition into k near-equal folds; the first
// (n mod k) folds take the extra case.
struct FoldSplit {
    std::vector<std::vector<int64_t>> val_ids;

    std::vector<int64_t> train_ids(int fold) const;
    int folds() const { return static_cast<int>(val_ids.size()); }
};

FoldSplit make_folds(int64_t n_cases, int k, uint64_t seed);
FoldSplit make_folds(const DatasetManifest& manifest, int k, uint64_t seed);

// In-memory dataset with per-case smoothed volumes cached.
struct LoadedCase {
    Volume volume;
    MaskVolume mask;
    Volume smoothed;
    std::vector<int64_t> fg_indices;
};

struct Dataset {
    std::vector<LoadedCase> cases;
};

Dataset load_dataset(const DatasetManifest& manifest, const DiffusionParams& d);

struct TrainResult {
    std::string checkpoint_path;
    std::string loss_csv_path;
    std::string model_path;  // likelihood model snapshot used for this fold
};

// Trains one fold of one variant and writes ckpt_fold{k}.snet,
// loss_fold{k}.csv and model_fold{k}.json into out_dir. Deterministic given
// the config.
TrainResult train_variant(const ExperimentConfig& cfg, int fold, const std::string& out_dir);
TrainResult train_variant(const ExperimentConfig& cfg, int fold, const std::string& out_dir,
                          const Dataset& data, const FoldSplit& split);

// Full-volume probability map by tiled inference (tile = cfg.subvolume,
// overlapping regions averaged); returns the segmentation channel. For
// seg_pp the map is multiplied voxelwise by Y_IL. The likelihood model is
// required for seg_pp and seg_il_in.
SoftVolume predict_volume(const Network<float>& net, const Volume& v, Variant variant,
                          const ExperimentConfig& cfg, const LikelihoodModel* model);

MaskVolume threshold_mask(const SoftVolume& probs, double threshold);

// Cross-validated evaluation: every case is predicted by the checkpoint of
// the fold that holds it out.
struct EvaluationInputs {
    std::vector<std::string> checkpoint_paths;  // per fold
    std::vector<std::string> model_paths;       // per fold (may be empty for seg)
};

VariantMetrics evaluate_variant(const ExperimentConfig& cfg, Variant variant,
                                const Dataset& data, const FoldSplit& split,
                                const EvaluationInputs& inputs);

struct CompareResult {
    ComparisonReport report;
    std::vector<std::string> artifact_paths;  // files written under out_dir
};

// Trains all trainable variants across all folds, evaluates the five Table-1
// variants and writes report.csv / report.md / per_case.csv under out_dir.
CompareResult compare_all_variants(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace ilseg
