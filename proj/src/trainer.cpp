#include "ilseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ilseg/losses.hpp"
#include "json.hpp"

namespace ilseg {

Variant variant_from_string(const std::string& name) {
    if (name == "seg") return Variant::seg;
    if (name == "seg_pp") return Variant::seg_pp;
    if (name == "seg_il_in") return Variant::seg_il_in;
    if (name == "seg_il") return Variant::seg_il;
    if (name == "seg_il_shifted") return Variant::seg_il_shifted;
    throw ConfigError("unknown variant: " + name);
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::seg: return "seg";
        case Variant::seg_pp: return "seg_pp";
        case Variant::seg_il_in: return "seg_il_in";
        case Variant::seg_il: return "seg_il";
        case Variant::seg_il_shifted: return "seg_il_shifted";
    }
    throw ConfigError("invalid variant value");
}

int64_t variant_in_channels(Variant v) { return v == Variant::seg_il_in ? 2 : 1; }

int64_t variant_out_channels(Variant v) {
    return (v == Variant::seg_il || v == Variant::seg_il_shifted) ? 2 : 1;
}

Variant trained_variant(Variant v) { return v == Variant::seg_pp ? Variant::seg : v; }

void ExperimentConfig::validate() const {
    for (int a = 0; a < 3; ++a)
        if (subvolume[a] < 8 || subvolume[a] % 8 != 0)
            throw ConfigError("subvolume dims must be positive multiples of 8");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (lr < 0 || weight_decay < 0 || lambda < 0)
        throw ConfigError("lr/weight_decay/lambda must be non-negative");
    if (encoder_channels.size() != 4) throw ConfigError("encoder_channels must have length 4");
    if (precision != "f32" && precision != "f64")
        throw ConfigError("precision must be f32 or f64");
    if (threshold < 0 || threshold > 1) throw ConfigError("threshold must lie in [0,1]");
    if (aug_rot_prob < 0 || aug_rot_prob > 1)
        throw ConfigError("aug_rot_prob must lie in [0,1]");
    if (overlap < 0 || overlap >= std::min({subvolume[0], subvolume[1], subvolume[2]}))
        throw ConfigError("overlap must be non-negative and smaller than the tile");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (input_scale == 0) throw ConfigError("input_scale must be nonzero");
    diffusion.validate();
    UNetConfig unet{1, 1, encoder_channels, groupnorm_groups};
    unet.validate();
}

namespace {

using nlohmann::json;

const char* const kConfigKeys[] = {
    "variant",         "subvolume",      "steps",        "lr",
    "weight_decay",    "lambda",         "folds",        "seed",
    "encoder_channels", "groupnorm_groups", "diffusion",  "likelihood",
    "shift_delta",     "data_manifest",  "input_offset", "input_scale",
    "threshold",       "aug_rot_prob",   "margin_vox",   "large_tumor_min_mm3",
    "overlap",         "precision",      "threads",
};

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid experiment config JSON: ") + e.what());
    }
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const char* k : kConfigKeys) known = known || key == k;
        if (!known) throw ConfigError("unknown config key: " + key);
    }
    ExperimentConfig c;
    try {
        if (j.contains("variant")) c.variant = variant_from_string(j["variant"].get<std::string>());
        if (j.contains("subvolume")) {
            c.subvolume = {j["subvolume"].at(0).get<int64_t>(),
                           j["subvolume"].at(1).get<int64_t>(),
                           j["subvolume"].at(2).get<int64_t>()};
        }
        c.steps = j.value("steps", c.steps);
        c.lr = j.value("lr", c.lr);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.lambda = j.value("lambda", c.lambda);
        c.folds = j.value("folds", c.folds);
        c.seed = j.value("seed", c.seed);
        if (j.contains("encoder_channels"))
            c.encoder_channels = j["encoder_channels"].get<std::vector<int64_t>>();
        c.groupnorm_groups = j.value("groupnorm_groups", c.groupnorm_groups);
        if (j.contains("diffusion")) {
            const auto& d = j["diffusion"];
            c.diffusion.iterations = d.value("iterations", c.diffusion.iterations);
            c.diffusion.step = d.value("step", c.diffusion.step);
            c.diffusion.scale_sigma = d.value("scale_sigma", c.diffusion.scale_sigma);
            std::string es = d.value("edge_stop", std::string("tukey"));
            if (es == "tukey") c.diffusion.edge_stop = EdgeStop::tukey;
            else if (es == "exponential") c.diffusion.edge_stop = EdgeStop::exponential;
            else throw ConfigError("diffusion edge_stop must be tukey or exponential");
        }
        c.likelihood = j.value("likelihood", c.likelihood);
        c.shift_delta = j.value("shift_delta", c.shift_delta);
        c.data_manifest = j.value("data_manifest", c.data_manifest);
        c.input_offset = j.value("input_offset", c.input_offset);
        c.input_scale = j.value("input_scale", c.input_scale);
        c.threshold = j.value("threshold", c.threshold);
        c.aug_rot_prob = j.value("aug_rot_prob", c.aug_rot_prob);
        c.margin_vox = j.value("margin_vox", c.margin_vox);
        c.large_tumor_min_mm3 = j.value("large_tumor_min_mm3", c.large_tumor_min_mm3);
        c.overlap = j.value("overlap", c.overlap);
        c.precision = j.value("precision", c.precision);
        c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad experiment config field: ") + e.what());
    }
    c.validate();
    return c;
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["variant"] = variant_name(c.variant);
    j["subvolume"] = {c.subvolume[0], c.subvolume[1], c.subvolume[2]};
    j["steps"] = c.steps;
    j["lr"] = c.lr;
    j["weight_decay"] = c.weight_decay;
    j["lambda"] = c.lambda;
    j["folds"] = c.folds;
    j["seed"] = c.seed;
    j["encoder_channels"] = c.encoder_channels;
    j["groupnorm_groups"] = c.groupnorm_groups;
    j["diffusion"] = {{"iterations", c.diffusion.iterations},
                      {"step", c.diffusion.step},
                      {"scale_sigma", c.diffusion.scale_sigma},
                      {"edge_stop", c.diffusion.edge_stop == EdgeStop::tukey ? "tukey"
                                                                             : "exponential"}};
    j["likelihood"] = c.likelihood;
    j["shift_delta"] = c.shift_delta;
    j["data_manifest"] = c.data_manifest;
    j["input_offset"] = c.input_offset;
    j["input_scale"] = c.input_scale;
    j["threshold"] = c.threshold;
    j["aug_rot_prob"] = c.aug_rot_prob;
    j["margin_vox"] = c.margin_vox;
    j["large_tumor_min_mm3"] = c.large_tumor_min_mm3;
    j["overlap"] = c.overlap;
    j["precision"] = c.precision;
    j["threads"] = c.threads;
    return j.dump(2);
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_json(read_file_text(path));
}

std::vector<int64_t> FoldSplit::train_ids(int fold) const {
    if (fold < 0 || fold >= folds()) throw ConfigError("fold index out of range");
    std::vector<int64_t> out;
    for (int f = 0; f < folds(); ++f)
        if (f != fold)
            out.insert(out.end(), val_ids[static_cast<size_t>(f)].begin(),
                       val_ids[static_cast<size_t>(f)].end());
    std::sort(out.begin(), out.end());
    return out;
}

FoldSplit make_folds(int64_t n_cases, int k, uint64_t seed) {
    if (k < 2) throw ConfigError("make_folds: k must be >= 2");
    if (static_cast<int64_t>(k) > n_cases) throw DataError("make_folds: k exceeds case count");
    std::vector<int64_t> ids(static_cast<size_t>(n_cases));
    for (int64_t i = 0; i < n_cases; ++i) ids[static_cast<size_t>(i)] = i;
    Rng rng(mix_seed(seed, 0xF01D5));
    for (int64_t i = n_cases - 1; i > 0; --i) {
        int64_t j = rng.uniform_int(i + 1);
        std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
    }
    FoldSplit split;
    split.val_ids.resize(static_cast<size_t>(k));
    int64_t base = n_cases / k, rem = n_cases % k, pos = 0;
    for (int f = 0; f < k; ++f) {
        int64_t take = base + (f < rem ? 1 : 0);
        auto& fold = split.val_ids[static_cast<size_t>(f)];
        fold.assign(ids.begin() + pos, ids.begin() + pos + take);
        std::sort(fold.begin(), fold.end());
        pos += take;
    }
    return split;
}

FoldSplit make_folds(const DatasetManifest& manifest, int k, uint64_t seed) {
    return make_folds(static_cast<int64_t>(manifest.cases.size()), k, seed);
}

Dataset load_dataset(const DatasetManifest& manifest, const DiffusionParams& d) {
    Dataset data;
    data.cases.reserve(manifest.cases.size());
    for (const auto& c : manifest.cases) {
        LoadedCase lc;
        lc.volume = read_volume(c.volume_path);
        lc.mask = read_mask(c.mask_path);
        if (lc.volume.shape != lc.mask.shape)
            throw DataError("dataset case volume/mask shapes differ: " + c.volume_path);
        lc.smoothed = diffuse(lc.volume, d);
        for (int64_t i = 0; i < lc.mask.size(); ++i)
            if (lc.mask.data[static_cast<size_t>(i)]) lc.fg_indices.push_back(i);
        if (lc.fg_indices.empty())
            throw DataError("dataset case has an empty mask: " + c.mask_path);
        data.cases.push_back(std::move(lc));
    }
    return data;
}

namespace {

// Fits (or loads) the fold's likelihood model from training cases only.
LikelihoodModel resolve_fold_model(const ExperimentConfig& cfg, const Dataset& data,
                                   const std::vector<int64_t>& train_ids) {
    if (cfg.likelihood != "fit-per-fold") return load_model(cfg.likelihood);
    std::vector<std::pair<const Volume*, const MaskVolume*>> pairs;
    for (int64_t id : train_ids)
        pairs.emplace_back(&data.cases[static_cast<size_t>(id)].smoothed,
                           &data.cases[static_cast<size_t>(id)].mask);
    return fit_kde(harvest_smoothed(pairs));
}

template <class T>
Tensor5<T> tensor_from_volume(const Volume& v, const ExperimentConfig& cfg) {
    Tensor5<T> t(1, 1, v.shape[0], v.shape[1], v.shape[2]);
    for (size_t i = 0; i < v.data.size(); ++i)
        t.data[i] = static_cast<T>((static_cast<double>(v.data[i]) - cfg.input_offset) /
                                   cfg.input_scale);
    return t;
}

template <class T>
Tensor5<T> tensor_from_mask(const MaskVolume& m) {
    Tensor5<T> t(1, 1, m.shape[0], m.shape[1], m.shape[2]);
    for (size_t i = 0; i < m.data.size(); ++i) t.data[i] = static_cast<T>(m.data[i]);
    return t;
}

template <class T>
Tensor5<T> tensor_from_soft(const SoftVolume& s) {
    Tensor5<T> t(1, 1, s.shape[0], s.shape[1], s.shape[2]);
    for (size_t i = 0; i < s.data.size(); ++i) t.data[i] = static_cast<T>(s.data[i]);
    return t;
}

template <class T>
Tensor5<T> stack_channels(const Tensor5<T>& a, const Tensor5<T>& b) {
    return concat_forward(a, b);
}

template <class T>
TrainResult train_impl(const ExperimentConfig& cfg, int fold, const std::string& out_dir,
                       const Dataset& data, const FoldSplit& split) {
    const Variant tv = trained_variant(cfg.variant);
    const auto train_ids = split.train_ids(fold);

    std::filesystem::create_directories(out_dir);
    TrainResult result;
    const std::string fold_tag = "fold" + std::to_string(fold);
    result.checkpoint_path = out_dir + "/ckpt_" + fold_tag + ".snet";
    result.loss_csv_path = out_dir + "/loss_" + fold_tag + ".csv";
    result.model_path = out_dir + "/model_" + fold_tag + ".json";

    LikelihoodModel model = resolve_fold_model(cfg, data, train_ids);
    save_model(model, result.model_path);
    const bool needs_target_il = variant_out_channels(tv) == 2;
    const bool needs_input_il = variant_in_channels(tv) == 2;
    LikelihoodModel target_model =
        tv == Variant::seg_il_shifted ? shifted(model, cfg.shift_delta) : model;

    // Per-case Y_IL over the full grid, cropped per step alongside the image.
    std::vector<SoftVolume> y_il_full(data.cases.size());
    if (needs_target_il || needs_input_il) {
        const LikelihoodModel& m = needs_input_il ? model : target_model;
        for (int64_t id : train_ids)
            y_il_full[static_cast<size_t>(id)] =
                likelihood_volume_smoothed(data.cases[static_cast<size_t>(id)].smoothed, m);
    }

    UNetConfig ucfg{variant_in_channels(tv), variant_out_channels(tv), cfg.encoder_channels,
                    cfg.groupnorm_groups};
    const uint64_t net_seed = mix_seed(mix_seed(cfg.seed, static_cast<uint64_t>(fold)),
                                       static_cast<uint64_t>(tv));
    Network<T> net = init_parameters<T>(ucfg, net_seed);
    AdamW<T> opt(AdamWHyper{cfg.lr, cfg.weight_decay, 0.9, 0.999, 1e-8}, net);
    Rng rng(mix_seed(net_seed, 0x7EA1));

    std::string loss_csv = "step,total,seg,il\n";
    TraceHolder<T> trace;
    for (int64_t step = 1; step <= cfg.steps; ++step) {
        const int64_t id =
            train_ids[static_cast<size_t>(rng.uniform_int(
                static_cast<int64_t>(train_ids.size())))];
        const LoadedCase& lc = data.cases[static_cast<size_t>(id)];
        Index3 off = sample_subvolume_offset(lc.volume.shape, lc.fg_indices, cfg.subvolume,
                                             rng.next_u64());
        Index3 hi{off[0] + cfg.subvolume[0], off[1] + cfg.subvolume[1],
                  off[2] + cfg.subvolume[2]};
        Volume sub_vol = crop(lc.volume, off, hi);
        MaskVolume sub_mask = crop(lc.mask, off, hi);
        SoftVolume sub_il;
        if (needs_target_il || needs_input_il)
            sub_il = crop(y_il_full[static_cast<size_t>(id)], off, hi);

        if (rng.uniform() < cfg.aug_rot_prob) {
            sub_vol = rotate_z_180(sub_vol);
            sub_mask = rotate_z_180(sub_mask);
            if (needs_target_il || needs_input_il) sub_il = rotate_z_180(sub_il);
        }

        Tensor5<T> input = tensor_from_volume<T>(sub_vol, cfg);
        if (needs_input_il) input = stack_channels(input, tensor_from_soft<T>(sub_il));
        Tensor5<T> y_seg = tensor_from_mask<T>(sub_mask);
        Tensor5<T> y_il;
        if (needs_target_il) y_il = tensor_from_soft<T>(sub_il);

        net.zero_grad();
        Tensor5<T> probs = unet_forward(net, input, trace.get());
        CombinedLoss<T> loss =
            combined_loss(probs, y_seg, needs_target_il ? &y_il : nullptr, cfg.lambda);

        if (!std::isfinite(loss.total)) {
            // Diagnostic snapshot before aborting.
            json diag;
            diag["step"] = step;
            diag["case_id"] = id;
            diag["total"] = loss.total;
            diag["seg"] = loss.seg_component;
            diag["il"] = loss.il_component;
            std::string diag_path = out_dir + "/diag_" + fold_tag + ".json";
            write_file_text(diag_path, diag.dump(2) + "\n");
            auto snap = opt.snapshot();
            save_checkpoint(net, &snap, out_dir + "/diag_" + fold_tag + ".snet");
            write_file_text(result.loss_csv_path, loss_csv);
            throw NumericError("NaN loss at step " + std::to_string(step) +
                               " (diagnostic snapshot in " + diag_path + ")");
        }

        unet_backward(net, *trace.get(), loss.grad_probs);
        opt.step(net);

        char line[128];
        std::snprintf(line, sizeof(line), "%lld,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(step), loss.total, loss.seg_component,
                      loss.il_component);
        loss_csv += line;
    }

    auto snap = opt.snapshot();
    save_checkpoint(net, &snap, result.checkpoint_path);
    write_file_text(result.loss_csv_path, loss_csv);
    return result;
}

}  // namespace

TrainResult train_variant(const ExperimentConfig& cfg, int fold, const std::string& out_dir,
                          const Dataset& data, const FoldSplit& split) {
    cfg.validate();
    if (cfg.precision == "f64") return train_impl<double>(cfg, fold, out_dir, data, split);
    return train_impl<float>(cfg, fold, out_dir, data, split);
}

TrainResult train_variant(const ExperimentConfig& cfg, int fold, const std::string& out_dir) {
    cfg.validate();
    if (cfg.data_manifest.empty()) throw ConfigError("config has no data_manifest");
    DatasetManifest manifest = load_dataset_manifest(cfg.data_manifest);
    Dataset data = load_dataset(manifest, cfg.diffusion);
    FoldSplit split = make_folds(manifest, cfg.folds, cfg.seed);
    return train_variant(cfg, fold, out_dir, data, split);
}

namespace {

std::vector<int64_t> tile_starts(int64_t dim, int64_t tile, int64_t overlap) {
    if (tile > dim) throw DataError("predict: volume is smaller than the inference tile");
    const int64_t stride = std::max<int64_t>(1, tile - overlap);
    std::vector<int64_t> starts;
    for (int64_t s = 0;; s += stride) {
        if (s + tile >= dim) {
            starts.push_back(dim - tile);
            break;
        }
        starts.push_back(s);
    }
    return starts;
}

}  // namespace

SoftVolume predict_volume(const Network<float>& net, const Volume& v, Variant variant,
                          const ExperimentConfig& cfg, const LikelihoodModel* model) {
    const Index3 tile = cfg.subvolume;
    const bool needs_input_il = variant_in_channels(trained_variant(variant)) == 2;
    const bool needs_pp = variant == Variant::seg_pp;
    if ((needs_input_il || needs_pp) && model == nullptr)
        throw ConfigError("predict: variant " + variant_name(variant) +
                          " requires a likelihood model");

    SoftVolume y_il;
    if (needs_input_il || needs_pp) y_il = likelihood_volume(v, *model, cfg.diffusion);

    auto zs = tile_starts(v.shape[0], tile[0], cfg.overlap);
    auto ys = tile_starts(v.shape[1], tile[1], cfg.overlap);
    auto xs = tile_starts(v.shape[2], tile[2], cfg.overlap);

    std::vector<float> acc(static_cast<size_t>(numel(v.shape)), 0.0f);
    std::vector<float> cnt(static_cast<size_t>(numel(v.shape)), 0.0f);

    for (int64_t z0 : zs)
        for (int64_t y0 : ys)
            for (int64_t x0 : xs) {
                Index3 lo{z0, y0, x0};
                Index3 hi{z0 + tile[0], y0 + tile[1], x0 + tile[2]};
                Volume sub = crop(v, lo, hi);
                Tensor5<float> input = tensor_from_volume<float>(sub, cfg);
                if (needs_input_il)
                    input = stack_channels(input, tensor_from_soft<float>(crop(y_il, lo, hi)));
                Tensor5<float> probs = unet_forward(net, input);
                for (int64_t z = 0; z < tile[0]; ++z)
                    for (int64_t y = 0; y < tile[1]; ++y) {
                        const float* src =
                            &probs.data[static_cast<size_t>(probs.offset(0, 0, z, y))];
                        size_t dst = static_cast<size_t>(
                            flat_index(v.shape, z0 + z, y0 + y, x0));
                        for (int64_t x = 0; x < tile[2]; ++x) {
                            acc[dst + static_cast<size_t>(x)] += src[x];
                            cnt[dst + static_cast<size_t>(x)] += 1.0f;
                        }
                    }
            }

    SoftVolume out;
    out.shape = v.shape;
    out.data.resize(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) out.data[i] = acc[i] / cnt[i];
    if (needs_pp)
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= y_il.data[i];
    return out;
}

MaskVolume threshold_mask(const SoftVolume& probs, double threshold) {
    MaskVolume m;
    m.shape = probs.shape;
    m.data.resize(probs.data.size());
    for (size_t i = 0; i < probs.data.size(); ++i)
        m.data[i] = probs.data[i] > static_cast<float>(threshold) ? 1 : 0;
    return m;
}

VariantMetrics evaluate_variant(const ExperimentConfig& cfg, Variant variant,
                                const Dataset& data, const FoldSplit& split,
                                const EvaluationInputs& inputs) {
    if (static_cast<int>(inputs.checkpoint_paths.size()) != split.folds())
        throw DataError("evaluate: need one checkpoint per fold");

    const bool needs_model = variant == Variant::seg_pp || variant == Variant::seg_il_in;
    std::vector<MaskVolume> preds(data.cases.size());
    for (int f = 0; f < split.folds(); ++f) {
        Checkpoint<float> ck = load_checkpoint<float>(inputs.checkpoint_paths[static_cast<size_t>(f)]);
        LikelihoodModel model;
        if (needs_model) {
            if (inputs.model_paths.size() != inputs.checkpoint_paths.size())
                throw DataError("evaluate: need one likelihood model per fold");
            model = load_model(inputs.model_paths[static_cast<size_t>(f)]);
        }
        for (int64_t id : split.val_ids[static_cast<size_t>(f)]) {
            const LoadedCase& lc = data.cases[static_cast<size_t>(id)];
            SoftVolume probs = predict_volume(ck.net, lc.volume, variant, cfg,
                                              needs_model ? &model : nullptr);
            preds[static_cast<size_t>(id)] = threshold_mask(probs, cfg.threshold);
        }
    }

    VariantMetrics vm;
    vm.variant = variant_name(variant);
    std::vector<CasePair> pairs;
    pairs.reserve(data.cases.size());
    for (size_t i = 0; i < data.cases.size(); ++i)
        pairs.push_back(CasePair{preds[i], data.cases[i].mask});
    vm.global = global_dice(pairs);
    vm.per_case = per_case_dice(pairs);

    std::vector<double> tumor_values, large_values;
    for (size_t i = 0; i < data.cases.size(); ++i) {
        auto instances = extract_instances(data.cases[i].mask, data.cases[i].volume.spacing_mm);
        DiceSummary all = per_tumor_dice(instances, preds[i], cfg.margin_vox);
        tumor_values.insert(tumor_values.end(), all.values.begin(), all.values.end());
        auto large = size_filter(instances, cfg.large_tumor_min_mm3);
        DiceSummary big = per_tumor_dice(large, preds[i], cfg.margin_vox);
        large_values.insert(large_values.end(), big.values.begin(), big.values.end());
    }
    auto summarize = [](std::vector<double> values) {
        DiceSummary s;
        s.values = std::move(values);
        if (!s.values.empty()) {
            s.mean = mean(s.values);
            s.std = std_population(s.values);
        }
        return s;
    };
    vm.per_tumor = summarize(std::move(tumor_values));
    vm.per_tumor_large = summarize(std::move(large_values));
    return vm;
}

CompareResult compare_all_variants(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    if (cfg.data_manifest.empty()) throw ConfigError("config has no data_manifest");
    DatasetManifest manifest = load_dataset_manifest(cfg.data_manifest);
    Dataset data = load_dataset(manifest, cfg.diffusion);
    FoldSplit split = make_folds(manifest, cfg.folds, cfg.seed);
    std::filesystem::create_directories(out_dir);

    const Variant trained[] = {Variant::seg, Variant::seg_il_in, Variant::seg_il,
                               Variant::seg_il_shifted};
    std::vector<std::string> artifacts;
    std::vector<EvaluationInputs> trained_inputs(4);
    for (size_t vi = 0; vi < 4; ++vi) {
        ExperimentConfig vcfg = cfg;
        vcfg.variant = trained[vi];
        std::string vdir = out_dir + "/" + variant_name(trained[vi]);
        for (int f = 0; f < split.folds(); ++f) {
            TrainResult r = train_variant(vcfg, f, vdir, data, split);
            trained_inputs[vi].checkpoint_paths.push_back(r.checkpoint_path);
            trained_inputs[vi].model_paths.push_back(r.model_path);
            artifacts.push_back(r.checkpoint_path);
            artifacts.push_back(r.loss_csv_path);
            artifacts.push_back(r.model_path);
        }
    }

    // Table rows in the paper's order; seg_pp reuses the seg checkpoints.
    std::vector<VariantMetrics> rows;
    rows.push_back(evaluate_variant(cfg, Variant::seg, data, split, trained_inputs[0]));
    rows.push_back(evaluate_variant(cfg, Variant::seg_pp, data, split, trained_inputs[0]));
    rows.push_back(evaluate_variant(cfg, Variant::seg_il_in, data, split, trained_inputs[1]));
    rows.push_back(evaluate_variant(cfg, Variant::seg_il, data, split, trained_inputs[2]));
    rows.push_back(evaluate_variant(cfg, Variant::seg_il_shifted, data, split, trained_inputs[3]));

    CompareResult result;
    result.report = report(rows, ReportOptions{"seg_il", cfg.large_tumor_min_mm3, cfg.margin_vox});

    std::string report_csv = out_dir + "/report.csv";
    std::string report_md = out_dir + "/report.md";
    write_file_text(report_csv, result.report.csv);
    write_file_text(report_md, result.report.markdown);
    artifacts.push_back(report_csv);
    artifacts.push_back(report_md);

    // Per-case Dice values, one column per variant; rows pair across variants.
    std::string per_case = "case";
    for (const auto& r : rows) per_case += "," + r.variant;
    per_case += "\n";
    for (size_t i = 0; i < data.cases.size(); ++i) {
        per_case += std::to_string(i);
        for (const auto& r : rows) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), ",%.9g", r.per_case.values[i]);
            per_case += buf;
        }
        per_case += "\n";
    }
    std::string per_case_csv = out_dir + "/per_case.csv";
    write_file_text(per_case_csv, per_case);
    artifacts.push_back(per_case_csv);

    result.artifact_paths = std::move(artifacts);
    return result;
}

}  // namespace ilseg
