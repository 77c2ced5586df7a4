#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "ilseg/manifest.hpp"
#include "ilseg/plot.hpp"
#include "ilseg/trainer.hpp"

namespace {

using namespace ilseg;

// Common config overrides shared by the experiment subcommands.
struct CfgOverrides {
    std::string config_path;
    std::string variant;
    int64_t seed = -1;
    int threads = 0;
    std::string precision;
    int fold = -1;
};

void add_override_flags(CLI::App* cmd, CfgOverrides& o, bool with_fold) {
    cmd->add_option("--config", o.config_path, "Experiment config JSON")->required();
    cmd->add_option("--variant", o.variant, "Override the config variant");
    cmd->add_option("--seed", o.seed, "Override the config seed");
    cmd->add_option("--threads", o.threads, "Worker threads (deterministic result)");
    cmd->add_option("--precision", o.precision, "Numeric precision: f32 or f64");
    if (with_fold) cmd->add_option("--fold", o.fold, "Fold index to train")->required();
}

ExperimentConfig resolve_config(const CfgOverrides& o) {
    ExperimentConfig cfg = load_config(o.config_path);
    if (!o.variant.empty()) cfg.variant = variant_from_string(o.variant);
    if (o.seed >= 0) cfg.seed = static_cast<uint64_t>(o.seed);
    if (o.threads > 0) cfg.threads = o.threads;
    if (!o.precision.empty()) cfg.precision = o.precision;
    cfg.validate();
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"ilseg: intensity-distribution-supervised small lesion segmentation"};
    app.require_subcommand(1);

    // gen-phantoms
    auto* gen = app.add_subcommand("gen-phantoms", "Generate a synthetic SVOL dataset");
    std::string gen_spec, gen_out;
    int gen_n = 1;
    int64_t gen_seed = -1;
    bool gen_force = false;
    gen->add_option("--spec", gen_spec, "Phantom spec JSON (defaults apply if omitted)");
    gen->add_option("--n", gen_n, "Number of cases")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", gen_seed, "Override the spec seed");
    gen->add_flag("--force", gen_force, "Reuse a non-empty output directory");

    // build-likelihood
    auto* build = app.add_subcommand("build-likelihood",
                                     "Fit the intensity likelihood model from SVOL pairs");
    std::string build_data, build_out, build_config;
    bool build_raw = false, build_force = false;
    build->add_option("--data", build_data, "Dataset manifest JSON")->required();
    build->add_option("--out", build_out, "Output directory")->required();
    build->add_option("--config", build_config, "Experiment config (diffusion parameters)");
    build->add_flag("--no-compress", build_raw, "Keep raw samples instead of 1 HU bins");
    build->add_flag("--force", build_force, "Reuse a non-empty output directory");

    // train
    auto* train = app.add_subcommand("train", "Train one fold of one variant");
    CfgOverrides train_o;
    std::string train_out;
    bool train_force = false;
    add_override_flags(train, train_o, true);
    train->add_option("--out", train_out, "Run directory")->required();
    train->add_flag("--force", train_force, "Reuse a non-empty output directory");

    // predict
    auto* pred = app.add_subcommand("predict", "Predict a probability map for one volume");
    std::string pred_ckpt, pred_in, pred_out, pred_model;
    CfgOverrides pred_o;
    pred->add_option("--ckpt", pred_ckpt, "SNET checkpoint")->required();
    pred->add_option("--in", pred_in, "Input volume (SVOL)")->required();
    pred->add_option("--out", pred_out, "Output soft volume (SVOL)")->required();
    pred->add_option("--model", pred_model, "Likelihood model JSON (seg_pp / seg_il_in)");
    add_override_flags(pred, pred_o, false);

    // evaluate
    auto* eval = app.add_subcommand("evaluate",
                                    "Cross-validated metrics for one trained variant");
    CfgOverrides eval_o;
    std::string eval_run, eval_out;
    bool eval_force = false;
    add_override_flags(eval, eval_o, false);
    eval->add_option("--run", eval_run, "Directory with ckpt_fold*.snet / model_fold*.json")
        ->required();
    eval->add_option("--out", eval_out, "Output directory")->required();
    eval->add_flag("--force", eval_force, "Reuse a non-empty output directory");

    // compare
    auto* cmp = app.add_subcommand("compare",
                                   "Train and evaluate all five Table-1 variants");
    CfgOverrides cmp_o;
    std::string cmp_out;
    bool cmp_force = false;
    add_override_flags(cmp, cmp_o, false);
    cmp->add_option("--out", cmp_out, "Run directory")->required();
    cmp->add_flag("--force", cmp_force, "Reuse a non-empty output directory");

    // plot-likelihood
    auto* plot = app.add_subcommand("plot-likelihood",
                                    "Render a likelihood model as a dual-axis SVG");
    std::string plot_model, plot_out;
    plot->add_option("--model", plot_model, "Likelihood model JSON")->required();
    plot->add_option("--out", plot_out, "Output SVG path")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        PhantomSpec spec;
        if (!gen_spec.empty()) spec = phantom_spec_from_json(read_file_text(gen_spec));
        if (gen_seed >= 0) spec.seed = static_cast<uint64_t>(gen_seed);
        prepare_run_dir(gen_out, gen_force);
        std::string manifest_path = generate_dataset(spec, gen_n, gen_out);

        RunManifest rm;
        rm.command = "gen-phantoms";
        rm.seed = spec.seed;
        rm.config_json = phantom_spec_to_json(spec);
        DatasetManifest dm = load_dataset_manifest(manifest_path);
        for (const auto& c : dm.cases) {
            rm.add_output(c.volume_path);
            rm.add_output(c.mask_path);
        }
        rm.add_output(manifest_path);
        write_run_manifest(rm, gen_out);
        std::printf("wrote %d cases to %s\n", gen_n, gen_out.c_str());
        return 0;
    }

    if (build->parsed()) {
        DiffusionParams d;
        std::string cfg_snapshot;
        if (!build_config.empty()) {
            ExperimentConfig cfg = load_config(build_config);
            d = cfg.diffusion;
            cfg_snapshot = config_to_json(cfg);
        }
        DatasetManifest dm = load_dataset_manifest(build_data);
        prepare_run_dir(build_out, build_force);

        std::vector<std::pair<Volume, MaskVolume>> loaded;
        for (const auto& c : dm.cases)
            loaded.emplace_back(read_volume(c.volume_path), read_mask(c.mask_path));
        std::vector<std::pair<const Volume*, const MaskVolume*>> pairs;
        for (auto& [v, m] : loaded) pairs.emplace_back(&v, &m);
        LikelihoodModel model = fit_kde(harvest_intensities(pairs, d), !build_raw);

        std::string model_path = build_out + "/model.json";
        std::string curve_path = build_out + "/curve.csv";
        save_model(model, model_path);
        write_curve_csv(model, curve_path);

        RunManifest rm;
        rm.command = "build-likelihood";
        rm.config_json = cfg_snapshot;
        rm.add_input(build_data);
        rm.add_output(model_path);
        rm.add_output(curve_path);
        write_run_manifest(rm, build_out);
        std::printf("fitted model over %zu samples (bandwidth %.6g) -> %s\n",
                    model.bin_centers.size(), model.bandwidth, model_path.c_str());
        return 0;
    }

    if (train->parsed()) {
        ExperimentConfig cfg = resolve_config(train_o);
        prepare_run_dir(train_out, train_force);
        TrainResult r = train_variant(cfg, train_o.fold, train_out);

        RunManifest rm;
        rm.command = "train";
        rm.seed = cfg.seed;
        rm.config_json = config_to_json(cfg);
        rm.add_input(cfg.data_manifest);
        rm.add_output(r.checkpoint_path);
        rm.add_output(r.loss_csv_path);
        rm.add_output(r.model_path);
        write_run_manifest(rm, train_out);
        std::printf("trained %s fold %d -> %s\n", variant_name(cfg.variant).c_str(),
                    train_o.fold, r.checkpoint_path.c_str());
        return 0;
    }

    if (pred->parsed()) {
        ExperimentConfig cfg = resolve_config(pred_o);
        Volume v = read_volume(pred_in);
        Checkpoint<float> ck = load_checkpoint<float>(pred_ckpt);
        LikelihoodModel model;
        bool has_model = !pred_model.empty();
        if (has_model) model = load_model(pred_model);
        SoftVolume probs =
            predict_volume(ck.net, v, cfg.variant, cfg, has_model ? &model : nullptr);
        write_svol(probs, pred_out, v.spacing_mm);
        std::printf("wrote probability map %s\n", pred_out.c_str());
        return 0;
    }

    if (eval->parsed()) {
        ExperimentConfig cfg = resolve_config(eval_o);
        if (cfg.data_manifest.empty()) throw ConfigError("config has no data_manifest");
        DatasetManifest dm = load_dataset_manifest(cfg.data_manifest);
        Dataset data = load_dataset(dm, cfg.diffusion);
        FoldSplit split = make_folds(dm, cfg.folds, cfg.seed);
        EvaluationInputs inputs;
        for (int f = 0; f < split.folds(); ++f) {
            inputs.checkpoint_paths.push_back(eval_run + "/ckpt_fold" + std::to_string(f) +
                                              ".snet");
            inputs.model_paths.push_back(eval_run + "/model_fold" + std::to_string(f) + ".json");
        }
        VariantMetrics vm = evaluate_variant(cfg, cfg.variant, data, split, inputs);
        prepare_run_dir(eval_out, eval_force);
        ComparisonReport rep = report({vm}, ReportOptions{variant_name(cfg.variant),
                                                          cfg.large_tumor_min_mm3,
                                                          cfg.margin_vox});
        std::string report_csv = eval_out + "/report.csv";
        write_file_text(report_csv, rep.csv);
        write_file_text(eval_out + "/report.md", rep.markdown);

        RunManifest rm;
        rm.command = "evaluate";
        rm.seed = cfg.seed;
        rm.config_json = config_to_json(cfg);
        rm.add_input(cfg.data_manifest);
        for (const auto& p : inputs.checkpoint_paths) rm.add_input(p);
        rm.add_output(report_csv);
        rm.add_output(eval_out + "/report.md");
        write_run_manifest(rm, eval_out);
        std::printf("%s", rep.markdown.c_str());
        return 0;
    }

    if (cmp->parsed()) {
        ExperimentConfig cfg = resolve_config(cmp_o);
        prepare_run_dir(cmp_out, cmp_force);
        CompareResult r = compare_all_variants(cfg, cmp_out);

        RunManifest rm;
        rm.command = "compare";
        rm.seed = cfg.seed;
        rm.config_json = config_to_json(cfg);
        rm.add_input(cfg.data_manifest);
        for (const auto& p : r.artifact_paths) rm.add_output(p);
        write_run_manifest(rm, cmp_out);
        std::printf("%s", r.report.markdown.c_str());
        return 0;
    }

    if (plot->parsed()) {
        LikelihoodModel model = load_model(plot_model);
        write_likelihood_svg(model, plot_out);
        std::printf("wrote %s\n", plot_out.c_str());
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ilseg::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ilseg::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const ilseg::NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
