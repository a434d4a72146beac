// mhyper: multi-modal knowledge-graph completion in biquaternion space.
// Subcommands: train, eval, ablate, corrupt, selfcheck.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mhyper/checkpoint.hpp"
#include "mhyper/config.hpp"
#include "mhyper/errors.hpp"
#include "mhyper/evaluator.hpp"
#include "mhyper/manifest.hpp"
#include "mhyper/selfcheck.hpp"
#include "mhyper/train.hpp"

namespace fs = std::filesystem;
using namespace mhyper;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CommonFlags {
    std::string dataset;
    std::string checkpoint;
    std::string precision = "f32";
    int threads = 1;
};

Ablation ablation_for_mode(const std::string& mode) {
    Ablation a;
    if (mode == "no-joint") a.zero_joint = true;
    else if (mode == "no-struct") a.zero_struct = true;
    else if (mode == "no-vision") a.zero_vision = true;
    else if (mode == "no-text") a.zero_text = true;
    else if (mode == "no-ferf") a.no_ferf = true;
    else if (mode == "no-gate") a.uniform_gate = true;
    else if (mode == "no-translation") a.no_translation = true;
    else if (mode == "no-rotation") a.no_rotation = true;
    else if (mode == "no-noise") {
        // noise-powered self-distillation is a training-time mechanism; at
        // evaluation time the full model is scored unchanged
    } else {
        throw ConfigError("unknown ablation mode: " + mode);
    }
    return a;
}

template <typename S>
Metrics evaluate_split(const ModelParams<S>& params, const Dataset& dataset,
                       const std::vector<Triple>& triples, const EvalOptions& opts,
                       std::vector<RankResult>* ranks_out = nullptr) {
    ModelData<S> data = ModelData<S>::from(dataset.visual, dataset.textual);
    FilterIndex index = build_filter_index(dataset.graph);
    auto ranks = evaluate_triples<S>(triples, params, data, dataset.graph, index, opts);
    if (ranks_out) *ranks_out = ranks;
    return aggregate(ranks);
}

void print_per_relation(const std::vector<RankResult>& ranks, const KnowledgeGraph& graph) {
    std::printf("relation\tcount\tMRR\n");
    for (const auto& row : per_relation_mrr(ranks)) {
        std::printf("%s\t%zu\t%.2f\n",
                    graph.relations.names[static_cast<std::size_t>(row.relation)].c_str(),
                    row.count, 100.0 * row.mrr);
    }
}

template <typename S>
int run_train(const TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset dataset = load_dataset(cfg.dataset_dir);
    const double load_seconds = seconds_since(t0);

    fs::create_directories(cfg.out_dir);
    const std::string checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.mhck").string();
    const std::string log_path = (fs::path(cfg.out_dir) / "train_log.tsv").string();
    const std::string metrics_path = (fs::path(cfg.out_dir) / "metrics.txt").string();
    const std::string manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();

    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw DataError("cannot write " + log_path);
    log << "epoch\tL_total\tL_triple\tL_recon\tL_distill\tL_reg\n";

    const auto t1 = std::chrono::steady_clock::now();
    auto result = train<S>(cfg, dataset, [&](const EpochLog& e) {
        std::printf("%d\t%.8g\t%.8g\t%.8g\t%.8g\t%.8g\t%.3f\n", e.epoch, e.total,
                    e.triple, e.recon, e.distill, e.reg, e.seconds);
        std::fflush(stdout);
        char line[256];
        std::snprintf(line, sizeof(line), "%d\t%.8g\t%.8g\t%.8g\t%.8g\t%.8g\n", e.epoch,
                      e.total, e.triple, e.recon, e.distill, e.reg);
        log << line;
    });
    const double train_seconds = seconds_since(t1);
    log.close();

    save_checkpoint<S>(checkpoint_path, result.best_params);

    const auto t2 = std::chrono::steady_clock::now();
    EvalOptions opts;
    opts.threads = cfg.threads;
    Metrics test_metrics{};
    if (!dataset.graph.test.empty()) {
        test_metrics = evaluate_split<S>(result.best_params, dataset, dataset.graph.test, opts);
        std::ofstream metrics(metrics_path, std::ios::binary);
        metrics << format_metrics(test_metrics) << "\n";
    }
    const double eval_seconds = seconds_since(t2);

    RunManifest manifest;
    manifest.config = config_snapshot(cfg);
    manifest.dataset_fingerprint = dataset_fingerprint(cfg.dataset_dir);
    manifest.seed = cfg.seed;
    manifest.phase_seconds = {{"load", load_seconds},
                              {"train", train_seconds},
                              {"test_eval", eval_seconds}};
    manifest.artifacts = {{"checkpoint", checkpoint_path},
                          {"train_log", log_path},
                          {"metrics", metrics_path}};
    char num[64];
    std::snprintf(num, sizeof(num), "%.10g", result.best_mrr);
    manifest.artifacts["best_valid_mrr"] = num;
    manifest.artifacts["best_epoch"] = std::to_string(result.best_epoch);
    write_manifest(manifest_path, manifest);

    if (result.aborted) {
        std::cerr << "training aborted: " << result.abort_reason
                  << " (last-good checkpoint preserved at " << checkpoint_path << ")\n";
        return 1;
    }
    if (!dataset.graph.valid.empty() && !result.val_history.empty()) {
        std::fprintf(stderr, "best validation MRR %.4f at epoch %d\n", result.best_mrr,
                     result.best_epoch);
    }
    if (!dataset.graph.test.empty()) {
        std::printf("%s\n", format_metrics(test_metrics).c_str());
    }
    return 0;
}

template <typename S>
int run_eval(const CommonFlags& flags, const std::string& variant_name,
             const std::string& split, bool per_relation) {
    Dataset dataset = load_dataset(flags.dataset);
    ModelParams<S> params = load_checkpoint<S>(flags.checkpoint);
    check_checkpoint_compat<S>(params, dataset.graph, dataset.visual, dataset.textual);

    EvalOptions opts;
    opts.variant = parse_score_variant(variant_name);
    opts.threads = flags.threads;
    const std::vector<Triple>& triples =
        split == "valid" ? dataset.graph.valid : dataset.graph.test;
    if (triples.empty()) throw DataError("split '" + split + "' is empty");

    std::vector<RankResult> ranks;
    Metrics m = evaluate_split<S>(params, dataset, triples, opts, &ranks);
    std::printf("%s\n", format_metrics(m).c_str());
    if (per_relation) print_per_relation(ranks, dataset.graph);
    return 0;
}

template <typename S>
int run_ablate(const CommonFlags& flags, const std::string& mode) {
    Dataset dataset = load_dataset(flags.dataset);
    ModelParams<S> params = load_checkpoint<S>(flags.checkpoint);
    check_checkpoint_compat<S>(params, dataset.graph, dataset.visual, dataset.textual);

    EvalOptions opts;
    opts.ablation = ablation_for_mode(mode);
    opts.threads = flags.threads;
    if (mode == "no-noise") {
        std::cerr << "note: noise-powered self-distillation only acts during training; "
                     "scoring is unchanged\n";
    }
    Metrics m = evaluate_split<S>(params, dataset, dataset.graph.test, opts);
    std::printf("%s\n", format_metrics(m).c_str());
    return 0;
}

int run_corrupt(const std::string& dataset_dir, const std::string& mode_name,
                double ratio, std::uint64_t seed, const std::string& out_dir) {
    Dataset dataset = load_dataset(dataset_dir);
    CorruptMode mode = parse_corrupt_mode(mode_name);
    Dataset corrupted = corrupt_dataset(dataset, mode, ratio, seed);
    save_dataset(corrupted, out_dir);
    std::printf("wrote corrupted dataset (%s, ratio %.3f, seed %llu) to %s\n",
                mode_name.c_str(), ratio, static_cast<unsigned long long>(seed),
                out_dir.c_str());
    return 0;
}

int run_selfcheck(const std::string& precision, bool corrupt_table) {
    hc::StructureConstants sc = hc::StructureConstants::canonical();
    if (corrupt_table) {
        sc.h[1][2][3] = -1; // deliberately flip the sign of ij = k
        sc.rebuild_nonzero();
        std::cerr << "note: running with a deliberately corrupted structure constant\n";
    }
    auto results = selfcheck::run_all(sc, precision == "f64");
    bool all_passed = true;
    for (const auto& r : results) {
        std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        all_passed = all_passed && r.passed;
    }
    return all_passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"M-Hyper: multi-modal knowledge-graph completion in biquaternion space"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
    std::string config_path;
    std::string override_dataset, override_out;
    std::optional<std::uint64_t> override_seed;
    std::optional<int> override_threads;
    std::string override_precision;
    train_cmd->add_option("--config", config_path, "config file (key = value lines)")
        ->required();
    train_cmd->add_option("--dataset", override_dataset, "dataset directory override");
    train_cmd->add_option("--out", override_out, "output directory override");
    train_cmd->add_option("--seed", override_seed, "seed override");
    train_cmd->add_option("--threads", override_threads, "evaluation threads override");
    train_cmd->add_option("--precision", override_precision, "f32 or f64");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    CommonFlags eval_flags;
    std::string variant = "full";
    std::string split = "test";
    bool per_relation = false;
    eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "MHCK checkpoint")->required();
    eval_cmd->add_option("--dataset", eval_flags.dataset, "dataset directory")->required();
    eval_cmd->add_option("--variant", variant, "full | fusion | ensemble");
    eval_cmd->add_option("--split", split, "test | valid")
        ->check(CLI::IsMember({"test", "valid"}));
    eval_cmd->add_flag("--per-relation", per_relation, "print per-relation MRR table");
    eval_cmd->add_option("--threads", eval_flags.threads, "evaluation threads");
    eval_cmd->add_option("--precision", eval_flags.precision, "f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "evaluate with a component disabled");
    CommonFlags ablate_flags;
    std::string mode;
    ablate_cmd->add_option("--checkpoint", ablate_flags.checkpoint, "MHCK checkpoint")
        ->required();
    ablate_cmd->add_option("--dataset", ablate_flags.dataset, "dataset directory")->required();
    ablate_cmd
        ->add_option("--mode", mode,
                     "no-joint | no-struct | no-vision | no-text | no-ferf | no-noise | "
                     "no-gate | no-translation | no-rotation")
        ->required();
    ablate_cmd->add_option("--threads", ablate_flags.threads, "evaluation threads");
    ablate_cmd->add_option("--precision", ablate_flags.precision, "f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));

    // corrupt
    auto* corrupt_cmd = app.add_subcommand("corrupt", "write a corrupted dataset copy");
    std::string corrupt_dataset_dir, corrupt_mode, corrupt_out;
    double ratio = 0.0;
    std::uint64_t corrupt_seed = 1;
    corrupt_cmd->add_option("--dataset", corrupt_dataset_dir, "dataset directory")->required();
    corrupt_cmd
        ->add_option("--mode", corrupt_mode,
                     "modality-missing | modality-noise | link-sparse")
        ->required();
    corrupt_cmd->add_option("--ratio", ratio, "corruption ratio in [0, 1]")->required();
    corrupt_cmd->add_option("--seed", corrupt_seed, "corruption seed");
    corrupt_cmd->add_option("--out", corrupt_out, "output directory")->required();

    // selfcheck
    auto* selfcheck_cmd = app.add_subcommand("selfcheck", "run the identity/oracle suites");
    std::string selfcheck_precision = "f64";
    bool corrupt_structure = false;
    selfcheck_cmd->add_option("--precision", selfcheck_precision, "f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));
    selfcheck_cmd->add_flag("--corrupt-structure-constants", corrupt_structure,
                            "test hook: corrupt one structure constant");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train_cmd) {
            TrainConfig cfg = load_config(config_path);
            if (!override_dataset.empty()) cfg.dataset_dir = override_dataset;
            if (!override_out.empty()) cfg.out_dir = override_out;
            if (override_seed) cfg.seed = *override_seed;
            if (override_threads) cfg.threads = *override_threads;
            if (!override_precision.empty()) cfg.precision = override_precision;
            cfg.validate();
            if (cfg.dataset_dir.empty()) throw ConfigError("no dataset directory configured");
            return cfg.precision == "f64" ? run_train<double>(cfg) : run_train<float>(cfg);
        }
        if (*eval_cmd) {
            return eval_flags.precision == "f64"
                       ? run_eval<double>(eval_flags, variant, split, per_relation)
                       : run_eval<float>(eval_flags, variant, split, per_relation);
        }
        if (*ablate_cmd) {
            return ablate_flags.precision == "f64" ? run_ablate<double>(ablate_flags, mode)
                                                   : run_ablate<float>(ablate_flags, mode);
        }
        if (*corrupt_cmd) {
            return run_corrupt(corrupt_dataset_dir, corrupt_mode, ratio, corrupt_seed,
                               corrupt_out);
        }
        if (*selfcheck_cmd) {
            return run_selfcheck(selfcheck_precision, corrupt_structure);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
