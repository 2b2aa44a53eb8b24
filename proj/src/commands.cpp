#include "distill/commands.hpp"

#include <algorithm>

#include "distill/dataset_io.hpp"
#include "distill/distiller.hpp"
#include "distill/emitter.hpp"
#include "distill/error.hpp"
#include "distill/evaluator.hpp"
#include "distill/human_eval.hpp"
#include "distill/log.hpp"
#include "distill/orchestrator.hpp"

namespace distill::cli {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"distill", "emit", "orchestrate", "eval", "baseline", "human-eval", "stats"};
    return names;
}

namespace {

const fs::path& require(const fs::path& p, const char* key) {
    if (p.empty()) throw Error(errc::config_invalid, std::string("missing required setting: ") + key, {{"key", key}});
    return p;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// Resolved settings plus a content hash of every input file the stage read.
void write_run_manifest(const std::string& name, const PipelineConfig& cfg, const std::vector<fs::path>& inputs) {
    json config = json::object();
    for (const auto& [k, v] : cfg.resolved) config[k] = v;
    json hashes = json::object();
    for (const auto& p : inputs) {
        if (!p.empty() && fs::is_regular_file(p)) hashes[p.string()] = sha256_hex(read_file(p));
    }
    write_json(cfg.out_dir / "run_manifest.json", {{"subcommand", name}, {"config", config}, {"inputs", hashes}});
}

json cmd_distill(const PipelineConfig& cfg) {
    const auto dataset = load_dataset(require(cfg.dataset, "dataset"), cfg.kind);
    const DistillOptions options{cfg.decode_params(), cfg.parallelism};
    auto gateway = cfg.make_gateway();
    DistillResult result;
    std::vector<fs::path> inputs{cfg.dataset};
    switch (cfg.method) {
        case GenerationMethod::cote: {
            const auto demos = load_demos(require(cfg.demos, "demos"), cfg.kind, cfg.num_demos);
            result = annotate_cote(dataset, demos, *gateway, options);
            inputs.push_back(cfg.demos);
            break;
        }
        case GenerationMethod::rp: {
            const auto& path = cfg.rp_demos.empty() ? require(cfg.demos, "rp_demos") : cfg.rp_demos;
            result = annotate_rp(dataset, load_demos(path, cfg.kind, cfg.num_demos), *gateway, options);
            inputs.push_back(path);
            break;
        }
        case GenerationMethod::crop: {
            const auto cot = load_demos(require(cfg.demos, "demos"), cfg.kind, cfg.num_demos);
            const auto rp = load_demos(require(cfg.rp_demos, "rp_demos"), cfg.kind, cfg.num_demos);
            result = annotate_crop(dataset, cot, rp, *gateway, options);
            inputs.push_back(cfg.demos);
            inputs.push_back(cfg.rp_demos);
            break;
        }
    }
    write_file_atomic(cfg.out_dir / "annotated.jsonl", serialize_annotated(result.annotated));
    auto stats = to_json(result.stats);
    stats["item_errors"] = result.item_errors.size();
    write_json(cfg.out_dir / "distill_stats.json", stats);
    write_run_manifest("distill", cfg, inputs);
    return stats;
}

json cmd_emit(const PipelineConfig& cfg) {
    const auto annotated = load_annotated(require(cfg.annotated, "annotated"), cfg.kind);
    auto result = emit(annotated, cfg.kind, cfg.mode);
    write_file_atomic(cfg.out_dir / "train.jsonl", serialize_records(result.records));
    auto report = to_json(result.report);
    std::vector<fs::path> inputs{cfg.annotated};
    if (!cfg.dev.empty()) {
        const auto dev = emit_qta(load_dataset(cfg.dev, cfg.kind));
        write_file_atomic(cfg.out_dir / "dev.jsonl", serialize_records(dev));
        report["dev_qta"] = dev.size();
        inputs.push_back(cfg.dev);
    }
    write_json(cfg.out_dir / "emit_report.json", report);
    write_run_manifest("emit", cfg, inputs);
    return report;
}

json cmd_orchestrate(const PipelineConfig& cfg) {
    if (cfg.task == "fewshot") {
        const auto dataset = load_dataset(require(cfg.dataset, "dataset"), cfg.kind);
        const auto splits = sample_fewshot_splits(dataset, cfg.sizes, cfg.n_splits, cfg.seed);
        write_json(cfg.out_dir / "splits.json", to_json(splits));
        write_run_manifest("orchestrate", cfg, {cfg.dataset});
        return {{"task", "fewshot"}, {"splits", splits.size()}};
    }
    if (cfg.trainer.empty()) throw Error(errc::config_invalid, "missing required setting: trainer", {{"key", "trainer"}});
    CommandTrainer trainer(split_command(cfg.trainer));
    if (cfg.task == "matrix") {
        auto matrix = experiment_matrix_from_json(json::parse(read_file(require(cfg.matrix, "matrix"))));
        if (matrix.work_dir.empty()) matrix.work_dir = cfg.out_dir / "runs";
        if (matrix.ledger_path.empty()) matrix.ledger_path = cfg.out_dir / "ledger.json";
        const auto ledger = run_experiment(matrix, trainer);
        const auto report = to_json(aggregate_ledger(ledger));
        write_json(cfg.out_dir / "report.json", report);
        write_run_manifest("orchestrate", cfg, {cfg.matrix});
        if (!ledger.complete()) throw Error(errc::trainer_failure, "some runs failed; re-run to resume", {{"ledger", matrix.ledger_path.string()}});
        return {{"task", "matrix"}, {"runs", ledger.entries.size()}, {"trainer_calls", ledger.trainer_calls}};
    }
    GridSearchSpec spec;
    spec.base.mode = cfg.mode;
    spec.base.seed = cfg.seed;
    spec.base.model_tag = cfg.model_tag;
    spec.base.train_path = require(cfg.train, "train");
    spec.base.dev_path = require(cfg.dev, "dev");
    spec.base.test_path = cfg.test;
    spec.work_dir = cfg.out_dir / "grid";
    spec.parallelism = cfg.parallelism;
    const auto result = grid_search_alpha(spec, cfg.alpha_grid, trainer);
    auto j = to_json(result);
    write_json(cfg.out_dir / "grid_result.json", j);
    write_run_manifest("orchestrate", cfg, {cfg.train, cfg.dev, cfg.test});
    return {{"task", "grid"}, {"alpha_star", result.alpha_star}, {"failures", result.failures.size()}};
}

json cmd_eval(const PipelineConfig& cfg) {
    json out = json::object();
    std::vector<fs::path> inputs;
    if (!cfg.predictions.empty()) {
        const auto gold = load_dataset(require(cfg.dataset, "dataset"), cfg.kind);
        const auto acc = score_predictions(load_predictions(cfg.predictions), gold);
        out["accuracy"] = to_json(acc);
        inputs = {cfg.predictions, cfg.dataset};
    }
    if (!cfg.runs.empty()) out["aggregate"] = to_json(aggregate_runs(std::span<const double>(cfg.runs)));
    if (out.empty()) throw Error(errc::config_invalid, "eval needs predictions (+ dataset) or runs");
    write_json(cfg.out_dir / "eval.json", out);
    write_run_manifest("eval", cfg, inputs);
    return out;
}

json cmd_baseline(const PipelineConfig& cfg) {
    const auto dataset = load_dataset(require(cfg.dataset, "dataset"), cfg.kind);
    const auto demos = load_demos(require(cfg.demos, "demos"), cfg.kind, cfg.num_demos);
    auto gateway = cfg.make_gateway();
    const auto result = run_prompting_baseline(dataset, demos, cfg.style, *gateway, cfg.decode_params(), cfg.parallelism);
    std::vector<json> rows;
    for (const auto& g : result.generations) rows.push_back({{"id", g.id}, {"generation", g.generation}});
    write_file_atomic(cfg.out_dir / "generations.jsonl", to_jsonl(rows));
    json out = {{"style", to_string(cfg.style)}, {"accuracy", to_json(result.accuracy)}, {"item_errors", result.item_errors.size()}};
    write_json(cfg.out_dir / "baseline.json", out);
    write_run_manifest("baseline", cfg, {cfg.dataset, cfg.demos});
    return out;
}

json cmd_human_eval(const PipelineConfig& cfg) {
    const auto votes = load_votes_csv(require(cfg.votes, "votes"));
    const auto key = shuffle_key_from_json(json::parse(read_file(require(cfg.shuffle_key, "shuffle_key"))));
    const auto report = to_json(aggregate_preferences(votes, key));
    write_json(cfg.out_dir / "human_eval_report.json", report);
    write_run_manifest("human-eval", cfg, {cfg.votes, cfg.shuffle_key});
    return {{"n_examples", report["n_examples"]}, {"preference", report["preference"]}, {"agreement_levels", report["agreement_levels"]}};
}

json cmd_stats(const PipelineConfig& cfg) {
    const auto annotated = load_annotated(require(cfg.annotated, "annotated"), cfg.kind);
    const auto stats = to_json(compute_stats(annotated, cfg.method));
    write_json(cfg.out_dir / "distill_stats.json", stats);
    write_run_manifest("stats", cfg, {cfg.annotated});
    return stats;
}

}  // namespace

json run_subcommand(const std::string& name, const PipelineConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    if (name == "distill") return cmd_distill(cfg);
    if (name == "emit") return cmd_emit(cfg);
    if (name == "orchestrate") return cmd_orchestrate(cfg);
    if (name == "eval") return cmd_eval(cfg);
    if (name == "baseline") return cmd_baseline(cfg);
    if (name == "human-eval") return cmd_human_eval(cfg);
    if (name == "stats") return cmd_stats(cfg);
    throw Error(errc::config_invalid, "unknown subcommand: " + name);
}

}  // namespace distill::cli
