#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "distill/distiller.hpp"
#include "distill/emitter.hpp"
#include "distill/evaluator.hpp"

namespace distill {

// Everything a trainer needs for one run. Serialized as the trainer-contract manifest.
struct TrainConfig {
    double alpha = 1.0;
    MtMode mode = MtMode::st;
    std::uint64_t seed = 0;
    std::string model_tag = "t5-base";
    std::filesystem::path train_path;
    std::filesystem::path dev_path;
    std::filesystem::path test_path;  // optional

    // Throws ConfigInvalid: alpha outside [0,1], or st with alpha != 1.
    void validate() const;
};

struct TrainerManifest {
    TrainConfig config;
    std::filesystem::path output_dir;
    std::filesystem::path metrics_path;
};

nlohmann::json to_json(const TrainerManifest& m);
TrainerManifest trainer_manifest_from_json(const nlohmann::json& j);

// Accuracies are fractions in [0,1].
struct TrainMetrics {
    double dev_accuracy = 0.0;
    std::optional<double> test_accuracy;
    nlohmann::json losses = nlohmann::json::array();
};

nlohmann::json to_json(const TrainMetrics& m);
TrainMetrics train_metrics_from_json(const nlohmann::json& j);

class Trainer {
public:
    virtual ~Trainer() = default;
    // Throws Error(TrainerFailure) when the run does not produce metrics. Must be thread-safe.
    virtual TrainMetrics train(const TrainerManifest& manifest) = 0;
};

// Runs `argv... <manifest.json>` as a child process and reads the metrics file it writes.
class CommandTrainer final : public Trainer {
public:
    explicit CommandTrainer(std::vector<std::string> argv);
    TrainMetrics train(const TrainerManifest& manifest) override;

private:
    std::vector<std::string> argv_;
};

class FunctionTrainer final : public Trainer {
public:
    using Fn = std::function<TrainMetrics(const TrainerManifest&)>;
    explicit FunctionTrainer(Fn fn) : fn_(std::move(fn)) {}
    TrainMetrics train(const TrainerManifest& manifest) override { return fn_(manifest); }

private:
    Fn fn_;
};

// Splits a command line on whitespace, honoring single and double quotes.
std::vector<std::string> split_command(const std::string& command);

// Alpha as it appears in directory names and JSON keys: shortest round-trip form, e.g. "0.1".
std::string format_alpha(double alpha);

// "0.1..0.9" (step 0.1), "0.1..0.9:0.2", or "0.1,0.3,0.5".
std::vector<double> parse_alpha_grid(const std::string& spec);

inline const std::vector<double> default_alpha_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

struct GridSearchSpec {
    TrainConfig base;                 // alpha is overwritten per grid point
    std::filesystem::path work_dir;   // one subdirectory per alpha; existing metrics are reused
    std::size_t parallelism = 1;
};

struct GridFailure {
    double alpha = 0.0;
    std::string message;
};

struct GridResult {
    std::map<double, double> per_alpha;  // alpha -> dev accuracy, successes only
    double alpha_star = 0.0;
    std::size_t runs_per_alpha = 1;
    std::size_t trainer_calls = 0;
    std::vector<GridFailure> failures;
};

nlohmann::json to_json(const GridResult& r);

// Picks the maximizing alpha, ties broken toward the smallest alpha.
double select_alpha_star(const std::map<double, double>& per_alpha);

GridResult grid_search_alpha(const GridSearchSpec& spec, const std::vector<double>& grid, Trainer& trainer);

struct FewshotSplit {
    std::size_t size = 0;
    std::size_t split_index = 0;
    std::vector<std::string> ids;  // dataset order, duplicate-free
};

nlohmann::json to_json(const std::vector<FewshotSplit>& splits);
std::vector<FewshotSplit> fewshot_splits_from_json(const nlohmann::json& j);

std::vector<FewshotSplit> sample_fewshot_splits(const Dataset& dataset, const std::vector<std::size_t>& sizes,
                                                std::size_t n_splits, std::uint64_t seed);

Dataset subset(const Dataset& dataset, const FewshotSplit& split);

struct ExperimentCell {
    MtMode mode = MtMode::st;
    GenerationMethod method = GenerationMethod::cote;
    double alpha = 1.0;
    std::string model_tag = "t5-base";
    std::filesystem::path train_path;
    std::filesystem::path dev_path;
    std::filesystem::path test_path;

    std::string key() const;  // "<mode>/<method>"
};

struct ExperimentMatrix {
    std::vector<ExperimentCell> cells;
    std::size_t n_runs = 5;
    std::uint64_t base_seed = 0;  // run k uses base_seed + k
    std::filesystem::path work_dir;
    std::filesystem::path ledger_path;
    std::size_t parallelism = 1;
};

ExperimentMatrix experiment_matrix_from_json(const nlohmann::json& j);

struct LedgerEntry {
    std::string cell;
    MtMode mode = MtMode::st;
    GenerationMethod method = GenerationMethod::cote;
    std::size_t run_index = 0;
    std::uint64_t seed = 0;
    bool complete = false;
    double dev_accuracy = 0.0;
    std::optional<double> test_accuracy;
    std::string error;
};

struct MetricsLedger {
    std::vector<LedgerEntry> entries;  // cell order, then run order
    std::size_t trainer_calls = 0;     // runs executed by this invocation

    bool complete() const;
};

nlohmann::json to_json(const MetricsLedger& l);
MetricsLedger metrics_ledger_from_json(const nlohmann::json& j);

// Executes every (cell, run) not already complete in the ledger file; rewrites the ledger after each run.
MetricsLedger run_experiment(const ExperimentMatrix& matrix, Trainer& trainer);

struct CellReport {
    std::string cell;
    MtMode mode = MtMode::st;
    GenerationMethod method = GenerationMethod::cote;
    AggregateStat stat;  // percent; test accuracy when reported, dev otherwise
};

std::vector<CellReport> aggregate_ledger(const MetricsLedger& ledger);
nlohmann::json to_json(const std::vector<CellReport>& report);

}  // namespace distill
