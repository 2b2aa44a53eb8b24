#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "distill/gateway.hpp"
#include "distill/prompt.hpp"
#include "distill/types.hpp"

namespace distill {

struct RunAccuracy {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;  // correct / total

    static RunAccuracy from_counts(std::size_t correct, std::size_t total);
};

struct AggregateStat {
    double mean = 0.0;  // percent
    double std = 0.0;   // sample standard deviation (n - 1), percent
    std::size_t n_runs = 0;
};

nlohmann::json to_json(const RunAccuracy& r);
nlohmann::json to_json(const AggregateStat& s);

struct Prediction {
    std::string id;
    std::string generation;
};

std::vector<Prediction> load_predictions(const std::filesystem::path& path);

// Joins predictions to gold by id; missing or unparseable generations count as incorrect.
RunAccuracy score_predictions(const std::vector<Prediction>& predictions, const Dataset& gold);

// Accuracies given in percent.
AggregateStat aggregate_runs(std::span<const double> accuracies_percent);
AggregateStat aggregate_runs(std::span<const RunAccuracy> runs);

struct BaselineResult {
    RunAccuracy accuracy;
    std::vector<Prediction> generations;  // dataset order; empty generation on gateway failure
    std::vector<ItemError> item_errors;
};

// Prompts every instance in the given style and scores the answers. Rationalization is rejected
// since it conditions on the gold answer.
BaselineResult run_prompting_baseline(const Dataset& evalset, const DemoSet& demos, PromptStyle style, Gateway& gateway,
                                      const DecodeParams& params, std::size_t parallelism = 8);

}  // namespace distill
