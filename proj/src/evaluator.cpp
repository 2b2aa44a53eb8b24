#include "distill/evaluator.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

#include "distill/answer_parser.hpp"
#include "distill/dataset_io.hpp"
#include "distill/error.hpp"
#include "distill/log.hpp"

namespace distill {

using nlohmann::json;

RunAccuracy RunAccuracy::from_counts(std::size_t correct, std::size_t total) {
    if (total == 0) throw Error(errc::invalid_argument, "accuracy over zero instances is undefined");
    return {correct, total, static_cast<double>(correct) / static_cast<double>(total)};
}

json to_json(const RunAccuracy& r) { return {{"correct", r.correct}, {"total", r.total}, {"accuracy", r.accuracy}}; }

json to_json(const AggregateStat& s) { return {{"mean", s.mean}, {"std", s.std}, {"n_runs", s.n_runs}}; }

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    std::vector<Prediction> out;
    for (const auto& row : read_jsonl(path)) out.push_back({row.at("id").get<std::string>(), row.at("generation").get<std::string>()});
    return out;
}

RunAccuracy score_predictions(const std::vector<Prediction>& predictions, const Dataset& gold) {
    std::unordered_map<std::string, const std::string*> by_id;
    for (const auto& p : predictions) by_id[p.id] = &p.generation;
    std::size_t correct = 0;
    for (const auto& inst : gold.instances) {
        auto it = by_id.find(inst.id);
        if (it == by_id.end()) continue;
        auto answer = extract_answer(*it->second, inst, gold.kind);
        if (answer && answers_match(*answer, inst.gold)) ++correct;
    }
    return RunAccuracy::from_counts(correct, gold.size());
}

AggregateStat aggregate_runs(std::span<const double> acc) {
    if (acc.empty()) throw Error(errc::invalid_argument, "aggregate_runs needs at least one run");
    const double n = static_cast<double>(acc.size());
    const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : acc) ss += (a - mean) * (a - mean);
    const double std = acc.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return {mean, std, acc.size()};
}

AggregateStat aggregate_runs(std::span<const RunAccuracy> runs) {
    std::vector<double> pct;
    pct.reserve(runs.size());
    for (const auto& r : runs) pct.push_back(100.0 * r.accuracy);
    return aggregate_runs(std::span<const double>(pct));
}

BaselineResult run_prompting_baseline(const Dataset& evalset, const DemoSet& demos, PromptStyle style, Gateway& gateway,
                                      const DecodeParams& params, std::size_t parallelism) {
    if (style == PromptStyle::rationalization) {
        throw Error(errc::style_requires_gold, "rationalization prompts condition on the gold answer and cannot be scored");
    }
    if (evalset.kind != demos.kind) throw Error(errc::kind_mismatch, "evaluation set and demos differ in kind");
    std::vector<Prompt> prompts;
    prompts.reserve(evalset.size());
    for (const auto& inst : evalset.instances) prompts.push_back(build_prompt(style, demos, inst));
    auto batch = gateway.batch_complete(prompts, params, parallelism);

    BaselineResult out;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < evalset.size(); ++i) {
        const auto& inst = evalset.instances[i];
        std::string text = batch.results[i] ? batch.results[i]->text : std::string();
        std::optional<Answer> answer;
        if (style == PromptStyle::chain_of_thought) {
            answer = parse_cot(text, inst, evalset.kind).prediction;
        } else if (style == PromptStyle::explanation_after_answer) {
            // The answer comes first; the explanation that follows may itself say "the answer is".
            answer = extract_answer(std::string_view(text).substr(0, text.find('\n')), inst, evalset.kind);
        } else {
            answer = extract_answer(text, inst, evalset.kind);
        }
        if (answer && answers_match(*answer, inst.gold)) ++correct;
        out.generations.push_back({inst.id, std::move(text)});
    }
    for (const auto& e : batch.errors) log::warn("baseline item " + evalset.instances[e.index].id + " failed: " + e.code);
    out.item_errors = std::move(batch.errors);
    out.accuracy = RunAccuracy::from_counts(correct, evalset.size());
    return out;
}

}  // namespace distill
