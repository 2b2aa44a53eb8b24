#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "distill/gateway.hpp"
#include "distill/types.hpp"

namespace distill {

enum class GenerationMethod { cote, rp, crop };
enum class ExplanationSource { cote, rp, none };

std::string_view to_string(GenerationMethod method);
std::string_view to_string(ExplanationSource source);
GenerationMethod generation_method_from_string(std::string_view s);
ExplanationSource explanation_source_from_string(std::string_view s);

struct AnnotatedInstance {
    Instance instance;
    std::optional<std::string> explanation;
    ExplanationSource source = ExplanationSource::none;
    std::optional<Answer> llm_prediction;  // chain-of-thought prediction; absent under rp
    bool llm_correct = false;

    // Present and non-blank.
    bool has_explanation() const;
    bool operator==(const AnnotatedInstance&) const = default;
};

struct DistillStats {
    GenerationMethod method = GenerationMethod::cote;
    std::size_t total = 0;
    std::size_t accepted_cote = 0;
    std::size_t backup_rp = 0;
    std::size_t none_count = 0;
    std::optional<double> llm_accuracy;  // undefined under rp
    std::size_t parse_failures = 0;
};

// Derives the stats from annotations alone: parse failures are chain-of-thought passes without a
// prediction plus rationalizations that came back empty.
DistillStats compute_stats(const std::vector<AnnotatedInstance>& annotated, GenerationMethod method);

nlohmann::json to_json(const AnnotatedInstance& a);
AnnotatedInstance annotated_instance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DistillStats& s);

std::vector<AnnotatedInstance> load_annotated(const std::filesystem::path& path, DatasetKind kind);
std::string serialize_annotated(const std::vector<AnnotatedInstance>& annotated);

struct DistillOptions {
    DecodeParams params;
    std::size_t parallelism = 8;
};

struct DistillResult {
    std::vector<AnnotatedInstance> annotated;  // dataset order
    DistillStats stats;
    std::vector<ItemError> item_errors;        // gateway failures, by dataset index
};

DistillResult annotate_cote(const Dataset& dataset, const DemoSet& cot_demos, Gateway& gateway, const DistillOptions& options);
DistillResult annotate_rp(const Dataset& dataset, const DemoSet& rp_demos, Gateway& gateway, const DistillOptions& options);
// COTE first; RP prompts are issued only for the instances COTE rejected.
DistillResult annotate_crop(const Dataset& dataset, const DemoSet& cot_demos, const DemoSet& rp_demos, Gateway& gateway,
                            const DistillOptions& options);

}  // namespace distill
