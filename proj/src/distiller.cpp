#include "distill/distiller.hpp"

#include "distill/answer_parser.hpp"
#include "distill/dataset_io.hpp"
#include "distill/error.hpp"
#include "distill/log.hpp"

namespace distill {

using nlohmann::json;

std::string_view to_string(GenerationMethod method) {
    switch (method) {
        case GenerationMethod::cote: return "cote";
        case GenerationMethod::rp: return "rp";
        case GenerationMethod::crop: return "crop";
    }
    return "cote";
}

std::string_view to_string(ExplanationSource source) {
    switch (source) {
        case ExplanationSource::cote: return "cote";
        case ExplanationSource::rp: return "rp";
        case ExplanationSource::none: return "none";
    }
    return "none";
}

GenerationMethod generation_method_from_string(std::string_view s) {
    if (s == "cote") return GenerationMethod::cote;
    if (s == "rp") return GenerationMethod::rp;
    if (s == "crop") return GenerationMethod::crop;
    throw Error(errc::invalid_argument, "unknown generation method: " + std::string(s));
}

ExplanationSource explanation_source_from_string(std::string_view s) {
    if (s == "cote") return ExplanationSource::cote;
    if (s == "rp") return ExplanationSource::rp;
    if (s == "none") return ExplanationSource::none;
    throw Error(errc::invalid_argument, "unknown explanation source: " + std::string(s));
}

bool AnnotatedInstance::has_explanation() const {
    return explanation && explanation->find_first_not_of(" \t\r\n") != std::string::npos;
}

DistillStats compute_stats(const std::vector<AnnotatedInstance>& annotated, GenerationMethod method) {
    DistillStats s;
    s.method = method;
    s.total = annotated.size();
    std::size_t correct = 0;
    for (const auto& a : annotated) {
        switch (a.source) {
            case ExplanationSource::cote: ++s.accepted_cote; break;
            case ExplanationSource::rp: ++s.backup_rp; break;
            case ExplanationSource::none: ++s.none_count; break;
        }
        if (a.llm_correct) ++correct;
        if (method != GenerationMethod::rp && !a.llm_prediction) ++s.parse_failures;
        if (a.source == ExplanationSource::rp && !a.has_explanation()) ++s.parse_failures;
    }
    if (method != GenerationMethod::rp && s.total > 0) s.llm_accuracy = static_cast<double>(correct) / s.total;
    return s;
}

json to_json(const AnnotatedInstance& a) {
    json j = to_json(a.instance);
    j["explanation"] = a.explanation ? json(*a.explanation) : json(nullptr);
    j["source"] = to_string(a.source);
    j["llm_prediction"] = a.llm_prediction ? to_json(*a.llm_prediction) : json(nullptr);
    j["llm_correct"] = a.llm_correct;
    return j;
}

AnnotatedInstance annotated_instance_from_json(const json& j) {
    AnnotatedInstance a;
    a.instance = instance_from_json(j);
    if (j.contains("explanation") && !j.at("explanation").is_null()) a.explanation = j.at("explanation").get<std::string>();
    a.source = explanation_source_from_string(j.at("source").get<std::string>());
    if (j.contains("llm_prediction") && !j.at("llm_prediction").is_null()) a.llm_prediction = answer_from_json(j.at("llm_prediction"));
    a.llm_correct = j.value("llm_correct", false);
    return a;
}

json to_json(const DistillStats& s) {
    return {{"method", to_string(s.method)},
            {"total", s.total},
            {"accepted_cote", s.accepted_cote},
            {"backup_rp", s.backup_rp},
            {"none_count", s.none_count},
            {"llm_accuracy", s.llm_accuracy ? json(*s.llm_accuracy) : json(nullptr)},
            {"parse_failures", s.parse_failures}};
}

std::vector<AnnotatedInstance> load_annotated(const std::filesystem::path& path, DatasetKind kind) {
    std::vector<AnnotatedInstance> out;
    std::size_t line = 0;
    for (const auto& row : read_jsonl(path)) {
        ++line;
        try {
            out.push_back(annotated_instance_from_json(row));
            validate_instance(out.back().instance, kind);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw Error(errc::malformed_record, "record " + std::to_string(line) + ": " + e.what(),
                        {{"line", line}, {"reason", e.what()}});
        }
    }
    return out;
}

std::string serialize_annotated(const std::vector<AnnotatedInstance>& annotated) {
    std::string out;
    for (const auto& a : annotated) {
        out += to_json(a).dump();
        out += '\n';
    }
    return out;
}

namespace {

void check_kinds(const Dataset& dataset, const DemoSet& demos) {
    if (dataset.kind != demos.kind) {
        throw Error(errc::kind_mismatch,
                    "dataset kind " + std::string(to_string(dataset.kind)) + " does not match demo kind " +
                        std::string(to_string(demos.kind)));
    }
}

void log_item_errors(const std::vector<ItemError>& errors, const Dataset& dataset, std::string_view phase) {
    for (const auto& e : errors) {
        log::warn(std::string(phase) + " completion failed for " + dataset.instances[e.index].id + ": " + e.code + " " + e.message);
    }
}

// Runs RP over the selected dataset indices, writing into `annotated`.
void rationalize(const Dataset& dataset, const std::vector<std::size_t>& indices, const DemoSet& rp_demos, Gateway& gateway,
                 const DistillOptions& options, std::vector<AnnotatedInstance>& annotated, std::vector<ItemError>& errors) {
    std::vector<Prompt> prompts;
    prompts.reserve(indices.size());
    for (auto i : indices) prompts.push_back(build_rp_prompt(rp_demos, dataset.instances[i]));
    auto batch = gateway.batch_complete(prompts, options.params, options.parallelism);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        auto& a = annotated[indices[k]];
        a.source = ExplanationSource::rp;
        a.explanation = batch.results[k] ? parse_rp(batch.results[k]->text).explanation : std::string();
    }
    for (auto e : batch.errors) {
        e.index = indices[e.index];
        errors.push_back(std::move(e));
    }
}

}  // namespace

DistillResult annotate_cote(const Dataset& dataset, const DemoSet& cot_demos, Gateway& gateway, const DistillOptions& options) {
    check_kinds(dataset, cot_demos);
    std::vector<Prompt> prompts;
    prompts.reserve(dataset.size());
    for (const auto& inst : dataset.instances) prompts.push_back(build_cot_prompt(cot_demos, inst));
    auto batch = gateway.batch_complete(prompts, options.params, options.parallelism);

    DistillResult out;
    out.annotated.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& inst = dataset.instances[i];
        AnnotatedInstance a{inst, std::nullopt, ExplanationSource::none, std::nullopt, false};
        if (batch.results[i]) {
            auto parsed = parse_cot(batch.results[i]->text, inst, dataset.kind);
            a.llm_prediction = parsed.prediction;
            a.llm_correct = parsed.prediction && answers_match(*parsed.prediction, inst.gold);
            if (a.llm_correct) {
                a.source = ExplanationSource::cote;
                a.explanation = parsed.explanation.value_or(std::string());
            }
        }
        out.annotated.push_back(std::move(a));
    }
    log_item_errors(batch.errors, dataset, "cot");
    out.item_errors = std::move(batch.errors);
    out.stats = compute_stats(out.annotated, GenerationMethod::cote);
    return out;
}

DistillResult annotate_rp(const Dataset& dataset, const DemoSet& rp_demos, Gateway& gateway, const DistillOptions& options) {
    check_kinds(dataset, rp_demos);
    DistillResult out;
    out.annotated.reserve(dataset.size());
    std::vector<std::size_t> all(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        all[i] = i;
        out.annotated.push_back({dataset.instances[i], std::nullopt, ExplanationSource::rp, std::nullopt, false});
    }
    rationalize(dataset, all, rp_demos, gateway, options, out.annotated, out.item_errors);
    log_item_errors(out.item_errors, dataset, "rp");
    out.stats = compute_stats(out.annotated, GenerationMethod::rp);
    return out;
}

DistillResult annotate_crop(const Dataset& dataset, const DemoSet& cot_demos, const DemoSet& rp_demos, Gateway& gateway,
                            const DistillOptions& options) {
    check_kinds(dataset, rp_demos);
    auto out = annotate_cote(dataset, cot_demos, gateway, options);
    std::vector<std::size_t> rejected;
    for (std::size_t i = 0; i < out.annotated.size(); ++i) {
        if (out.annotated[i].source == ExplanationSource::none) rejected.push_back(i);
    }
    std::vector<ItemError> rp_errors;
    rationalize(dataset, rejected, rp_demos, gateway, options, out.annotated, rp_errors);
    log_item_errors(rp_errors, dataset, "rp");
    out.item_errors.insert(out.item_errors.end(), rp_errors.begin(), rp_errors.end());
    out.stats = compute_stats(out.annotated, GenerationMethod::crop);
    return out;
}

}  // namespace distill
