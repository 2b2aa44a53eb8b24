#include "distill/emitter.hpp"

#include <cctype>

#include "distill/dataset_io.hpp"
#include "distill/error.hpp"
#include "distill/prompt.hpp"

namespace distill {

using nlohmann::json;

std::string_view to_string(MtMode mode) {
    switch (mode) {
        case MtMode::st: return "st";
        case MtMode::mt_re: return "mt_re";
        case MtMode::mt_ra: return "mt_ra";
        case MtMode::mt_cot: return "mt_cot";
    }
    return "st";
}

std::string_view to_string(TaskTag task) { return task == TaskTag::qta ? "qta" : "qtr"; }

MtMode mt_mode_from_string(std::string_view s) {
    if (s == "st") return MtMode::st;
    if (s == "mt_re") return MtMode::mt_re;
    if (s == "mt_ra") return MtMode::mt_ra;
    if (s == "mt_cot") return MtMode::mt_cot;
    throw Error(errc::invalid_argument, "unknown multi-task mode: " + std::string(s));
}

json to_json(const TrainRecord& r) {
    return {{"input", r.input}, {"target", r.target}, {"task", to_string(r.task)}, {"id", r.instance_id}};
}

TrainRecord train_record_from_json(const json& j) {
    TrainRecord r;
    r.input = j.at("input").get<std::string>();
    r.target = j.at("target").get<std::string>();
    const auto task = j.at("task").get<std::string>();
    if (task != "qta" && task != "qtr") throw Error(errc::malformed_record, "unknown task tag: " + task);
    r.task = task == "qta" ? TaskTag::qta : TaskTag::qtr;
    r.instance_id = j.at("id").get<std::string>();
    return r;
}

json to_json(const EmitReport& r) {
    return {{"mode", to_string(r.mode)},       {"instances", r.instances},         {"qta", r.qta},
            {"qtr", r.qtr},                    {"masked_none", r.masked_none},     {"skipped_empty", r.skipped_empty}};
}

namespace {

std::string rtrim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

std::string qtr_target(std::string_view explanation, const Answer& gold, DatasetKind kind, MtMode mode) {
    const std::string expl = rtrim(explanation);
    const std::string answer = "the answer is " + render_answer(gold, kind);
    switch (mode) {
        case MtMode::mt_re: return expl;
        case MtMode::mt_ra: return answer + ". " + expl;
        case MtMode::mt_cot: return expl + " " + answer + ".";
        case MtMode::st: break;
    }
    throw Error(errc::invalid_argument, "st mode has no qtr task");
}

EmitResult emit(const std::vector<AnnotatedInstance>& annotated, DatasetKind kind, MtMode mode) {
    if (mode != MtMode::st) {
        bool any = false;
        for (const auto& a : annotated) any = any || a.has_explanation();
        if (!any) {
            throw Error(errc::mode_requires_explanations,
                        std::string(to_string(mode)) + " needs at least one instance with an explanation");
        }
    }
    EmitResult out;
    out.report.mode = mode;
    out.report.instances = annotated.size();
    for (const auto& a : annotated) {
        const std::string question = render_question_input(a.instance, kind);
        out.records.push_back({std::string(qta_prefix) + question, render_answer(a.instance.gold, kind), TaskTag::qta, a.instance.id});
        ++out.report.qta;
        if (mode == MtMode::st) continue;
        if (a.source == ExplanationSource::none) {
            ++out.report.masked_none;
            continue;
        }
        if (!a.has_explanation()) {
            ++out.report.skipped_empty;
            continue;
        }
        out.records.push_back({std::string(qtr_prefix) + question, qtr_target(*a.explanation, a.instance.gold, kind, mode),
                               TaskTag::qtr, a.instance.id});
        ++out.report.qtr;
    }
    return out;
}

std::vector<TrainRecord> emit_qta(const Dataset& dataset) {
    std::vector<TrainRecord> out;
    out.reserve(dataset.size());
    for (const auto& inst : dataset.instances) {
        out.push_back({std::string(qta_prefix) + render_question_input(inst, dataset.kind), render_answer(inst.gold, dataset.kind),
                       TaskTag::qta, inst.id});
    }
    return out;
}

std::string serialize_records(const std::vector<TrainRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

std::vector<TrainRecord> load_records(const std::filesystem::path& path) {
    std::vector<TrainRecord> out;
    for (const auto& row : read_jsonl(path)) out.push_back(train_record_from_json(row));
    return out;
}

}  // namespace distill
