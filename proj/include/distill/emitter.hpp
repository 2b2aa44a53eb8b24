#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "distill/distiller.hpp"

namespace distill {

enum class MtMode { st, mt_re, mt_ra, mt_cot };
enum class TaskTag { qta, qtr };

std::string_view to_string(MtMode mode);
std::string_view to_string(TaskTag task);
MtMode mt_mode_from_string(std::string_view s);

inline constexpr std::string_view qta_prefix = "answer: ";
inline constexpr std::string_view qtr_prefix = "explain: ";

struct TrainRecord {
    std::string input;
    std::string target;
    TaskTag task = TaskTag::qta;
    std::string instance_id;

    bool operator==(const TrainRecord&) const = default;
};

nlohmann::json to_json(const TrainRecord& r);
TrainRecord train_record_from_json(const nlohmann::json& j);

struct EmitReport {
    MtMode mode = MtMode::st;
    std::size_t instances = 0;
    std::size_t qta = 0;
    std::size_t qtr = 0;
    std::size_t masked_none = 0;         // source = none: no qtr record
    std::size_t skipped_empty = 0;       // explanation present but blank
};

nlohmann::json to_json(const EmitReport& r);

struct EmitResult {
    std::vector<TrainRecord> records;  // per instance: qta, then qtr when emitted
    EmitReport report;
};

// qtr target for an explanation under a multi-task mode.
std::string qtr_target(std::string_view explanation, const Answer& gold, DatasetKind kind, MtMode mode);

EmitResult emit(const std::vector<AnnotatedInstance>& annotated, DatasetKind kind, MtMode mode);

// qta-only records for evaluation splits.
std::vector<TrainRecord> emit_qta(const Dataset& dataset);

std::string serialize_records(const std::vector<TrainRecord>& records);
std::vector<TrainRecord> load_records(const std::filesystem::path& path);

}  // namespace distill
