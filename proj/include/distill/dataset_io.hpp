#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "distill/types.hpp"

namespace distill {

nlohmann::json to_json(const Answer& answer);
nlohmann::json to_json(const Instance& instance);
nlohmann::json to_json(const Demonstration& demo);

Answer answer_from_json(const nlohmann::json& j);
Instance instance_from_json(const nlohmann::json& j);

// Reads one JSON object per line; blank lines are skipped. Errors name the 1-based line.
Dataset load_dataset(const std::filesystem::path& path, DatasetKind kind);
Dataset parse_dataset(const std::string& jsonl, DatasetKind kind);

// Keeps the first `count` demonstrations in file order.
DemoSet load_demos(const std::filesystem::path& path, DatasetKind kind, std::size_t count = default_demo_count);
DemoSet parse_demos(const std::string& jsonl, DatasetKind kind, std::size_t count = default_demo_count);

std::string serialize_dataset(const Dataset& dataset);

// File helpers shared by every stage.
std::string read_file(const std::filesystem::path& path);
// Write to a sibling temp file, then rename over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<nlohmann::json>& rows);

}  // namespace distill
