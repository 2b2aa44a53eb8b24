#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "distill/config.hpp"

namespace distill::cli {

const std::vector<std::string>& subcommands();

// Runs one pipeline stage; writes outputs plus run_manifest.json under cfg.out_dir and
// returns a short JSON summary. Throws Error on failure.
nlohmann::json run_subcommand(const std::string& name, const PipelineConfig& cfg);

}  // namespace distill::cli
