#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "distill/distiller.hpp"
#include "distill/emitter.hpp"
#include "distill/gateway.hpp"
#include "distill/prompt.hpp"
#include "distill/types.hpp"

namespace distill {

using ConfigMap = std::map<std::string, std::string>;

// `key = value` lines; '#' starts a comment; values may be "quoted" or [bracketed, lists].
// Lists are flattened to comma-separated strings. Dashes in keys are read as underscores.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::filesystem::path& path);

// Keys accepted in config files and as --flags.
const std::vector<std::string>& config_keys();

struct PipelineConfig {
    std::filesystem::path dataset;
    DatasetKind kind = DatasetKind::multi_choice_5;
    std::filesystem::path dev;
    std::filesystem::path test;
    std::filesystem::path demos;
    std::filesystem::path rp_demos;
    std::size_t num_demos = default_demo_count;
    GenerationMethod method = GenerationMethod::crop;
    MtMode mode = MtMode::mt_cot;
    PromptStyle style = PromptStyle::standard;
    std::string task = "grid";
    std::vector<double> alpha_grid;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    std::size_t n_runs = 5;
    std::vector<std::size_t> sizes{50, 100, 200, 400};
    std::size_t n_splits = 5;
    std::string model_tag = "t5-base";
    std::string trainer;
    std::filesystem::path train;
    std::filesystem::path matrix;
    std::filesystem::path annotated;
    std::filesystem::path predictions;
    std::vector<double> runs;
    std::filesystem::path votes;
    std::filesystem::path shuffle_key;

    std::string endpoint;
    std::string model = "text-davinci-002";
    std::filesystem::path cache_dir;
    std::filesystem::path replay_dir;
    std::size_t parallelism = 8;
    std::size_t rate_limit = 0;
    std::size_t rate_window_ms = 60000;
    int retry_attempts = 5;
    std::size_t retry_initial_ms = 1000;
    int max_tokens = 256;
    double temperature = 0.0;

    std::filesystem::path out_dir = "out";

    ConfigMap resolved;  // the merged key/value view, for the run manifest

    // Config file values first, flags win. Throws ConfigInvalid on unknown keys or bad values.
    static PipelineConfig resolve(const ConfigMap& file_values, const ConfigMap& flag_values);

    DecodeParams decode_params() const;
    GatewayConfig gateway_config() const;
    std::unique_ptr<Gateway> make_gateway() const;
};

}  // namespace distill
