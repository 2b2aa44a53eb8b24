// distill: explanation distillation pipeline driver.
#include <algorithm>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "distill/commands.hpp"
#include "distill/config.hpp"
#include "distill/error.hpp"
#include "distill/log.hpp"

namespace {

using distill::ConfigMap;

const std::vector<std::string> gateway_keys{"endpoint", "model", "cache_dir", "replay_dir", "parallelism", "rate_limit",
                                            "rate_window_ms", "retry_attempts", "retry_initial_ms", "max_tokens",
                                            "temperature"};

const std::map<std::string, std::pair<std::string, std::vector<std::string>>>& command_table() {
    static const std::map<std::string, std::pair<std::string, std::vector<std::string>>> table{
        {"distill", {"Generate explanations with COTE, RP or CROP", {"dataset", "kind", "demos", "rp_demos", "num_demos", "method"}}},
        {"emit", {"Write qta/qtr training records for st, mt_re, mt_ra or mt_cot", {"annotated", "kind", "mode", "dev"}}},
        {"orchestrate",
         {"Alpha grid search, few-shot split sampling, or a run matrix",
          {"task", "train", "dev", "test", "mode", "alpha_grid", "trainer", "seed", "model_tag", "dataset", "kind", "sizes",
           "n_splits", "matrix", "parallelism"}}},
        {"eval", {"Score a predictions file and/or aggregate run accuracies", {"predictions", "dataset", "kind", "runs"}}},
        {"baseline", {"Run a prompting baseline through the gateway", {"dataset", "kind", "demos", "num_demos", "style"}}},
        {"human-eval", {"Aggregate explanation preference votes", {"votes", "shuffle_key"}}},
        {"stats", {"Recompute distillation stats from an annotated file", {"annotated", "kind", "method"}}},
    };
    return table;
}

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

int fail(const distill::Error& e, int status) {
    std::cerr << e.to_json().dump() << std::endl;
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distill LLM explanations into multi-task training corpora"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    struct Sub {
        CLI::App* app = nullptr;
        std::string config_path;
        std::map<std::string, std::string> values;
        std::map<std::string, CLI::Option*> options;
    };
    std::map<std::string, Sub> subs;
    for (const auto& [name, spec] : command_table()) {
        auto& sub = subs[name];
        sub.app = app.add_subcommand(name, spec.first);
        sub.app->add_option("--config", sub.config_path, "key = value config file; flags override it");
        std::vector<std::string> keys = spec.second;
        if (name == "distill" || name == "baseline") keys.insert(keys.end(), gateway_keys.begin(), gateway_keys.end());
        keys.push_back("out_dir");
        for (const auto& key : keys) {
            if (sub.options.contains(key)) continue;
            sub.options[key] = sub.app->add_option("--" + dashed(key), sub.values[key]);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(distill::Error(distill::errc::config_invalid, e.what()), 2);
    }
    if (verbose) distill::log::set_min_level(distill::log::Level::debug);

    for (auto& [name, sub] : subs) {
        if (!sub.app->parsed()) continue;
        try {
            ConfigMap file_values;
            if (!sub.config_path.empty()) file_values = distill::load_config_file(sub.config_path);
            ConfigMap flag_values;
            for (const auto& [key, opt] : sub.options) {
                if (opt->count() > 0) flag_values[key] = sub.values[key];
            }
            const auto cfg = distill::PipelineConfig::resolve(file_values, flag_values);
            const auto summary = distill::cli::run_subcommand(name, cfg);
            std::cout << summary.dump(2) << std::endl;
            return 0;
        } catch (const distill::Error& e) {
            return fail(e, e.code() == distill::errc::config_invalid ? 2 : 1);
        } catch (const std::exception& e) {
            return fail(distill::Error("InternalError", e.what()), 1);
        }
    }
    return 1;
}
