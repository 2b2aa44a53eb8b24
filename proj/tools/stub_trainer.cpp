// Trainer-contract stub: `stub_trainer [--profile profile.json] manifest.json`.
//
// Profile JSON (all optional):
//   {"by_alpha": {"0.1": 0.31, ...}, "by_seed": {"0": 0.630, ...}, "default": 0.5,
//    "test_offset": 0.0, "fail_alphas": ["0.4"], "fail_seeds": [3]}
// dev accuracy = by_alpha[alpha] if present, else by_seed[seed], else default.
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "distill/dataset_io.hpp"
#include "distill/error.hpp"
#include "distill/orchestrator.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
    std::string profile_path;
    std::string manifest_path;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--profile" && i + 1 < argc) {
            profile_path = argv[++i];
        } else {
            manifest_path = arg;
        }
    }
    try {
        if (manifest_path.empty()) throw distill::Error(distill::errc::config_invalid, "usage: stub_trainer [--profile p.json] manifest.json");
        const auto manifest = distill::trainer_manifest_from_json(json::parse(distill::read_file(manifest_path)));
        const json profile = profile_path.empty() ? json::object() : json::parse(distill::read_file(profile_path));
        const auto alpha = distill::format_alpha(manifest.config.alpha);
        const auto seed = std::to_string(manifest.config.seed);

        for (const auto& a : profile.value("fail_alphas", json::array())) {
            if (a.get<std::string>() == alpha) throw distill::Error(distill::errc::trainer_failure, "planted failure at alpha " + alpha);
        }
        for (const auto& s : profile.value("fail_seeds", json::array())) {
            if (std::to_string(s.get<long long>()) == seed) throw distill::Error(distill::errc::trainer_failure, "planted failure at seed " + seed);
        }

        double dev = profile.value("default", 0.5);
        if (profile.contains("by_alpha") && profile["by_alpha"].contains(alpha)) {
            dev = profile["by_alpha"][alpha].get<double>();
        } else if (profile.contains("by_seed") && profile["by_seed"].contains(seed)) {
            dev = profile["by_seed"][seed].get<double>();
        }
        distill::TrainMetrics metrics;
        metrics.dev_accuracy = dev;
        metrics.test_accuracy = dev + profile.value("test_offset", 0.0);
        metrics.losses = json::array({{{"epoch", 0}, {"alpha", manifest.config.alpha}}});
        distill::write_file_atomic(manifest.metrics_path, distill::to_json(metrics).dump(2) + "\n");
        return 0;
    } catch (const distill::Error& e) {
        std::cerr << e.to_json().dump() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "InternalError"}, {"message", e.what()}}.dump() << std::endl;
        return 1;
    }
}
