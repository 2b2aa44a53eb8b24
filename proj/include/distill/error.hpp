#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace distill {

// Every pipeline failure carries a stable machine-readable code plus free-form details.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, nlohmann::json details = nlohmann::json::object())
        : std::runtime_error(message), code_(std::move(code)), details_(std::move(details)) {}

    const std::string& code() const noexcept { return code_; }
    const nlohmann::json& details() const noexcept { return details_; }

    nlohmann::json to_json() const {
        return {{"error", code_}, {"message", what()}, {"details", details_}};
    }

private:
    std::string code_;
    nlohmann::json details_;
};

namespace errc {
inline constexpr const char* malformed_record = "MalformedRecord";
inline constexpr const char* gold_not_in_choices = "GoldNotInChoices";
inline constexpr const char* too_few_demos = "TooFewDemos";
inline constexpr const char* kind_mismatch = "KindMismatch";
inline constexpr const char* missing_gold = "MissingGold";
inline constexpr const char* network_error = "NetworkError";
inline constexpr const char* rate_limited = "RateLimited";
inline constexpr const char* replay_miss = "ReplayMiss";
inline constexpr const char* gateway_config = "GatewayConfig";
inline constexpr const char* mode_requires_explanations = "ModeRequiresExplanations";
inline constexpr const char* trainer_failure = "TrainerFailure";
inline constexpr const char* size_exceeds_dataset = "SizeExceedsDataset";
inline constexpr const char* style_requires_gold = "StyleRequiresGold";
inline constexpr const char* incomplete_sheet = "IncompleteSheet";
inline constexpr const char* unknown_example = "UnknownExample";
inline constexpr const char* config_invalid = "ConfigInvalid";
inline constexpr const char* io_error = "IoError";
inline constexpr const char* invalid_argument = "InvalidArgument";
}  // namespace errc

}  // namespace distill
