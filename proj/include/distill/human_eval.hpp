#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace distill {

// What an annotator saw: the explanation shown as (a), the one shown as (b), or a tie.
enum class ShownChoice { a, b, tie };
// Preference after de-randomizing display sides.
enum class Preference { model_a, model_b, tie };

std::string_view to_string(ShownChoice c);
std::string_view to_string(Preference p);
ShownChoice shown_choice_from_string(std::string_view s);

struct PreferenceVote {
    std::string example_id;
    std::string annotator_id;
    ShownChoice choice = ShownChoice::tie;
};

// example_id -> display side ("a" or "b") on which model A's explanation appeared.
using ShuffleKey = std::map<std::string, ShownChoice>;

inline constexpr std::size_t annotators_per_example = 3;

struct ExampleOutcome {
    std::string example_id;
    Preference outcome = Preference::tie;
    int level = 0;  // 2: all agree, 1: exactly two agree, 0: all differ
};

struct PreferenceReport {
    double pct_a = 0.0;
    double pct_tie = 0.0;
    double pct_b = 0.0;
    std::array<double, 3> level_pct{};     // indexed by level
    std::array<std::size_t, 3> level_counts{};
    std::size_t n_examples = 0;
    std::vector<ExampleOutcome> outcomes;  // sorted by example id
};

nlohmann::json to_json(const PreferenceReport& r);

// Majority over the three votes (tie is a first-class option); no majority means tie.
ExampleOutcome judge_example(const std::string& example_id, const std::array<Preference, 3>& votes);

PreferenceReport aggregate_preferences(const std::vector<PreferenceVote>& votes, const ShuffleKey& shuffle_key);

// CSV with header example_id,annotator_id,choice; choice in {a, b, tie}.
std::vector<PreferenceVote> parse_votes_csv(const std::string& csv);
std::vector<PreferenceVote> load_votes_csv(const std::filesystem::path& path);
std::string votes_to_csv(const std::vector<PreferenceVote>& votes);

ShuffleKey shuffle_key_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ShuffleKey& key);

}  // namespace distill
