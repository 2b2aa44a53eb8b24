#include "distill/human_eval.hpp"

#include <algorithm>
#include <sstream>

#include "distill/dataset_io.hpp"
#include "distill/error.hpp"

namespace distill {

using nlohmann::json;

std::string_view to_string(ShownChoice c) {
    switch (c) {
        case ShownChoice::a: return "a";
        case ShownChoice::b: return "b";
        case ShownChoice::tie: return "tie";
    }
    return "tie";
}

std::string_view to_string(Preference p) {
    switch (p) {
        case Preference::model_a: return "model_a";
        case Preference::model_b: return "model_b";
        case Preference::tie: return "tie";
    }
    return "tie";
}

ShownChoice shown_choice_from_string(std::string_view s) {
    if (s == "a" || s == "(a)") return ShownChoice::a;
    if (s == "b" || s == "(b)") return ShownChoice::b;
    if (s == "tie") return ShownChoice::tie;
    throw Error(errc::malformed_record, "unknown preference choice: " + std::string(s));
}

json to_json(const PreferenceReport& r) {
    json outcomes = json::array();
    for (const auto& o : r.outcomes) outcomes.push_back({{"example_id", o.example_id}, {"outcome", to_string(o.outcome)}, {"level", o.level}});
    return {{"n_examples", r.n_examples},
            {"preference", {{"model_a", r.pct_a}, {"tie", r.pct_tie}, {"model_b", r.pct_b}}},
            {"agreement_levels", {{"0", r.level_pct[0]}, {"1", r.level_pct[1]}, {"2", r.level_pct[2]}}},
            {"level_counts", {{"0", r.level_counts[0]}, {"1", r.level_counts[1]}, {"2", r.level_counts[2]}}},
            {"outcomes", outcomes}};
}

ExampleOutcome judge_example(const std::string& example_id, const std::array<Preference, 3>& votes) {
    ExampleOutcome o{example_id, Preference::tie, 0};
    for (auto candidate : {Preference::model_a, Preference::tie, Preference::model_b}) {
        const auto n = std::count(votes.begin(), votes.end(), candidate);
        if (n >= 2) {
            o.outcome = candidate;
            o.level = static_cast<int>(n) - 1;
            return o;
        }
    }
    return o;
}

namespace {

Preference derandomize(ShownChoice shown, ShownChoice model_a_side) {
    if (shown == ShownChoice::tie) return Preference::tie;
    return shown == model_a_side ? Preference::model_a : Preference::model_b;
}

}  // namespace

PreferenceReport aggregate_preferences(const std::vector<PreferenceVote>& votes, const ShuffleKey& shuffle_key) {
    std::map<std::string, std::vector<const PreferenceVote*>> by_example;
    for (const auto& v : votes) by_example[v.example_id].push_back(&v);

    PreferenceReport r;
    std::array<std::size_t, 3> outcome_counts{};  // model_a, tie, model_b
    for (const auto& [id, ex_votes] : by_example) {
        if (ex_votes.size() != annotators_per_example) {
            throw Error(errc::incomplete_sheet,
                        "example " + id + " has " + std::to_string(ex_votes.size()) + " votes, expected 3",
                        {{"example_id", id}, {"votes", ex_votes.size()}});
        }
        auto key = shuffle_key.find(id);
        if (key == shuffle_key.end()) throw Error(errc::unknown_example, "example " + id + " is missing from the shuffle key", {{"example_id", id}});
        if (key->second == ShownChoice::tie) throw Error(errc::malformed_record, "shuffle key for " + id + " must be a or b");
        std::array<Preference, 3> prefs{};
        for (std::size_t i = 0; i < 3; ++i) prefs[i] = derandomize(ex_votes[i]->choice, key->second);
        auto outcome = judge_example(id, prefs);
        ++r.level_counts[static_cast<std::size_t>(outcome.level)];
        ++outcome_counts[outcome.outcome == Preference::model_a ? 0 : outcome.outcome == Preference::tie ? 1 : 2];
        r.outcomes.push_back(std::move(outcome));
    }
    for (const auto& [id, side] : shuffle_key) {
        if (!by_example.contains(id)) throw Error(errc::incomplete_sheet, "example " + id + " has no votes", {{"example_id", id}});
    }
    r.n_examples = r.outcomes.size();
    if (r.n_examples > 0) {
        const double n = static_cast<double>(r.n_examples);
        r.pct_a = 100.0 * outcome_counts[0] / n;
        r.pct_tie = 100.0 * outcome_counts[1] / n;
        r.pct_b = 100.0 * outcome_counts[2] / n;
        for (std::size_t l = 0; l < 3; ++l) r.level_pct[l] = 100.0 * r.level_counts[l] / n;
    }
    return r;
}

std::vector<PreferenceVote> parse_votes_csv(const std::string& csv) {
    std::vector<PreferenceVote> out;
    std::istringstream in(csv);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) {
            f.erase(0, f.find_first_not_of(" \t"));
            f.erase(f.find_last_not_of(" \t") + 1);
            fields.push_back(f);
        }
        if (line_no == 1 && !fields.empty() && fields[0] == "example_id") continue;
        if (fields.size() != 3) {
            throw Error(errc::malformed_record, "votes line " + std::to_string(line_no) + ": expected 3 fields", {{"line", line_no}});
        }
        std::transform(fields[2].begin(), fields[2].end(), fields[2].begin(), [](unsigned char c) { return std::tolower(c); });
        out.push_back({fields[0], fields[1], shown_choice_from_string(fields[2])});
    }
    return out;
}

std::vector<PreferenceVote> load_votes_csv(const std::filesystem::path& path) { return parse_votes_csv(read_file(path)); }

std::string votes_to_csv(const std::vector<PreferenceVote>& votes) {
    std::string out = "example_id,annotator_id,choice\n";
    for (const auto& v : votes) out += v.example_id + "," + v.annotator_id + "," + std::string(to_string(v.choice)) + "\n";
    return out;
}

ShuffleKey shuffle_key_from_json(const json& j) {
    ShuffleKey key;
    for (const auto& [id, side] : j.items()) key[id] = shown_choice_from_string(side.get<std::string>());
    return key;
}

json to_json(const ShuffleKey& key) {
    json j = json::object();
    for (const auto& [id, side] : key) j[id] = to_string(side);
    return j;
}

}  // namespace distill
