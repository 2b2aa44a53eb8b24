#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace distill {

enum class DatasetKind { multi_choice_5, yes_no, multi_choice_4 };

std::string_view to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(std::string_view s);

// Number of lettered choices an instance of this kind carries (0 for yes_no).
std::size_t choice_count(DatasetKind kind);

// Case-fold, trim, collapse internal whitespace runs, strip one trailing ".".
std::string normalize_answer(std::string_view s);

struct Choice {
    char letter = 'a';
    std::string text;

    bool operator==(const Choice&) const = default;
};

struct Answer {
    std::optional<char> letter;
    std::string text;

    bool operator==(const Answer&) const = default;
};

// Multi-choice answers compare by letter when both sides carry one, otherwise by normalized text.
bool answers_match(const Answer& a, const Answer& b);

struct Instance {
    std::string id;
    std::string question;
    std::vector<Choice> choices;  // empty for yes_no
    Answer gold;

    bool operator==(const Instance&) const = default;

    const Choice* find_choice(char letter) const;
};

// Throws Error(GoldNotInChoices / MalformedRecord) when the instance breaks the kind's invariants.
void validate_instance(const Instance& instance, DatasetKind kind);

struct Dataset {
    DatasetKind kind = DatasetKind::multi_choice_5;
    std::vector<Instance> instances;

    std::size_t size() const { return instances.size(); }
    bool operator==(const Dataset&) const = default;
};

struct Demonstration {
    Instance instance;
    std::string explanation;

    bool operator==(const Demonstration&) const = default;
};

inline constexpr std::size_t default_demo_count = 7;

struct DemoSet {
    DatasetKind kind = DatasetKind::multi_choice_5;
    std::vector<Demonstration> demos;
};

}  // namespace distill
