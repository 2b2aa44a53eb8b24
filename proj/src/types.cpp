#include "distill/types.hpp"

#include <algorithm>
#include <cctype>

#include "distill/error.hpp"

namespace distill {

std::string_view to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::multi_choice_5: return "multi_choice_5";
        case DatasetKind::yes_no: return "yes_no";
        case DatasetKind::multi_choice_4: return "multi_choice_4";
    }
    return "multi_choice_5";
}

DatasetKind dataset_kind_from_string(std::string_view s) {
    if (s == "multi_choice_5" || s == "csqa") return DatasetKind::multi_choice_5;
    if (s == "yes_no" || s == "strategyqa") return DatasetKind::yes_no;
    if (s == "multi_choice_4" || s == "obqa") return DatasetKind::multi_choice_4;
    throw Error(errc::invalid_argument, "unknown dataset kind: " + std::string(s));
}

std::size_t choice_count(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::multi_choice_5: return 5;
        case DatasetKind::yes_no: return 0;
        case DatasetKind::multi_choice_4: return 4;
    }
    return 0;
}

std::string normalize_answer(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    if (!out.empty() && out.back() == '.') {
        out.pop_back();
        while (!out.empty() && out.back() == ' ') out.pop_back();
    }
    return out;
}

bool answers_match(const Answer& a, const Answer& b) {
    if (a.letter && b.letter) return *a.letter == *b.letter;
    return normalize_answer(a.text) == normalize_answer(b.text);
}

const Choice* Instance::find_choice(char letter) const {
    auto it = std::find_if(choices.begin(), choices.end(), [&](const Choice& c) { return c.letter == letter; });
    return it == choices.end() ? nullptr : &*it;
}

void validate_instance(const Instance& instance, DatasetKind kind) {
    const std::size_t expected = choice_count(kind);
    if (instance.choices.size() != expected) {
        throw Error(errc::malformed_record,
                    "instance " + instance.id + " has " + std::to_string(instance.choices.size()) +
                        " choices, expected " + std::to_string(expected),
                    {{"id", instance.id}});
    }
    for (std::size_t i = 0; i < instance.choices.size(); ++i) {
        if (instance.choices[i].letter != static_cast<char>('a' + i)) {
            throw Error(errc::malformed_record, "instance " + instance.id + " choice letters must run a, b, c... in order",
                        {{"id", instance.id}});
        }
    }
    if (kind == DatasetKind::yes_no) {
        const auto g = normalize_answer(instance.gold.text);
        if (instance.gold.letter || (g != "yes" && g != "no")) {
            throw Error(errc::gold_not_in_choices, "instance " + instance.id + " gold must be yes or no",
                        {{"id", instance.id}});
        }
        return;
    }
    if (!instance.gold.letter) {
        throw Error(errc::gold_not_in_choices, "instance " + instance.id + " gold has no letter", {{"id", instance.id}});
    }
    const Choice* choice = instance.find_choice(*instance.gold.letter);
    if (choice == nullptr) {
        throw Error(errc::gold_not_in_choices,
                    "instance " + instance.id + " gold letter '" + std::string(1, *instance.gold.letter) +
                        "' is not a choice",
                    {{"id", instance.id}});
    }
    if (normalize_answer(choice->text) != normalize_answer(instance.gold.text)) {
        throw Error(errc::gold_not_in_choices, "instance " + instance.id + " gold text does not match its choice",
                    {{"id", instance.id}});
    }
}

}  // namespace distill
