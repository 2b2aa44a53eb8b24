#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "distill/types.hpp"

namespace distill {

enum class ParseStatus { ok, no_answer_found, ambiguous, empty };

std::string_view to_string(ParseStatus status);

struct ParsedCompletion {
    std::optional<std::string> explanation;
    std::optional<Answer> prediction;
    ParseStatus status = ParseStatus::empty;
};

struct RationaleParse {
    std::string explanation;
    bool empty = true;
};

// Optional last-resort matcher consulted when neither a letter nor an exact choice text matched.
// Returns the chosen letter. Off unless a caller installs one.
using FuzzyMatcher = std::function<std::optional<char>(std::string_view tail, const Instance& instance)>;

struct ParseOptions {
    FuzzyMatcher fuzzy;
};

// Splits at the last "the answer is" marker: explanation precedes the marker's sentence,
// prediction is matched in the tail (letter first, then exact normalized choice text).
ParsedCompletion parse_cot(std::string_view text, const Instance& instance, DatasetKind kind,
                           const ParseOptions& options = {});

// Rationalization completions are explanation-only; trimmed at the stop boundary.
RationaleParse parse_rp(std::string_view text, std::string_view stop_sequence = "\n\nQ:");

// Tail matching applied to a whole generation ("television (c)", "(d) the ground may warm", or CoT text).
std::optional<Answer> extract_answer(std::string_view text, const Instance& instance, DatasetKind kind,
                                     const ParseOptions& options = {});

}  // namespace distill
