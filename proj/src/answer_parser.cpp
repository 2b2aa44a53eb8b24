#include "distill/answer_parser.hpp"

#include <cctype>
#include <set>
#include <vector>

namespace distill {

std::string_view to_string(ParseStatus status) {
    switch (status) {
        case ParseStatus::ok: return "ok";
        case ParseStatus::no_answer_found: return "no_answer_found";
        case ParseStatus::ambiguous: return "ambiguous";
        case ParseStatus::empty: return "empty";
    }
    return "empty";
}

namespace {

constexpr std::string_view marker = "the answer is";

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lowered(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<std::size_t> last_marker(std::string_view text) {
    const auto pos = lowered(text).rfind(marker);
    if (pos == std::string::npos) return std::nullopt;
    return pos;
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// Start of the sentence that contains `pos`.
std::size_t sentence_start(std::string_view text, std::size_t pos) {
    for (std::size_t i = pos; i > 0; --i) {
        const char c = text[i - 1];
        if (c == '\n') return i;
        if (i < pos && is_terminal(c) && std::isspace(static_cast<unsigned char>(text[i]))) return i;
    }
    return 0;
}

// The answer sentence following the marker: up to a newline, or a terminal followed by a capitalized word.
std::string_view answer_sentence(std::string_view tail) {
    for (std::size_t i = 0; i < tail.size(); ++i) {
        if (tail[i] == '\n') return tail.substr(0, i);
        if (is_terminal(tail[i]) && i + 2 < tail.size() && std::isspace(static_cast<unsigned char>(tail[i + 1])) &&
            std::isupper(static_cast<unsigned char>(tail[i + 2]))) {
            return tail.substr(0, i + 1);
        }
    }
    return tail;
}

struct TailMatch {
    std::optional<Answer> answer;
    bool ambiguous = false;
};

TailMatch match_tail(std::string_view tail, const Instance& instance, DatasetKind kind, const ParseOptions& options) {
    TailMatch m;
    tail = trim(tail);
    if (kind == DatasetKind::yes_no) {
        std::string norm = normalize_answer(tail);
        std::string word;
        for (char c : norm) {
            if (!std::isalpha(static_cast<unsigned char>(c))) break;
            word.push_back(c);
        }
        if (norm == "yes" || norm == "no" || word == "yes" || word == "no") {
            m.answer = Answer{std::nullopt, norm == "yes" || norm == "no" ? norm : word};
        }
        return m;
    }

    std::set<char> letters;
    for (std::size_t i = 0; i + 2 < tail.size(); ++i) {
        if (tail[i] == '(' && tail[i + 2] == ')') {
            const char l = static_cast<char>(std::tolower(static_cast<unsigned char>(tail[i + 1])));
            if (instance.find_choice(l) != nullptr) letters.insert(l);
        }
    }
    if (letters.size() > 1) {
        m.ambiguous = true;
        return m;
    }
    if (letters.size() == 1) {
        const Choice* c = instance.find_choice(*letters.begin());
        m.answer = Answer{c->letter, c->text};
        return m;
    }

    const std::string norm = normalize_answer(tail);
    for (const auto& c : instance.choices) {
        if (normalize_answer(c.text) == norm) {
            m.answer = Answer{c.letter, c.text};
            return m;
        }
    }
    if (options.fuzzy) {
        if (auto l = options.fuzzy(tail, instance)) {
            if (const Choice* c = instance.find_choice(*l)) m.answer = Answer{c->letter, c->text};
        }
    }
    return m;
}

}  // namespace

ParsedCompletion parse_cot(std::string_view text, const Instance& instance, DatasetKind kind, const ParseOptions& options) {
    ParsedCompletion out;
    if (trim(text).empty()) {
        out.status = ParseStatus::empty;
        return out;
    }
    const auto pos = last_marker(text);
    if (!pos) {
        out.status = ParseStatus::no_answer_found;
        return out;
    }
    const auto explanation = trim(text.substr(0, sentence_start(text, *pos)));
    if (!explanation.empty()) out.explanation = std::string(explanation);

    const auto tail = answer_sentence(text.substr(*pos + marker.size()));
    auto match = match_tail(tail, instance, kind, options);
    if (match.ambiguous) {
        out.status = ParseStatus::ambiguous;
    } else if (match.answer) {
        out.prediction = std::move(match.answer);
        out.status = ParseStatus::ok;
    } else {
        out.status = ParseStatus::no_answer_found;
    }
    return out;
}

RationaleParse parse_rp(std::string_view text, std::string_view stop_sequence) {
    if (!stop_sequence.empty()) {
        if (auto cut = text.find(stop_sequence); cut != std::string_view::npos) text = text.substr(0, cut);
    }
    RationaleParse out;
    out.explanation = std::string(trim(text));
    out.empty = out.explanation.empty();
    return out;
}

std::optional<Answer> extract_answer(std::string_view text, const Instance& instance, DatasetKind kind,
                                     const ParseOptions& options) {
    std::string_view tail;
    if (const auto pos = last_marker(text)) {
        tail = answer_sentence(text.substr(*pos + marker.size()));
    } else {
        tail = trim(text);
        if (const auto nl = tail.find('\n'); nl != std::string_view::npos) tail = tail.substr(0, nl);
    }
    return match_tail(tail, instance, kind, options).answer;
}

}  // namespace distill
