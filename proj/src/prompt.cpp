#include "distill/prompt.hpp"

#include "distill/error.hpp"

namespace distill {

std::string_view to_string(PromptStyle style) {
    switch (style) {
        case PromptStyle::standard: return "standard";
        case PromptStyle::chain_of_thought: return "chain_of_thought";
        case PromptStyle::rationalization: return "rationalization";
        case PromptStyle::explanation_after_answer: return "explanation_after_answer";
    }
    return "standard";
}

PromptStyle prompt_style_from_string(std::string_view s) {
    if (s == "standard" || s == "direct") return PromptStyle::standard;
    if (s == "chain_of_thought" || s == "cot") return PromptStyle::chain_of_thought;
    if (s == "rationalization" || s == "rp") return PromptStyle::rationalization;
    if (s == "explanation_after_answer" || s == "eaa") return PromptStyle::explanation_after_answer;
    throw Error(errc::invalid_argument, "unknown prompt style: " + std::string(s));
}

std::string render_answer(const Answer& answer, DatasetKind kind) {
    const std::string letter = answer.letter ? std::string(1, *answer.letter) : std::string();
    switch (kind) {
        case DatasetKind::multi_choice_5: return answer.text + " (" + letter + ")";
        case DatasetKind::multi_choice_4: return "(" + letter + ") " + answer.text;
        case DatasetKind::yes_no: return normalize_answer(answer.text);
    }
    return answer.text;
}

std::string render_choices(const Instance& instance) {
    std::string out;
    for (const auto& c : instance.choices) {
        if (!out.empty()) out += ' ';
        out += '(';
        out += c.letter;
        out += ") ";
        out += c.text;
    }
    return out;
}

std::string render_answer_sentence(const Answer& answer, DatasetKind kind) {
    const char* lead = kind == DatasetKind::multi_choice_5 ? "Therefore, the answer is " : "So the answer is ";
    return lead + render_answer(answer, kind) + ".";
}

std::string render_question_input(const Instance& instance, DatasetKind kind) {
    if (kind == DatasetKind::yes_no) return instance.question;
    return instance.question + " Answer Choices: " + render_choices(instance);
}

namespace {

std::string question_header(const Instance& instance, DatasetKind kind) {
    if (kind == DatasetKind::yes_no) return "Q: Yes or no: " + instance.question + "\n";
    return "Q: " + instance.question + "\nAnswer Choices:\n" + render_choices(instance) + "\n";
}

void check_kind(const DemoSet& demos, const Instance& instance) {
    // Demo set kind must agree with the target's choice layout.
    if (instance.choices.size() != choice_count(demos.kind)) {
        throw Error(errc::kind_mismatch,
                    "instance " + instance.id + " does not fit demo set kind " + std::string(to_string(demos.kind)),
                    {{"id", instance.id}, {"kind", to_string(demos.kind)}});
    }
}

bool has_gold(const Instance& instance, DatasetKind kind) {
    if (instance.gold.text.empty()) return false;
    return kind == DatasetKind::yes_no || instance.gold.letter.has_value();
}

Prompt assemble(const DemoSet& demos, const Instance& instance, PromptStyle style, const std::string& target_tail) {
    check_kind(demos, instance);
    Prompt p;
    p.style = style;
    p.instance_id = instance.id;
    p.text = render_demo_blocks(demos, style);
    if (!p.text.empty()) p.text += demo_separator;
    p.text += question_header(instance, demos.kind);
    p.text += target_tail;
    return p;
}

}  // namespace

std::string render_demo_block(const Demonstration& demo, DatasetKind kind, PromptStyle style) {
    std::string block = question_header(demo.instance, kind);
    const std::string answer = render_answer(demo.instance.gold, kind);
    switch (style) {
        case PromptStyle::standard:
            block += "A: " + answer;
            break;
        case PromptStyle::chain_of_thought:
            block += "A: " + demo.explanation + " " + render_answer_sentence(demo.instance.gold, kind);
            break;
        case PromptStyle::rationalization:
        case PromptStyle::explanation_after_answer:
            block += "A: " + answer + "\nExplanation: " + demo.explanation;
            break;
    }
    return block;
}

std::string render_demo_blocks(const DemoSet& demos, PromptStyle style) {
    std::string out;
    for (const auto& d : demos.demos) {
        if (!out.empty()) out += demo_separator;
        out += render_demo_block(d, demos.kind, style);
    }
    return out;
}

Prompt build_cot_prompt(const DemoSet& demos, const Instance& instance) {
    return assemble(demos, instance, PromptStyle::chain_of_thought, "A:");
}

Prompt build_rp_prompt(const DemoSet& demos, const Instance& instance) {
    if (!has_gold(instance, demos.kind)) {
        throw Error(errc::missing_gold, "rationalization prompt for " + instance.id + " needs a gold answer", {{"id", instance.id}});
    }
    return assemble(demos, instance, PromptStyle::rationalization,
                    "A: " + render_answer(instance.gold, demos.kind) + "\nExplanation:");
}

Prompt build_standard_prompt(const DemoSet& demos, const Instance& instance) {
    return assemble(demos, instance, PromptStyle::standard, "A:");
}

Prompt build_explanation_after_answer_prompt(const DemoSet& demos, const Instance& instance) {
    return assemble(demos, instance, PromptStyle::explanation_after_answer, "A:");
}

Prompt build_prompt(PromptStyle style, const DemoSet& demos, const Instance& instance) {
    switch (style) {
        case PromptStyle::standard: return build_standard_prompt(demos, instance);
        case PromptStyle::chain_of_thought: return build_cot_prompt(demos, instance);
        case PromptStyle::rationalization: return build_rp_prompt(demos, instance);
        case PromptStyle::explanation_after_answer: return build_explanation_after_answer_prompt(demos, instance);
    }
    return build_standard_prompt(demos, instance);
}

}  // namespace distill
