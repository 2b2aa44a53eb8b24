#pragma once

#include <string>
#include <string_view>

#include "distill/types.hpp"

namespace distill {

enum class PromptStyle { standard, chain_of_thought, rationalization, explanation_after_answer };

std::string_view to_string(PromptStyle style);
PromptStyle prompt_style_from_string(std::string_view s);

inline constexpr std::string_view default_stop_sequence = "\n\nQ:";
inline constexpr std::string_view demo_separator = "\n\n";

struct Prompt {
    std::string text;
    PromptStyle style = PromptStyle::standard;
    std::string instance_id;
    std::string stop_sequence{default_stop_sequence};
};

// "blotter (e)" for 5-way, "(d) the ground may warm" for 4-way, "yes"/"no" for yes_no.
std::string render_answer(const Answer& answer, DatasetKind kind);

// "(a) shirt pocket (b) calligrapher's hand ..." on one line.
std::string render_choices(const Instance& instance);

// Sentence that closes a chain of thought: "Therefore, the answer is blotter (e)." / "So the answer is yes."
std::string render_answer_sentence(const Answer& answer, DatasetKind kind);

// Question + choices on one line without cues; used by the training-record emitter.
std::string render_question_input(const Instance& instance, DatasetKind kind);

// A single demonstration block for the given style; no trailing newline.
std::string render_demo_block(const Demonstration& demo, DatasetKind kind, PromptStyle style);

// All demonstration blocks joined by the block separator.
std::string render_demo_blocks(const DemoSet& demos, PromptStyle style);

Prompt build_cot_prompt(const DemoSet& demos, const Instance& instance);
Prompt build_rp_prompt(const DemoSet& demos, const Instance& instance);
Prompt build_standard_prompt(const DemoSet& demos, const Instance& instance);
Prompt build_explanation_after_answer_prompt(const DemoSet& demos, const Instance& instance);
Prompt build_prompt(PromptStyle style, const DemoSet& demos, const Instance& instance);

}  // namespace distill
