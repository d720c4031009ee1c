#pragma once

#include <string_view>

#include "ibeval/corpus.hpp"

namespace ibeval {

enum class Setting {
  VanillaScenario,
  MultiTurnDialogue,
  Conformity,
  DisturbingMiscellany,
  FewShotLearning,
  MissingGuidance,
  Vagueness,
  PromptPolishing,
};

// Complete instructions are the control group; redundant and insufficient
// ones form the experiment group.
enum class SettingCategory { Complete, Redundant, Insufficient };

inline constexpr Setting kAllSettings[] = {
    Setting::VanillaScenario,  Setting::MultiTurnDialogue,
    Setting::Conformity,       Setting::DisturbingMiscellany,
    Setting::FewShotLearning,  Setting::MissingGuidance,
    Setting::Vagueness,        Setting::PromptPolishing,
};

SettingCategory category_of(Setting setting);
std::string_view setting_key(Setting setting);           // "vanilla", ...
std::optional<Setting> setting_from_key(std::string_view key);
std::string_view setting_display_name(Setting setting);  // "Missing Choices"

// Raw prompt template for a (setting, form) pair, substitution placeholders
// ({question}, {facts}, {options_text}, {fewshot_block}) intact. Throws
// RenderError (see promptfabric.hpp) for unsupported pairs; judging has no
// miscellany template.
std::string_view raw_template(Setting setting, DatasetForm form);
bool setting_supports_form(Setting setting, DatasetForm form);

// Round-2 reflection template ({first_answer} placeholder) for multi-turn.
std::string_view raw_round2_template(DatasetForm form);

// Conformity injection texts.
std::string_view conformity_sentence_prefix();  // judging: "The answer to..."
std::string_view conformity_choice_paragraph();

// LLM-judge prompt templates ({answer_text} placeholder).
std::string_view judge_template(DatasetForm form);

// Fixed rewrite instruction sent as the system message in live polishing.
std::string_view polish_rewrite_instruction();

}  // namespace ibeval
