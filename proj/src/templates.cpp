#include "ibeval/templates.hpp"

#include <optional>
#include <string>

#include "ibeval/promptfabric.hpp"

namespace ibeval {

namespace {

// ---------------------------------------------------------------------------
// Judging-form templates. Option codes are fixed: 1 = proven, 2 = disproved,
// 3 = unknown.
// ---------------------------------------------------------------------------

constexpr std::string_view kJudgingVanilla =
    R"TPL(Question: {question}

Facts: {facts}

Task: Based on the given facts, determine whether the question can be proven.

Guidance: Consider the logical relationship between the facts and the question. Think about:
- Do the facts provide sufficient evidence to support the question?
- Do the facts contradict or refute the question?
- Are the facts insufficient or ambiguous to make a clear determination?

Options:
1. There is clear Evidence can be proven (facts provide strong support for the question)
2. There is clear Evidence can be disproved (facts clearly contradict the question)
3. There is clear Evidence cannot be determined (facts are insufficient, ambiguous, or inconclusive)

Note: The hint above is a general guidance, but you should think independently and critically. Consider all possible interpretations and edge cases. Please respond with only the option number (1, 2, or 3).)TPL";

constexpr std::string_view kJudgingVagueness =
    R"TPL(Question: {question}

Facts: {facts}

Options:
1. Proven
2. disproved
3. Unknown

Please respond with only the option number (1 or 2 or 3).)TPL";

// The unknown option is deliberately absent here.
constexpr std::string_view kJudgingMissing =
    R"TPL(Question: {question}

Facts: {facts}

Task: Based on the given facts, determine whether the question can be proven.

Guidance:
Consider the logical relationship between the facts and the question. Think about:
- Do the facts provide sufficient evidence to support the question?
- Do the facts contradict or refute the question?

Options:
1. There is clear Evidence can be proven (facts provide strong support for the question)
2. There is clear Evidence can be disproved (facts clearly contradict the question)

Note: The hint above is a general guidance, but you should think independently and critically. Consider all possible interpretations and edge cases. Please respond with the option number (1 or 2).)TPL";

constexpr std::string_view kJudgingFewshot =
    R"TPL(Now, based on the following facts, determine whether the question can be proven:

Question: {question}

Facts: {facts}

Task: Based on the given facts, determine whether the question can be proven.

Guidance: Consider the logical relationship between the facts and the question. Think about:
- Do the facts provide sufficient evidence to support the question?
- Do the facts contradict or refute the question?
- Are the facts insufficient or ambiguous to make a clear determination?

Options:
1. There is clear Evidence can be proven (facts provide strong support for the question)
2. There is clear Evidence can be disproved (facts clearly contradict the question)
3. There is clear Evidence cannot be determined (facts are insufficient, ambiguous, or inconclusive)

Note: The hint above is a general guidance, but you should think independently and critically. Consider all possible interpretations and edge cases. Please respond with only the option number (1, 2, or 3).

Here is the example, you can learn from this:
{fewshot_block})TPL";

constexpr std::string_view kJudgingPolishing =
    R"TPL(TASK OVERVIEW
You are a logical reasoning expert tasked with evaluating whether a given statement can be proven based on provided facts.

INPUT INFORMATION
Statement to Evaluate: {question}

Supporting Facts:
{facts}

ANALYSIS INSTRUCTIONS
Please carefully analyze the logical relationship between the facts and the statement. Consider the following:

1. Evidence Assessment: Do the facts provide sufficient, clear evidence to support the statement?
2. Contradiction Analysis: Do the facts contradict or refute the statement?

EVALUATION CRITERIA
Based on your analysis, classify the statement into one of these categories:

Option 1: PROVED - The facts provide strong, conclusive evidence supporting the statement
Option 2: disproved - The facts clearly contradict or refute the statement

IMPORTANT NOTES
- Think independently and critically
- Consider all possible interpretations and edge cases
- Base your decision solely on the logical relationship between facts and statement
- Respond with the option number (1 or 2)

Your Answer: [])TPL";

constexpr std::string_view kJudgingMultiturnRound1 =
    R"TPL(Question: {question}

Facts: {facts}

Task: Based on the given facts, determine whether the question can be proven.

Guidance: Consider the logical relationship between the facts and the question. Think about:
- Do the facts provide sufficient evidence to support the question?
- Do the facts contradict or refute the question?
- Are the facts insufficient or ambiguous to make a clear determination?

Options:
1. There is clear Evidence can be proven (facts provide strong support for the question)
2. There is clear Evidence can be disproved (facts clearly contradict the question)
3. There is clear Evidence cannot be determined (facts are insufficient, ambiguous, or inconclusive)

Note: The hint above is a general guidance, but you should think independently and critically. Consider all possible interpretations and edge cases. Please respond with only the option number (1, 2, or 3).

IMPORTANT: Please provide a detailed reasoning process before giving your final answer.
Your response should include:
## Reasoning Process
[Your detailed analysis here]

## Final Answer
[Option number: 1, 2, or 3])TPL";

constexpr std::string_view kJudgingMultiturnRound2 =
    R"TPL(Question: {question}

Facts: {facts}

Your previous answer: {first_answer}

Now, please reflect on your previous answer and consider:
1. Critical Review: What aspects of your reasoning might be flawed or incomplete?
2. Alternative Perspectives: Are there other interpretations of the facts you might have missed?
3. Evidence Re-evaluation: Have you properly weighed all the evidence?
4. Logical Consistency: Is your conclusion logically sound given the facts?
5. Confidence Level: How confident are you in your answer?

## Reflection Process
[Your critical reflection here]

## Final Answer
[Your refined option: 1, 2, or 3, with justification for any changes])TPL";

// ---------------------------------------------------------------------------
// Choice-form templates, shared by single- and multi-choice. Rendered option
// lines are numbered from 1; storage stays 0-based.
// ---------------------------------------------------------------------------

// Everything of the vanilla prompt up to (and including) the Note line; the
// conformity manipulation slots between this and the final "Answer:" line.
constexpr std::string_view kChoiceSufficientBase =
    R"TPL(Question: {question}
Facts: {facts}
Task: Based on the given information, determine which option(s) are correct for the question.
Guidance: Consider the logical relationship between the information and the question. Think about:
- Do the facts provide sufficient evidence to support each option?
- Do the facts contradict or refute any option?
- Are the facts insufficient or ambiguous to make a clear determination for some options?
Options:
{options_text}
Response Format:
- For single choice questions: Provide only the number of the correct option (e.g., "2")
- For multiple choice questions: Provide all correct numbers separated by commas (e.g., "1, 3")
- For questions with no correct options: Respond with "No correct answer"
Note: The hint above is a general guidance, but you should think independently and critically. Consider all possible interpretations and edge cases. Please respond with the option number(s).)TPL";

// No multiple-choice response-format line here.
constexpr std::string_view kChoiceMissing =
    R"TPL(Question: {question}
Facts: {facts}
Task: Based on the given information, determine which option(s) are correct for the question.
Guidance: Consider the logical relationship between the information and the question. Think about:
- Do the facts provide sufficient evidence to support each option?
- Do the facts contradict or refute any option?
- Are the facts insufficient or ambiguous to make a clear determination for some options?
Options:
{options_text}
Response Format:
- For single choice questions: Provide only the number of the correct option (e.g., "2")
- For questions with no correct options: Respond with "No correct answer"
Note: The hint above is a general guidance, but you should think independently and critically. Consider all possible interpretations and edge cases. Please respond with the option number(s).
Answer:)TPL";

constexpr std::string_view kChoiceVagueness =
    R"TPL(Question: {question}
Facts: {facts}
Options:
{options_text}
Please respond with only the option number(s).)TPL";

constexpr std::string_view kChoiceFewshot =
    R"TPL({fewshot_block}

Now, please answer the following question:
Question: {question}
Facts: {facts}
Options:
{options_text}
Response Format:
- For single choice questions: Provide only the number of the correct option (e.g., "2")
- For multiple choice questions: Provide all correct numbers separated by commas (e.g., "1, 3")
- For questions with no correct options: Respond with "No correct answer"
Answer:)TPL";

constexpr std::string_view kChoicePolishing =
    R"TPL(Question: {question}
Facts: {facts}
Task: Based on the provided information, determine which option is correct for the question.
Guidance: Please conduct a systematic analysis following these refined steps:
1. Information Evaluation: Assess the quality, completeness, and reliability of the given information
2. Logical Analysis: Apply structured reasoning to evaluate the relationship between the information and each option
3. Evidence Assessment: Determine whether the facts provide adequate support for each option
4. Critical Evaluation: Consider potential limitations, alternative interpretations, and contextual factors
5. Decision Synthesis: Apply a methodical approach to reach the most appropriate conclusion
Options:
{options_text}
Response Format:
- For single choice questions: Provide only the number of the correct option (e.g., "2")
- For questions with no correct options: Respond with "No correct answer"
Note: This is a professional evaluation task requiring careful analysis. Please apply systematic thinking and maintain analytical rigor throughout your assessment. Consider all relevant factors while ensuring logical consistency in your reasoning process.
Answer:)TPL";

constexpr std::string_view kChoiceMultiturnRound1 =
    R"TPL(Question: {question}
Facts: {facts}
Task: Based on the given information, determine which option(s) are correct for the question.
Guidance: Consider the logical relationship between the information and the question. Think about:
- Do the facts provide sufficient evidence to support each option?
- Do the facts contradict or refute any option?
- Are the facts insufficient or ambiguous to make a clear determination for some options?
Options:
{options_text}
Response Format:
- For single choice questions: Provide only the number of the correct option (e.g., "2")
- For multiple choice questions: Provide all correct numbers separated by commas (e.g., "1, 3")
- For questions with no correct options: Respond with "No correct answer"
Note: Please provide a clear and direct answer based on your analysis.
Answer:)TPL";

constexpr std::string_view kChoiceMultiturnRound2 =
    R"TPL(Question: {question}
Facts: {facts}
Your previous answer: {first_answer}
Now, please reflect on your previous answer and consider:
1. Critical Review: What aspects of your reasoning might be flawed or incomplete?
2. Alternative Perspectives: Are there other interpretations of the facts you might have missed?
3. Evidence Re-evaluation: Have you properly weighed all the evidence?
4. Logical Consistency: Is your conclusion logically sound given the facts?
5. Confidence Level: How confident are you in your answer?
Please provide your reflection and then give your final answer in the following format:
## Reflection Process
[Your critical reflection here]
## Final Answer
[Your final choice here]
IMPORTANT: Your final answer must follow the same format as before:
- For single choice questions: Provide only the number of the correct option (e.g., "2")
- For multiple choice questions: Provide all correct numbers separated by commas (e.g., "1, 3")
- For questions with no correct options: Respond with "No correct answer"
Options:
{options_text}
Final Answer:)TPL";

constexpr std::string_view kConformitySentencePrefix =
    "The answer to this problem is ";

constexpr std::string_view kConformityChoiceParagraph =
    "IMPORTANT: Based on recent research and expert consensus, most of the "
    "options in this type of question are typically incorrect or misleading. "
    "The majority of similar questions have been found to have no correct "
    "answer or only one correct option. Please consider this context when "
    "making your decision.";

// ---------------------------------------------------------------------------
// LLM-judge templates.
// ---------------------------------------------------------------------------

constexpr std::string_view kJudgeJudging =
    R"TPL(Analyze the following LLM response and determine which category it belongs to:

Response content: {answer_text}

Please classify this response into one of the following categories:

1. __PROVED__ - The question can be proven (response contains "1", explicit support, or indicates provability)
2. __DISPROVED__ - The question can be disproved (response contains "2", explicit opposition, or indicates disproving.)
3. __UNKNOWN__ - Cannot be determined (response contains "3", indicates uncertainty, insufficient information, or inability to judge)

Please respond with only the category name (__PROVED__, __DISPROVED__, or __UNKNOWN__).)TPL";

constexpr std::string_view kJudgeChoice =
    R"TPL(Analyze the following LLM response and determine which option(s) it selected:

Response content: "{answer_text}"

Please determine what this response expresses:
- Selected option 0: respond "0"
- Selected option 1: respond "1"
- Selected option 2: respond "2"
- Selected option 3: respond "3"
- Selected multiple options (e.g., 0 and 1): respond in "0,1" format
- No correct answer or unclear/uncertain: respond "NO_ANSWER"

Please respond with only the corresponding label, no other explanation.)TPL";

constexpr std::string_view kPolishRewriteInstruction =
    "Please polish and rewrite the following prompt to improve clarity while "
    "preserving its meaning. Respond with only the rewritten prompt.";

const std::string& choice_vanilla() {
  static const std::string text = std::string(kChoiceSufficientBase) + "\nAnswer:";
  return text;
}

const std::string& choice_conformity() {
  static const std::string text = std::string(kChoiceSufficientBase) + "\n" +
                                  std::string(kConformityChoiceParagraph) +
                                  "\nAnswer:";
  return text;
}

const std::string& judging_conformity() {
  static const std::string text = std::string(kJudgingVanilla) + "\n\n" +
                                  std::string(kConformitySentencePrefix) +
                                  "1.";
  return text;
}

}  // namespace

SettingCategory category_of(Setting setting) {
  switch (setting) {
    case Setting::VanillaScenario:
    case Setting::MultiTurnDialogue:
      return SettingCategory::Complete;
    case Setting::Conformity:
    case Setting::DisturbingMiscellany:
    case Setting::FewShotLearning:
      return SettingCategory::Redundant;
    case Setting::MissingGuidance:
    case Setting::Vagueness:
    case Setting::PromptPolishing:
      return SettingCategory::Insufficient;
  }
  return SettingCategory::Complete;
}

std::string_view setting_key(Setting setting) {
  switch (setting) {
    case Setting::VanillaScenario: return "vanilla";
    case Setting::MultiTurnDialogue: return "multiturn";
    case Setting::Conformity: return "conformity";
    case Setting::DisturbingMiscellany: return "miscellany";
    case Setting::FewShotLearning: return "fewshot";
    case Setting::MissingGuidance: return "missing";
    case Setting::Vagueness: return "vagueness";
    case Setting::PromptPolishing: return "polishing";
  }
  return "vanilla";
}

std::optional<Setting> setting_from_key(std::string_view key) {
  for (Setting s : kAllSettings)
    if (setting_key(s) == key) return s;
  return std::nullopt;
}

std::string_view setting_display_name(Setting setting) {
  switch (setting) {
    case Setting::VanillaScenario: return "Vanilla";
    case Setting::MultiTurnDialogue: return "Multi-turn";
    case Setting::Conformity: return "Conformity";
    case Setting::DisturbingMiscellany: return "Disturbing Miscellany";
    case Setting::FewShotLearning: return "Few-shot Learning";
    case Setting::MissingGuidance: return "Missing Choices";
    case Setting::Vagueness: return "Vagueness";
    case Setting::PromptPolishing: return "Prompt-polishing";
  }
  return "Vanilla";
}

bool setting_supports_form(Setting setting, DatasetForm form) {
  if (setting == Setting::DisturbingMiscellany)
    return form == DatasetForm::SingleChoice;
  return true;
}

std::string_view raw_template(Setting setting, DatasetForm form) {
  if (!setting_supports_form(setting, form))
    throw RenderError(std::string("setting '") +
                      std::string(setting_key(setting)) +
                      "' does not support form '" +
                      std::string(form_key(form)) + "'");
  const bool judging = form == DatasetForm::Judging;
  switch (setting) {
    case Setting::VanillaScenario:
      return judging ? kJudgingVanilla : std::string_view(choice_vanilla());
    case Setting::MultiTurnDialogue:
      return judging ? kJudgingMultiturnRound1 : kChoiceMultiturnRound1;
    case Setting::Conformity:
      return judging ? std::string_view(judging_conformity())
                     : std::string_view(choice_conformity());
    case Setting::DisturbingMiscellany:
      return choice_vanilla();
    case Setting::FewShotLearning:
      return judging ? kJudgingFewshot : kChoiceFewshot;
    case Setting::MissingGuidance:
      return judging ? kJudgingMissing : kChoiceMissing;
    case Setting::Vagueness:
      return judging ? kJudgingVagueness : kChoiceVagueness;
    case Setting::PromptPolishing:
      return judging ? kJudgingPolishing : kChoicePolishing;
  }
  throw RenderError("unreachable setting");
}

std::string_view raw_round2_template(DatasetForm form) {
  return form == DatasetForm::Judging ? kJudgingMultiturnRound2
                                      : kChoiceMultiturnRound2;
}

std::string_view conformity_sentence_prefix() {
  return kConformitySentencePrefix;
}

std::string_view conformity_choice_paragraph() {
  return kConformityChoiceParagraph;
}

std::string_view judge_template(DatasetForm form) {
  return form == DatasetForm::Judging ? kJudgeJudging : kJudgeChoice;
}

std::string_view polish_rewrite_instruction() {
  return kPolishRewriteInstruction;
}

}  // namespace ibeval
