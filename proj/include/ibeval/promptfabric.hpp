#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ibeval/chat.hpp"
#include "ibeval/corpus.hpp"
#include "ibeval/templates.hpp"

namespace ibeval {

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PolishMode { StaticTemplate, LiveModel };

// Few-shot exemplar kinds. The judging kinds select among three fixed
// judging exemplars (answered 1/2/3); the choice kinds select among the
// three fixed worked examples (single answer, multi answer, no answer).
enum class ExemplarKind {
  JudgingTrue,
  JudgingFalse,
  JudgingUnknown,
  ChoiceSingle,
  ChoiceMulti,
  ChoiceNoAnswer,
};

struct SettingConfig {
  // Judging conformity code 1..3 (1 = proven). Required for Conformity; the
  // choice-form manipulation paragraph is fixed and ignores it.
  std::optional<int> conformity_target;
  std::optional<int> miscellany_n;  // required for DisturbingMiscellany
  std::vector<ExemplarKind> fewshot_kinds;
  PolishMode polish_mode = PolishMode::StaticTemplate;
  std::uint64_t seed = 0;
};

enum class TurnKind {
  Standard,
  // Round-2 reflection; text is rendered at dialogue time from the previous
  // answer via render_multiturn_round2.
  Reflection,
  // Live polishing round: asks the model to rewrite turn text.
  PolishRequest,
  // The rewritten prompt itself; text is the previous turn's response.
  PolishedLive,
};

struct TurnSpec {
  std::string template_id;
  std::string text;
  bool needs_prior_answer = false;
  TurnKind kind = TurnKind::Standard;
};

struct PromptPlan {
  std::string sample_id;
  DatasetForm form = DatasetForm::Judging;
  std::vector<TurnSpec> turns;
  // Substitution record, kept so reflection/polishing can re-render.
  std::string question;
  std::string facts;
  std::string options_text;
  std::optional<std::string> polish_original;  // set by live polishing
};

// "1. <text>\n2. <text>"... for choice samples; empty for judging.
std::string options_block(const Sample& sample);

// Judging template option codes: 1 = proven, 2 = disproved, 3 = unknown.
int verdict_code(Verdict verdict);
Verdict verdict_from_code(int code);

// Renders the appendix template for (setting, form), applying the
// setting-specific mutation (miscellany reduction, conformity injection,
// few-shot block, multi-turn second round, polish mode).
PromptPlan render(const Sample& sample, Setting setting,
                  const SettingConfig& cfg);

// Keeps the gold option plus (n-1) seeded-random distractors, preserving
// original order; gold re-based. Requires a single-choice sample with
// exactly one correct option and 1 <= n <= |options|.
Sample apply_miscellany(const Sample& sample, int n, std::uint64_t seed);

// Appends the conformity suffix to a single-turn plan: judging gets
// "The answer to this problem is <code>.", choice forms get the fixed
// manipulation paragraph (re-seating the trailing "Answer:" line after it).
// A second injection fails.
PromptPlan inject_conformity(PromptPlan plan, int judging_code);

// Fixed exemplar block for the requested kinds (never drawn from the
// evaluation corpus). Kinds must be non-empty and match the form.
std::string build_fewshot_block(DatasetForm form,
                                const std::vector<ExemplarKind>& kinds);

// Static mode swaps in the pre-polished template; live mode sends the plan
// text to the model under a fixed rewrite instruction and adopts the reply,
// recording the original in plan.polish_original.
PromptPlan polish_prompt(PromptPlan plan, PolishMode mode,
                         const CompleteFn* complete);

// Round-2 reflection prompt with the previous answer substituted.
std::string render_multiturn_round2(const Sample& sample,
                                    const std::string& first_answer);

}  // namespace ibeval
