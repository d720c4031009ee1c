#include "ibeval/promptfabric.hpp"

#include <algorithm>
#include <map>

#include "ibeval/rng.hpp"

namespace ibeval {

namespace {

// Single pass; substituted values are copied verbatim, never re-scanned.
std::string substitute(std::string_view tpl,
                       const std::map<std::string_view, std::string_view>& values) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      std::size_t close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        std::string_view name = tpl.substr(i + 1, close - i - 1);
        auto it = values.find(name);
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i++];
  }
  return out;
}

constexpr std::string_view kJudgingExemplars[] = {
    R"EX(Example 1:
Facts: All metals conduct electricity. Copper is a metal.
Question: Copper conducts electricity.
Answer: 1)EX",
    R"EX(Example 2:
Facts: All fish live in water. A desert fox never lives in water.
Question: A desert fox is a fish.
Answer: 2)EX",
    R"EX(Example 3:
Facts: The box contains some red balls.
Question: The box contains a blue ball.
Answer: 3)EX",
};

constexpr std::string_view kChoiceExemplars[] = {
    R"EX(Example 1 (Single-choice Question):
Question: The sanctions against the school were a punishing blow, and they seemed to especially hurt the most vulnerable students.
Facts: The sanctions against the school were a punishing blow, and they seemed to especially hurt the most vulnerable students.
Options:
1. The sanctions were expected to hurt vulnerable students
2. The sanctions were designed to help vulnerable students
3. The sanctions were meant to punish vulnerable students
4. The sanctions were intended to protect vulnerable students
Answer: 3)EX",
    R"EX(Example 2 (Multi-Choices Question):
Question: Which of the following are renewable energy sources?
Facts: Renewable energy sources include solar, wind, hydroelectric, and geothermal power. Fossil fuels like coal and natural gas are non-renewable.
Options:
1. Solar power
2. Coal
3. Wind energy
4. Natural gas
Answer: 1, 3)EX",
    R"EX(Example 3 (Not answerable question):
Question: What is the color of the sky on Mars?
Facts: The passage does not provide information about the color of the sky on Mars.
Options:
1. Blue
2. Red
3. Green
4. Yellow
Answer: No correct answer)EX",
};

bool is_judging_kind(ExemplarKind kind) {
  return kind == ExemplarKind::JudgingTrue ||
         kind == ExemplarKind::JudgingFalse ||
         kind == ExemplarKind::JudgingUnknown;
}

std::vector<ExemplarKind> kinds_for_form(DatasetForm form,
                                         const std::vector<ExemplarKind>& kinds) {
  std::vector<ExemplarKind> out;
  for (ExemplarKind k : kinds) {
    if (is_judging_kind(k) == (form == DatasetForm::Judging) &&
        std::find(out.begin(), out.end(), k) == out.end())
      out.push_back(k);
  }
  return out;
}

PromptPlan single_turn_plan(const Sample& sample, std::string template_id,
                            std::string text) {
  PromptPlan plan;
  plan.sample_id = sample.id;
  plan.form = sample.form;
  plan.question = sample.question;
  plan.facts = sample.facts;
  plan.options_text = options_block(sample);
  plan.turns.push_back({std::move(template_id), std::move(text), false,
                        TurnKind::Standard});
  return plan;
}

std::string fill(const Sample& sample, std::string_view tpl) {
  return substitute(tpl, {{"question", sample.question},
                          {"facts", sample.facts},
                          {"options_text", options_block(sample)}});
}

std::string id_for(Setting setting, DatasetForm form) {
  return std::string(setting_key(setting)) + "_" + std::string(form_key(form));
}

}  // namespace

std::string options_block(const Sample& sample) {
  std::string out;
  for (std::size_t i = 0; i < sample.options.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + sample.options[i];
  }
  return out;
}

int verdict_code(Verdict verdict) {
  switch (verdict) {
    case Verdict::True: return 1;
    case Verdict::False: return 2;
    case Verdict::Unknown: return 3;
  }
  return 3;
}

Verdict verdict_from_code(int code) {
  switch (code) {
    case 1: return Verdict::True;
    case 2: return Verdict::False;
    case 3: return Verdict::Unknown;
  }
  throw RenderError("judging option code out of range: " +
                    std::to_string(code));
}

Sample apply_miscellany(const Sample& sample, int n, std::uint64_t seed) {
  if (sample.form != DatasetForm::SingleChoice)
    throw RenderError("miscellany requires a single-choice sample; '" +
                      sample.id + "' is not");
  if (sample.gold.kind != GoldLabel::Kind::Options ||
      sample.gold.options.size() != 1)
    throw RenderError("miscellany requires exactly one correct option; '" +
                      sample.id + "' has none or several");
  if (n < 1 || n > static_cast<int>(sample.options.size()))
    throw RenderError("miscellany n=" + std::to_string(n) +
                      " out of range for " +
                      std::to_string(sample.options.size()) + " options");

  const int gold = sample.gold.options.front();
  std::vector<int> distractors;
  for (int i = 0; i < static_cast<int>(sample.options.size()); ++i)
    if (i != gold) distractors.push_back(i);

  SplitMix64 rng(seed);
  seeded_shuffle(distractors, rng);
  distractors.resize(static_cast<std::size_t>(n - 1));

  std::vector<int> kept = std::move(distractors);
  kept.push_back(gold);
  std::sort(kept.begin(), kept.end());

  Sample out = sample;
  out.options.clear();
  int new_gold = 0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] == gold) new_gold = static_cast<int>(i);
    out.options.push_back(sample.options[static_cast<std::size_t>(kept[i])]);
  }
  out.gold = GoldLabel::make_options({new_gold});
  out.label_class = infer_label_class(out.form, out.gold, out.options);
  validate_sample(out);
  return out;
}

PromptPlan inject_conformity(PromptPlan plan, int judging_code) {
  if (plan.turns.size() != 1)
    throw RenderError(
        "conformity injection requires a single-turn plan (conformity and "
        "multi-turn are distinct settings)");
  std::string& text = plan.turns[0].text;
  if (plan.form == DatasetForm::Judging) {
    if (text.find(conformity_sentence_prefix()) != std::string::npos)
      throw RenderError("plan already carries a conformity sentence");
    verdict_from_code(judging_code);  // range check
    text += "\n\n";
    text += conformity_sentence_prefix();
    text += std::to_string(judging_code);
    text += ".";
  } else {
    if (text.find(conformity_choice_paragraph()) != std::string::npos)
      throw RenderError("plan already carries the conformity paragraph");
    constexpr std::string_view kAnswerLine = "\nAnswer:";
    if (text.ends_with(kAnswerLine))
      text.resize(text.size() - kAnswerLine.size());
    text += "\n";
    text += conformity_choice_paragraph();
    text += kAnswerLine;
  }
  plan.turns[0].template_id = id_for(Setting::Conformity, plan.form);
  return plan;
}

std::string build_fewshot_block(DatasetForm form,
                                const std::vector<ExemplarKind>& kinds) {
  if (kinds.empty()) throw RenderError("few-shot exemplar kinds are empty");
  for (ExemplarKind k : kinds) {
    if (is_judging_kind(k) != (form == DatasetForm::Judging))
      throw RenderError("few-shot exemplar kind does not match dataset form");
  }
  // Canonical appendix order, independent of request order.
  std::vector<std::string_view> parts;
  auto add = [&](ExemplarKind want, std::string_view text) {
    if (std::find(kinds.begin(), kinds.end(), want) != kinds.end())
      parts.push_back(text);
  };
  if (form == DatasetForm::Judging) {
    add(ExemplarKind::JudgingTrue, kJudgingExemplars[0]);
    add(ExemplarKind::JudgingFalse, kJudgingExemplars[1]);
    add(ExemplarKind::JudgingUnknown, kJudgingExemplars[2]);
  } else {
    add(ExemplarKind::ChoiceSingle, kChoiceExemplars[0]);
    add(ExemplarKind::ChoiceMulti, kChoiceExemplars[1]);
    add(ExemplarKind::ChoiceNoAnswer, kChoiceExemplars[2]);
  }
  std::string block;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) block += "\n\n";
    block += parts[i];
  }
  return block;
}

std::string render_multiturn_round2(const Sample& sample,
                                    const std::string& first_answer) {
  if (first_answer.empty())
    throw RenderError("round-2 reflection requires a non-empty first answer");
  return substitute(raw_round2_template(sample.form),
                    {{"question", sample.question},
                     {"facts", sample.facts},
                     {"options_text", options_block(sample)},
                     {"first_answer", first_answer}});
}

PromptPlan polish_prompt(PromptPlan plan, PolishMode mode,
                         const CompleteFn* complete) {
  if (plan.turns.size() != 1 || plan.turns[0].kind != TurnKind::Standard)
    throw RenderError("polishing requires a single-turn standard plan");
  if (mode == PolishMode::StaticTemplate) {
    Setting setting = Setting::PromptPolishing;
    std::string_view tpl = raw_template(setting, plan.form);
    plan.turns[0].text = substitute(tpl, {{"question", plan.question},
                                          {"facts", plan.facts},
                                          {"options_text", plan.options_text}});
    plan.turns[0].template_id = id_for(setting, plan.form);
    return plan;
  }
  if (complete == nullptr || !*complete)
    throw RenderError("live polishing requires a model connector");
  std::vector<ChatMessage> messages{
      {"system", std::string(polish_rewrite_instruction())},
      {"user", plan.turns[0].text}};
  std::string polished = (*complete)(messages);
  plan.polish_original = plan.turns[0].text;
  plan.turns[0].text = std::move(polished);
  plan.turns[0].template_id = "polished_live";
  return plan;
}

PromptPlan render(const Sample& sample, Setting setting,
                  const SettingConfig& cfg) {
  if (!setting_supports_form(setting, sample.form))
    throw RenderError(std::string("setting '") +
                      std::string(setting_key(setting)) +
                      "' does not support form '" +
                      std::string(form_key(sample.form)) + "'");

  switch (setting) {
    case Setting::VanillaScenario:
    case Setting::MissingGuidance:
    case Setting::Vagueness:
      return single_turn_plan(sample, id_for(setting, sample.form),
                              fill(sample, raw_template(setting, sample.form)));

    case Setting::DisturbingMiscellany: {
      if (!cfg.miscellany_n)
        throw RenderError("miscellany requires cfg.miscellany_n");
      Sample reduced = apply_miscellany(sample, *cfg.miscellany_n, cfg.seed);
      return single_turn_plan(
          reduced, id_for(setting, sample.form),
          fill(reduced, raw_template(Setting::VanillaScenario, sample.form)));
    }

    case Setting::Conformity: {
      if (!cfg.conformity_target)
        throw RenderError("conformity requires cfg.conformity_target");
      std::string_view base =
          sample.form == DatasetForm::Judging
              ? raw_template(Setting::VanillaScenario, DatasetForm::Judging)
              : raw_template(Setting::VanillaScenario, sample.form);
      PromptPlan plan = single_turn_plan(sample, id_for(setting, sample.form),
                                         fill(sample, base));
      return inject_conformity(std::move(plan), *cfg.conformity_target);
    }

    case Setting::FewShotLearning: {
      std::vector<ExemplarKind> kinds = kinds_for_form(sample.form,
                                                       cfg.fewshot_kinds);
      std::string block = build_fewshot_block(sample.form, kinds);
      std::string text = substitute(raw_template(setting, sample.form),
                                    {{"question", sample.question},
                                     {"facts", sample.facts},
                                     {"options_text", options_block(sample)},
                                     {"fewshot_block", block}});
      return single_turn_plan(sample, id_for(setting, sample.form),
                              std::move(text));
    }

    case Setting::MultiTurnDialogue: {
      PromptPlan plan = single_turn_plan(
          sample, "multiturn_round1_" + std::string(form_key(sample.form)),
          fill(sample, raw_template(setting, sample.form)));
      plan.turns.push_back(
          {"multiturn_round2_" + std::string(form_key(sample.form)),
           std::string(), true, TurnKind::Reflection});
      return plan;
    }

    case Setting::PromptPolishing: {
      if (cfg.polish_mode == PolishMode::StaticTemplate) {
        return single_turn_plan(
            sample, id_for(setting, sample.form),
            fill(sample, raw_template(setting, sample.form)));
      }
      // Live mode: a preliminary rewrite turn, then the rewritten prompt.
      // needs_prior_answer stays false: the second turn adopts the rewrite
      // as its text rather than substituting it into a reflection template.
      PromptPlan plan = single_turn_plan(
          sample, "polish_request",
          fill(sample, raw_template(Setting::VanillaScenario, sample.form)));
      plan.turns[0].kind = TurnKind::PolishRequest;
      plan.turns.push_back(
          {"polished_live", std::string(), false, TurnKind::PolishedLive});
      return plan;
    }
  }
  throw RenderError("unreachable setting");
}

}  // namespace ibeval
