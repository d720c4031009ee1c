#include "ibeval/extractor.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include <json.hpp>

#include "ibeval/templates.hpp"

namespace ibeval {

ParsedLabel ParsedLabel::make_verdict(Verdict v) {
  ParsedLabel p;
  p.kind = ParsedKind::Verdict;
  p.verdict = v;
  return p;
}

ParsedLabel ParsedLabel::make_options(std::vector<int> indices) {
  ParsedLabel p;
  p.kind = ParsedKind::Options;
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  p.options = std::move(indices);
  return p;
}

ParsedLabel ParsedLabel::no_answer() {
  ParsedLabel p;
  p.kind = ParsedKind::NoAnswer;
  return p;
}

ParsedLabel ParsedLabel::unmatched() { return ParsedLabel{}; }

const KeywordTable& keyword_table() {
  static const KeywordTable table{
      // judging_unknown
      {"unknown", "insufficient", "cannot be determined", "undetermined",
       "unclear", "ambiguous", "uncertain", "not enough", "lack of", "missing",
       "incomplete"},
      // judging_proved
      {"proven", "can prove", "proves", "support", "supports", "true",
       "correct", "valid", "established", "confirmed", "demonstrates"},
      // judging_disproved
      {"disproved", "can disprove", "disproves", "contradict", "contradicts",
       "false", "incorrect", "invalid", "refuted", "rejected"},
      // choice_no_answer
      {"no correct answer", "no correct option", "none of the above",
       "not applicable", "insufficient information", "cannot determine",
       "no good advice", "all options are wrong", "all options are incorrect",
       "none", "no answer", "all wrong", "all incorrect", "no valid answer",
       "there is no correct answer", "none of these", "all are incorrect"},
      // choice_uncertainty
      {"uncertain", "unsure", "unclear", "ambiguous", "difficult to determine",
       "hard to say", "not sure", "cannot be certain", "inconclusive",
       "i'm not sure", "it's unclear", "cannot determine"},
      // choice_single_patterns
      {"answer: 0", "choice 0", "option 0", "the answer is 0", "i choose 0",
       "answer: 1", "choice 1", "option 1", "the answer is 1", "i choose 1",
       "answer: 2", "choice 2", "option 2", "the answer is 2", "i choose 2",
       "answer: 3", "choice 3", "option 3", "the answer is 3", "i choose 3"},
  };
  return table;
}

namespace {

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string_view trim(std::string_view text) {
  while (!text.empty() &&
         std::isspace(static_cast<unsigned char>(text.front())))
    text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
    text.remove_suffix(1);
  return text;
}

bool contains_any(const std::string& lowered,
                  const std::vector<std::string>& keywords) {
  for (const std::string& kw : keywords)
    if (lowered.find(kw) != std::string::npos) return true;
  return false;
}

// The judging templates ask for "only the option number"; a reply whose
// only alphanumeric character is 1/2/3 is taken as that code.
std::optional<Verdict> bare_judging_code(std::string_view text) {
  char digit = 0;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (digit != 0) return std::nullopt;
      digit = c;
    }
  }
  if (digit == '1') return Verdict::True;
  if (digit == '2') return Verdict::False;
  if (digit == '3') return Verdict::Unknown;
  return std::nullopt;
}

enum class JudgingClass { Unknown, Disproved, Proved };

struct KeywordRef {
  std::string_view text;
  JudgingClass cls;
};

// Longest keywords claim their spans first; shorter keywords only count
// where they do not overlap an already-consumed span.
std::vector<KeywordRef> judging_keywords_by_length() {
  const KeywordTable& t = keyword_table();
  std::vector<KeywordRef> refs;
  for (const std::string& k : t.judging_unknown)
    refs.push_back({k, JudgingClass::Unknown});
  for (const std::string& k : t.judging_disproved)
    refs.push_back({k, JudgingClass::Disproved});
  for (const std::string& k : t.judging_proved)
    refs.push_back({k, JudgingClass::Proved});
  std::stable_sort(refs.begin(), refs.end(),
                   [](const KeywordRef& a, const KeywordRef& b) {
                     if (a.text.size() != b.text.size())
                       return a.text.size() > b.text.size();
                     if (a.cls != b.cls) return a.cls < b.cls;
                     return a.text < b.text;
                   });
  return refs;
}

}  // namespace

ParsedLabel match_keywords_judging(std::string_view text) {
  if (auto code = bare_judging_code(trim(text)))
    return ParsedLabel::make_verdict(*code);

  const std::string lowered = to_lower(text);
  static const std::vector<KeywordRef> refs = judging_keywords_by_length();

  std::vector<std::pair<std::size_t, std::size_t>> consumed;
  bool seen[3] = {false, false, false};
  auto overlaps = [&](std::size_t begin, std::size_t end) {
    for (auto [b, e] : consumed)
      if (begin < e && b < end) return true;
    return false;
  };

  for (const KeywordRef& ref : refs) {
    std::size_t pos = 0;
    while ((pos = lowered.find(ref.text, pos)) != std::string::npos) {
      std::size_t end = pos + ref.text.size();
      if (!overlaps(pos, end)) {
        consumed.emplace_back(pos, end);
        seen[static_cast<int>(ref.cls)] = true;
      }
      pos += 1;
    }
  }

  int classes = seen[0] + seen[1] + seen[2];
  if (classes != 1) return ParsedLabel::unmatched();
  if (seen[static_cast<int>(JudgingClass::Unknown)])
    return ParsedLabel::make_verdict(Verdict::Unknown);
  if (seen[static_cast<int>(JudgingClass::Disproved)])
    return ParsedLabel::make_verdict(Verdict::False);
  return ParsedLabel::make_verdict(Verdict::True);
}

namespace {

bool all_digits(std::string_view token) {
  if (token.empty()) return false;
  return std::all_of(token.begin(), token.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
}

// Parsing stays total: absurdly long digit runs are just out of range for
// any real option list, so they collapse to a sentinel that the range
// filter drops.
int digits_to_index(std::string_view digits) {
  if (digits.size() > 9) return std::numeric_limits<int>::max();
  int value = 0;
  for (char c : digits) value = value * 10 + (c - '0');
  return value;
}

// Whole-response list form: digits separated by commas, whitespace, or the
// word "and"; optionally ending in one '.' or '!'.
std::optional<std::vector<int>> parse_list_form(std::string_view text) {
  std::string_view body = trim(text);
  if (!body.empty() && (body.back() == '.' || body.back() == '!'))
    body = trim(body.substr(0, body.size() - 1));
  if (body.empty()) return std::nullopt;

  std::vector<int> tokens;
  std::size_t i = 0;
  auto next_token = [&]() -> std::optional<std::string_view> {
    while (i < body.size() &&
           (std::isspace(static_cast<unsigned char>(body[i])) ||
            body[i] == ','))
      ++i;
    if (i >= body.size()) return std::nullopt;
    std::size_t start = i;
    while (i < body.size() &&
           !std::isspace(static_cast<unsigned char>(body[i])) &&
           body[i] != ',')
      ++i;
    return body.substr(start, i - start);
  };

  while (auto token = next_token()) {
    if (*token == "and") continue;
    if (!all_digits(*token)) return std::nullopt;
    tokens.push_back(digits_to_index(*token));
  }
  if (tokens.empty()) return std::nullopt;
  return tokens;
}

// Pattern stems ("answer:", "option", ...) derived from the keyword table's
// literal single-choice patterns, so the fixture stays the source of truth
// while digits beyond 0..3 still parse.
const std::vector<std::string>& pattern_stems() {
  static const std::vector<std::string> stems = [] {
    std::vector<std::string> out;
    for (const std::string& pattern : keyword_table().choice_single_patterns) {
      std::size_t cut = pattern.find_last_of(' ');
      if (cut == std::string::npos || !all_digits(pattern.substr(cut + 1)))
        continue;
      std::string stem = pattern.substr(0, cut);
      if (std::find(out.begin(), out.end(), stem) == out.end())
        out.push_back(std::move(stem));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.size() != b.size() ? a.size() > b.size() : a < b;
    });
    return out;
  }();
  return stems;
}

// Digits following a stem, allowing "answer: 1, 3" and "i choose 1 and 3".
void collect_pattern_digits(const std::string& lowered,
                            std::vector<int>& out) {
  for (const std::string& stem : pattern_stems()) {
    std::size_t pos = 0;
    while ((pos = lowered.find(stem, pos)) != std::string::npos) {
      std::size_t i = pos + stem.size();
      bool expecting_number = true;
      while (i < lowered.size()) {
        while (i < lowered.size() &&
               std::isspace(static_cast<unsigned char>(lowered[i])))
          ++i;
        if (expecting_number) {
          std::size_t start = i;
          while (i < lowered.size() &&
                 std::isdigit(static_cast<unsigned char>(lowered[i])))
            ++i;
          if (i == start) break;
          out.push_back(digits_to_index(
              std::string_view(lowered).substr(start, i - start)));
          expecting_number = false;
        } else {
          if (lowered[i] == ',') {
            ++i;
          } else if (lowered.compare(i, 4, "and ") == 0) {
            i += 4;
          } else {
            break;
          }
          expecting_number = true;
        }
      }
      pos += stem.size();
    }
  }
}

ParsedLabel finish_options(std::vector<int> raw, int option_count,
                           int index_base) {
  std::vector<int> rebased;
  for (int token : raw) {
    int idx = token - index_base;
    if (idx >= 0 && idx < option_count) rebased.push_back(idx);
  }
  if (rebased.empty()) return ParsedLabel::unmatched();
  return ParsedLabel::make_options(std::move(rebased));
}

}  // namespace

ParsedLabel parse_choice_answer(std::string_view text, int option_count,
                                int index_base) {
  if (option_count < 1)
    throw ExtractError("option_count must be at least 1");

  const std::string lowered = to_lower(text);
  const KeywordTable& table = keyword_table();
  if (contains_any(lowered, table.choice_no_answer) ||
      contains_any(lowered, table.choice_uncertainty))
    return ParsedLabel::no_answer();

  if (auto listed = parse_list_form(text))
    return finish_options(std::move(*listed), option_count, index_base);

  std::vector<int> pattern_digits;
  collect_pattern_digits(lowered, pattern_digits);
  if (!pattern_digits.empty())
    return finish_options(std::move(pattern_digits), option_count, index_base);

  return ParsedLabel::unmatched();
}

bool validate_choice(const ParsedLabel& parsed, const GoldLabel& gold) {
  if (parsed.kind == ParsedKind::Unmatched)
    throw ExtractError("unmatched prediction must be judged before grading");
  if (parsed.kind == ParsedKind::Verdict)
    throw ExtractError("verdict prediction is not a choice answer");
  if (gold.kind == GoldLabel::Kind::Verdict)
    throw ExtractError("verdict gold label is not a choice gold");

  if (parsed.kind == ParsedKind::NoAnswer)
    return gold.kind == GoldLabel::Kind::NoCorrectAnswer;
  if (gold.kind != GoldLabel::Kind::Options) return false;
  return parsed.options == gold.options;
}

std::string judge_prompt(DatasetForm form, std::string_view raw_response) {
  std::string_view tpl = judge_template(form);
  constexpr std::string_view kPlaceholder = "{answer_text}";
  std::size_t at = tpl.find(kPlaceholder);
  std::string out(tpl.substr(0, at));
  out += raw_response;
  out += tpl.substr(at + kPlaceholder.size());
  return out;
}

ParsedLabel parse_judge_reply(DatasetForm form, std::string_view reply,
                              int option_count) {
  std::string_view body = trim(reply);
  if (form == DatasetForm::Judging) {
    if (body == "__PROVED__") return ParsedLabel::make_verdict(Verdict::True);
    if (body == "__DISPROVED__")
      return ParsedLabel::make_verdict(Verdict::False);
    if (body == "__UNKNOWN__")
      return ParsedLabel::make_verdict(Verdict::Unknown);
    return ParsedLabel::unmatched();
  }
  if (body == "NO_ANSWER") return ParsedLabel::no_answer();
  // The choice judge speaks storage base 0 ("respond in \"0,1\" format").
  std::vector<int> tokens;
  std::size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() &&
           (std::isspace(static_cast<unsigned char>(body[i])) ||
            body[i] == ','))
      ++i;
    if (i >= body.size()) break;
    std::size_t start = i;
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i])))
      ++i;
    if (i == start) return ParsedLabel::unmatched();
    tokens.push_back(digits_to_index(body.substr(start, i - start)));
  }
  if (tokens.empty()) return ParsedLabel::unmatched();
  return finish_options(std::move(tokens), option_count, 0);
}

ParsedLabel judge_fallback(std::string_view raw_response, DatasetForm form,
                           const CompleteFn& judge, int option_count) {
  std::string prompt = judge_prompt(form, raw_response);
  std::string reply = judge({ChatMessage{"user", std::move(prompt)}});
  return parse_judge_reply(form, reply, option_count);
}

namespace {

constexpr std::string_view kFinalAnswerAnchor = "## Final Answer";

// Section after the last anchor, clipped at the next "##" heading; leading
// colons are tolerated ("## Final Answer: 2").
std::optional<std::string> final_answer_section(const std::string& text) {
  std::size_t at = text.rfind(kFinalAnswerAnchor);
  if (at == std::string::npos) return std::nullopt;
  std::size_t begin = at + kFinalAnswerAnchor.size();
  std::size_t end = text.find("\n##", begin);
  std::string section =
      text.substr(begin, end == std::string::npos ? end : end - begin);
  std::size_t skip = 0;
  while (skip < section.size() &&
         (section[skip] == ':' ||
          std::isspace(static_cast<unsigned char>(section[skip]))))
    ++skip;
  return section.substr(skip);
}

ParsedLabel parse_for_form(const Sample& sample, const std::string& text) {
  if (sample.form == DatasetForm::Judging) return match_keywords_judging(text);
  return parse_choice_answer(text, static_cast<int>(sample.options.size()),
                             /*index_base=*/1);
}

}  // namespace

std::string parsed_label_to_json(const ParsedLabel& label) {
  nlohmann::json j;
  switch (label.kind) {
    case ParsedKind::Verdict:
      j["kind"] = "verdict";
      j["verdict"] = label.verdict == Verdict::True    ? "proved"
                     : label.verdict == Verdict::False ? "disproved"
                                                       : "unknown";
      break;
    case ParsedKind::Options:
      j["kind"] = "options";
      j["options"] = label.options;
      break;
    case ParsedKind::NoAnswer:
      j["kind"] = "no_answer";
      break;
    case ParsedKind::Unmatched:
      j["kind"] = "unmatched";
      break;
  }
  return j.dump();
}

ParsedLabel parsed_label_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ExtractError(std::string("bad parsed-label encoding: ") + e.what());
  }
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "options")
    return ParsedLabel::make_options(j.at("options").get<std::vector<int>>());
  if (kind == "no_answer") return ParsedLabel::no_answer();
  if (kind == "unmatched") return ParsedLabel::unmatched();
  if (kind == "verdict") {
    std::string v = j.at("verdict").get<std::string>();
    return ParsedLabel::make_verdict(v == "proved"      ? Verdict::True
                                     : v == "disproved" ? Verdict::False
                                                        : Verdict::Unknown);
  }
  throw ExtractError("unknown parsed-label kind: " + kind);
}

ExtractOutcome extract(const Transcript& transcript, const Sample& sample,
                       const CompleteFn* judge, JudgeStats* stats) {
  if (transcript.turns.empty())
    throw ExtractError("transcript for sample '" + sample.id +
                       "' has no turns");
  const std::string& final_text = transcript.turns.back().response_text;

  ParsedLabel label = ParsedLabel::unmatched();
  if (auto section = final_answer_section(final_text)) {
    label = parse_for_form(sample, *section);
  }
  if (label.kind == ParsedKind::Unmatched) {
    label = parse_for_form(sample, final_text);
  }

  if (stats != nullptr) stats->total.fetch_add(1);
  if (label.kind != ParsedKind::Unmatched) return {label, false, std::nullopt};

  if (stats != nullptr) stats->judge_needed.fetch_add(1);
  if (judge == nullptr || !*judge)
    return {ParsedLabel::unmatched(), false,
            std::string("no keyword match and no judge configured")};

  try {
    ParsedLabel judged =
        judge_fallback(final_text, sample.form, *judge,
                       static_cast<int>(sample.options.size()));
    if (judged.kind == ParsedKind::Unmatched)
      return {judged, true, std::string("judge reply did not conform")};
    return {judged, true, std::nullopt};
  } catch (const std::exception& e) {
    return {ParsedLabel::unmatched(), true,
            std::string("judge endpoint failed: ") + e.what()};
  }
}

}  // namespace ibeval
