#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ibeval/chat.hpp"
#include "ibeval/corpus.hpp"
#include "ibeval/modelclient.hpp"

namespace ibeval {

class ExtractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ParsedKind { Verdict, Options, NoAnswer, Unmatched };

// A parsed prediction. Verdict reuses the corpus enum: True doubles as
// "proved" and False as "disproved".
struct ParsedLabel {
  ParsedKind kind = ParsedKind::Unmatched;
  Verdict verdict = Verdict::Unknown;
  std::vector<int> options;  // sorted, deduplicated, storage-base (0)

  static ParsedLabel make_verdict(Verdict v);
  static ParsedLabel make_options(std::vector<int> indices);
  static ParsedLabel no_answer();
  static ParsedLabel unmatched();

  bool operator==(const ParsedLabel&) const = default;
};

// The appendix keyword lists, lowercase, matched case-insensitively. The
// shipped fixture files must equal these exactly.
struct KeywordTable {
  std::vector<std::string> judging_unknown;
  std::vector<std::string> judging_proved;
  std::vector<std::string> judging_disproved;
  std::vector<std::string> choice_no_answer;
  std::vector<std::string> choice_uncertainty;
  std::vector<std::string> choice_single_patterns;
};

const KeywordTable& keyword_table();

// Case-insensitive phrase search with longest-match consumption, so that
// e.g. "disproves" never fires "proves". Bare option codes ("1"/"2"/"3",
// possibly wrapped in punctuation) map directly per the judging templates.
// Live keywords from two or more classes, or none, yield Unmatched.
ParsedLabel match_keywords_judging(std::string_view text);

// No-answer/uncertainty keywords first; otherwise extracts option tokens
// from list-shaped responses (comma/"and"/space separated, single token)
// and "answer: k"-style patterns. Tokens are shifted from index_base to
// storage base 0; out-of-range tokens are dropped; an empty extraction is
// Unmatched.
ParsedLabel parse_choice_answer(std::string_view text, int option_count,
                                int index_base);

// Strict comparison of sorted option lists; NoAnswer matches only
// NoCorrectAnswer. Partial overlap, subsets, and supersets are false.
// Throws ExtractError for Unmatched input (must be judged first).
bool validate_choice(const ParsedLabel& parsed, const GoldLabel& gold);

// Judge prompt with the raw response substituted.
std::string judge_prompt(DatasetForm form, std::string_view raw_response);

// Strict judge-reply parse: judging accepts only the three
// double-underscore tokens; choice accepts a base-0 digit list or
// NO_ANSWER. Anything else is Unmatched.
ParsedLabel parse_judge_reply(DatasetForm form, std::string_view reply,
                              int option_count);

// Sends the judge template and parses the reply. Connector errors
// propagate.
ParsedLabel judge_fallback(std::string_view raw_response, DatasetForm form,
                           const CompleteFn& judge, int option_count);

// total counts every extraction; judge_needed counts the ones the keyword
// and format stages could not match.
struct JudgeStats {
  std::atomic<std::uint64_t> judge_needed{0};
  std::atomic<std::uint64_t> total{0};
  double ratio() const {
    std::uint64_t t = total.load();
    return t == 0 ? 0.0 : static_cast<double>(judge_needed.load()) / t;
  }
};

struct ExtractOutcome {
  ParsedLabel label;
  bool judge_used = false;
  std::optional<std::string> unparseable_cause;
};

// Stable JSON encoding for run logs and fixtures, e.g.
// {"kind":"verdict","verdict":"proved"} or {"kind":"options","options":[1,3]}.
std::string parsed_label_to_json(const ParsedLabel& label);
ParsedLabel parsed_label_from_json(const std::string& text);

// Parses the final turn of a transcript (preferring the section after the
// last "## Final Answer" anchor when present), falling back to the judge
// for unmatched text. Judge connector failures are recorded as an
// unparseable cause rather than aborting the run.
ExtractOutcome extract(const Transcript& transcript, const Sample& sample,
                       const CompleteFn* judge, JudgeStats* stats);

}  // namespace ibeval
