#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ibeval {

enum class DatasetForm { Judging, SingleChoice, MultiChoice };

// Tense labels are the frequently occurring conventional ones (True/False
// verdicts, one concrete correct option); sparse labels demand rejection or
// synthesis (Unknown, the all-wrong replacement option, combined multi-true
// options, no-correct-answer).
enum class LabelClass { Tense, Sparse };

// Judging verdicts. For predictions, True doubles as "proved" and False as
// "disproved" (the judging templates define codes 1/2/3 accordingly).
enum class Verdict { True, False, Unknown };

// Exact option text substituted by step-1 label modification.
inline constexpr std::string_view kAllWrongOptionText =
    "all other advises are false";

// Suffix of every synthesized combined option ("A and B are True").
inline constexpr std::string_view kCombinedOptionSuffix = " are True";

std::string_view form_key(DatasetForm form);                 // "judging"...
std::optional<DatasetForm> form_from_key(std::string_view);  // nullopt if bad

struct GoldLabel {
  enum class Kind { Verdict, Options, NoCorrectAnswer };

  Kind kind = Kind::Verdict;
  Verdict verdict = Verdict::Unknown;  // meaningful iff kind == Verdict
  std::vector<int> options;            // sorted, deduplicated, 0-based

  static GoldLabel make_verdict(Verdict v);
  static GoldLabel make_options(std::vector<int> indices);
  static GoldLabel no_correct_answer();

  bool operator==(const GoldLabel&) const = default;
};

struct Sample {
  std::string id;
  DatasetForm form = DatasetForm::Judging;
  std::string question;
  std::string facts;
  std::vector<std::string> options;  // empty for judging
  GoldLabel gold;
  LabelClass label_class = LabelClass::Tense;
  std::string source;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Derives the label class from form, gold, and option text. Throws
// CorpusError when no class is consistent (e.g. a judging gold on a choice
// form slipped through).
LabelClass infer_label_class(DatasetForm form, const GoldLabel& gold,
                             const std::vector<std::string>& options);

// Checks every Sample/GoldLabel invariant; throws CorpusError naming the
// offending sample and field.
void validate_sample(const Sample& sample);

// Canonical JSONL, one record per line, UTF-8:
//   {"id": str, "form": "judging"|"single"|"multi", "question": str,
//    "facts": str, "options": [str],
//    "gold": {"verdict": "true"|"false"|"unknown"} | {"options": [int]} |
//            {"none": true},
//    "source": str}
// Option indices in files are 0-based.
std::vector<Sample> load_corpus(const std::string& path, DatasetForm form);
std::vector<Sample> parse_corpus(std::istream& in, DatasetForm form,
                                 const std::string& origin);
std::string sample_to_jsonl(const Sample& sample);
void save_corpus(const std::vector<Sample>& samples, const std::string& path);

// Step 1 label modification: a seeded half (ceil(n/2)) of an all-tense
// single-choice corpus has the correct option's text replaced by
// kAllWrongOptionText and becomes sparse. Selection is a shuffle of
// positions under the seed; deterministic for a fixed seed.
std::vector<Sample> apply_label_modification(std::vector<Sample> samples,
                                             std::uint64_t seed);

// Balances a judging corpus to equal sparse/tense halves by seeded
// subsampling of the over-represented class; original order is preserved.
std::vector<Sample> derive_judging_split(const std::vector<Sample>& samples,
                                         std::uint64_t seed);

// Replaces the >=2 true options of a multi-choice sample with one combined
// option ("<a> and <b> are True") appended last; gold becomes that single
// option and the sample turns sparse.
Sample combine_multi_answers(const Sample& sample);

// Step 2 insufficient variant: tense -> one seeded-random incorrect option
// removed (gold re-based); sparse -> the replacement/combined gold option
// deleted and gold becomes NoCorrectAnswer.
Sample make_insufficient_variant(const Sample& sample, std::uint64_t seed);

}  // namespace ibeval
