#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ibeval/corpus.hpp"
#include "ibeval/extractor.hpp"

namespace ibeval {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalRecord {
  std::string sample_id;
  DatasetForm form = DatasetForm::Judging;
  LabelClass label_class = LabelClass::Tense;
  GoldLabel gold;
  ParsedLabel predicted;
  bool correct = false;
  bool parseable = false;
  bool judge_used = false;
  std::string setting;
};

// Output-rate classes: tense-style predictions (True/False verdicts, a
// concrete option pick), sparse-style ones (Unknown, no-answer, the
// sample's own replacement/combined option), and unparseable output.
enum class OutputClass { Tense, Sparse, Other };

OutputClass classify_output(const EvalRecord& record);

double accuracy(std::span<const EvalRecord> records);
double stability_rate(std::span<const EvalRecord> records);       // tense only
double generalization_rate(std::span<const EvalRecord> records);  // sparse only
double robustness_rate(double acc_vanilla, double acc_biased);
double output_rate(std::span<const EvalRecord> records, OutputClass cls);
double instable_rate(double or_tense, double or_sparse);

// Mean over dataset forms of 2*sr*gr/(sr+gr); a zero-denominator term
// contributes 0.
double robustness_score(const std::vector<std::pair<double, double>>& per_form);

struct MetricsBundle {
  double acc = 0.0;
  std::optional<double> sr;  // absent when the cell has no tense records
  std::optional<double> gr;  // absent when the cell has no sparse records
  double or_tense = 0.0;
  double or_sparse = 0.0;
  double or_other = 0.0;
  double fr = 0.0;
  std::size_t n = 0;
  std::size_t n_tense = 0;
  std::size_t n_sparse = 0;
  std::size_t n_unparseable = 0;
};

MetricsBundle compute_bundle(std::span<const EvalRecord> records);

}  // namespace ibeval
