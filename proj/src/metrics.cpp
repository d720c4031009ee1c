#include "ibeval/metrics.hpp"

#include <cmath>

namespace ibeval {

OutputClass classify_output(const EvalRecord& record) {
  const ParsedLabel& p = record.predicted;
  switch (p.kind) {
    case ParsedKind::Unmatched:
      return OutputClass::Other;
    case ParsedKind::Verdict:
      return p.verdict == Verdict::Unknown ? OutputClass::Sparse
                                           : OutputClass::Tense;
    case ParsedKind::NoAnswer:
      return OutputClass::Sparse;
    case ParsedKind::Options:
      // Picking the sample's own replacement/combined option is a
      // sparse-style answer; any other option pick is tense-style.
      if (record.label_class == LabelClass::Sparse &&
          record.gold.kind == GoldLabel::Kind::Options &&
          p.options == record.gold.options)
        return OutputClass::Sparse;
      return OutputClass::Tense;
  }
  return OutputClass::Other;
}

namespace {

double ratio(std::size_t hits, std::size_t total) {
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

double accuracy(std::span<const EvalRecord> records) {
  if (records.empty()) throw MetricsError("empty cell");
  std::size_t hits = 0;
  for (const EvalRecord& r : records) hits += r.correct ? 1 : 0;
  return ratio(hits, records.size());
}

double stability_rate(std::span<const EvalRecord> records) {
  std::size_t n = 0, hits = 0;
  for (const EvalRecord& r : records) {
    if (r.label_class != LabelClass::Tense) continue;
    ++n;
    hits += r.correct ? 1 : 0;
  }
  if (n == 0) throw MetricsError("no tense records in cell");
  return ratio(hits, n);
}

double generalization_rate(std::span<const EvalRecord> records) {
  std::size_t n = 0, hits = 0;
  for (const EvalRecord& r : records) {
    if (r.label_class != LabelClass::Sparse) continue;
    ++n;
    hits += r.correct ? 1 : 0;
  }
  if (n == 0) throw MetricsError("no sparse records in cell");
  return ratio(hits, n);
}

double robustness_rate(double acc_vanilla, double acc_biased) {
  return std::fabs(acc_vanilla - acc_biased);
}

double output_rate(std::span<const EvalRecord> records, OutputClass cls) {
  if (records.empty()) throw MetricsError("empty cell");
  std::size_t hits = 0;
  for (const EvalRecord& r : records) hits += classify_output(r) == cls ? 1 : 0;
  return ratio(hits, records.size());
}

double instable_rate(double or_tense, double or_sparse) {
  return std::fabs(or_tense - or_sparse);
}

double robustness_score(
    const std::vector<std::pair<double, double>>& per_form) {
  if (per_form.empty()) throw MetricsError("no per-form rates");
  double sum = 0.0;
  for (auto [sr, gr] : per_form) {
    double denom = sr + gr;
    sum += denom == 0.0 ? 0.0 : 2.0 * sr * gr / denom;
  }
  return sum / static_cast<double>(per_form.size());
}

MetricsBundle compute_bundle(std::span<const EvalRecord> records) {
  if (records.empty()) throw MetricsError("empty cell");
  MetricsBundle b;
  b.n = records.size();
  for (const EvalRecord& r : records) {
    if (r.label_class == LabelClass::Tense)
      ++b.n_tense;
    else
      ++b.n_sparse;
    if (!r.parseable) ++b.n_unparseable;
  }
  b.acc = accuracy(records);
  if (b.n_tense > 0) b.sr = stability_rate(records);
  if (b.n_sparse > 0) b.gr = generalization_rate(records);
  b.or_tense = output_rate(records, OutputClass::Tense);
  b.or_sparse = output_rate(records, OutputClass::Sparse);
  b.or_other = output_rate(records, OutputClass::Other);
  b.fr = instable_rate(b.or_tense, b.or_sparse);
  return b;
}

}  // namespace ibeval
