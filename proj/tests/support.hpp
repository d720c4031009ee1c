#pragma once

// Shared builders for synthetic corpora used across the test suites.

#include <string>
#include <vector>

#include "ibeval/corpus.hpp"

namespace ibeval::testing {

inline Sample judging_sample(const std::string& id, Verdict gold) {
  Sample s;
  s.id = id;
  s.form = DatasetForm::Judging;
  s.question = "question of " + id;
  s.facts = "facts of " + id;
  s.gold = GoldLabel::make_verdict(gold);
  s.label_class =
      gold == Verdict::Unknown ? LabelClass::Sparse : LabelClass::Tense;
  s.source = "synthetic";
  return s;
}

inline Sample single_sample(const std::string& id, int gold,
                            int n_options = 4) {
  Sample s;
  s.id = id;
  s.form = DatasetForm::SingleChoice;
  s.question = "question of " + id;
  s.facts = "facts of " + id;
  for (int i = 0; i < n_options; ++i)
    s.options.push_back("option " + std::to_string(i) + " of " + id);
  s.gold = GoldLabel::make_options({gold});
  s.label_class = LabelClass::Tense;
  s.source = "synthetic";
  return s;
}

inline Sample multi_sample(const std::string& id, std::vector<int> gold,
                           int n_options = 4) {
  Sample s;
  s.id = id;
  s.form = DatasetForm::MultiChoice;
  s.question = "question of " + id;
  s.facts = "facts of " + id;
  for (int i = 0; i < n_options; ++i)
    s.options.push_back("option " + std::to_string(i) + " of " + id);
  s.gold = GoldLabel::make_options(std::move(gold));
  s.label_class = infer_label_class(s.form, s.gold, s.options);
  s.source = "synthetic";
  return s;
}

}  // namespace ibeval::testing
