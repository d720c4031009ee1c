#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ibeval/extractor.hpp"

namespace ibeval {

// One choice-validation case. `expected` and `expected_correct` are the
// outcomes under the drop-out-of-range rule; `paper_parse`/`paper_verdict`
// keep the printed values. The single case where the two disagree is
// flagged annotated_discrepant and carries a note.
struct ValidationCase {
  std::string category;
  std::string response;
  ParsedLabel expected;
  bool expected_correct = false;
  std::string paper_parse;
  std::string paper_verdict;  // "correct" | "incorrect"
  bool annotated_discrepant = false;
  std::string note;
};

struct ValidationSuite {
  std::vector<int> gold;  // ground truth option set
  int option_count = 4;
  int index_base = 0;
  std::vector<ValidationCase> cases;
};

const ValidationSuite& builtin_validation_suite();
ValidationSuite load_validation_suite(const std::string& path);

struct CaseOutcome {
  std::size_t index = 0;
  std::string category;
  std::string response;
  bool pass = false;
  std::string detail;  // set when failing
};

// Replays every case through parse_choice_answer + validate_choice and
// checks expected parse, expected verdict, the documented verdict for
// non-discrepant cases, and a non-empty note on the discrepant one.
std::vector<CaseOutcome> replay_validation_suite(const ValidationSuite& suite);

// Judge test cases for the optional live conformance suite.
struct JudgeConformanceCase {
  std::string category;
  std::string description;
  std::string response;
  std::string expected_token;  // __PROVED__ / __DISPROVED__ / __UNKNOWN__
};

const std::vector<JudgeConformanceCase>& builtin_judge_cases();
std::vector<JudgeConformanceCase> load_judge_cases(const std::string& path);

// Synthetic-sentence checks over every keyword in the tables: each keyword
// classifies to its class, the collision sentence resolves by consumption,
// and a two-class sentence stays unmatched. Returns failure descriptions.
std::vector<std::string> keyword_selftest_failures();

struct FixtureCheck {
  std::size_t checked = 0;
  std::vector<std::string> failures;
};

// Byte-compares every fixture file under dir against the built-in
// templates, keyword tables, judge templates, and case data.
FixtureCheck check_fixture_dir(const std::string& dir);

// Writes the canonical fixture tree (templates/, keywords/, judge/,
// validation/, judge_conformance/) under dir.
void dump_fixture_dir(const std::string& dir);

}  // namespace ibeval
