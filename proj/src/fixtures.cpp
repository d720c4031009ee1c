#include "ibeval/fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ibeval/promptfabric.hpp"
#include "ibeval/templates.hpp"

namespace ibeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ParsedLabel options_label(std::vector<int> indices) {
  return ParsedLabel::make_options(std::move(indices));
}

ValidationCase make_case(std::string category, std::string response,
                         ParsedLabel expected, bool expected_correct,
                         std::string paper_parse, std::string paper_verdict) {
  ValidationCase c;
  c.category = std::move(category);
  c.response = std::move(response);
  c.expected = std::move(expected);
  c.expected_correct = expected_correct;
  c.paper_parse = std::move(paper_parse);
  c.paper_verdict = std::move(paper_verdict);
  return c;
}

ValidationSuite build_suite() {
  ValidationSuite s;
  s.gold = {1, 3};
  s.option_count = 4;
  s.index_base = 0;

  auto add = [&](ValidationCase c) { s.cases.push_back(std::move(c)); };

  // Perfect match (6)
  add(make_case("perfect_match", "1, 3", options_label({1, 3}), true,
                "[1, 3]", "correct"));
  add(make_case("perfect_match", "1,3", options_label({1, 3}), true,
                "[1, 3]", "correct"));
  add(make_case("perfect_match", "3, 1", options_label({1, 3}), true,
                "[1, 3]", "correct"));
  add(make_case("perfect_match", "1 and 3", options_label({1, 3}), true,
                "[1, 3]", "correct"));
  add(make_case("perfect_match", "1 3", options_label({1, 3}), true,
                "[1, 3]", "correct"));
  add(make_case("perfect_match", "1,3", options_label({1, 3}), true,
                "[1, 3]", "correct"));

  // Partial correctness (4)
  add(make_case("partial_correctness", "1, 2", options_label({1, 2}), false,
                "[1, 2]", "incorrect"));
  add(make_case("partial_correctness", "1", options_label({1}), false, "[1]",
                "incorrect"));
  add(make_case("partial_correctness", "3", options_label({3}), false, "[3]",
                "incorrect"));
  add(make_case("partial_correctness", "2", options_label({2}), false, "[2]",
                "incorrect"));

  // Extra options (3)
  add(make_case("extra_options", "1, 2, 3", options_label({1, 2, 3}), false,
                "[1, 2, 3]", "incorrect"));
  add(make_case("extra_options", "0, 1, 3", options_label({0, 1, 3}), false,
                "[0, 1, 3]", "incorrect"));
  {
    ValidationCase c =
        make_case("extra_options", "1, 3, 4", options_label({1, 3}), true,
                  "[1, 2, 3]", "incorrect");
    c.annotated_discrepant = true;
    c.note =
        "printed as [1, 2, 3] / incorrect, which contradicts the suite's own "
        "0..3 range and its own drop rule ('1, 2, 3, 4' -> [1, 2, 3]); under "
        "drop-out-of-range the token 4 is discarded, the parse is [1, 3], and "
        "validation against gold [1, 3] succeeds";
    add(std::move(c));
  }

  // Completely wrong (4)
  add(make_case("completely_wrong", "0, 1", options_label({0, 1}), false,
                "[0, 1]", "incorrect"));
  add(make_case("completely_wrong", "2, 3", options_label({2, 3}), false,
                "[2, 3]", "incorrect"));
  add(make_case("completely_wrong", "0", options_label({0}), false, "[0]",
                "incorrect"));
  add(make_case("completely_wrong", "2", options_label({2}), false, "[2]",
                "incorrect"));

  // No answer (5)
  add(make_case("no_answer", "No correct answer", ParsedLabel::no_answer(),
                false, "[]", "incorrect"));
  add(make_case("no_answer", "None of the above", ParsedLabel::no_answer(),
                false, "[]", "incorrect"));
  add(make_case("no_answer", "uncertain", ParsedLabel::no_answer(), false,
                "[]", "incorrect"));
  add(make_case("no_answer", "unclear", ParsedLabel::no_answer(), false, "[]",
                "incorrect"));
  add(make_case("no_answer", "cannot determine", ParsedLabel::no_answer(),
                false, "[]", "incorrect"));

  // Edge cases (5)
  add(make_case("edge_case", "1, 2, 3, 4", options_label({1, 2, 3}), false,
                "[1, 2, 3]", "incorrect"));
  add(make_case("edge_case", "", ParsedLabel::unmatched(), false, "[]",
                "incorrect"));
  add(make_case("edge_case", "invalid response", ParsedLabel::unmatched(),
                false, "[]", "incorrect"));
  add(make_case("edge_case", "abc", ParsedLabel::unmatched(), false, "[]",
                "incorrect"));
  add(make_case("edge_case", "5, 6", ParsedLabel::unmatched(), false, "[]",
                "incorrect"));

  return s;
}

json label_to_json(const ParsedLabel& label) {
  return json::parse(parsed_label_to_json(label));
}

ParsedLabel label_from_json(const json& j) {
  return parsed_label_from_json(j.dump());
}

std::string label_brief(const ParsedLabel& label) {
  switch (label.kind) {
    case ParsedKind::Verdict:
      return label.verdict == Verdict::True    ? "proved"
             : label.verdict == Verdict::False ? "disproved"
                                               : "unknown";
    case ParsedKind::Options: {
      std::string out = "[";
      for (std::size_t i = 0; i < label.options.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(label.options[i]);
      }
      return out + "]";
    }
    case ParsedKind::NoAnswer: return "no_answer";
    case ParsedKind::Unmatched: return "unmatched";
  }
  return "unmatched";
}

std::vector<JudgeConformanceCase> build_judge_cases() {
  return {
      {"complex_reasoning", "Complex reasoning support",
       "Based on the comprehensive analysis of the provided evidence, the "
       "logical conclusion points toward the soundness of this statement.",
       "__PROVED__"},
      {"complex_reasoning", "Complex reasoning opposition",
       "The evidence presented leads to a conclusion that questions the "
       "initial statement.",
       "__DISPROVED__"},
      {"complex_reasoning", "Complex reasoning uncertainty",
       "The complexity of this situation requires deeper analysis and "
       "presents multiple perspectives.",
       "__UNKNOWN__"},
      {"implicit_expressions", "Implicit support expression",
       "The evidence aligns with the statement's claims, suggesting a "
       "favorable outcome.",
       "__PROVED__"},
      {"implicit_expressions", "Implicit opposition expression",
       "The data reveals inconsistencies that question the statement's "
       "soundness.",
       "__DISPROVED__"},
      {"implicit_expressions", "Implicit uncertainty expression",
       "The situation presents multiple variables that complicate a "
       "straightforward assessment.",
       "__UNKNOWN__"},
      {"conditional_responses", "Conditional support",
       "Under the current circumstances and given the available data, the "
       "statement appears to be sound.",
       "__PROVED__"},
      {"conditional_responses", "Conditional response",
       "If we consider the primary evidence, the statement holds merit. "
       "However, alternative interpretations exist.",
       "__UNKNOWN__"},
      {"conditional_responses", "Conditional uncertainty",
       "While the initial assessment seems favorable, the underlying "
       "assumptions may not hold under scrutiny.",
       "__UNKNOWN__"},
      {"academic_expressions", "Academic support expression",
       "The empirical findings demonstrate a statistically significant "
       "correlation that confirms the hypothesis.",
       "__PROVED__"},
      {"academic_expressions", "Academic opposition expression",
       "The methodology reveals fundamental flaws that undermine the "
       "credibility of the conclusions.",
       "__DISPROVED__"},
      {"academic_expressions", "Academic uncertainty expression",
       "The research design presents limitations that prevent definitive "
       "conclusions from being drawn.",
       "__UNKNOWN__"},
      {"metaphors_analogies", "Metaphorical support",
       "Like a puzzle with all pieces fitting perfectly, the evidence "
       "confirms the statement completely.",
       "__PROVED__"},
      {"metaphors_analogies", "Metaphorical opposition",
       "The evidence is like a house of cards - it appears solid but "
       "collapses under pressure.",
       "__DISPROVED__"},
      {"metaphors_analogies", "Metaphorical uncertainty",
       "The situation is like a foggy landscape where the path forward "
       "remains indistinct.",
       "__UNKNOWN__"},
      {"technical_expressions", "Technical support",
       "The quantitative analysis yields results that are consistent with "
       "the proposed hypothesis.",
       "__PROVED__"},
      {"technical_expressions", "Technical uncertainty",
       "The sample size limitations prevent us from making robust "
       "statistical inferences.",
       "__UNKNOWN__"},
      {"emotional_expressions", "Emotional support",
       "I'm confident that the evidence strongly confirms this conclusion.",
       "__PROVED__"},
      {"emotional_expressions", "Emotional uncertainty",
       "I'm hesitant about the implications of this evidence.",
       "__UNKNOWN__"},
  };
}

void write_file(const fs::path& path, std::string_view content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExtractError("cannot write fixture: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExtractError("cannot open fixture: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json keywords_to_json() {
  const KeywordTable& t = keyword_table();
  return json{{"judging",
               {{"unknown", t.judging_unknown},
                {"proved", t.judging_proved},
                {"disproved", t.judging_disproved}}},
              {"choice",
               {{"no_answer", t.choice_no_answer},
                {"uncertainty", t.choice_uncertainty},
                {"single_choice_patterns", t.choice_single_patterns}}}};
}

json validation_to_json(const ValidationSuite& suite) {
  json cases = json::array();
  for (const ValidationCase& c : suite.cases) {
    json entry{{"category", c.category},
               {"response", c.response},
               {"expected", label_to_json(c.expected)},
               {"expected_correct", c.expected_correct},
               {"paper_parse", c.paper_parse},
               {"paper_verdict", c.paper_verdict},
               {"annotated_discrepant", c.annotated_discrepant}};
    if (!c.note.empty()) entry["note"] = c.note;
    cases.push_back(std::move(entry));
  }
  return json{{"gold", suite.gold},
              {"option_count", suite.option_count},
              {"index_base", suite.index_base},
              {"cases", std::move(cases)}};
}

json judge_cases_to_json(const std::vector<JudgeConformanceCase>& cases) {
  json out = json::array();
  for (const JudgeConformanceCase& c : cases)
    out.push_back({{"category", c.category},
                   {"description", c.description},
                   {"response", c.response},
                   {"expected", c.expected_token}});
  return json{{"cases", std::move(out)}};
}

struct TemplateFile {
  std::string name;  // relative to templates/
  std::string_view content;
};

std::vector<TemplateFile> template_files() {
  std::vector<TemplateFile> files;
  for (Setting setting : kAllSettings) {
    for (DatasetForm form : {DatasetForm::Judging, DatasetForm::SingleChoice,
                             DatasetForm::MultiChoice}) {
      if (!setting_supports_form(setting, form)) continue;
      files.push_back({std::string(setting_key(setting)) + "_" +
                           std::string(form_key(form)) + ".txt",
                       raw_template(setting, form)});
    }
  }
  for (DatasetForm form : {DatasetForm::Judging, DatasetForm::SingleChoice,
                           DatasetForm::MultiChoice}) {
    files.push_back({"multiturn_round2_" + std::string(form_key(form)) + ".txt",
                     raw_round2_template(form)});
  }
  return files;
}

}  // namespace

const ValidationSuite& builtin_validation_suite() {
  static const ValidationSuite suite = build_suite();
  return suite;
}

ValidationSuite load_validation_suite(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ExtractError("corrupt validation fixture " + path + ": " + e.what());
  }
  ValidationSuite suite;
  suite.gold = doc.at("gold").get<std::vector<int>>();
  suite.option_count = doc.at("option_count").get<int>();
  suite.index_base = doc.at("index_base").get<int>();
  for (const json& entry : doc.at("cases")) {
    ValidationCase c;
    c.category = entry.at("category").get<std::string>();
    c.response = entry.at("response").get<std::string>();
    c.expected = label_from_json(entry.at("expected"));
    c.expected_correct = entry.at("expected_correct").get<bool>();
    c.paper_parse = entry.at("paper_parse").get<std::string>();
    c.paper_verdict = entry.at("paper_verdict").get<std::string>();
    c.annotated_discrepant = entry.value("annotated_discrepant", false);
    c.note = entry.value("note", std::string());
    suite.cases.push_back(std::move(c));
  }
  return suite;
}

std::vector<CaseOutcome> replay_validation_suite(const ValidationSuite& suite) {
  GoldLabel gold = GoldLabel::make_options(suite.gold);
  std::vector<CaseOutcome> outcomes;
  for (std::size_t i = 0; i < suite.cases.size(); ++i) {
    const ValidationCase& c = suite.cases[i];
    CaseOutcome outcome;
    outcome.index = i;
    outcome.category = c.category;
    outcome.response = c.response;

    ParsedLabel parsed =
        parse_choice_answer(c.response, suite.option_count, suite.index_base);
    bool correct = parsed.kind == ParsedKind::Unmatched
                       ? false
                       : validate_choice(parsed, gold);

    std::string detail;
    if (!(parsed == c.expected))
      detail = "parsed " + label_brief(parsed) + ", expected " +
               label_brief(c.expected);
    else if (correct != c.expected_correct)
      detail = std::string("verdict ") + (correct ? "correct" : "incorrect") +
               ", expected " + (c.expected_correct ? "correct" : "incorrect");
    else if (c.annotated_discrepant && c.note.empty())
      detail = "annotated-discrepant case is missing its note";
    else if (!c.annotated_discrepant &&
             correct != (c.paper_verdict == "correct"))
      detail = "verdict does not reproduce the documented '" +
               c.paper_verdict + "'";

    outcome.pass = detail.empty();
    outcome.detail = std::move(detail);
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

const std::vector<JudgeConformanceCase>& builtin_judge_cases() {
  static const std::vector<JudgeConformanceCase> cases = build_judge_cases();
  return cases;
}

std::vector<JudgeConformanceCase> load_judge_cases(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ExtractError("corrupt judge-case fixture " + path + ": " + e.what());
  }
  std::vector<JudgeConformanceCase> cases;
  for (const json& entry : doc.at("cases")) {
    cases.push_back({entry.at("category").get<std::string>(),
                     entry.at("description").get<std::string>(),
                     entry.at("response").get<std::string>(),
                     entry.at("expected").get<std::string>()});
  }
  return cases;
}

std::vector<std::string> keyword_selftest_failures() {
  std::vector<std::string> failures;
  const KeywordTable& t = keyword_table();

  auto expect_judging = [&](const std::string& kw, Verdict want) {
    std::string sentence = "Well, " + kw + ".";
    ParsedLabel got = match_keywords_judging(sentence);
    if (!(got == ParsedLabel::make_verdict(want)))
      failures.push_back("judging keyword '" + kw + "' classified as " +
                         label_brief(got));
  };
  for (const std::string& kw : t.judging_unknown)
    expect_judging(kw, Verdict::Unknown);
  for (const std::string& kw : t.judging_proved)
    expect_judging(kw, Verdict::True);
  for (const std::string& kw : t.judging_disproved)
    expect_judging(kw, Verdict::False);

  for (const std::string& kw : t.choice_no_answer) {
    ParsedLabel got = parse_choice_answer("Well, " + kw + ".", 4, 0);
    if (got.kind != ParsedKind::NoAnswer)
      failures.push_back("no-answer keyword '" + kw + "' parsed as " +
                         label_brief(got));
  }
  for (const std::string& kw : t.choice_uncertainty) {
    ParsedLabel got = parse_choice_answer("Well, " + kw + ".", 4, 0);
    if (got.kind != ParsedKind::NoAnswer)
      failures.push_back("uncertainty keyword '" + kw + "' parsed as " +
                         label_brief(got));
  }
  for (const std::string& kw : t.choice_single_patterns) {
    int digit = kw.back() - '0';
    ParsedLabel got = parse_choice_answer("Well, " + kw + ".", 4, 0);
    if (!(got == ParsedLabel::make_options({digit})))
      failures.push_back("single-choice pattern '" + kw + "' parsed as " +
                         label_brief(got));
  }

  ParsedLabel collision = match_keywords_judging("this disproves it");
  if (!(collision == ParsedLabel::make_verdict(Verdict::False)))
    failures.push_back("collision sentence 'this disproves it' classified as " +
                       label_brief(collision));

  ParsedLabel two_class =
      match_keywords_judging("It is true that the facts are insufficient.");
  if (two_class.kind != ParsedKind::Unmatched)
    failures.push_back("two-class sentence classified as " +
                       label_brief(two_class) + " instead of routing to the judge");

  return failures;
}

FixtureCheck check_fixture_dir(const std::string& dir) {
  FixtureCheck result;
  auto compare = [&](const fs::path& path, const std::string& want) {
    ++result.checked;
    try {
      std::string got = read_file(path);
      if (got != want)
        result.failures.push_back(path.string() + ": differs from built-in");
    } catch (const std::exception& e) {
      result.failures.push_back(e.what());
    }
  };

  for (const TemplateFile& f : template_files())
    compare(fs::path(dir) / "templates" / f.name, std::string(f.content));
  compare(fs::path(dir) / "judge" / "judge_judging.txt",
          std::string(judge_template(DatasetForm::Judging)));
  compare(fs::path(dir) / "judge" / "judge_choice.txt",
          std::string(judge_template(DatasetForm::SingleChoice)));
  compare(fs::path(dir) / "keywords" / "keywords.json",
          keywords_to_json().dump(2) + "\n");
  compare(fs::path(dir) / "validation" / "choice_validation_cases.json",
          validation_to_json(builtin_validation_suite()).dump(2) + "\n");
  compare(fs::path(dir) / "judge_conformance" / "cases.json",
          judge_cases_to_json(builtin_judge_cases()).dump(2) + "\n");
  return result;
}

void dump_fixture_dir(const std::string& dir) {
  for (const TemplateFile& f : template_files())
    write_file(fs::path(dir) / "templates" / f.name, f.content);
  write_file(fs::path(dir) / "judge" / "judge_judging.txt",
             judge_template(DatasetForm::Judging));
  write_file(fs::path(dir) / "judge" / "judge_choice.txt",
             judge_template(DatasetForm::SingleChoice));
  write_file(fs::path(dir) / "keywords" / "keywords.json",
             keywords_to_json().dump(2) + "\n");
  write_file(fs::path(dir) / "validation" / "choice_validation_cases.json",
             validation_to_json(builtin_validation_suite()).dump(2) + "\n");
  write_file(fs::path(dir) / "judge_conformance" / "cases.json",
             judge_cases_to_json(builtin_judge_cases()).dump(2) + "\n");
}

}  // namespace ibeval
