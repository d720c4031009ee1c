#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ibeval/harness.hpp"
#include "ibeval/rng.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace ibeval;
using namespace ibeval::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("ibeval_harness_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

// 10 unknown + 10 tense judging, 10 single-choice (10 options each),
// 10 multi-choice (5 two-true, 5 one-true).
RunConfig synthetic_config(const TempDir& dir, std::uint64_t seed = 42) {
  std::vector<Sample> judging;
  for (int i = 0; i < 10; ++i)
    judging.push_back(judging_sample("ju" + std::to_string(i), Verdict::Unknown));
  for (int i = 0; i < 10; ++i)
    judging.push_back(judging_sample(
        "jt" + std::to_string(i), i % 3 == 0 ? Verdict::False : Verdict::True));
  std::vector<Sample> single;
  for (int i = 0; i < 10; ++i)
    single.push_back(single_sample("s" + std::to_string(i), i % 10, 10));
  std::vector<Sample> multi;
  for (int i = 0; i < 5; ++i)
    multi.push_back(multi_sample("m2_" + std::to_string(i), {0, i % 3 + 1}));
  for (int i = 0; i < 5; ++i)
    multi.push_back(multi_sample("m1_" + std::to_string(i), {i % 4}));

  save_corpus(judging, dir.str() + "/judging.jsonl");
  save_corpus(single, dir.str() + "/single.jsonl");
  save_corpus(multi, dir.str() + "/multi.jsonl");

  RunConfig cfg;
  cfg.corpus_paths[DatasetForm::Judging] = dir.str() + "/judging.jsonl";
  cfg.corpus_paths[DatasetForm::SingleChoice] = dir.str() + "/single.jsonl";
  cfg.corpus_paths[DatasetForm::MultiChoice] = dir.str() + "/multi.jsonl";
  cfg.models.push_back({"oracle", EndpointConfig{}});
  cfg.seed = seed;
  cfg.concurrency = 3;
  cfg.output_dir = dir.str() + "/out";
  cfg.cassette_dir = dir.str() + "/cassettes";
  cfg.miscellany_n = {1, 3, 5};
  return cfg;
}

}  // namespace

TEST_CASE("parse_config reads the flat key-value grammar") {
  std::stringstream in;
  in << "# comment\n"
     << "seed = 7\n"
     << "concurrency = 4\n"
     << "output_dir = results\n"
     << "mode = record\n"
     << "corpus.judging = data/j.jsonl\n"
     << "settings = vanilla, conformity\n"
     << "miscellany.n = 2,4\n"
     << "conformity.target = 2\n"
     << "polish.mode = live\n"
     << "models = alpha, beta\n"
     << "model.alpha.base_url = http://localhost:9/v1\n"
     << "model.alpha.api_key_env = ALPHA_KEY\n"
     << "model.alpha.rpm = 10\n"
     << "model.beta.base_url = http://localhost:10/v1\n"
     << "model.beta.name = beta-wire-name\n"
     << "judge.base_url = http://localhost:11/v1\n"
     << "judge.name = judge-model\n";
  RunConfig cfg = parse_config(in, "mem");
  CHECK(cfg.seed == 7);
  CHECK(cfg.concurrency == 4);
  CHECK(cfg.mode == ResponderMode::Record);
  CHECK(cfg.corpus_paths.at(DatasetForm::Judging) == "data/j.jsonl");
  CHECK(cfg.settings == std::vector<Setting>{Setting::VanillaScenario,
                                             Setting::Conformity});
  CHECK(cfg.miscellany_n == std::vector<int>{2, 4});
  CHECK(cfg.conformity_target == 2);
  CHECK(cfg.polish_mode == PolishMode::LiveModel);
  REQUIRE(cfg.models.size() == 2);
  CHECK(cfg.models[0].key == "alpha");
  CHECK(cfg.models[0].endpoint.model_name == "alpha");  // defaults to key
  CHECK(cfg.models[0].endpoint.requests_per_minute == 10);
  CHECK(cfg.models[1].endpoint.model_name == "beta-wire-name");
  REQUIRE(cfg.judge.has_value());
  CHECK(cfg.judge->endpoint.model_name == "judge-model");
  CHECK(cfg.cassette_dir == "results/cassettes");
  // temperature defaults to 0 and keys stay in the environment
  CHECK(cfg.models[0].endpoint.temperature == 0.0);
  CHECK(cfg.models[0].endpoint.api_key_env == "ALPHA_KEY");
}

TEST_CASE("parse_config rejects bad input") {
  auto parse_one = [](const std::string& text) {
    std::stringstream in(text);
    return parse_config(in, "mem");
  };
  CHECK_THROWS_AS(parse_one("unknown_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_one("mode = sometimes\n"), ConfigError);
  CHECK_THROWS_AS(parse_one("settings = vanilla, bogus\n"), ConfigError);
  CHECK_THROWS_AS(parse_one("conformity.target = 9\n"), ConfigError);
  CHECK_THROWS_AS(parse_one("seed = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_one("model.a.base_url = x\n"), ConfigError);
  CHECK_THROWS_AS(parse_one("no equals sign"), ConfigError);
}

TEST_CASE("default settings cover all eight") {
  std::stringstream in("seed = 1\n");
  RunConfig cfg = parse_config(in, "mem");
  CHECK(cfg.settings.size() == 8);
  CHECK(cfg.miscellany_n == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("settings_in_order schedules vanilla first") {
  RunConfig cfg;
  cfg.settings = {Setting::Conformity, Setting::Vagueness};
  auto ordered = settings_in_order(cfg);
  REQUIRE(ordered.size() == 3);
  CHECK(ordered[0] == Setting::VanillaScenario);

  cfg.settings = {Setting::Conformity, Setting::VanillaScenario};
  ordered = settings_in_order(cfg);
  CHECK(ordered == std::vector<Setting>{Setting::VanillaScenario,
                                        Setting::Conformity});

  cfg.settings = {Setting::VanillaScenario};
  ordered = settings_in_order(cfg);
  CHECK(ordered == std::vector<Setting>{Setting::VanillaScenario});
}

TEST_CASE("prepare applies the per-form transformations") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  PreparedBundle bundle = prepare(cfg);

  const FormBundle& judging = bundle.forms.at(DatasetForm::Judging);
  CHECK(judging.complete.size() == 20);
  CHECK(judging.n_tense == 10);
  CHECK(judging.n_sparse == 10);
  CHECK(judging.insufficient.empty());

  const FormBundle& single = bundle.forms.at(DatasetForm::SingleChoice);
  CHECK(single.complete.size() == 10);
  CHECK(single.n_sparse == 5);  // ceil(10/2)
  CHECK(single.insufficient.size() == 10);
  for (std::size_t i = 0; i < single.complete.size(); ++i) {
    CHECK(single.insufficient[i].options.size() ==
          single.complete[i].options.size() - 1);
    if (single.complete[i].label_class == LabelClass::Sparse)
      CHECK(single.insufficient[i].gold.kind ==
            GoldLabel::Kind::NoCorrectAnswer);
  }

  const FormBundle& multi = bundle.forms.at(DatasetForm::MultiChoice);
  CHECK(multi.complete.size() == 10);
  CHECK(multi.n_sparse == 5);  // the combined ones
  for (const Sample& s : multi.complete) {
    if (s.label_class == LabelClass::Sparse) {
      REQUIRE(s.gold.kind == GoldLabel::Kind::Options);
      CHECK(s.options[s.gold.options[0]].ends_with(" are True"));
    }
  }

  SUBCASE("same seed reproduces the bundle exactly") {
    PreparedBundle again = prepare(cfg);
    CHECK(again.fingerprint == bundle.fingerprint);
    for (const auto& [form, fb] : bundle.forms) {
      const FormBundle& other = again.forms.at(form);
      REQUIRE(other.complete.size() == fb.complete.size());
      for (std::size_t i = 0; i < fb.complete.size(); ++i) {
        CHECK(other.complete[i].options == fb.complete[i].options);
        CHECK(other.complete[i].gold == fb.complete[i].gold);
      }
    }
  }

  SUBCASE("bundle round-trips through save/load") {
    save_bundle(bundle, dir.str() + "/bundle");
    PreparedBundle loaded = load_bundle(dir.str() + "/bundle");
    CHECK(loaded.fingerprint == bundle.fingerprint);
    CHECK(loaded.forms.at(DatasetForm::SingleChoice).insufficient.size() == 10);
    CHECK(loaded.forms.at(DatasetForm::MultiChoice).n_sparse == 5);
  }
}

TEST_CASE("prepare aborts naming the failing sample") {
  TempDir dir;
  // A single-choice sample with one option cannot lose a distractor.
  std::vector<Sample> bad{single_sample("lonely", 0, 1)};
  save_corpus(bad, dir.str() + "/single.jsonl");
  RunConfig cfg;
  cfg.corpus_paths[DatasetForm::SingleChoice] = dir.str() + "/single.jsonl";
  cfg.seed = 1;
  CHECK_THROWS_WITH_AS(prepare(cfg), doctest::Contains("lonely"), CorpusError);
}

TEST_CASE("cell_samples routes variants per setting") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  PreparedBundle bundle = prepare(cfg);

  auto complete = cell_samples(bundle, Setting::VanillaScenario,
                               DatasetForm::SingleChoice, cfg, std::nullopt);
  CHECK(complete.size() == 10);

  auto insufficient = cell_samples(bundle, Setting::MissingGuidance,
                                   DatasetForm::SingleChoice, cfg, std::nullopt);
  REQUIRE(insufficient.size() == 10);
  CHECK(insufficient[0].options.size() == 9);

  auto judging_missing = cell_samples(bundle, Setting::MissingGuidance,
                                      DatasetForm::Judging, cfg, std::nullopt);
  CHECK(judging_missing.size() == 20);  // judging keeps the complete set

  auto misc = cell_samples(bundle, Setting::DisturbingMiscellany,
                           DatasetForm::SingleChoice, cfg, 3);
  CHECK(misc.size() == 5);  // tense half only
  for (const Sample& s : misc) {
    CHECK(s.options.size() == 3);
    CHECK(s.gold.options.size() == 1);
  }

  CHECK(cell_samples(bundle, Setting::DisturbingMiscellany,
                     DatasetForm::MultiChoice, cfg, 3)
            .empty());
  CHECK(cell_samples(bundle, Setting::DisturbingMiscellany,
                     DatasetForm::Judging, cfg, 3)
            .empty());
}

TEST_CASE("oracle end-to-end: run, score, report") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario, Setting::Conformity,
                  Setting::MissingGuidance, Setting::DisturbingMiscellany,
                  Setting::MultiTurnDialogue};
  PreparedBundle bundle = prepare(cfg);

  RunLog log = run(cfg, bundle, oracle_factory(cfg, bundle));
  // vanilla, conformity, missing, multiturn cells + 3 miscellany sub-cells
  CHECK(log.cells.size() == 7);

  std::vector<ReportCell> cells =
      score(log, bundle, cfg, oracle_factory(cfg, bundle));
  REQUIRE(cells.size() == 7);
  for (const ReportCell& cell : cells) {
    CAPTURE(cell.model);
    CAPTURE(setting_key(cell.setting));
    CHECK(!cell.aborted);
    CHECK(cell.judge_ratio == 0.0);
    for (const auto& [form, metrics] : cell.per_form) {
      CAPTURE(form_key(form));
      CHECK(metrics.bundle.acc == 1.0);
      if (metrics.bundle.sr) CHECK(*metrics.bundle.sr == 1.0);
      if (metrics.bundle.gr) CHECK(*metrics.bundle.gr == 1.0);
      if (metrics.rr) CHECK(*metrics.rr == 0.0);
      CHECK(metrics.bundle.n_unparseable == 0);
    }
    if (!cell.miscellany_n) CHECK(cell.rs == 1.0);
  }

  SUBCASE("scores round-trip through the json file") {
    save_cells(cells, dir.str() + "/scores.json");
    std::vector<ReportCell> back = load_cells(dir.str() + "/scores.json");
    REQUIRE(back.size() == cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      CHECK(back[i].model == cells[i].model);
      CHECK(back[i].setting == cells[i].setting);
      CHECK(back[i].rs == cells[i].rs);
      CHECK(back[i].per_form.size() == cells[i].per_form.size());
    }
  }

  SUBCASE("reports land in every format") {
    write_reports(cells, parse_formats("text,csv,json"), dir.str() + "/rep");
    for (const char* name :
         {"main_results", "miscellany_accuracy", "output_distribution",
          "rs_leaderboard", "judge_usage"}) {
      for (const char* ext : {"txt", "csv", "json"}) {
        CAPTURE(name);
        CAPTURE(ext);
        CHECK(fs::exists(dir.str() + "/rep/" + name + "." + std::string(ext)));
      }
    }
    std::ifstream main_csv(dir.str() + "/rep/main_results.csv");
    std::string header;
    std::getline(main_csv, header);
    CHECK(header.find("Acc_b^1") != std::string::npos);
    std::string row;
    std::getline(main_csv, row);
    CHECK(row.find("100.00") != std::string::npos);
  }
}

TEST_CASE("a responder answering True skews exactly as enumerated") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario};
  PreparedBundle bundle = prepare(cfg);

  // Enumerate the prepared judging bundle's gold distribution.
  const FormBundle& judging = bundle.forms.at(DatasetForm::Judging);
  std::size_t n = judging.complete.size(), n_true = 0, n_tense = 0;
  for (const Sample& s : judging.complete) {
    if (s.label_class == LabelClass::Tense) ++n_tense;
    if (s.gold.verdict == Verdict::True) ++n_true;
  }
  REQUIRE(n == 20);

  ResponderFactory always_true =
      [](const std::string&, const std::string&) -> std::shared_ptr<Responder> {
    return std::make_shared<ScriptedResponder>(
        ScriptedResponder::constant("True"));
  };
  RunLog log = run(cfg, bundle, always_true);
  std::vector<ReportCell> cells = score(log, bundle, cfg, always_true);
  REQUIRE(cells.size() == 1);
  const FormCellMetrics& m = cells[0].per_form.at(DatasetForm::Judging);
  CHECK(m.bundle.acc ==
        static_cast<double>(n_true) / static_cast<double>(n));
  CHECK(*m.bundle.sr ==
        static_cast<double>(n_true) / static_cast<double>(n_tense));
  CHECK(*m.bundle.gr == 0.0);
  CHECK(m.bundle.or_tense == 1.0);
  CHECK(m.bundle.fr == 1.0);
}

TEST_CASE("per-sample failures over the budget abort the cell") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario};
  cfg.corpus_paths.erase(DatasetForm::SingleChoice);
  cfg.corpus_paths.erase(DatasetForm::MultiChoice);
  PreparedBundle bundle = prepare(cfg);

  std::atomic<int> counter{0};
  ResponderFactory flaky = [&](const std::string&,
                               const std::string&) -> std::shared_ptr<Responder> {
    return std::make_shared<ScriptedResponder>(
        [&](const std::vector<ChatMessage>&,
            const RequestContext& ctx) -> std::string {
          if (ctx.sample_id.starts_with("ju")) throw EndpointError("down", false);
          return "1";
        });
  };
  RunLog log = run(cfg, bundle, flaky);
  REQUIRE(log.cells.size() == 1);
  CHECK(log.cells[0].aborted);           // half the cell failed
  CHECK(log.cells[0].failures.size() == 10);
  CHECK(log.cells[0].transcripts.size() == 10);

  // Aborted cells surface in the report instead of being dropped.
  std::vector<ReportCell> cells = score(log, bundle, cfg, flaky);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].aborted);
  write_reports(cells, parse_formats("csv"), dir.str() + "/rep");
  std::ifstream csv(dir.str() + "/rep/main_results.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(row.find("failure budget") != std::string::npos);
}

TEST_CASE("concurrency level does not change results") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario, Setting::MultiTurnDialogue};
  PreparedBundle bundle = prepare(cfg);

  auto run_with = [&](int concurrency) {
    RunConfig c = cfg;
    c.concurrency = concurrency;
    RunLog log = run(c, bundle, oracle_factory(c, bundle));
    return score(log, bundle, c, oracle_factory(c, bundle));
  };
  std::vector<ReportCell> serial = run_with(1);
  std::vector<ReportCell> parallel = run_with(16);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].per_form.size() == parallel[i].per_form.size());
    for (const auto& [form, m] : serial[i].per_form) {
      const FormCellMetrics& p = parallel[i].per_form.at(form);
      CHECK(m.bundle.acc == p.bundle.acc);
      CHECK(m.bundle.sr == p.bundle.sr);
      CHECK(m.bundle.gr == p.bundle.gr);
      CHECK(m.bundle.or_tense == p.bundle.or_tense);
      CHECK(m.bundle.n == p.bundle.n);
    }
  }
}

TEST_CASE("failures at exactly the budget do not abort") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario};
  cfg.corpus_paths.erase(DatasetForm::SingleChoice);
  cfg.corpus_paths.erase(DatasetForm::MultiChoice);
  PreparedBundle bundle = prepare(cfg);  // 20 judging samples

  auto flaky_for = [&](std::vector<std::string> bad_ids) {
    return [bad_ids](const std::string&,
                     const std::string&) -> std::shared_ptr<Responder> {
      return std::make_shared<ScriptedResponder>(
          [bad_ids](const std::vector<ChatMessage>&,
                    const RequestContext& ctx) -> std::string {
            if (std::find(bad_ids.begin(), bad_ids.end(), ctx.sample_id) !=
                bad_ids.end())
              throw EndpointError("down", false);
            return "1";
          });
    };
  };

  // 2 of 20 = exactly the 10% budget: recorded but not aborted.
  RunLog at_budget = run(cfg, bundle, flaky_for({"ju0", "ju1"}));
  CHECK(!at_budget.cells[0].aborted);
  CHECK(at_budget.cells[0].failures.size() == 2);
  CHECK(at_budget.cells[0].transcripts.size() == 18);

  // 3 of 20 crosses it.
  RunLog over = run(cfg, bundle, flaky_for({"ju0", "ju1", "ju2"}));
  CHECK(over.cells[0].aborted);
}

TEST_CASE("resume skips completed cells") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario};
  PreparedBundle bundle = prepare(cfg);

  auto calls = std::make_shared<std::atomic<int>>(0);
  std::string rdir = dir.str() + "/runs";
  RunLog first = run(cfg, bundle, oracle_factory(cfg, bundle, calls), &rdir);
  int first_calls = calls->load();
  CHECK(first_calls > 0);

  RunLog second = run(cfg, bundle, oracle_factory(cfg, bundle, calls), &rdir);
  CHECK(calls->load() == first_calls);  // nothing re-executed
  REQUIRE(second.cells.size() == first.cells.size());
  CHECK(second.cells[0].transcripts.size() ==
        first.cells[0].transcripts.size());

  // A different seed invalidates the cache.
  RunConfig cfg2 = synthetic_config(dir, 43);
  cfg2.settings = {Setting::VanillaScenario};
  PreparedBundle bundle2 = prepare(cfg2);
  CHECK(bundle2.fingerprint != bundle.fingerprint);
  run(cfg2, bundle2, oracle_factory(cfg2, bundle2, calls), &rdir);
  CHECK(calls->load() > first_calls);
}

TEST_CASE("an all-unparseable responder zeroes accuracy") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario};
  PreparedBundle bundle = prepare(cfg);

  ResponderFactory gibberish =
      [](const std::string&, const std::string&) -> std::shared_ptr<Responder> {
    return std::make_shared<ScriptedResponder>(
        ScriptedResponder::constant("hmm, what a fascinating puzzle"));
  };
  RunLog log = run(cfg, bundle, gibberish);
  std::vector<ReportCell> cells = score(log, bundle, cfg, gibberish);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].judge_ratio == 1.0);  // no judge configured, all unmatched
  for (const auto& [form, m] : cells[0].per_form) {
    CHECK(m.bundle.acc == 0.0);
    CHECK(m.bundle.or_other == 1.0);
    CHECK(m.bundle.n_unparseable == m.bundle.n);
  }
}

TEST_CASE("score without a vanilla cell omits RR with a warning") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::Conformity};
  PreparedBundle bundle = prepare(cfg);
  RunLog log = run(cfg, bundle, oracle_factory(cfg, bundle));
  REQUIRE(log.cells.size() == 2);  // vanilla auto-scheduled first
  CHECK(log.cells[0].key.setting == Setting::VanillaScenario);

  // Drop the vanilla cell before scoring; RR must be omitted, not faked.
  RunLog partial;
  partial.cells.push_back(log.cells[1]);
  std::vector<ReportCell> cells =
      score(partial, bundle, cfg, oracle_factory(cfg, bundle));
  REQUIRE(cells.size() == 1);
  for (const auto& [form, m] : cells[0].per_form)
    CHECK(!m.rr.has_value());
}

TEST_CASE("parse_formats lists supported formats on error") {
  CHECK(parse_formats("text").size() == 1);
  CHECK(parse_formats("text, csv ,json").size() == 3);
  CHECK_THROWS_WITH_AS(parse_formats("yaml"),
                       doctest::Contains("text, csv, json"), ConfigError);
  CHECK_THROWS_AS(parse_formats(""), ConfigError);
}

TEST_CASE("csv and json reports round-trip to identical values") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario, Setting::Vagueness};
  PreparedBundle bundle = prepare(cfg);
  RunLog log = run(cfg, bundle, oracle_factory(cfg, bundle));
  std::vector<ReportCell> cells =
      score(log, bundle, cfg, oracle_factory(cfg, bundle));
  write_reports(cells, parse_formats("csv,json"), dir.str() + "/rep");

  // Parse both files and compare cell by cell.
  std::ifstream csv(dir.str() + "/rep/main_results.csv");
  std::string line;
  std::getline(csv, line);
  std::vector<std::string> columns;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) columns.push_back(col);
  }
  std::ifstream jf(dir.str() + "/rep/main_results.json");
  nlohmann::json doc;
  jf >> doc;
  std::size_t row_idx = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    fields.resize(columns.size());
    const nlohmann::json& jrow = doc.at("rows").at(row_idx);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      const nlohmann::json& jv = jrow.at(columns[i]);
      if (jv.is_null()) {
        CHECK(fields[i].empty());
      } else if (jv.is_number()) {
        CHECK(std::stod(fields[i]) == jv.get<double>());
      } else {
        CHECK(fields[i] == jv.get<std::string>());
      }
    }
    ++row_idx;
  }
  CHECK(row_idx == doc.at("rows").size());
}

TEST_CASE("default miscellany sweep reports nine numeric columns") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario, Setting::DisturbingMiscellany};
  cfg.miscellany_n = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  PreparedBundle bundle = prepare(cfg);
  RunLog log = run(cfg, bundle, oracle_factory(cfg, bundle));
  std::vector<ReportCell> cells =
      score(log, bundle, cfg, oracle_factory(cfg, bundle));
  write_reports(cells, parse_formats("csv,json"), dir.str() + "/rep");

  std::ifstream csv(dir.str() + "/rep/miscellany_accuracy.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "Model,1,2,3,4,5,6,7,8,9");

  // The json main-results table marks which columns the printed layout has.
  std::ifstream jf(dir.str() + "/rep/main_results.json");
  nlohmann::json doc;
  jf >> doc;
  REQUIRE(doc.contains("published_columns"));
  CHECK(doc.at("published_columns").size() == 7);
}

TEST_CASE("responder hub record then replay") {
  TempDir dir;
  RunConfig cfg = synthetic_config(dir);
  cfg.settings = {Setting::VanillaScenario};
  PreparedBundle bundle = prepare(cfg);

  {
    ResponderHub hub(ResponderMode::Record, cfg.cassette_dir,
                     oracle_factory(cfg, bundle));
    run(cfg, bundle, hub.factory());
    hub.flush();
  }
  CHECK(fs::exists(cfg.cassette_dir + "/oracle/vanilla.jsonl"));

  // Replay succeeds with no inner factory at all.
  ResponderFactory poison = [](const std::string&,
                               const std::string&) -> std::shared_ptr<Responder> {
    throw std::logic_error("live factory must not be used in replay");
  };
  ResponderHub replay_hub(ResponderMode::Replay, cfg.cassette_dir, poison);
  RunLog log = run(cfg, bundle, replay_hub.factory());
  REQUIRE(log.cells.size() == 1);
  CHECK(log.cells[0].failures.empty());
  CHECK(log.cells[0].transcripts.size() == 40);

  // A missing cassette surfaces as an endpoint error on first use.
  ResponderHub empty_hub(ResponderMode::Replay, dir.str() + "/nowhere", poison);
  RunLog bad = run(cfg, bundle, empty_hub.factory());
  CHECK(bad.cells[0].aborted);
}
