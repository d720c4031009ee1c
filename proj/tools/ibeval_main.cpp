// Command-line front end: prepare -> run -> score -> report, plus the
// fixture and judge-conformance utilities.
//
// Exit codes: 0 success, 1 usage/config, 2 data error, 3 endpoint error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ibeval/fixtures.hpp"
#include "ibeval/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ibeval;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitEndpoint = 3;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> settings;
  std::vector<std::string> models;
  bool replay = false;
  bool record = false;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = parse_config_file(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.replay && args.record)
    throw ConfigError("--replay and --record are mutually exclusive");
  if (args.replay) cfg.mode = ResponderMode::Replay;
  if (args.record) cfg.mode = ResponderMode::Record;
  if (!args.settings.empty()) {
    cfg.settings.clear();
    for (const std::string& name : args.settings) {
      auto s = setting_from_key(name);
      if (!s) throw ConfigError("unknown setting '" + name + "'");
      cfg.settings.push_back(*s);
    }
  }
  if (!args.models.empty()) {
    std::vector<ModelSpec> kept;
    for (const std::string& name : args.models) {
      auto it = std::find_if(cfg.models.begin(), cfg.models.end(),
                             [&](const ModelSpec& m) { return m.key == name; });
      if (it == cfg.models.end())
        throw ConfigError("model '" + name + "' is not configured");
      kept.push_back(*it);
    }
    cfg.models = std::move(kept);
  }
  return cfg;
}

ResponderFactory http_factory(const RunConfig& cfg) {
  return [cfg](const std::string& model_key,
               const std::string&) -> std::shared_ptr<Responder> {
    if (cfg.judge && model_key == cfg.judge->key)
      return std::make_shared<HttpResponder>(cfg.judge->endpoint);
    for (const ModelSpec& m : cfg.models)
      if (m.key == model_key)
        return std::make_shared<HttpResponder>(m.endpoint);
    throw ConfigError("no endpoint configured for model '" + model_key + "'");
  };
}

std::string bundle_dir(const RunConfig& cfg) {
  return cfg.output_dir + "/bundle";
}

std::string runs_dir(const RunConfig& cfg) { return cfg.output_dir + "/runs"; }

void write_run_metadata(const RunConfig& cfg) {
  json meta;
  meta["seed"] = cfg.seed;
  meta["mode"] = std::string(responder_mode_key(cfg.mode));
  meta["concurrency"] = cfg.concurrency;
  meta["polish_mode"] = cfg.polish_mode == PolishMode::LiveModel
                            ? "live"
                            : "static";
  meta["polish_rewrite_instruction"] = std::string(polish_rewrite_instruction());
  meta["miscellany_draws"] = "independent per option count";
  json settings = json::array();
  for (Setting s : settings_in_order(cfg))
    settings.push_back(std::string(setting_key(s)));
  meta["settings"] = std::move(settings);
  json models = json::array();
  for (const ModelSpec& m : cfg.models) {
    models.push_back({{"key", m.key},
                      {"model", m.endpoint.model_name},
                      {"temperature", m.endpoint.temperature},
                      {"requests_per_minute", m.endpoint.requests_per_minute},
                      {"max_retries", m.endpoint.max_retries}});
  }
  meta["models"] = std::move(models);
  fs::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir + "/run_metadata.json");
  out << meta.dump(2) << '\n';
}

PreparedBundle prepare_or_load(const RunConfig& cfg, bool quiet) {
  PreparedBundle bundle = prepare(cfg);
  std::string dir = bundle_dir(cfg);
  if (fs::exists(dir + "/manifest.json")) {
    try {
      PreparedBundle existing = load_bundle(dir);
      if (existing.fingerprint == bundle.fingerprint &&
          existing.seed == bundle.seed) {
        if (!quiet)
          std::cout << "bundle up to date (fingerprint " << bundle.fingerprint
                    << ")\n";
        return existing;
      }
    } catch (const std::exception&) {
      // fall through and rebuild
    }
  }
  save_bundle(bundle, dir);
  if (!quiet) {
    std::cout << "prepared bundle " << bundle.fingerprint << " (seed "
              << bundle.seed << ")\n";
    for (const auto& [form, fb] : bundle.forms) {
      std::cout << "  " << form_key(form) << ": " << fb.complete.size()
                << " samples (" << fb.n_tense << " tense, " << fb.n_sparse
                << " sparse)";
      if (!fb.insufficient.empty())
        std::cout << ", " << fb.insufficient.size() << " insufficient variants";
      std::cout << '\n';
    }
  }
  return bundle;
}

RunLog load_full_run_log(const RunConfig& cfg, const PreparedBundle& bundle) {
  RunLog log;
  std::vector<std::string> missing;
  for (const ModelSpec& model : cfg.models) {
    for (Setting setting : settings_in_order(cfg)) {
      std::vector<CellKey> keys;
      if (setting == Setting::DisturbingMiscellany) {
        for (int n : cfg.miscellany_n) keys.push_back({model.key, setting, n});
      } else {
        keys.push_back({model.key, setting, std::nullopt});
      }
      for (const CellKey& key : keys) {
        if (auto cell =
                try_load_cell_log(key, bundle.fingerprint, runs_dir(cfg)))
          log.cells.push_back(std::move(*cell));
        else
          missing.push_back(key.model + "/" + key.name());
      }
    }
  }
  if (!missing.empty()) {
    std::string what = "run log incomplete; missing cells:";
    for (const std::string& m : missing) what += " " + m;
    throw HarnessError(what + " (run 'run' first)");
  }
  return log;
}

int cmd_prepare(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  prepare_or_load(cfg, false);
  return kExitOk;
}

int cmd_run(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  if (cfg.models.empty())
    throw ConfigError("no models configured; add model.<key>.* and 'models'");
  PreparedBundle bundle = prepare_or_load(cfg, true);
  write_run_metadata(cfg);

  ResponderHub hub(cfg.mode, cfg.cassette_dir, http_factory(cfg));
  std::string dir = runs_dir(cfg);
  RunLog log = run(cfg, bundle, hub.factory(), &dir);
  hub.flush();

  std::size_t transcripts = 0, aborted = 0;
  for (const CellLog& cell : log.cells) {
    transcripts += cell.transcripts.size();
    aborted += cell.aborted ? 1 : 0;
  }
  std::cout << "ran " << log.cells.size() << " cells, " << transcripts
            << " transcripts";
  if (aborted) std::cout << ", " << aborted << " cells aborted";
  std::cout << '\n';
  if (!log.cells.empty() && aborted == log.cells.size()) {
    std::cerr << "error: every cell aborted; check the endpoint configuration"
              << '\n';
    return kExitEndpoint;
  }
  return kExitOk;
}

int cmd_score(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  PreparedBundle bundle = load_bundle(bundle_dir(cfg));

  std::string scores_path = cfg.output_dir + "/scores.json";
  if (fs::exists(scores_path) &&
      load_cells_fingerprint(scores_path) == bundle.fingerprint) {
    std::cout << "scores up to date (fingerprint " << bundle.fingerprint
              << ")\n";
    return kExitOk;
  }

  RunLog log = load_full_run_log(cfg, bundle);
  ResponderHub hub(cfg.mode, cfg.cassette_dir, http_factory(cfg));

  // Per-sample extraction outcomes, appended next to the run logs.
  std::map<std::string, std::ofstream> extraction_logs;
  ExtractionObserver observer = [&](const CellKey& key, const EvalRecord& rec,
                                    const ExtractOutcome& outcome) {
    std::string rel = sanitize_path_component(key.model) + "/" +
                      sanitize_path_component(key.name());
    auto it = extraction_logs.find(rel);
    if (it == extraction_logs.end()) {
      fs::path path = fs::path(cfg.output_dir) / "extractions" /
                      (rel + ".jsonl");
      fs::create_directories(path.parent_path());
      it = extraction_logs.emplace(rel, std::ofstream(path)).first;
    }
    json line{{"id", rec.sample_id},
              {"label", json::parse(parsed_label_to_json(outcome.label))},
              {"judge_used", outcome.judge_used}};
    if (outcome.unparseable_cause)
      line["unparseable_cause"] = *outcome.unparseable_cause;
    it->second << line.dump() << '\n';
  };

  std::vector<ReportCell> cells =
      score(log, bundle, cfg, hub.factory(), &observer);
  hub.flush();

  save_cells(cells, scores_path, bundle.fingerprint);
  std::cout << "scored " << cells.size() << " cells -> " << scores_path
            << '\n';
  return kExitOk;
}

int cmd_report(const CommonArgs& args, const std::string& format_list) {
  RunConfig cfg = load_config(args);
  std::vector<ReportFormat> formats = parse_formats(format_list);
  std::vector<ReportCell> cells = load_cells(cfg.output_dir + "/scores.json");
  std::string dir = cfg.output_dir + "/reports";
  write_reports(cells, formats, dir);
  std::cout << "reports written under " << dir << '\n';
  return kExitOk;
}

int cmd_validate_fixtures(const std::string& fixtures_dir) {
  int failures = 0;

  FixtureCheck check = check_fixture_dir(fixtures_dir);
  std::cout << "fixture files: " << (check.checked - check.failures.size())
            << "/" << check.checked << " match built-ins\n";
  for (const std::string& f : check.failures) {
    std::cout << "  MISMATCH " << f << '\n';
    ++failures;
  }

  ValidationSuite suite =
      load_validation_suite(fixtures_dir + "/validation/choice_validation_cases.json");
  std::size_t passed = 0;
  for (const CaseOutcome& outcome : replay_validation_suite(suite)) {
    if (outcome.pass) {
      ++passed;
    } else {
      std::cout << "  FAIL case " << outcome.index << " (" << outcome.category
                << ", '" << outcome.response << "'): " << outcome.detail
                << '\n';
      ++failures;
    }
  }
  std::cout << "choice validation cases: " << passed << "/"
            << suite.cases.size() << " pass\n";

  std::vector<std::string> keyword_failures = keyword_selftest_failures();
  if (keyword_failures.empty()) {
    std::cout << "keyword tables: all keywords classify to their class\n";
  } else {
    for (const std::string& f : keyword_failures) {
      std::cout << "  FAIL " << f << '\n';
      ++failures;
    }
  }

  if (failures == 0) {
    std::cout << "validate-fixtures: OK\n";
    return kExitOk;
  }
  std::cout << "validate-fixtures: " << failures << " failures\n";
  return kExitData;
}

int cmd_judge_conformance(const CommonArgs& args,
                          const std::string& fixtures_dir) {
  RunConfig cfg = load_config(args);
  if (!cfg.judge)
    throw ConfigError("judge-conformance requires judge.* keys in the config");
  std::vector<JudgeConformanceCase> cases =
      load_judge_cases(fixtures_dir + "/judge_conformance/cases.json");

  HttpResponder judge(cfg.judge->endpoint);
  std::size_t passed = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const JudgeConformanceCase& c = cases[i];
    std::string prompt = judge_prompt(DatasetForm::Judging, c.response);
    std::string reply = judge.complete({ChatMessage{"user", prompt}},
                                       {"judge-case-" + std::to_string(i),
                                        "judge-conformance", 0});
    std::string trimmed = reply;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(
                                   trimmed.back())))
      trimmed.pop_back();
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(
                                   trimmed.front())))
      trimmed.erase(trimmed.begin());
    bool ok = trimmed == c.expected_token;
    std::cout << (ok ? "PASS" : "FAIL") << " [" << c.category << "] "
              << c.description;
    if (!ok) std::cout << " (expected " << c.expected_token << ", got '"
                       << trimmed << "')";
    std::cout << '\n';
    passed += ok ? 1 : 0;
  }
  std::cout << passed << "/" << cases.size() << " judge cases pass\n";
  return passed == cases.size() ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction-coverage bias evaluation harness"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string format_list = "text,csv,json";
  std::string fixtures_dir = "fixtures";
  std::string dump_dir;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", args.config_path,
                                "run configuration file");
    if (needs_config) opt->required();
    cmd->add_option("--seed", args.seed, "override the configured seed");
    cmd->add_option("--setting", args.settings,
                    "restrict to these settings (repeatable)");
    cmd->add_option("--model", args.models,
                    "restrict to these model keys (repeatable)");
    cmd->add_flag("--replay", args.replay, "force replay mode");
    cmd->add_flag("--record", args.record, "force record mode");
  };

  CLI::App* prepare_cmd =
      app.add_subcommand("prepare", "build the frozen evaluation bundle");
  add_common(prepare_cmd, true);

  CLI::App* run_cmd =
      app.add_subcommand("run", "collect transcripts for every cell");
  add_common(run_cmd, true);

  CLI::App* score_cmd =
      app.add_subcommand("score", "extract answers and compute metrics");
  add_common(score_cmd, true);

  CLI::App* report_cmd =
      app.add_subcommand("report", "emit report tables from scores");
  add_common(report_cmd, true);
  report_cmd->add_option("--format", format_list,
                         "comma-separated list: text,csv,json");

  CLI::App* validate_cmd = app.add_subcommand(
      "validate-fixtures",
      "replay the choice-validation cases and keyword fixtures");
  validate_cmd->add_option("--fixtures", fixtures_dir, "fixture directory");

  CLI::App* judge_cmd = app.add_subcommand(
      "judge-conformance", "run the live judge test-case suite");
  add_common(judge_cmd, true);
  judge_cmd->add_option("--fixtures", fixtures_dir, "fixture directory");

  CLI::App* dump_cmd = app.add_subcommand(
      "dump-fixtures", "regenerate the fixture tree from built-ins");
  dump_cmd->add_option("--dir", dump_dir, "target directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prepare_cmd->parsed()) return cmd_prepare(args);
    if (run_cmd->parsed()) return cmd_run(args);
    if (score_cmd->parsed()) return cmd_score(args);
    if (report_cmd->parsed()) return cmd_report(args, format_list);
    if (validate_cmd->parsed()) return cmd_validate_fixtures(fixtures_dir);
    if (judge_cmd->parsed()) return cmd_judge_conformance(args, fixtures_dir);
    if (dump_cmd->parsed()) {
      dump_fixture_dir(dump_dir);
      std::cout << "fixtures written under " << dump_dir << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const EndpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitEndpoint;
  } catch (const DialogueError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitEndpoint;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
