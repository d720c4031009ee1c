#include "ibeval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ibeval/rng.hpp"

namespace ibeval {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view responder_mode_key(ResponderMode mode) {
  switch (mode) {
    case ResponderMode::Live: return "live";
    case ResponderMode::Record: return "record";
    case ResponderMode::Replay: return "replay";
  }
  return "replay";
}

std::string sanitize_path_component(std::string_view raw) {
  std::string out;
  for (char c : raw) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
              c == '_' || c == '-';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

std::string trim_copy(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split_csv(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) {
    std::string t = trim_copy(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

long long parse_int(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" +
                      value + "'");
  }
}

double parse_real(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" +
                      value + "'");
  }
}

void apply_endpoint_key(EndpointConfig& ep, const std::string& field,
                        const std::string& value, const std::string& key) {
  if (field == "base_url")
    ep.base_url = value;
  else if (field == "name")
    ep.model_name = value;
  else if (field == "api_key_env")
    ep.api_key_env = value;
  else if (field == "temperature")
    ep.temperature = parse_real(value, key);
  else if (field == "max_retries")
    ep.max_retries = static_cast<int>(parse_int(value, key));
  else if (field == "rpm")
    ep.requests_per_minute = static_cast<int>(parse_int(value, key));
  else if (field == "timeout_s")
    ep.timeout_seconds = parse_real(value, key);
  else if (field == "backoff_ms")
    ep.backoff_base_ms = static_cast<int>(parse_int(value, key));
  else
    throw ConfigError("unknown endpoint field in config key '" + key + "'");
}

std::vector<ExemplarKind> default_fewshot_kinds() {
  return {ExemplarKind::JudgingTrue,  ExemplarKind::JudgingFalse,
          ExemplarKind::JudgingUnknown, ExemplarKind::ChoiceSingle,
          ExemplarKind::ChoiceMulti,  ExemplarKind::ChoiceNoAnswer};
}

ExemplarKind judging_kind_from_key(const std::string& k, const std::string& key) {
  if (k == "true") return ExemplarKind::JudgingTrue;
  if (k == "false") return ExemplarKind::JudgingFalse;
  if (k == "unknown") return ExemplarKind::JudgingUnknown;
  throw ConfigError("config key '" + key + "': unknown judging exemplar '" + k +
                    "' (expected true/false/unknown)");
}

ExemplarKind choice_kind_from_key(const std::string& k, const std::string& key) {
  if (k == "single") return ExemplarKind::ChoiceSingle;
  if (k == "multi") return ExemplarKind::ChoiceMulti;
  if (k == "none") return ExemplarKind::ChoiceNoAnswer;
  throw ConfigError("config key '" + key + "': unknown choice exemplar '" + k +
                    "' (expected single/multi/none)");
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& origin) {
  RunConfig cfg;
  cfg.miscellany_n = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  cfg.fewshot_kinds = default_fewshot_kinds();

  std::vector<std::string> model_order;
  std::map<std::string, EndpointConfig> model_endpoints;
  bool judge_seen = false;
  EndpointConfig judge_ep;
  std::optional<std::vector<ExemplarKind>> judging_kinds, choice_kinds;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::size_t hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    std::string text = trim_copy(line);
    if (text.empty()) continue;
    std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    std::string key = trim_copy(std::string_view(text).substr(0, eq));
    std::string value = trim_copy(std::string_view(text).substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");

    if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_int(value, key));
    } else if (key == "concurrency") {
      cfg.concurrency = static_cast<int>(parse_int(value, key));
      if (cfg.concurrency < 1)
        throw ConfigError("concurrency must be at least 1");
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "cassette_dir") {
      cfg.cassette_dir = value;
    } else if (key == "failure_budget") {
      cfg.failure_budget = parse_real(value, key);
    } else if (key == "mode") {
      if (value == "live")
        cfg.mode = ResponderMode::Live;
      else if (value == "record")
        cfg.mode = ResponderMode::Record;
      else if (value == "replay")
        cfg.mode = ResponderMode::Replay;
      else
        throw ConfigError("mode must be live, record, or replay; got '" +
                          value + "'");
    } else if (key.starts_with("corpus.")) {
      auto form = form_from_key(key.substr(7));
      if (!form) throw ConfigError("unknown corpus form in key '" + key + "'");
      cfg.corpus_paths[*form] = value;
    } else if (key == "settings") {
      cfg.settings.clear();
      for (const std::string& name : split_csv(value)) {
        auto s = setting_from_key(name);
        if (!s) throw ConfigError("unknown setting '" + name + "'");
        if (std::find(cfg.settings.begin(), cfg.settings.end(), *s) ==
            cfg.settings.end())
          cfg.settings.push_back(*s);
      }
    } else if (key == "miscellany.n") {
      cfg.miscellany_n.clear();
      for (const std::string& item : split_csv(value)) {
        int n = static_cast<int>(parse_int(item, key));
        if (n < 1) throw ConfigError("miscellany.n entries must be >= 1");
        cfg.miscellany_n.push_back(n);
      }
    } else if (key == "fewshot.judging") {
      std::vector<ExemplarKind> kinds;
      for (const std::string& item : split_csv(value))
        kinds.push_back(judging_kind_from_key(item, key));
      judging_kinds = std::move(kinds);
    } else if (key == "fewshot.choice") {
      std::vector<ExemplarKind> kinds;
      for (const std::string& item : split_csv(value))
        kinds.push_back(choice_kind_from_key(item, key));
      choice_kinds = std::move(kinds);
    } else if (key == "conformity.target") {
      int target = static_cast<int>(parse_int(value, key));
      if (target < 1 || target > 3)
        throw ConfigError("conformity.target must be 1, 2, or 3");
      cfg.conformity_target = target;
    } else if (key == "polish.mode") {
      if (value == "static")
        cfg.polish_mode = PolishMode::StaticTemplate;
      else if (value == "live")
        cfg.polish_mode = PolishMode::LiveModel;
      else
        throw ConfigError("polish.mode must be static or live");
    } else if (key == "models") {
      model_order = split_csv(value);
    } else if (key.starts_with("model.")) {
      std::string rest = key.substr(6);
      std::size_t dot = rest.find('.');
      if (dot == std::string::npos)
        throw ConfigError("expected model.<key>.<field> in '" + key + "'");
      std::string model_key = rest.substr(0, dot);
      apply_endpoint_key(model_endpoints[model_key], rest.substr(dot + 1),
                         value, key);
    } else if (key.starts_with("judge.")) {
      judge_seen = true;
      apply_endpoint_key(judge_ep, key.substr(6), value, key);
    } else {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": unknown config key '" + key + "'");
    }
  }

  if (judging_kinds || choice_kinds) {
    cfg.fewshot_kinds.clear();
    auto defaults = default_fewshot_kinds();
    std::vector<ExemplarKind> j =
        judging_kinds.value_or(std::vector<ExemplarKind>(defaults.begin(),
                                                         defaults.begin() + 3));
    std::vector<ExemplarKind> c =
        choice_kinds.value_or(std::vector<ExemplarKind>(defaults.begin() + 3,
                                                        defaults.end()));
    cfg.fewshot_kinds.insert(cfg.fewshot_kinds.end(), j.begin(), j.end());
    cfg.fewshot_kinds.insert(cfg.fewshot_kinds.end(), c.begin(), c.end());
  }

  for (const std::string& key : model_order) {
    auto it = model_endpoints.find(key);
    if (it == model_endpoints.end())
      throw ConfigError("model '" + key + "' listed but has no model." + key +
                        ".* keys");
    ModelSpec spec{key, it->second};
    if (spec.endpoint.model_name.empty()) spec.endpoint.model_name = key;
    cfg.models.push_back(std::move(spec));
    model_endpoints.erase(it);
  }
  if (!model_endpoints.empty())
    throw ConfigError("model '" + model_endpoints.begin()->first +
                      "' configured but missing from the 'models' list");
  if (judge_seen) {
    ModelSpec spec{"judge", judge_ep};
    if (spec.endpoint.model_name.empty())
      throw ConfigError("judge.name is required when a judge is configured");
    spec.key = sanitize_path_component("judge-" + spec.endpoint.model_name);
    cfg.judge = std::move(spec);
  }
  if (cfg.settings.empty())
    cfg.settings.assign(std::begin(kAllSettings), std::end(kAllSettings));
  if (cfg.cassette_dir.empty())
    cfg.cassette_dir = cfg.output_dir + "/cassettes";
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

// ---------------------------------------------------------------------------
// Prepare
// ---------------------------------------------------------------------------

namespace {

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void count_classes(FormBundle& fb) {
  fb.n_tense = fb.n_sparse = 0;
  for (const Sample& s : fb.complete)
    (s.label_class == LabelClass::Tense ? fb.n_tense : fb.n_sparse) += 1;
}

}  // namespace

PreparedBundle prepare(const RunConfig& cfg) {
  if (cfg.corpus_paths.empty())
    throw ConfigError("no corpus paths configured (corpus.<form> keys)");

  PreparedBundle bundle;
  bundle.seed = cfg.seed;

  std::string fingerprint_src = "seed:" + std::to_string(cfg.seed);
  for (const auto& [form, path] : cfg.corpus_paths) {
    fingerprint_src += "|";
    fingerprint_src += form_key(form);
    fingerprint_src += ":";
    fingerprint_src += file_bytes(path);
  }
  bundle.fingerprint = hex64(fnv1a64(fingerprint_src));

  for (const auto& [form, path] : cfg.corpus_paths) {
    std::vector<Sample> raw = load_corpus(path, form);
    FormBundle fb;
    fb.form = form;
    switch (form) {
      case DatasetForm::Judging:
        fb.complete =
            derive_judging_split(raw, derive_seed(cfg.seed, "judging-balance"));
        break;
      case DatasetForm::SingleChoice:
        fb.complete =
            apply_label_modification(std::move(raw),
                                     derive_seed(cfg.seed, "label-modification"));
        for (const Sample& s : fb.complete)
          fb.insufficient.push_back(make_insufficient_variant(
              s, derive_seed(cfg.seed, "insufficient/" + s.id)));
        break;
      case DatasetForm::MultiChoice:
        for (Sample& s : raw) {
          if (s.gold.kind == GoldLabel::Kind::Options &&
              s.gold.options.size() >= 2)
            fb.complete.push_back(combine_multi_answers(s));
          else
            fb.complete.push_back(std::move(s));
        }
        for (const Sample& s : fb.complete)
          fb.insufficient.push_back(make_insufficient_variant(
              s, derive_seed(cfg.seed, "insufficient/" + s.id)));
        break;
    }
    count_classes(fb);
    bundle.forms.emplace(form, std::move(fb));
  }
  return bundle;
}

void save_bundle(const PreparedBundle& bundle, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["seed"] = bundle.seed;
  manifest["fingerprint"] = bundle.fingerprint;
  json forms = json::object();
  for (const auto& [form, fb] : bundle.forms) {
    std::string key(form_key(form));
    save_corpus(fb.complete, dir + "/" + key + "_complete.jsonl");
    if (!fb.insufficient.empty())
      save_corpus(fb.insufficient, dir + "/" + key + "_insufficient.jsonl");
    forms[key] = {{"complete", fb.complete.size()},
                  {"insufficient", fb.insufficient.size()},
                  {"n_tense", fb.n_tense},
                  {"n_sparse", fb.n_sparse}};
  }
  manifest["forms"] = std::move(forms);
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw HarnessError("cannot write bundle manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

PreparedBundle load_bundle(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in)
    throw HarnessError("no bundle manifest in " + dir + " (run prepare first)");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw HarnessError("corrupt bundle manifest: " + std::string(e.what()));
  }
  PreparedBundle bundle;
  bundle.seed = manifest.at("seed").get<std::uint64_t>();
  bundle.fingerprint = manifest.at("fingerprint").get<std::string>();
  for (const auto& [key, counts] : manifest.at("forms").items()) {
    auto form = form_from_key(key);
    if (!form) throw HarnessError("unknown form in manifest: " + key);
    FormBundle fb;
    fb.form = *form;
    fb.complete = load_corpus(dir + "/" + key + "_complete.jsonl", *form);
    if (counts.value("insufficient", 0) > 0)
      fb.insufficient =
          load_corpus(dir + "/" + key + "_insufficient.jsonl", *form);
    count_classes(fb);
    bundle.forms.emplace(*form, std::move(fb));
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

std::string CellKey::name() const {
  std::string base(setting_key(setting));
  if (miscellany_n) base += "_n" + std::to_string(*miscellany_n);
  return base;
}

std::vector<Setting> settings_in_order(const RunConfig& cfg) {
  std::vector<Setting> requested = cfg.settings;
  if (requested.empty())
    requested.assign(std::begin(kAllSettings), std::end(kAllSettings));
  std::vector<Setting> ordered;
  bool any_biased = std::any_of(requested.begin(), requested.end(),
                                [](Setting s) {
                                  return s != Setting::VanillaScenario;
                                });
  if (any_biased) ordered.push_back(Setting::VanillaScenario);
  for (Setting s : requested) {
    if (std::find(ordered.begin(), ordered.end(), s) == ordered.end())
      ordered.push_back(s);
  }
  return ordered;
}

SettingConfig setting_config_for(const RunConfig& cfg, Setting setting,
                                 const std::string& sample_id,
                                 std::optional<int> miscellany_n) {
  SettingConfig scfg;
  scfg.conformity_target = cfg.conformity_target;
  scfg.fewshot_kinds = cfg.fewshot_kinds;
  scfg.polish_mode = cfg.polish_mode;
  if (setting == Setting::DisturbingMiscellany) {
    if (!miscellany_n)
      throw HarnessError("miscellany cell without an option count");
    scfg.miscellany_n = *miscellany_n;
    scfg.seed = derive_seed(cfg.seed, "miscellany/" + sample_id + "/n" +
                                          std::to_string(*miscellany_n));
  }
  return scfg;
}

std::vector<Sample> cell_samples(const PreparedBundle& bundle, Setting setting,
                                 DatasetForm form, const RunConfig& cfg,
                                 std::optional<int> miscellany_n) {
  auto it = bundle.forms.find(form);
  if (it == bundle.forms.end()) return {};
  if (!setting_supports_form(setting, form)) return {};
  const FormBundle& fb = it->second;

  if (setting == Setting::MissingGuidance && form != DatasetForm::Judging)
    return fb.insufficient;

  if (setting == Setting::DisturbingMiscellany) {
    if (!miscellany_n)
      throw HarnessError("miscellany cell without an option count");
    int n = *miscellany_n;
    std::vector<Sample> out;
    for (const Sample& s : fb.complete) {
      if (s.label_class != LabelClass::Tense) continue;
      if (s.gold.kind != GoldLabel::Kind::Options ||
          s.gold.options.size() != 1)
        continue;
      if (static_cast<int>(s.options.size()) < n) continue;
      out.push_back(apply_miscellany(
          s, n, derive_seed(cfg.seed, "miscellany/" + s.id + "/n" +
                                          std::to_string(n))));
    }
    return out;
  }

  return fb.complete;
}

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

namespace {

CellLog execute_cell(const RunConfig& cfg, const PreparedBundle& bundle,
                     const CellKey& key, const ResponderFactory& factory) {
  CellLog cell;
  cell.key = key;

  std::vector<Sample> jobs;
  for (DatasetForm form : {DatasetForm::Judging, DatasetForm::SingleChoice,
                           DatasetForm::MultiChoice}) {
    std::vector<Sample> samples =
        cell_samples(bundle, key.setting, form, cfg, key.miscellany_n);
    jobs.insert(jobs.end(), samples.begin(), samples.end());
  }
  if (jobs.empty()) return cell;

  std::shared_ptr<Responder> responder = factory(key.model, key.name());
  if (!responder)
    throw HarnessError("responder factory returned null for cell " +
                       key.model + "/" + key.name());

  std::vector<std::optional<Transcript>> slots(jobs.size());
  std::vector<std::string> failures;
  std::mutex failures_mu;
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Sample& s = jobs[i];
      try {
        SettingConfig scfg =
            setting_config_for(cfg, key.setting, s.id, key.miscellany_n);
        PromptPlan plan = render(s, key.setting, scfg);
        slots[i] = run_dialogue(plan, *responder, s, key.model, key.name());
      } catch (const std::exception& e) {
        std::lock_guard lock(failures_mu);
        failures.push_back(s.id + ": " + e.what());
      }
    }
  };

  std::size_t n_workers = std::min<std::size_t>(
      jobs.size(), static_cast<std::size_t>(std::max(1, cfg.concurrency)));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  std::sort(failures.begin(), failures.end());
  cell.failures = std::move(failures);
  for (auto& slot : slots)
    if (slot) cell.transcripts.push_back(std::move(*slot));

  double failure_rate =
      static_cast<double>(cell.failures.size()) / static_cast<double>(jobs.size());
  if (failure_rate > cfg.failure_budget) {
    cell.aborted = true;
    cell.abort_reason = std::to_string(cell.failures.size()) + " of " +
                        std::to_string(jobs.size()) +
                        " samples failed, over the failure budget";
  }
  return cell;
}

json transcript_to_json(const Transcript& t) {
  json turns = json::array();
  for (const TranscriptTurn& turn : t.turns) {
    turns.push_back({{"prompt_text", turn.prompt_text},
                     {"response_text", turn.response_text},
                     {"fingerprint", turn.fingerprint},
                     {"latency_ms", turn.latency_ms}});
  }
  return json{{"sample_id", t.sample_id},
              {"setting", t.setting},
              {"model", t.model},
              {"form", std::string(form_key(t.form))},
              {"responder", std::string(responder_kind_key(t.responder))},
              {"request_fingerprint", t.request_fingerprint},
              {"turns", std::move(turns)}};
}

Transcript transcript_from_json(const json& j) {
  Transcript t;
  t.sample_id = j.at("sample_id").get<std::string>();
  t.setting = j.at("setting").get<std::string>();
  t.model = j.at("model").get<std::string>();
  auto form = form_from_key(j.at("form").get<std::string>());
  if (!form) throw HarnessError("run log carries an unknown form");
  t.form = *form;
  std::string kind = j.at("responder").get<std::string>();
  t.responder = kind == "live"     ? ResponderKind::Live
                : kind == "replay" ? ResponderKind::Replay
                                   : ResponderKind::Scripted;
  t.request_fingerprint = j.at("request_fingerprint").get<std::string>();
  for (const json& turn : j.at("turns")) {
    t.turns.push_back({turn.at("prompt_text").get<std::string>(),
                       turn.at("response_text").get<std::string>(),
                       turn.at("fingerprint").get<std::string>(),
                       turn.at("latency_ms").get<long long>()});
  }
  return t;
}

std::string cell_log_path(const CellKey& key, const std::string& dir) {
  return dir + "/" + sanitize_path_component(key.model) + "/" +
         sanitize_path_component(key.name()) + ".jsonl";
}

}  // namespace

void save_cell_log(const CellLog& log, const std::string& fingerprint,
                   const std::string& dir) {
  std::string path = cell_log_path(log.key, dir);
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw HarnessError("cannot write run log: " + path);
  json header{{"type", "header"},
              {"model", log.key.model},
              {"setting", std::string(setting_key(log.key.setting))},
              {"bundle_fingerprint", fingerprint},
              {"complete", true},
              {"aborted", log.aborted},
              {"abort_reason", log.abort_reason},
              {"failures", log.failures}};
  if (log.key.miscellany_n) header["miscellany_n"] = *log.key.miscellany_n;
  out << header.dump() << '\n';
  for (const Transcript& t : log.transcripts)
    out << transcript_to_json(t).dump() << '\n';
}

std::optional<CellLog> try_load_cell_log(const CellKey& key,
                                         const std::string& fingerprint,
                                         const std::string& dir) {
  std::ifstream in(cell_log_path(key, dir));
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  CellLog log;
  log.key = key;
  try {
    json header = json::parse(line);
    if (header.value("type", "") != "header") return std::nullopt;
    if (header.value("bundle_fingerprint", "") != fingerprint)
      return std::nullopt;
    if (!header.value("complete", false)) return std::nullopt;
    log.aborted = header.value("aborted", false);
    log.abort_reason = header.value("abort_reason", "");
    log.failures = header.value("failures", std::vector<std::string>());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      log.transcripts.push_back(transcript_from_json(json::parse(line)));
    }
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return log;
}

RunLog run(const RunConfig& cfg, const PreparedBundle& bundle,
           const ResponderFactory& factory, const std::string* resume_dir) {
  RunLog log;
  for (const ModelSpec& model : cfg.models) {
    for (Setting setting : settings_in_order(cfg)) {
      std::vector<CellKey> keys;
      if (setting == Setting::DisturbingMiscellany) {
        for (int n : cfg.miscellany_n)
          keys.push_back({model.key, setting, n});
      } else {
        keys.push_back({model.key, setting, std::nullopt});
      }
      for (const CellKey& key : keys) {
        if (resume_dir != nullptr) {
          if (auto cached =
                  try_load_cell_log(key, bundle.fingerprint, *resume_dir)) {
            log.cells.push_back(std::move(*cached));
            continue;
          }
        }
        CellLog cell = execute_cell(cfg, bundle, key, factory);
        if (resume_dir != nullptr)
          save_cell_log(cell, bundle.fingerprint, *resume_dir);
        log.cells.push_back(std::move(cell));
      }
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Score
// ---------------------------------------------------------------------------

namespace {

bool grade(const Sample& sample, const ParsedLabel& label) {
  if (label.kind == ParsedKind::Unmatched) return false;
  if (sample.form == DatasetForm::Judging)
    return label.kind == ParsedKind::Verdict &&
           label.verdict == sample.gold.verdict;
  if (label.kind == ParsedKind::Verdict) return false;
  return validate_choice(label, sample.gold);
}

void add_histogram(ReportCell& cell, const std::vector<EvalRecord>& records) {
  std::size_t judging_total = 0, choice_total = 0;
  std::map<std::string, std::size_t> counts;
  for (const EvalRecord& r : records) {
    if (r.form == DatasetForm::Judging) {
      ++judging_total;
      if (r.predicted.kind == ParsedKind::Verdict) {
        switch (r.predicted.verdict) {
          case Verdict::Unknown: ++counts["unknown"]; break;
          case Verdict::True: ++counts["true"]; break;
          case Verdict::False: ++counts["false"]; break;
        }
      } else {
        ++counts["judging_other"];
      }
    } else {
      ++choice_total;
      switch (r.predicted.kind) {
        case ParsedKind::NoAnswer:
          ++counts["all_wrong"];
          break;
        case ParsedKind::Options:
          ++(r.predicted.options.size() == 1 ? counts["single"]
                                             : counts["multiple"]);
          break;
        default:
          ++counts["choice_other"];
          break;
      }
    }
  }
  auto emit = [&](const char* key, std::size_t total) {
    if (total > 0)
      cell.label_histogram[key] =
          static_cast<double>(counts[key]) / static_cast<double>(total);
  };
  emit("unknown", judging_total);
  emit("true", judging_total);
  emit("false", judging_total);
  emit("judging_other", judging_total);
  emit("single", choice_total);
  emit("multiple", choice_total);
  emit("all_wrong", choice_total);
  emit("choice_other", choice_total);
}

}  // namespace

std::vector<ReportCell> score(const RunLog& log, const PreparedBundle& bundle,
                              const RunConfig& cfg,
                              const ResponderFactory& factory,
                              const ExtractionObserver* observer) {
  std::vector<ReportCell> cells;
  // (model, form) -> vanilla accuracy, for RR.
  std::map<std::pair<std::string, DatasetForm>, double> vanilla_acc;

  for (const CellLog& cell_log : log.cells) {
    ReportCell cell;
    cell.model = cell_log.key.model;
    cell.setting = cell_log.key.setting;
    cell.miscellany_n = cell_log.key.miscellany_n;
    if (cell_log.aborted) {
      cell.aborted = true;
      cell.abort_reason = cell_log.abort_reason;
      cells.push_back(std::move(cell));
      continue;
    }

    std::map<DatasetForm, std::map<std::string, Sample>> samples_by_form;
    for (DatasetForm form : {DatasetForm::Judging, DatasetForm::SingleChoice,
                             DatasetForm::MultiChoice}) {
      for (Sample& s : cell_samples(bundle, cell_log.key.setting, form, cfg,
                                    cell_log.key.miscellany_n))
        samples_by_form[form].emplace(s.id, std::move(s));
    }

    std::shared_ptr<Responder> judge_responder;
    if (cfg.judge) judge_responder = factory(cfg.judge->key, cell_log.key.name());

    JudgeStats stats;
    std::map<DatasetForm, std::vector<EvalRecord>> records_by_form;
    std::vector<EvalRecord> all_records;

    for (const Transcript& t : cell_log.transcripts) {
      auto form_it = samples_by_form.find(t.form);
      if (form_it == samples_by_form.end() ||
          form_it->second.find(t.sample_id) == form_it->second.end())
        throw HarnessError("run log sample '" + t.sample_id +
                           "' is not part of cell " + cell_log.key.model + "/" +
                           cell_log.key.name() +
                           " (bundle/log mismatch; re-run prepare)");
      const Sample& sample = form_it->second.at(t.sample_id);

      CompleteFn judge_fn;
      if (judge_responder) {
        judge_fn = judge_responder->as_complete_fn(
            {sample.id,
             sanitize_path_component(cfg.judge->key) + "/" +
                 cell_log.key.name(),
             0});
      }
      ExtractOutcome outcome =
          extract(t, sample, judge_fn ? &judge_fn : nullptr, &stats);

      EvalRecord record;
      record.sample_id = sample.id;
      record.form = sample.form;
      record.label_class = sample.label_class;
      record.gold = sample.gold;
      record.predicted = outcome.label;
      record.parseable = outcome.label.kind != ParsedKind::Unmatched;
      record.correct = grade(sample, outcome.label);
      record.judge_used = outcome.judge_used;
      record.setting = cell_log.key.name();
      if (observer != nullptr && *observer)
        (*observer)(cell_log.key, record, outcome);
      records_by_form[sample.form].push_back(record);
      all_records.push_back(std::move(record));
    }

    std::vector<std::pair<double, double>> rs_terms;
    for (const auto& [form, records] : records_by_form) {
      if (records.empty()) continue;
      FormCellMetrics metrics;
      metrics.bundle = compute_bundle(records);
      auto vit = vanilla_acc.find({cell.model, form});
      if (cell.setting == Setting::VanillaScenario) {
        if (!cell.miscellany_n)
          vanilla_acc[{cell.model, form}] = metrics.bundle.acc;
        metrics.rr = 0.0;
      } else if (vit != vanilla_acc.end()) {
        metrics.rr = robustness_rate(vit->second, metrics.bundle.acc);
      } else {
        std::cerr << "warning: no vanilla cell for model '" << cell.model
                  << "' form '" << form_key(form)
                  << "'; RR omitted for setting '"
                  << setting_key(cell.setting) << "'\n";
      }
      if (metrics.bundle.sr && metrics.bundle.gr)
        rs_terms.emplace_back(*metrics.bundle.sr, *metrics.bundle.gr);
      cell.per_form.emplace(form, std::move(metrics));
    }
    if (!rs_terms.empty()) cell.rs = robustness_score(rs_terms);
    cell.judge_ratio = stats.ratio();
    cell.judge_calls = stats.judge_needed.load();
    cell.extracted_total = stats.total.load();
    add_histogram(cell, all_records);
    cells.push_back(std::move(cell));
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Responder hub
// ---------------------------------------------------------------------------

namespace {

// Loads the cassette on first use so replay cells whose cassette is never
// queried (e.g. a judge that is never needed) do not fail spuriously.
class LazyReplayResponder : public Responder {
 public:
  explicit LazyReplayResponder(std::string path) : path_(std::move(path)) {}

  std::string complete(const std::vector<ChatMessage>& messages,
                       const RequestContext& ctx) override {
    {
      std::lock_guard lock(mu_);
      if (!replay_) {
        if (!fs::exists(path_))
          throw EndpointError("replay mode requires a cassette at " + path_,
                              false);
        replay_.emplace(Cassette::load(path_));
      }
    }
    return replay_->complete(messages, ctx);
  }

  ResponderKind kind() const override { return ResponderKind::Replay; }

 private:
  std::string path_;
  std::mutex mu_;
  std::optional<ReplayResponder> replay_;
};

}  // namespace

struct ResponderHub::Entry {
  std::shared_ptr<Responder> responder;
  std::shared_ptr<Responder> inner;  // keeps the recorded target alive
  std::shared_ptr<Cassette> cassette;
  std::string path;
};

ResponderHub::ResponderHub(ResponderMode mode, std::string cassette_dir,
                           ResponderFactory inner)
    : mode_(mode), cassette_dir_(std::move(cassette_dir)),
      inner_(std::move(inner)) {}

ResponderHub::~ResponderHub() {
  try {
    flush();
  } catch (const std::exception& e) {
    std::cerr << "warning: cassette flush failed: " << e.what() << '\n';
  }
}

std::shared_ptr<Responder> ResponderHub::for_cell(
    const std::string& model_key, const std::string& cell_name) {
  std::string rel = sanitize_path_component(model_key) + "/" +
                    sanitize_path_component(cell_name);
  std::lock_guard lock(mu_);
  auto it = entries_.find(rel);
  if (it != entries_.end()) return it->second->responder;

  auto entry = std::make_shared<Entry>();
  entry->path = cassette_dir_ + "/" + rel + ".jsonl";
  switch (mode_) {
    case ResponderMode::Live:
      entry->responder = inner_(model_key, cell_name);
      break;
    case ResponderMode::Record: {
      entry->inner = inner_(model_key, cell_name);
      entry->cassette = std::make_shared<Cassette>();
      if (fs::exists(entry->path))
        *entry->cassette = Cassette::load(entry->path);
      entry->responder =
          std::make_shared<RecordingResponder>(*entry->inner, *entry->cassette);
      break;
    }
    case ResponderMode::Replay:
      entry->responder = std::make_shared<LazyReplayResponder>(entry->path);
      break;
  }
  entries_.emplace(rel, entry);
  return entry->responder;
}

ResponderFactory ResponderHub::factory() {
  return [this](const std::string& model_key, const std::string& cell_name) {
    return this->for_cell(model_key, cell_name);
  };
}

void ResponderHub::flush() {
  std::lock_guard lock(mu_);
  if (mode_ != ResponderMode::Record) return;
  for (const auto& [rel, entry] : entries_) {
    if (!entry->cassette) continue;
    fs::create_directories(fs::path(entry->path).parent_path());
    entry->cassette->save(entry->path);
  }
}

}  // namespace ibeval
