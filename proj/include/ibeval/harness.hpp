#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ibeval/corpus.hpp"
#include "ibeval/extractor.hpp"
#include "ibeval/metrics.hpp"
#include "ibeval/modelclient.hpp"
#include "ibeval/promptfabric.hpp"

namespace ibeval {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ResponderMode { Live, Record, Replay };
std::string_view responder_mode_key(ResponderMode mode);

struct ModelSpec {
  std::string key;  // config key, also cassette/run-log path component
  EndpointConfig endpoint;
};

struct RunConfig {
  std::map<DatasetForm, std::string> corpus_paths;
  std::vector<ModelSpec> models;
  std::optional<ModelSpec> judge;
  std::vector<Setting> settings;  // empty = all eight
  std::vector<int> miscellany_n{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<ExemplarKind> fewshot_kinds{
      ExemplarKind::JudgingTrue,    ExemplarKind::JudgingFalse,
      ExemplarKind::JudgingUnknown, ExemplarKind::ChoiceSingle,
      ExemplarKind::ChoiceMulti,    ExemplarKind::ChoiceNoAnswer};
  int conformity_target = 1;
  PolishMode polish_mode = PolishMode::StaticTemplate;
  std::uint64_t seed = 0;
  int concurrency = 1;
  ResponderMode mode = ResponderMode::Replay;
  std::string output_dir = "out";
  std::string cassette_dir;  // default <output_dir>/cassettes
  double failure_budget = 0.10;
};

// Flat key-value config file: one "key = value" per line, '#' comments.
// Secrets stay in the environment (api_key_env names a variable).
RunConfig parse_config(std::istream& in, const std::string& origin);
RunConfig parse_config_file(const std::string& path);

struct FormBundle {
  DatasetForm form = DatasetForm::Judging;
  std::vector<Sample> complete;
  std::vector<Sample> insufficient;  // choice forms only
  std::size_t n_tense = 0;           // realized counts over `complete`
  std::size_t n_sparse = 0;
};

struct PreparedBundle {
  std::map<DatasetForm, FormBundle> forms;
  std::uint64_t seed = 0;
  std::string fingerprint;  // of (corpus bytes, seed)
};

// Applies the per-form transformations: judging balance, step-1 label
// modification plus step-2 insufficient variants for single-choice,
// multi-answer combination plus insufficient variants for multi-choice.
// Deterministic per seed; any corpus error aborts naming the sample.
PreparedBundle prepare(const RunConfig& cfg);
void save_bundle(const PreparedBundle& bundle, const std::string& dir);
PreparedBundle load_bundle(const std::string& dir);

struct CellKey {
  std::string model;  // ModelSpec::key
  Setting setting = Setting::VanillaScenario;
  std::optional<int> miscellany_n;

  std::string name() const;  // "conformity" or "miscellany_n3"
  bool operator==(const CellKey&) const = default;
};

struct CellLog {
  CellKey key;
  std::vector<Transcript> transcripts;
  std::vector<std::string> failures;  // "<sample_id>: <why>"
  bool aborted = false;
  std::string abort_reason;
};

struct RunLog {
  std::vector<CellLog> cells;
};

using ResponderFactory = std::function<std::shared_ptr<Responder>(
    const std::string& model_key, const std::string& cell_name)>;

// Settings in execution order; Vanilla is scheduled first whenever any
// other setting is requested (RR needs the vanilla accuracy).
std::vector<Setting> settings_in_order(const RunConfig& cfg);

// The samples a cell evaluates: insufficient variants for Missing
// Guidance on choice forms, seeded N-option reductions for miscellany,
// the complete set otherwise. Shared by run and score so extraction sees
// exactly what was rendered.
std::vector<Sample> cell_samples(const PreparedBundle& bundle, Setting setting,
                                 DatasetForm form, const RunConfig& cfg,
                                 std::optional<int> miscellany_n);

SettingConfig setting_config_for(const RunConfig& cfg, Setting setting,
                                 const std::string& sample_id,
                                 std::optional<int> miscellany_n);

// Executes every (model, setting, sample) cell under the bounded worker
// pool. Per-sample failures are recorded and the cell continues; more than
// failure_budget of a cell's samples failing aborts that cell. When
// resume_dir is given, completed cell logs found there are reused and new
// ones are persisted.
RunLog run(const RunConfig& cfg, const PreparedBundle& bundle,
           const ResponderFactory& factory,
           const std::string* resume_dir = nullptr);

void save_cell_log(const CellLog& log, const std::string& fingerprint,
                   const std::string& dir);
std::optional<CellLog> try_load_cell_log(const CellKey& key,
                                         const std::string& fingerprint,
                                         const std::string& dir);

struct FormCellMetrics {
  MetricsBundle bundle;
  std::optional<double> rr;  // |vanilla acc - this acc|, same model and form
};

struct ReportCell {
  std::string model;
  Setting setting = Setting::VanillaScenario;
  std::optional<int> miscellany_n;
  std::map<DatasetForm, FormCellMetrics> per_form;
  std::optional<double> rs;
  double judge_ratio = 0.0;
  std::size_t judge_calls = 0;
  std::size_t extracted_total = 0;
  // Label-level fractions for the output-distribution table: judging
  // ("unknown"/"true"/"false"/"judging_other") and pooled choice
  // ("single"/"multiple"/"all_wrong"/"choice_other").
  std::map<std::string, double> label_histogram;
  bool aborted = false;
  std::string abort_reason;
};

// Called once per extracted sample, in log order; used to append
// per-sample extraction outcomes to the run log.
using ExtractionObserver = std::function<void(
    const CellKey&, const EvalRecord&, const ExtractOutcome&)>;

// Extraction plus metrics per cell; judge fallback goes through the
// factory under the judge model's key. RR uses the same model's vanilla
// cell and is omitted (with a warning on stderr) when that cell is absent.
std::vector<ReportCell> score(const RunLog& log, const PreparedBundle& bundle,
                              const RunConfig& cfg,
                              const ResponderFactory& factory,
                              const ExtractionObserver* observer = nullptr);

void save_cells(const std::vector<ReportCell>& cells, const std::string& path,
                const std::string& bundle_fingerprint = "");
std::vector<ReportCell> load_cells(const std::string& path);
std::string load_cells_fingerprint(const std::string& path);

enum class ReportFormat { Text, Csv, Json };

// Comma-separated list, e.g. "text,csv,json"; unknown names raise a
// ConfigError listing the supported formats.
std::vector<ReportFormat> parse_formats(const std::string& list);

// Emits main results, miscellany accuracy-vs-N, output distribution, RS
// leaderboard, and judge usage under dir, one file per (table, format).
// Percentages are rendered to 2 decimals in every format.
void write_reports(const std::vector<ReportCell>& cells,
                   const std::vector<ReportFormat>& formats,
                   const std::string& dir);

// Cassette-backed responder wiring for the three modes. `inner` supplies
// the upstream responder (HTTP in production, scripted in tests); record
// mode tees every exchange into per-(model, cell) cassette files on
// flush(); replay mode loads them lazily and never touches `inner`.
class ResponderHub {
 public:
  ResponderHub(ResponderMode mode, std::string cassette_dir,
               ResponderFactory inner);
  ~ResponderHub();

  ResponderFactory factory();
  void flush();

 private:
  struct Entry;
  std::shared_ptr<Responder> for_cell(const std::string& model_key,
                                      const std::string& cell_name);

  ResponderMode mode_;
  std::string cassette_dir_;
  ResponderFactory inner_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> entries_;
};

std::string sanitize_path_component(std::string_view raw);

}  // namespace ibeval
