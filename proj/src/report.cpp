#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ibeval/harness.hpp"

namespace ibeval {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Scored-cell persistence (full-precision fractions)
// ---------------------------------------------------------------------------

namespace {

json optional_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::optional<double> optional_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json bundle_to_json(const FormCellMetrics& m) {
  return json{{"acc", m.bundle.acc},
              {"sr", optional_to_json(m.bundle.sr)},
              {"gr", optional_to_json(m.bundle.gr)},
              {"or_tense", m.bundle.or_tense},
              {"or_sparse", m.bundle.or_sparse},
              {"or_other", m.bundle.or_other},
              {"fr", m.bundle.fr},
              {"n", m.bundle.n},
              {"n_tense", m.bundle.n_tense},
              {"n_sparse", m.bundle.n_sparse},
              {"n_unparseable", m.bundle.n_unparseable},
              {"rr", optional_to_json(m.rr)}};
}

FormCellMetrics bundle_from_json(const json& j) {
  FormCellMetrics m;
  m.bundle.acc = j.at("acc").get<double>();
  m.bundle.sr = optional_from_json(j, "sr");
  m.bundle.gr = optional_from_json(j, "gr");
  m.bundle.or_tense = j.at("or_tense").get<double>();
  m.bundle.or_sparse = j.at("or_sparse").get<double>();
  m.bundle.or_other = j.at("or_other").get<double>();
  m.bundle.fr = j.at("fr").get<double>();
  m.bundle.n = j.at("n").get<std::size_t>();
  m.bundle.n_tense = j.at("n_tense").get<std::size_t>();
  m.bundle.n_sparse = j.at("n_sparse").get<std::size_t>();
  m.bundle.n_unparseable = j.at("n_unparseable").get<std::size_t>();
  m.rr = optional_from_json(j, "rr");
  return m;
}

}  // namespace

void save_cells(const std::vector<ReportCell>& cells, const std::string& path,
                const std::string& bundle_fingerprint) {
  json out = json::array();
  for (const ReportCell& cell : cells) {
    json per_form = json::object();
    for (const auto& [form, metrics] : cell.per_form)
      per_form[std::string(form_key(form))] = bundle_to_json(metrics);
    json entry{{"model", cell.model},
               {"setting", std::string(setting_key(cell.setting))},
               {"per_form", std::move(per_form)},
               {"rs", optional_to_json(cell.rs)},
               {"judge_ratio", cell.judge_ratio},
               {"judge_calls", cell.judge_calls},
               {"extracted_total", cell.extracted_total},
               {"label_histogram", cell.label_histogram},
               {"aborted", cell.aborted},
               {"abort_reason", cell.abort_reason}};
    if (cell.miscellany_n) entry["miscellany_n"] = *cell.miscellany_n;
    out.push_back(std::move(entry));
  }
  json doc{{"bundle_fingerprint", bundle_fingerprint},
           {"cells", std::move(out)}};
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream f(path);
  if (!f) throw HarnessError("cannot write scores: " + path);
  f << doc.dump(2) << '\n';
}

namespace {

json read_scores_doc(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw HarnessError("cannot open scores: " + path +
                             " (run score first)");
  json in;
  try {
    f >> in;
  } catch (const json::exception& e) {
    throw HarnessError("corrupt scores file: " + std::string(e.what()));
  }
  return in;
}

}  // namespace

std::string load_cells_fingerprint(const std::string& path) {
  return read_scores_doc(path).value("bundle_fingerprint", std::string());
}

std::vector<ReportCell> load_cells(const std::string& path) {
  json in = read_scores_doc(path);
  std::vector<ReportCell> cells;
  for (const json& entry : in.at("cells")) {
    ReportCell cell;
    cell.model = entry.at("model").get<std::string>();
    auto setting = setting_from_key(entry.at("setting").get<std::string>());
    if (!setting) throw HarnessError("scores file carries an unknown setting");
    cell.setting = *setting;
    if (entry.contains("miscellany_n") && !entry.at("miscellany_n").is_null())
      cell.miscellany_n = entry.at("miscellany_n").get<int>();
    for (const auto& [key, metrics] : entry.at("per_form").items()) {
      auto form = form_from_key(key);
      if (!form) throw HarnessError("scores file carries an unknown form");
      cell.per_form.emplace(*form, bundle_from_json(metrics));
    }
    cell.rs = optional_from_json(entry, "rs");
    cell.judge_ratio = entry.at("judge_ratio").get<double>();
    cell.judge_calls = entry.value("judge_calls", std::size_t{0});
    cell.extracted_total = entry.value("extracted_total", std::size_t{0});
    cell.label_histogram =
        entry.value("label_histogram", std::map<std::string, double>());
    cell.aborted = entry.value("aborted", false);
    cell.abort_reason = entry.value("abort_reason", "");
    cells.push_back(std::move(cell));
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Report tables
// ---------------------------------------------------------------------------

std::vector<ReportFormat> parse_formats(const std::string& list) {
  std::vector<ReportFormat> out;
  std::string item;
  std::stringstream ss(list);
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front())))
      item.erase(item.begin());
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back())))
      item.pop_back();
    if (item.empty()) continue;
    if (item == "text")
      out.push_back(ReportFormat::Text);
    else if (item == "csv")
      out.push_back(ReportFormat::Csv);
    else if (item == "json")
      out.push_back(ReportFormat::Json);
    else
      throw ConfigError("unknown report format '" + item +
                        "'; supported formats: text, csv, json");
  }
  if (out.empty())
    throw ConfigError("no report format given; supported formats: text, csv, "
                      "json");
  return out;
}

namespace {

// A table cell is either absent, a label, or a percentage rendered to two
// decimals. Keeping the rendered string as the single source makes text,
// CSV, and JSON agree bit-for-bit on values.
struct Cell {
  enum class Kind { Empty, Text, Percent } kind = Kind::Empty;
  std::string text;

  static Cell empty() { return {}; }
  static Cell label(std::string t) {
    return {Kind::Text, std::move(t)};
  }
  static Cell percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
    return {Kind::Percent, buf};
  }
  static Cell percent_opt(const std::optional<double>& fraction) {
    if (!fraction) return empty();
    return percent(*fraction);
  }
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  // Extra JSON-only annotations (e.g. which columns have printed
  // counterparts in the literature's table layout).
  ordered_json annotations = ordered_json::object();
};

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_table_text(const Table& table, std::ostream& out) {
  std::vector<std::size_t> widths(table.columns.size());
  auto cell_text = [](const Cell& c) {
    return c.kind == Cell::Kind::Empty ? std::string("-") : c.text;
  };
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    widths[i] = table.columns[i].size();
  for (const auto& row : table.rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      widths[i] = std::max(widths[i], cell_text(row[i]).size());

  auto emit_row = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      out << fields[i];
      if (i + 1 < fields.size())
        out << std::string(widths[i] - fields[i].size() + 2, ' ');
    }
    out << '\n';
  };
  emit_row(table.columns);
  std::size_t total = 0;
  for (std::size_t w : widths) total += w + 2;
  out << std::string(total > 2 ? total - 2 : total, '-') << '\n';
  for (const auto& row : table.rows) {
    std::vector<std::string> fields;
    for (const Cell& c : row) fields.push_back(cell_text(c));
    emit_row(fields);
  }
}

void write_table_csv(const Table& table, std::ostream& out) {
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(table.columns[i]);
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      if (row[i].kind != Cell::Kind::Empty) out << csv_escape(row[i].text);
    }
    out << '\n';
  }
}

void write_table_json(const Table& table, std::ostream& out) {
  ordered_json doc;
  doc["table"] = table.name;
  doc["columns"] = table.columns;
  for (const auto& [key, value] : table.annotations.items()) doc[key] = value;
  ordered_json rows = ordered_json::array();
  for (const auto& row : table.rows) {
    ordered_json obj = ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      const Cell& c = row[i];
      if (c.kind == Cell::Kind::Empty)
        obj[table.columns[i]] = nullptr;
      else if (c.kind == Cell::Kind::Percent)
        obj[table.columns[i]] = std::stod(c.text);
      else
        obj[table.columns[i]] = c.text;
    }
    rows.push_back(std::move(obj));
  }
  doc["rows"] = std::move(rows);
  out << doc.dump(2) << '\n';
}

void write_table(const Table& table, const std::vector<ReportFormat>& formats,
                 const std::string& dir) {
  fs::create_directories(dir);
  for (ReportFormat format : formats) {
    const char* ext = format == ReportFormat::Text  ? "txt"
                      : format == ReportFormat::Csv ? "csv"
                                                    : "json";
    std::string path = dir + "/" + table.name + "." + ext;
    std::ofstream out(path);
    if (!out) throw HarnessError("cannot write report file: " + path);
    switch (format) {
      case ReportFormat::Text: write_table_text(table, out); break;
      case ReportFormat::Csv: write_table_csv(table, out); break;
      case ReportFormat::Json: write_table_json(table, out); break;
    }
  }
}

const FormCellMetrics* form_metrics(const ReportCell& cell, DatasetForm form) {
  auto it = cell.per_form.find(form);
  return it == cell.per_form.end() ? nullptr : &it->second;
}

std::vector<std::string> models_in_order(const std::vector<ReportCell>& cells) {
  std::vector<std::string> models;
  for (const ReportCell& c : cells)
    if (std::find(models.begin(), models.end(), c.model) == models.end())
      models.push_back(c.model);
  return models;
}

std::vector<Setting> settings_present(const std::vector<ReportCell>& cells,
                                      bool include_miscellany) {
  std::vector<Setting> settings;
  for (const ReportCell& c : cells) {
    if (!include_miscellany && c.setting == Setting::DisturbingMiscellany)
      continue;
    if (std::find(settings.begin(), settings.end(), c.setting) ==
        settings.end())
      settings.push_back(c.setting);
  }
  return settings;
}

Table build_main_results(const std::vector<ReportCell>& cells) {
  Table t;
  t.name = "main_results";
  t.columns = {"Model",   "Setting", "Acc_b^1", "SR^1",  "GR^1", "Acc_b^2",
               "SR^2",    "GR^2",    "Acc_b^3", "SR^3",  "GR^3", "RR^1",
               "RR^2",    "RR^3",    "RS",      "JudgeRatio",    "Error"};
  // Multi-choice Acc/SR have no published counterpart; GR^3 does.
  t.annotations["published_columns"] = {"Acc_b^1", "SR^1", "GR^1", "Acc_b^2",
                                    "SR^2",    "GR^2", "GR^3"};
  constexpr DatasetForm kForms[] = {DatasetForm::Judging,
                                    DatasetForm::SingleChoice,
                                    DatasetForm::MultiChoice};
  for (const ReportCell& cell : cells) {
    if (cell.miscellany_n) continue;
    std::vector<Cell> row;
    row.push_back(Cell::label(cell.model));
    row.push_back(Cell::label(std::string(setting_display_name(cell.setting))));
    for (DatasetForm form : kForms) {
      const FormCellMetrics* m = form_metrics(cell, form);
      row.push_back(m ? Cell::percent(m->bundle.acc) : Cell::empty());
      row.push_back(m ? Cell::percent_opt(m->bundle.sr) : Cell::empty());
      row.push_back(m ? Cell::percent_opt(m->bundle.gr) : Cell::empty());
    }
    for (DatasetForm form : kForms) {
      const FormCellMetrics* m = form_metrics(cell, form);
      row.push_back(m ? Cell::percent_opt(m->rr) : Cell::empty());
    }
    row.push_back(Cell::percent_opt(cell.rs));
    row.push_back(cell.aborted ? Cell::empty() : Cell::percent(cell.judge_ratio));
    row.push_back(cell.aborted ? Cell::label(cell.abort_reason) : Cell::empty());
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table build_miscellany(const std::vector<ReportCell>& cells) {
  Table t;
  t.name = "miscellany_accuracy";
  std::vector<int> ns;
  for (const ReportCell& c : cells)
    if (c.miscellany_n &&
        std::find(ns.begin(), ns.end(), *c.miscellany_n) == ns.end())
      ns.push_back(*c.miscellany_n);
  std::sort(ns.begin(), ns.end());

  t.columns = {"Model"};
  for (int n : ns) t.columns.push_back(std::to_string(n));

  for (const std::string& model : models_in_order(cells)) {
    bool has_any = false;
    std::vector<Cell> row;
    row.push_back(Cell::label(model));
    for (int n : ns) {
      Cell value = Cell::empty();
      for (const ReportCell& c : cells) {
        if (c.model != model || !c.miscellany_n || *c.miscellany_n != n)
          continue;
        if (const FormCellMetrics* m =
                form_metrics(c, DatasetForm::SingleChoice)) {
          value = Cell::percent(m->bundle.acc);
          has_any = true;
        }
      }
      row.push_back(value);
    }
    if (has_any) t.rows.push_back(std::move(row));
  }
  return t;
}

Table build_output_distribution(const std::vector<ReportCell>& cells) {
  Table t;
  t.name = "output_distribution";
  t.columns = {"Model",        "Setting",  "Unknown",  "True",
               "False",        "OtherJudging", "SingleChoice",
               "MultipleChoices", "AllWrong", "OtherChoice",
               "FR^1",         "FR^2",     "FR^3"};
  constexpr const char* kJudgingKeys[] = {"unknown", "true", "false",
                                          "judging_other"};
  constexpr const char* kChoiceKeys[] = {"single", "multiple", "all_wrong",
                                         "choice_other"};
  for (const ReportCell& cell : cells) {
    if (cell.miscellany_n || cell.aborted) continue;
    std::vector<Cell> row;
    row.push_back(Cell::label(cell.model));
    row.push_back(Cell::label(std::string(setting_display_name(cell.setting))));
    auto hist = [&](const char* key) {
      auto it = cell.label_histogram.find(key);
      return it == cell.label_histogram.end() ? Cell::empty()
                                              : Cell::percent(it->second);
    };
    for (const char* key : kJudgingKeys) row.push_back(hist(key));
    for (const char* key : kChoiceKeys) row.push_back(hist(key));
    for (DatasetForm form : {DatasetForm::Judging, DatasetForm::SingleChoice,
                             DatasetForm::MultiChoice}) {
      const FormCellMetrics* m = form_metrics(cell, form);
      row.push_back(m ? Cell::percent(m->bundle.fr) : Cell::empty());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table build_rs_leaderboard(const std::vector<ReportCell>& cells) {
  Table t;
  t.name = "rs_leaderboard";
  std::vector<Setting> settings = settings_present(cells, false);
  t.columns = {"Model"};
  for (Setting s : settings)
    t.columns.push_back(std::string(setting_display_name(s)));
  for (const std::string& model : models_in_order(cells)) {
    std::vector<Cell> row{Cell::label(model)};
    for (Setting s : settings) {
      Cell value = Cell::empty();
      for (const ReportCell& c : cells)
        if (c.model == model && c.setting == s && !c.miscellany_n)
          value = Cell::percent_opt(c.rs);
      row.push_back(value);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table build_judge_usage(const std::vector<ReportCell>& cells) {
  Table t;
  t.name = "judge_usage";
  std::vector<Setting> settings = settings_present(cells, true);
  t.columns = {"Model"};
  for (Setting s : settings)
    t.columns.push_back(std::string(setting_display_name(s)));
  for (const std::string& model : models_in_order(cells)) {
    std::vector<Cell> row{Cell::label(model)};
    for (Setting s : settings) {
      // Miscellany sub-cells merge into one column.
      std::size_t judged = 0, total = 0;
      bool found = false;
      for (const ReportCell& c : cells) {
        if (c.model != model || c.setting != s || c.aborted) continue;
        judged += c.judge_calls;
        total += c.extracted_total;
        found = true;
      }
      if (found && total > 0)
        row.push_back(Cell::percent(static_cast<double>(judged) /
                                    static_cast<double>(total)));
      else
        row.push_back(found ? Cell::percent(0.0) : Cell::empty());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

void write_reports(const std::vector<ReportCell>& cells,
                   const std::vector<ReportFormat>& formats,
                   const std::string& dir) {
  if (cells.empty()) throw HarnessError("no scored cells to report");
  write_table(build_main_results(cells), formats, dir);
  Table misc = build_miscellany(cells);
  if (!misc.rows.empty()) write_table(misc, formats, dir);
  write_table(build_output_distribution(cells), formats, dir);
  write_table(build_rs_leaderboard(cells), formats, dir);
  write_table(build_judge_usage(cells), formats, dir);
}

}  // namespace ibeval
