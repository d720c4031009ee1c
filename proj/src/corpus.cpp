#include "ibeval/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ibeval/rng.hpp"

namespace ibeval {

using nlohmann::json;

std::string_view form_key(DatasetForm form) {
  switch (form) {
    case DatasetForm::Judging: return "judging";
    case DatasetForm::SingleChoice: return "single";
    case DatasetForm::MultiChoice: return "multi";
  }
  return "judging";
}

std::optional<DatasetForm> form_from_key(std::string_view key) {
  if (key == "judging") return DatasetForm::Judging;
  if (key == "single") return DatasetForm::SingleChoice;
  if (key == "multi") return DatasetForm::MultiChoice;
  return std::nullopt;
}

GoldLabel GoldLabel::make_verdict(Verdict v) {
  GoldLabel g;
  g.kind = Kind::Verdict;
  g.verdict = v;
  return g;
}

GoldLabel GoldLabel::make_options(std::vector<int> indices) {
  GoldLabel g;
  g.kind = Kind::Options;
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  g.options = std::move(indices);
  return g;
}

GoldLabel GoldLabel::no_correct_answer() {
  GoldLabel g;
  g.kind = Kind::NoCorrectAnswer;
  return g;
}

namespace {

bool is_combined_option(const std::string& text) {
  return text.size() > kCombinedOptionSuffix.size() &&
         text.ends_with(kCombinedOptionSuffix);
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw CorpusError(where + ": " + what);
}

}  // namespace

LabelClass infer_label_class(DatasetForm form, const GoldLabel& gold,
                             const std::vector<std::string>& options) {
  switch (form) {
    case DatasetForm::Judging:
      if (gold.kind != GoldLabel::Kind::Verdict)
        throw CorpusError("judging sample requires a verdict gold label");
      return gold.verdict == Verdict::Unknown ? LabelClass::Sparse
                                              : LabelClass::Tense;
    case DatasetForm::SingleChoice:
      if (gold.kind == GoldLabel::Kind::NoCorrectAnswer)
        return LabelClass::Sparse;
      if (gold.options.size() == 1) {
        int idx = gold.options.front();
        if (idx >= 0 && idx < static_cast<int>(options.size()) &&
            options[static_cast<std::size_t>(idx)] == kAllWrongOptionText)
          return LabelClass::Sparse;
      }
      return LabelClass::Tense;
    case DatasetForm::MultiChoice:
      if (gold.kind == GoldLabel::Kind::NoCorrectAnswer)
        return LabelClass::Sparse;
      if (gold.options.size() >= 2) return LabelClass::Sparse;
      if (gold.options.size() == 1) {
        int idx = gold.options.front();
        if (idx >= 0 && idx < static_cast<int>(options.size()) &&
            is_combined_option(options[static_cast<std::size_t>(idx)]))
          return LabelClass::Sparse;
      }
      return LabelClass::Tense;
  }
  throw CorpusError("unreachable dataset form");
}

void validate_sample(const Sample& sample) {
  const std::string where = "sample '" + sample.id + "'";
  if (sample.id.empty()) fail(where, "empty id");

  if (sample.form == DatasetForm::Judging) {
    if (!sample.options.empty())
      fail(where, "judging sample must not carry an option list");
    if (sample.gold.kind != GoldLabel::Kind::Verdict)
      fail(where, "judging sample requires a verdict gold label");
  } else {
    if (sample.options.empty())
      fail(where, "choice sample requires a non-empty option list");
    if (sample.gold.kind == GoldLabel::Kind::Verdict)
      fail(where, "choice sample cannot carry a verdict gold label");
    if (sample.gold.kind == GoldLabel::Kind::Options) {
      if (sample.gold.options.empty())
        fail(where, "gold option set is empty");
      if (!std::is_sorted(sample.gold.options.begin(),
                          sample.gold.options.end()))
        fail(where, "gold option set is not sorted");
      if (std::adjacent_find(sample.gold.options.begin(),
                             sample.gold.options.end()) !=
          sample.gold.options.end())
        fail(where, "gold option set contains duplicates");
      for (int idx : sample.gold.options) {
        if (idx < 0 || idx >= static_cast<int>(sample.options.size()))
          fail(where, "gold index out of range: " + std::to_string(idx));
      }
      if (sample.form == DatasetForm::SingleChoice &&
          sample.gold.options.size() != 1)
        fail(where, "single-choice sample requires exactly one gold option");
    }
  }

  LabelClass expected =
      infer_label_class(sample.form, sample.gold, sample.options);
  if (sample.label_class != expected)
    fail(where, "label class inconsistent with gold label");
}

namespace {

Sample sample_from_json(const json& j, DatasetForm form,
                        const std::string& where) {
  Sample s;
  try {
    s.id = j.at("id").get<std::string>();
    std::string fkey = j.at("form").get<std::string>();
    auto parsed_form = form_from_key(fkey);
    if (!parsed_form) fail(where, "unknown form '" + fkey + "'");
    s.form = *parsed_form;
    s.question = j.at("question").get<std::string>();
    s.facts = j.value("facts", std::string());
    s.options = j.value("options", std::vector<std::string>());
    s.source = j.value("source", std::string());

    const json& gold = j.at("gold");
    if (gold.contains("verdict")) {
      std::string v = gold.at("verdict").get<std::string>();
      std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
      });
      if (v == "true")
        s.gold = GoldLabel::make_verdict(Verdict::True);
      else if (v == "false")
        s.gold = GoldLabel::make_verdict(Verdict::False);
      else if (v == "unknown")
        s.gold = GoldLabel::make_verdict(Verdict::Unknown);
      else
        fail(where, "unknown verdict '" + v + "'");
    } else if (gold.contains("options")) {
      s.gold = GoldLabel::make_options(gold.at("options").get<std::vector<int>>());
    } else if (gold.contains("none") && gold.at("none").get<bool>()) {
      s.gold = GoldLabel::no_correct_answer();
    } else {
      fail(where, "gold field carries none of verdict/options/none");
    }
  } catch (const json::exception& e) {
    fail(where, std::string("malformed record: ") + e.what());
  }

  if (s.form != form)
    fail(where, "record form '" + std::string(form_key(s.form)) +
                    "' does not match requested corpus form '" +
                    std::string(form_key(form)) + "'");
  s.label_class = infer_label_class(s.form, s.gold, s.options);
  validate_sample(s);
  return s;
}

}  // namespace

std::vector<Sample> parse_corpus(std::istream& in, DatasetForm form,
                                 const std::string& origin) {
  std::vector<Sample> samples;
  std::vector<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(where, std::string("invalid JSON: ") + e.what());
    }
    Sample s = sample_from_json(j, form, where);
    if (std::find(seen_ids.begin(), seen_ids.end(), s.id) != seen_ids.end())
      fail(where, "duplicate id '" + s.id + "'");
    seen_ids.push_back(s.id);
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<Sample> load_corpus(const std::string& path, DatasetForm form) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path);
  return parse_corpus(in, form, path);
}

std::string sample_to_jsonl(const Sample& sample) {
  json gold;
  switch (sample.gold.kind) {
    case GoldLabel::Kind::Verdict:
      gold["verdict"] = sample.gold.verdict == Verdict::True    ? "true"
                        : sample.gold.verdict == Verdict::False ? "false"
                                                                : "unknown";
      break;
    case GoldLabel::Kind::Options:
      gold["options"] = sample.gold.options;
      break;
    case GoldLabel::Kind::NoCorrectAnswer:
      gold["none"] = true;
      break;
  }
  json j{{"id", sample.id},
         {"form", std::string(form_key(sample.form))},
         {"question", sample.question},
         {"facts", sample.facts},
         {"options", sample.options},
         {"gold", gold},
         {"source", sample.source}};
  return j.dump();
}

void save_corpus(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write corpus file: " + path);
  for (const Sample& s : samples) out << sample_to_jsonl(s) << '\n';
}

std::vector<Sample> apply_label_modification(std::vector<Sample> samples,
                                             std::uint64_t seed) {
  for (const Sample& s : samples) {
    if (s.form != DatasetForm::SingleChoice)
      throw CorpusError("label modification requires single-choice samples; '" +
                        s.id + "' is not");
    if (s.label_class != LabelClass::Tense ||
        s.gold.kind != GoldLabel::Kind::Options)
      throw CorpusError(
          "label modification requires a tense gold (one correct option); '" +
          s.id + "' is not");
  }
  std::size_t half = (samples.size() + 1) / 2;
  for (std::size_t pos : sample_indices(samples.size(), half, seed)) {
    Sample& s = samples[pos];
    s.options[static_cast<std::size_t>(s.gold.options.front())] =
        std::string(kAllWrongOptionText);
    s.label_class = LabelClass::Sparse;
  }
  return samples;
}

std::vector<Sample> derive_judging_split(const std::vector<Sample>& samples,
                                         std::uint64_t seed) {
  std::vector<std::size_t> sparse_pos, tense_pos;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].form != DatasetForm::Judging)
      throw CorpusError("judging split requires judging samples; '" +
                        samples[i].id + "' is not");
    (samples[i].label_class == LabelClass::Sparse ? sparse_pos : tense_pos)
        .push_back(i);
  }
  if (sparse_pos.empty() != tense_pos.empty()) {
    throw CorpusError(
        "cannot balance: one label class is empty while the other has " +
        std::to_string(std::max(sparse_pos.size(), tense_pos.size())) +
        " samples");
  }
  std::size_t keep = std::min(sparse_pos.size(), tense_pos.size());

  auto subsample = [&](std::vector<std::size_t>& positions,
                       std::string_view tag) {
    if (positions.size() <= keep) return;
    SplitMix64 rng(derive_seed(seed, tag));
    seeded_shuffle(positions, rng);
    positions.resize(keep);
    std::sort(positions.begin(), positions.end());
  };
  subsample(sparse_pos, "judging-split/sparse");
  subsample(tense_pos, "judging-split/tense");

  std::vector<bool> retain(samples.size(), false);
  for (std::size_t i : sparse_pos) retain[i] = true;
  for (std::size_t i : tense_pos) retain[i] = true;
  std::vector<Sample> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (retain[i]) out.push_back(samples[i]);
  return out;
}

Sample combine_multi_answers(const Sample& sample) {
  if (sample.form != DatasetForm::MultiChoice)
    throw CorpusError("combine requires a multi-choice sample; '" + sample.id +
                      "' is not");
  if (sample.gold.kind != GoldLabel::Kind::Options ||
      sample.gold.options.size() < 2)
    throw CorpusError("nothing to combine: '" + sample.id +
                      "' has fewer than 2 true options");

  Sample out = sample;
  out.options.clear();
  std::string combined;
  for (std::size_t i = 0; i < sample.options.size(); ++i) {
    bool is_true = std::binary_search(sample.gold.options.begin(),
                                      sample.gold.options.end(),
                                      static_cast<int>(i));
    if (is_true) {
      if (!combined.empty()) combined += " and ";
      combined += sample.options[i];
    } else {
      out.options.push_back(sample.options[i]);
    }
  }
  combined += kCombinedOptionSuffix;
  out.options.push_back(std::move(combined));
  out.gold =
      GoldLabel::make_options({static_cast<int>(out.options.size()) - 1});
  out.label_class = LabelClass::Sparse;
  validate_sample(out);
  return out;
}

namespace {

// Deletes one option and re-bases a set of gold indices onto the compacted
// list. The deleted index must not be in the gold set.
GoldLabel rebase_after_delete(const GoldLabel& gold, int deleted) {
  std::vector<int> rebased;
  for (int idx : gold.options) rebased.push_back(idx > deleted ? idx - 1 : idx);
  return GoldLabel::make_options(std::move(rebased));
}

}  // namespace

Sample make_insufficient_variant(const Sample& sample, std::uint64_t seed) {
  if (sample.form == DatasetForm::Judging)
    throw CorpusError("insufficient variant requires a choice-form sample; '" +
                      sample.id + "' is judging");

  Sample out = sample;
  if (sample.label_class == LabelClass::Sparse) {
    if (sample.gold.kind != GoldLabel::Kind::Options ||
        sample.gold.options.size() != 1)
      throw CorpusError("sparse sample '" + sample.id +
                        "' has no replacement option to delete");
    int victim = sample.gold.options.front();
    out.options.erase(out.options.begin() + victim);
    out.gold = GoldLabel::no_correct_answer();
    out.label_class = LabelClass::Sparse;
  } else {
    std::vector<int> incorrect;
    for (int i = 0; i < static_cast<int>(sample.options.size()); ++i) {
      if (!std::binary_search(sample.gold.options.begin(),
                              sample.gold.options.end(), i))
        incorrect.push_back(i);
    }
    if (incorrect.empty())
      throw CorpusError("tense sample '" + sample.id +
                        "' has no incorrect option to remove");
    SplitMix64 rng(seed);
    int victim = incorrect[rng.below(incorrect.size())];
    out.options.erase(out.options.begin() + victim);
    out.gold = rebase_after_delete(sample.gold, victim);
  }
  if (out.options.empty())
    throw CorpusError("insufficient variant of '" + sample.id +
                      "' would have no options left");
  validate_sample(out);
  return out;
}

}  // namespace ibeval
