#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "metacal/core_types.hpp"
#include "metacal/text_metrics.hpp"

namespace metacal {

using Json = nlohmann::ordered_json;

/// Shortest decimal form is not used: every real is written with 17
/// significant digits so files round-trip bit-exactly.
std::string format_real(double value);

/// Serializes JSON with reals at 17 significant digits. indent < 0 gives a
/// single line.
std::string dump_json(const Json& value, int indent = 2);

std::string read_file(const std::string& path);
/// Writes atomically enough for our purposes: truncate then write.
void write_file(const std::string& path, const std::string& contents);

/// RFC 4180 records. Fields may be quoted; quoted fields may span lines.
/// Each record carries the 1-based line on which it started.
struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRecord> parse_csv(std::istream& in);
std::string csv_escape(const std::string& field);

enum class ScoreFormat { Csv, Jsonl };
ScoreFormat detect_format(const std::string& path);

struct LoadedScores {
  ScoreMatrix matrix;
  std::optional<PreferenceTarget> target;
};

/// Metric specs file: {"metrics": [{"name", "min", "max", "higher_is_better"}, ...]}.
std::vector<MetricSpec> parse_specs(const std::string& text);
std::vector<MetricSpec> load_specs(const std::string& path);
std::string specs_to_string(std::span<const MetricSpec> specs);

/// CSV: dataset, system, segment, one column per metric, optional human.
/// Columns follow spec order in the returned matrix. When `specs` is empty
/// the metric columns are taken from the header as-is.
LoadedScores parse_scores_csv(std::istream& in, std::span<const MetricSpec> specs);

/// JSONL: one {"group", "category"?, "chosen": {metric: value}, "rejected": {...}} per line.
LoadedScores parse_pairwise_jsonl(std::istream& in, std::span<const MetricSpec> specs);

/// Reads either format; the header (or first record) must name exactly the metrics in `specs`.
LoadedScores load_scores(const std::string& path, ScoreFormat format, std::span<const MetricSpec> specs);

/// Header-driven read used when no spec file is at hand.
LoadedScores read_score_table(const std::string& path);

std::string scores_to_csv(const ScoreMatrix& matrix, const std::optional<PreferenceTarget>& target);
std::string pairs_to_jsonl(const std::vector<std::string>& metric_names, const PreferenceTarget& target);

Json model_to_json(const CalibratedModel& model);
/// Throws SchemaVersionUnsupported or MalformedModel.
CalibratedModel model_from_json(const Json& json);
void save_model(const std::string& path, const CalibratedModel& model);
CalibratedModel load_model(const std::string& path);

/// Text corpus CSV: dataset, system, segment, hypothesis, reference, optional human.
struct Corpus {
  std::vector<CorpusEntry> entries;
  std::optional<std::map<ExampleId, double>> human;
};
Corpus parse_corpus_csv(std::istream& in);
Corpus load_corpus(const std::string& path);

}  // namespace metacal
