#include "metacal/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace metacal {

namespace {

const std::vector<std::string> kIdColumns = {"dataset", "system", "segment"};
constexpr const char* kHumanColumn = "human";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& raw, std::size_t line, const std::string& column) {
  const auto text = trim(raw);
  if (text.empty()) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": missing value for '" + column + "'");
  }
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc::result_out_of_range) {
    throw Error(ErrorKind::NonFiniteValue, "line " + std::to_string(line) + ": '" + text + "' overflows");
  }
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": '" + text + "' is not a decimal real");
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::NonFiniteValue, "line " + std::to_string(line) + ": non-finite value for '" + column + "'");
  }
  return value;
}

void dump_into(std::string& out, const Json& v, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out.push_back('\n');
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out.push_back('{');
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        dump_into(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out.push_back('}');
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out.push_back('[');
      bool first = true;
      for (const auto& item : v) {
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        dump_into(out, item, indent, depth + 1);
      }
      newline(depth);
      out.push_back(']');
      return;
    }
    case Json::value_t::number_float:
      out += format_real(v.get<double>());
      return;
    default:
      out += v.dump();
      return;
  }
}

Json spec_to_json(const MetricSpec& s) {
  Json j;
  j["name"] = s.name;
  j["min"] = s.min;
  j["max"] = s.max;
  j["higher_is_better"] = s.higher_is_better;
  return j;
}

MetricSpec spec_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "metric spec must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "name" && key != "min" && key != "max" && key != "higher_is_better") {
      throw Error(ErrorKind::InvalidConfig, "unknown metric spec key '" + key + "'");
    }
  }
  try {
    MetricSpec s;
    s.name = j.at("name").get<std::string>();
    s.min = j.at("min").get<double>();
    s.max = j.at("max").get<double>();
    s.higher_is_better = j.at("higher_is_better").get<bool>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("bad metric spec: ") + e.what());
  }
}

void check_header_names(const std::vector<std::string>& found, std::span<const MetricSpec> specs) {
  std::set<std::string> expected;
  for (const auto& s : specs) expected.insert(s.name);
  const std::set<std::string> got(found.begin(), found.end());
  if (got.size() != found.size()) throw Error(ErrorKind::HeaderMismatch, "duplicate metric column");
  for (const auto& name : expected) {
    if (!got.contains(name)) throw Error(ErrorKind::HeaderMismatch, "missing declared metric '" + name + "'");
  }
  for (const auto& name : got) {
    if (!expected.contains(name)) throw Error(ErrorKind::HeaderMismatch, "undeclared metric column '" + name + "'");
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return in;
}

Json tree_to_json(const RegressionTree& tree) {
  Json nodes = Json::array();
  for (const auto& n : tree.nodes) {
    Json j;
    if (n.is_leaf()) {
      j["leaf"] = n.value;
    } else {
      j["feature"] = n.feature;
      j["threshold"] = n.threshold;
      j["gain"] = n.gain;
      j["left"] = n.left;
      j["right"] = n.right;
    }
    nodes.push_back(std::move(j));
  }
  Json t;
  t["nodes"] = std::move(nodes);
  return t;
}

RegressionTree tree_from_json(const Json& j) {
  RegressionTree tree;
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    if (n.contains("leaf")) {
      if (n.size() != 1) throw Error(ErrorKind::MalformedModel, "leaf node has extra keys");
      node.value = n.at("leaf").get<double>();
    } else {
      if (n.size() != 5) throw Error(ErrorKind::MalformedModel, "split node needs feature/threshold/gain/left/right");
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.gain = n.at("gain").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
      if (node.feature < 0) throw Error(ErrorKind::MalformedModel, "negative feature index");
    }
    tree.nodes.push_back(node);
  }
  return tree;
}

}  // namespace

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string dump_json(const Json& value, int indent) {
  std::string out;
  dump_into(out, value, indent, 0);
  return out;
}

std::string read_file(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error(ErrorKind::Io, "write to '" + path + "' failed");
}

std::vector<CsvRecord> parse_csv(std::istream& in) {
  std::vector<CsvRecord> records;
  std::string field;
  CsvRecord record;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  record.line = 1;
  char c = 0;

  const auto end_record = [&] {
    if (field_started || !record.fields.empty()) {
      record.fields.push_back(std::move(field));
      records.push_back(std::move(record));
    }
    field.clear();
    record = CsvRecord{};
    field_started = false;
  };

  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": stray quote");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.fields.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record.line = line;
        break;
      default:
        if (!field_started && record.fields.empty()) record.line = line;
        field.push_back(c);
        field_started = true;
        break;
    }
  }
  if (in_quotes) throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": unterminated quote");
  end_record();
  return records;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

ScoreFormat detect_format(const std::string& path) {
  if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") return ScoreFormat::Jsonl;
  return ScoreFormat::Csv;
}

std::vector<MetricSpec> parse_specs(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("metric spec file: ") + e.what());
  }
  if (!j.is_object() || !j.contains("metrics") || !j.at("metrics").is_array() || j.size() != 1) {
    throw Error(ErrorKind::InvalidConfig, "metric spec file must be {\"metrics\": [...]}");
  }
  std::vector<MetricSpec> specs;
  for (const auto& item : j.at("metrics")) specs.push_back(spec_from_json(item));
  validate_metric_set(specs);
  return specs;
}

std::vector<MetricSpec> load_specs(const std::string& path) { return parse_specs(read_file(path)); }

std::string specs_to_string(std::span<const MetricSpec> specs) {
  Json j;
  j["metrics"] = Json::array();
  for (const auto& s : specs) j["metrics"].push_back(spec_to_json(s));
  return dump_json(j) + "\n";
}

LoadedScores parse_scores_csv(std::istream& in, std::span<const MetricSpec> specs) {
  const auto records = parse_csv(in);
  if (records.empty()) throw Error(ErrorKind::ParseError, "empty score file");
  const auto& header = records.front().fields;

  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = trim(header[i]);
    if (!position.emplace(name, i).second) throw Error(ErrorKind::HeaderMismatch, "duplicate column '" + name + "'");
  }
  for (const auto& id : kIdColumns) {
    if (!position.contains(id)) throw Error(ErrorKind::HeaderMismatch, "missing column '" + id + "'");
  }
  const bool has_human = position.contains(kHumanColumn);

  std::vector<std::string> metric_columns;
  for (const auto& h : header) {
    const auto name = trim(h);
    if (name != kHumanColumn && std::find(kIdColumns.begin(), kIdColumns.end(), name) == kIdColumns.end()) {
      metric_columns.push_back(name);
    }
  }
  std::vector<std::string> names;
  if (specs.empty()) {
    names = metric_columns;
  } else {
    check_header_names(metric_columns, specs);
    for (const auto& s : specs) names.push_back(s.name);
  }
  if (names.empty()) throw Error(ErrorKind::HeaderMismatch, "no metric columns");

  std::vector<ScoreRow> rows;
  std::map<ExampleId, double> human;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(rec.line) + ": expected " +
                                             std::to_string(header.size()) + " fields, found " +
                                             std::to_string(rec.fields.size()));
    }
    ScoreRow row;
    row.id = ExampleId{rec.fields[position["dataset"]], rec.fields[position["system"]],
                       rec.fields[position["segment"]]};
    for (const auto& name : names) row.scores.push_back(parse_real(rec.fields[position[name]], rec.line, name));
    if (has_human) {
      const double z = parse_real(rec.fields[position[kHumanColumn]], rec.line, kHumanColumn);
      if (!human.emplace(row.id, z).second) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(rec.line) + ": duplicate example id " +
                                               to_string(row.id));
      }
    }
    rows.push_back(std::move(row));
  }

  LoadedScores out{ScoreMatrix(std::move(names), std::move(rows)), std::nullopt};
  if (has_human) out.target = PreferenceTarget::make_pointwise(std::move(human));
  return out;
}

LoadedScores parse_pairwise_jsonl(std::istream& in, std::span<const MetricSpec> specs) {
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);

  std::vector<PreferencePair> pairs;
  std::vector<ScoreRow> rows;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    Json j;
    try {
      j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": not an object");
    for (const auto& [key, _] : j.items()) {
      if (key != "group" && key != "category" && key != "chosen" && key != "rejected") {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": unknown key '" + key + "'");
      }
    }
    if (!j.contains("group") || !j.contains("chosen") || !j.contains("rejected")) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": needs group, chosen and rejected");
    }
    PreferencePair p;
    try {
      p.group = j.at("group").is_string() ? j.at("group").get<std::string>() : j.at("group").dump();
      if (j.contains("category")) p.category = j.at("category").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + e.what());
    }
    if (names.empty()) {
      for (const auto& [key, _] : j.at("chosen").items()) names.push_back(key);
    }
    for (const char* side : {"chosen", "rejected"}) {
      const auto& obj = j.at(side);
      if (!obj.is_object()) throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": bad " + side);
      std::vector<std::string> keys;
      for (const auto& [key, _] : obj.items()) keys.push_back(key);
      std::vector<MetricSpec> expected;
      for (const auto& n : names) expected.push_back(MetricSpec{n});
      check_header_names(keys, expected);
      std::vector<double> values;
      for (const auto& n : names) {
        const auto& v = obj.at(n);
        if (!v.is_number()) {
          throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": '" + n + "' is not a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteValue, "line " + std::to_string(line));
        values.push_back(x);
      }
      (std::string_view(side) == "chosen" ? p.chosen : p.rejected) = std::move(values);
    }
    rows.push_back(ScoreRow{ExampleId{p.category, p.group, "chosen:" + std::to_string(line)}, p.chosen});
    rows.push_back(ScoreRow{ExampleId{p.category, p.group, "rejected:" + std::to_string(line)}, p.rejected});
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) throw Error(ErrorKind::ParseError, "no preference records");
  return LoadedScores{ScoreMatrix(std::move(names), std::move(rows)), PreferenceTarget::make_pairwise(std::move(pairs))};
}

LoadedScores load_scores(const std::string& path, ScoreFormat format, std::span<const MetricSpec> specs) {
  if (specs.empty()) throw Error(ErrorKind::InvalidConfig, "no metric specs declared");
  validate_metric_set(specs);
  auto in = open_input(path);
  return format == ScoreFormat::Csv ? parse_scores_csv(in, specs) : parse_pairwise_jsonl(in, specs);
}

LoadedScores read_score_table(const std::string& path) {
  auto in = open_input(path);
  return detect_format(path) == ScoreFormat::Csv ? parse_scores_csv(in, {}) : parse_pairwise_jsonl(in, {});
}

std::string scores_to_csv(const ScoreMatrix& matrix, const std::optional<PreferenceTarget>& target) {
  std::string out = "dataset,system,segment";
  for (const auto& n : matrix.metric_names()) out += "," + csv_escape(n);
  std::vector<double> z;
  if (target) {
    out += ",human";
    z = target->aligned_scores(matrix);
  }
  out += "\n";
  for (std::size_t i = 0; i < matrix.num_rows(); ++i) {
    const auto& row = matrix.row(i);
    out += csv_escape(row.id.dataset) + "," + csv_escape(row.id.system) + "," + csv_escape(row.id.segment);
    for (double v : row.scores) out += "," + format_real(v);
    if (target) out += "," + format_real(z[i]);
    out += "\n";
  }
  return out;
}

std::string pairs_to_jsonl(const std::vector<std::string>& metric_names, const PreferenceTarget& target) {
  std::string out;
  for (const auto& p : target.pairwise) {
    Json j;
    j["group"] = p.group;
    j["category"] = p.category;
    Json chosen;
    Json rejected;
    for (std::size_t i = 0; i < metric_names.size(); ++i) {
      chosen[metric_names[i]] = p.chosen.at(i);
      rejected[metric_names[i]] = p.rejected.at(i);
    }
    j["chosen"] = std::move(chosen);
    j["rejected"] = std::move(rejected);
    out += dump_json(j, -1) + "\n";
  }
  return out;
}

Json model_to_json(const CalibratedModel& model) {
  model.validate();
  Json j;
  j["version"] = model.version;
  j["kind"] = model.kind == ModelKind::Linear ? "linear" : "gbt";
  j["metrics"] = Json::array();
  for (const auto& s : model.metric_specs) j["metrics"].push_back(spec_to_json(s));
  if (model.kind == ModelKind::Linear) {
    j["weighting"] = std::string(to_string(model.weighting));
    j["weights"] = model.weights;
  } else {
    j["trees"] = Json::array();
    for (const auto& t : model.trees.trees) j["trees"].push_back(tree_to_json(t));
    j["base_score"] = model.trees.base_score;
    j["learning_rate"] = model.trees.learning_rate;
  }
  j["objective_used"] = model.objective_used;
  j["seed"] = model.seed;
  return j;
}

CalibratedModel model_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::MalformedModel, "model must be a JSON object");
  if (!j.contains("version") || !j.at("version").is_number_integer()) {
    throw Error(ErrorKind::MalformedModel, "missing integer version");
  }
  const int version = j.at("version").get<int>();
  if (version != CalibratedModel::kSchemaVersion) {
    throw Error(ErrorKind::SchemaVersionUnsupported, "model version " + std::to_string(version));
  }
  try {
    CalibratedModel m;
    m.version = version;
    const auto kind = j.at("kind").get<std::string>();
    std::set<std::string> allowed = {"version", "kind", "metrics", "objective_used", "seed"};
    if (kind == "linear") {
      m.kind = ModelKind::Linear;
      allowed.insert({"weighting", "weights"});
    } else if (kind == "gbt") {
      m.kind = ModelKind::Gbt;
      allowed.insert({"trees", "base_score", "learning_rate"});
    } else {
      throw Error(ErrorKind::MalformedModel, "unknown model kind '" + kind + "'");
    }
    for (const auto& [key, _] : j.items()) {
      if (!allowed.contains(key)) throw Error(ErrorKind::MalformedModel, "unexpected key '" + key + "'");
    }
    for (const auto& s : j.at("metrics")) m.metric_specs.push_back(spec_from_json(s));
    m.objective_used = j.at("objective_used").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    if (m.kind == ModelKind::Linear) {
      m.weighting = parse_weighting(j.at("weighting").get<std::string>());
      m.weights = j.at("weights").get<std::vector<double>>();
    } else {
      for (const auto& t : j.at("trees")) m.trees.trees.push_back(tree_from_json(t));
      m.trees.base_score = j.at("base_score").get<double>();
      m.trees.learning_rate = j.at("learning_rate").get<double>();
      m.trees.feature_names = m.metric_names();
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedModel, e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MalformedModel || e.kind() == ErrorKind::SchemaVersionUnsupported) throw;
    throw Error(ErrorKind::MalformedModel, e.what());
  }
}

void save_model(const std::string& path, const CalibratedModel& model) {
  write_file(path, dump_json(model_to_json(model)) + "\n");
}

CalibratedModel load_model(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedModel, e.what());
  }
  return model_from_json(j);
}

Corpus parse_corpus_csv(std::istream& in) {
  const auto records = parse_csv(in);
  if (records.empty()) throw Error(ErrorKind::ParseError, "empty corpus file");
  std::map<std::string, std::size_t> position;
  const auto& header = records.front().fields;
  for (std::size_t i = 0; i < header.size(); ++i) position[trim(header[i])] = i;
  for (const char* col : {"dataset", "system", "segment", "hypothesis", "reference"}) {
    if (!position.contains(col)) throw Error(ErrorKind::HeaderMismatch, std::string("missing column '") + col + "'");
  }
  const bool has_human = position.contains(kHumanColumn);
  if (header.size() != (has_human ? 6u : 5u)) throw Error(ErrorKind::HeaderMismatch, "unexpected corpus columns");

  Corpus corpus;
  std::map<ExampleId, double> human;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(rec.line) + ": wrong field count");
    }
    CorpusEntry e;
    e.id = ExampleId{rec.fields[position["dataset"]], rec.fields[position["system"]], rec.fields[position["segment"]]};
    e.pair = SegmentPair{rec.fields[position["hypothesis"]], rec.fields[position["reference"]]};
    if (has_human) human[e.id] = parse_real(rec.fields[position[kHumanColumn]], rec.line, kHumanColumn);
    corpus.entries.push_back(std::move(e));
  }
  if (corpus.entries.empty()) throw Error(ErrorKind::EmptyInput, "corpus has no rows");
  if (has_human) corpus.human = std::move(human);
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  auto in = open_input(path);
  return parse_corpus_csv(in);
}

}  // namespace metacal
