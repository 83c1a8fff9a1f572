#include "sbc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "sbc/error.hpp"
#include "sbc/rng.hpp"

namespace sbc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record. Double-quoted fields may contain the delimiter; a
// doubled quote inside a quoted field is a literal quote.
std::vector<std::string> split_record(std::string_view line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  for (auto& f : fields) f = std::string(trim(f));
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.select_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  out.class_names = class_names;
  out.feature_names = feature_names;
  out.label_name = label_name;
  return out;
}

void Dataset::validate() const {
  if (features.rows() != labels.size()) {
    throw Error(Errc::InvalidFormat, "feature rows (" + std::to_string(features.rows()) +
                                         ") differ from label count (" +
                                         std::to_string(labels.size()) + ")");
  }
  if (!feature_names.empty() && feature_names.size() != features.cols()) {
    throw Error(Errc::InvalidFormat, "feature name count does not match columns");
  }
  for (ClassId y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_names.size()) {
      throw Error(Errc::InvalidFormat, "label " + std::to_string(y) + " has no class name");
    }
  }
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  // UTF-8 byte-order mark
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);
  return text;
}

Dataset parse_table(std::string_view text, const CsvOptions& options, bool label_required) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!trim(line).empty()) lines.push_back(line);
    pos = end + 1;
  }
  if (lines.empty()) throw Error(Errc::EmptyDataset, "no records");

  std::size_t first_data = 0;
  std::vector<std::string> columns;
  if (options.header) {
    columns = split_record(lines[0], options.delimiter);
    first_data = 1;
  } else {
    std::size_t width = split_record(lines[0], options.delimiter).size();
    for (std::size_t c = 0; c < width; ++c) columns.push_back(std::to_string(c));
  }

  auto label_it = std::find(columns.begin(), columns.end(), options.label_column);
  if (label_it == columns.end() && label_required) {
    throw Error(Errc::MissingLabelColumn, "column '" + options.label_column + "' not found");
  }
  const bool has_label = label_it != columns.end();
  const std::size_t label_col = static_cast<std::size_t>(label_it - columns.begin());

  Dataset d;
  d.label_name = options.header ? options.label_column : "label";
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (has_label && c == label_col) continue;
    if (std::find(options.ignore_columns.begin(), options.ignore_columns.end(), columns[c]) !=
        options.ignore_columns.end()) {
      continue;
    }
    feature_cols.push_back(c);
    d.feature_names.push_back(options.header ? columns[c] : "f" + std::to_string(feature_cols.size() - 1));
  }

  std::unordered_map<std::string, ClassId> class_index;
  std::vector<double> values(feature_cols.size());
  std::vector<double> storage;
  for (std::size_t li = first_data; li < lines.size(); ++li) {
    const std::size_t row = li - first_data;
    auto fields = split_record(lines[li], options.delimiter);
    if (fields.size() != columns.size()) {
      throw Error(Errc::MalformedRow, "row " + std::to_string(row) + ": expected " +
                                          std::to_string(columns.size()) + " fields, found " +
                                          std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const std::string& cell = fields[feature_cols[k]];
      if (std::find(options.missing_tokens.begin(), options.missing_tokens.end(), cell) !=
          options.missing_tokens.end()) {
        values[k] = std::numeric_limits<double>::quiet_NaN();
      } else if (!parse_double(cell, values[k])) {
        throw Error(Errc::MalformedRow, "row " + std::to_string(row) + ": column '" +
                                            columns[feature_cols[k]] + "' value '" + cell +
                                            "' is not numeric");
      }
    }
    if (has_label) {
      const std::string& name = fields[label_col];
      auto [it, inserted] = class_index.try_emplace(name, static_cast<ClassId>(d.class_names.size()));
      if (inserted) d.class_names.push_back(name);
      d.labels.push_back(it->second);
    }
    storage.insert(storage.end(), values.begin(), values.end());
  }
  if (lines.size() == first_data) throw Error(Errc::EmptyDataset, "header present but no data rows");
  d.features = Matrix(lines.size() - first_data, feature_cols.size(), std::move(storage));
  return d;
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvOptions& options) {
  return parse_table(text, options, true);
}

FeatureTable parse_feature_csv(std::string_view text, const CsvOptions& options) {
  Dataset d = parse_table(text, options, false);
  return {std::move(d.features), std::move(d.feature_names)};
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  const std::string text = read_file(path);
  try {
    return parse_csv(text, options);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

FeatureTable load_feature_csv(const std::filesystem::path& path, const CsvOptions& options) {
  const std::string text = read_file(path);
  try {
    return parse_feature_csv(text, options);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string to_csv(const Dataset& d) {
  std::string out;
  for (std::size_t c = 0; c < d.num_features(); ++c) {
    out += quote_if_needed(c < d.feature_names.size() ? d.feature_names[c] : "f" + std::to_string(c));
    out.push_back(',');
  }
  out += quote_if_needed(d.label_name);
  out.push_back('\n');
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (double v : d.features.row(r)) {
      if (!std::isnan(v)) out += format_double(v);
      out.push_back(',');
    }
    out += quote_if_needed(d.class_names[static_cast<std::size_t>(d.labels[r])]);
    out.push_back('\n');
  }
  return out;
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << to_csv(d);
}

SplitResult stratified_split(const Dataset& d, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw Error(Errc::InvalidFraction, "test_fraction must lie strictly between 0 and 1");
  }
  Rng rng(spec.seed);
  std::vector<char> in_test(d.rows(), 0);
  SplitResult result;

  auto take = [&](std::vector<std::size_t>& rows, std::size_t n_test) {
    rng.shuffle(rows);
    for (std::size_t i = 0; i < n_test; ++i) in_test[rows[i]] = 1;
  };

  if (spec.stratified) {
    std::vector<std::vector<std::size_t>> by_class(d.num_classes());
    for (std::size_t r = 0; r < d.rows(); ++r) by_class[static_cast<std::size_t>(d.labels[r])].push_back(r);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto& rows = by_class[c];
      if (rows.empty()) continue;
      auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(rows.size()) * spec.test_fraction + 0.5));
      n_test = std::min(n_test, rows.size() - 1);
      if (rows.size() == 1) {
        result.warnings.push_back("class '" + d.class_names[c] +
                                  "' has a single row; it is kept entirely in train");
      }
      take(rows, n_test);
    }
  } else {
    std::vector<std::size_t> rows(d.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(rows.size()) * spec.test_fraction + 0.5));
    take(rows, std::min(n_test, rows.empty() ? 0 : rows.size() - 1));
  }

  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t r = 0; r < d.rows(); ++r) (in_test[r] ? test_rows : train_rows).push_back(r);
  result.train = d.subset(train_rows);
  result.test = d.subset(test_rows);
  return result;
}

std::map<ClassId, std::size_t> class_frequencies(std::span<const ClassId> labels) {
  std::map<ClassId, std::size_t> counts;
  for (ClassId y : labels) ++counts[y];
  return counts;
}

std::vector<double> compute_sample_weights(std::span<const ClassId> labels, WeightScheme scheme) {
  std::vector<double> w(labels.size(), 1.0);
  if (scheme == WeightScheme::none || labels.empty()) return w;
  const auto counts = class_frequencies(labels);
  const double n = static_cast<double>(labels.size());
  const double k = static_cast<double>(counts.size());
  std::map<ClassId, double> per_class;
  for (auto [c, count] : counts) per_class[c] = n / (k * static_cast<double>(count));
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = per_class[labels[i]];
  return w;
}

}  // namespace sbc
