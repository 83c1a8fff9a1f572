#include "sbc/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "sbc/error.hpp"

namespace sbc {

namespace {

std::string name_of(std::span<const std::string> names, std::size_t i) {
  return i < names.size() ? names[i] : std::to_string(i);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string header_row(const ConfusionMatrix& cm, std::span<const std::string> names) {
  std::string out = "true\\pred";
  for (std::size_t p = 0; p < cm.n_classes; ++p) out += "," + name_of(names, p);
  if (cm.has_unknown) out += ",UNKNOWN";
  return out + "\n";
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), std::int64_t{0});
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < n_classes; ++i) t += counts[i][i];
  return t;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t t) const {
  return std::accumulate(counts[t].begin(), counts[t].end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::col_sum(std::size_t p) const {
  std::int64_t s = 0;
  for (const auto& row : counts) s += row[p];
  return s;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes,
                          bool unknown_column) {
  if (y_true.size() != y_pred.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(y_true.size()) + " true labels vs " +
                                          std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.has_unknown = unknown_column;
  cm.counts.assign(n_classes, std::vector<std::int64_t>(cm.cols(), 0));
  const int n = static_cast<int>(n_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= n) throw Error(Errc::LabelOutOfRange, "true label " + std::to_string(t) + " out of range");
    std::size_t col;
    if (p >= 0 && p < n) col = static_cast<std::size_t>(p);
    else if (p == -1 && unknown_column) col = n_classes;
    else throw Error(Errc::LabelOutOfRange, "predicted label " + std::to_string(p) + " out of range");
    ++cm.counts[static_cast<std::size_t>(t)][col];
  }
  return cm;
}

std::vector<ClassMetrics> per_class_report(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out(cm.n_classes);
  for (std::size_t c = 0; c < cm.n_classes; ++c) {
    const auto tp = static_cast<double>(cm.counts[c][c]);
    const std::int64_t predicted = cm.col_sum(c);
    const std::int64_t actual = cm.row_sum(c);
    ClassMetrics& m = out[c];
    m.support = actual;
    m.precision = predicted > 0 ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = actual > 0 ? tp / static_cast<double>(actual) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  return out;
}

EvalSummary summarize(const ConfusionMatrix& cm, std::span<const ClassMetrics> per_class, const Timings& timings) {
  EvalSummary s;
  s.per_class.assign(per_class.begin(), per_class.end());
  s.timings = timings;
  const std::int64_t total = cm.total();
  s.accuracy = total > 0 ? static_cast<double>(cm.trace()) / static_cast<double>(total) : 0.0;
  if (!per_class.empty()) {
    double sum = 0.0;
    for (const auto& m : per_class) sum += m.f1;
    s.avg_f1 = sum / static_cast<double>(per_class.size());
    double var = 0.0;
    for (const auto& m : per_class) var += (m.f1 - s.avg_f1) * (m.f1 - s.avg_f1);
    s.std_f1 = std::sqrt(var / static_cast<double>(per_class.size()));
  }
  return s;
}

std::vector<std::vector<double>> normalize_percent(const ConfusionMatrix& cm) {
  std::vector<std::vector<double>> out(cm.n_classes, std::vector<double>(cm.cols(), 0.0));
  for (std::size_t t = 0; t < cm.n_classes; ++t) {
    const std::int64_t sum = cm.row_sum(t);
    if (sum == 0) continue;
    for (std::size_t p = 0; p < cm.cols(); ++p) {
      out[t][p] = 100.0 * static_cast<double>(cm.counts[t][p]) / static_cast<double>(sum);
    }
  }
  return out;
}

std::string format_summary(const EvalSummary& s, std::span<const std::string> class_names) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %9s %9s %9s %9s\n", "class", "precision", "recall", "f1", "support");
  os << line;
  for (std::size_t c = 0; c < s.per_class.size(); ++c) {
    const auto& m = s.per_class[c];
    std::snprintf(line, sizeof(line), "%-28s %9.4f %9.4f %9.4f %9lld\n", name_of(class_names, c).c_str(),
                  m.precision, m.recall, m.f1, static_cast<long long>(m.support));
    os << line;
  }
  os << "Accuracy    " << fixed(s.accuracy, 4) << '\n'
     << "Average F1  " << fixed(s.avg_f1, 4) << '\n'
     << "Std-dev F1  " << fixed(s.std_f1, 4) << '\n'
     << "HPO time    " << fixed(s.timings.hpo_s, 2) << '\n'
     << "Train time  " << fixed(s.timings.train_s, 2) << '\n'
     << "Test time   " << fixed(s.timings.test_s, 2) << '\n';
  return os.str();
}

std::string summary_to_json(const EvalSummary& s, std::span<const std::string> class_names) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < s.per_class.size(); ++c) {
    const auto& m = s.per_class[c];
    classes.push_back({{"class", name_of(class_names, c)},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support}});
  }
  nlohmann::json doc = {{"classes", std::move(classes)},
                        {"summary",
                         {{"accuracy", s.accuracy},
                          {"avg_f1", s.avg_f1},
                          {"std_f1", s.std_f1},
                          {"hpo_s", s.timings.hpo_s},
                          {"train_s", s.timings.train_s},
                          {"test_s", s.timings.test_s}}}};
  return doc.dump(2) + "\n";
}

std::string confusion_to_csv(const ConfusionMatrix& cm, std::span<const std::string> class_names) {
  std::string out = header_row(cm, class_names);
  for (std::size_t t = 0; t < cm.n_classes; ++t) {
    out += name_of(class_names, t);
    for (auto v : cm.counts[t]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

std::string normalized_to_csv(const ConfusionMatrix& cm, std::span<const std::string> class_names) {
  const auto pct = normalize_percent(cm);
  std::string out = header_row(cm, class_names);
  for (std::size_t t = 0; t < cm.n_classes; ++t) {
    out += name_of(class_names, t);
    for (double v : pct[t]) out += "," + fixed(v, 2);
    out += "\n";
  }
  return out;
}

}  // namespace sbc
