#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace sbc {

// Rows are true classes, columns predicted classes. With `has_unknown` an
// extra last column counts predictions that matched no class.
struct ConfusionMatrix {
  std::size_t n_classes = 0;
  bool has_unknown = false;
  std::vector<std::vector<std::int64_t>> counts;

  std::size_t cols() const noexcept { return n_classes + (has_unknown ? 1 : 0); }
  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t row_sum(std::size_t t) const;
  // Sum over true classes for predicted column p.
  std::int64_t col_sum(std::size_t p) const;
};

// Predicted labels may be kUnknownLabel (-1) when `unknown_column` is set.
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes,
                          bool unknown_column = false);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

// Precision and recall of an empty column/row are 0; F1 is 0 when P + R = 0.
std::vector<ClassMetrics> per_class_report(const ConfusionMatrix& cm);

struct Timings {
  double hpo_s = 0.0;
  double train_s = 0.0;
  double test_s = 0.0;
};

struct EvalSummary {
  double accuracy = 0.0;
  double avg_f1 = 0.0;
  double std_f1 = 0.0;  // population standard deviation
  std::vector<ClassMetrics> per_class;
  Timings timings;
};

EvalSummary summarize(const ConfusionMatrix& cm, std::span<const ClassMetrics> per_class, const Timings& timings);

// Each row scaled to sum to 100; rows without support stay zero.
std::vector<std::vector<double>> normalize_percent(const ConfusionMatrix& cm);

// Human-readable per-class table followed by the summary rows.
std::string format_summary(const EvalSummary& s, std::span<const std::string> class_names);
// One JSON object per class plus a summary record.
std::string summary_to_json(const EvalSummary& s, std::span<const std::string> class_names);
// Delimiter-separated grid with a header row of predicted class names.
std::string confusion_to_csv(const ConfusionMatrix& cm, std::span<const std::string> class_names);
std::string normalized_to_csv(const ConfusionMatrix& cm, std::span<const std::string> class_names);

// Wall-clock duration of `op` on a monotonic clock.
template <typename F>
auto timed(F&& op) {
  const auto start = std::chrono::steady_clock::now();
  auto seconds = [&start] {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
    return d.count();
  };
  if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
    std::forward<F>(op)();
    return seconds();
  } else {
    auto result = std::forward<F>(op)();
    const double s = seconds();
    return std::pair<decltype(result), double>(std::move(result), s);
  }
}

// Accumulates the durations of repeated sections.
class Stopwatch {
 public:
  template <typename F>
  decltype(auto) measure(F&& op) {
    const auto start = std::chrono::steady_clock::now();
    struct Guard {
      Stopwatch& sw;
      std::chrono::steady_clock::time_point start;
      ~Guard() {
        const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
        sw.total_ += d.count();
      }
    } guard{*this, start};
    return std::forward<F>(op)();
  }
  double seconds() const noexcept { return total_; }

 private:
  double total_ = 0.0;
};

}  // namespace sbc
