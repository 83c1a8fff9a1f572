#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "sbc/dataset.hpp"
#include "sbc/error.hpp"

namespace sbc {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return lo + (hi - lo) / 2.0;
}

// Hash/equality over the raw bytes of a cleaned row plus its label.
struct RowKey {
  const double* values;
  std::size_t cols;
  ClassId label;
  bool operator==(const RowKey& o) const {
    return label == o.label && std::memcmp(values, o.values, cols * sizeof(double)) == 0;
  }
};

struct RowKeyHash {
  std::size_t operator()(const RowKey& k) const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const unsigned char* p, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
      }
    };
    mix(reinterpret_cast<const unsigned char*>(k.values), k.cols * sizeof(double));
    mix(reinterpret_cast<const unsigned char*>(&k.label), sizeof(k.label));
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

std::string CleaningReport::to_text() const {
  std::ostringstream os;
  os << "rows_in: " << rows_in << '\n'
     << "rows_out: " << rows_out << '\n'
     << "duplicates_dropped: " << duplicates_dropped << '\n'
     << "missing_rows_dropped: " << missing_rows_dropped << '\n'
     << "missing_cells_imputed: " << missing_cells_imputed << '\n'
     << "infinity_rows_dropped: " << infinity_rows_dropped << '\n'
     << "infinity_cells_clamped: " << infinity_cells_clamped << '\n'
     << "negative_rows_dropped: " << negative_rows_dropped << '\n'
     << "negative_cells_clamped: " << negative_cells_clamped << '\n';
  return os.str();
}

CleanResult clean(const Dataset& d, const CleaningPolicy& policy) {
  const std::size_t cols = d.num_features();
  CleanResult result;
  CleaningReport& report = result.report;
  report.rows_in = d.rows();

  std::vector<char> negative_applies(cols, policy.negative_columns.empty() ? 1 : 0);
  for (const auto& name : policy.negative_columns) {
    auto it = std::find(d.feature_names.begin(), d.feature_names.end(), name);
    if (it == d.feature_names.end()) {
      throw Error(Errc::InvalidConfig, "negative-value column '" + name + "' not in dataset");
    }
    negative_applies[static_cast<std::size_t>(it - d.feature_names.begin())] = 1;
  }

  // Column statistics over finite input values, used by imputation/clamping.
  std::vector<double> medians(cols, 0.0), finite_max(cols, 0.0), finite_min(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    std::vector<double> finite;
    for (std::size_t r = 0; r < d.rows(); ++r) {
      double v = d.features(r, c);
      if (std::isfinite(v)) finite.push_back(v);
    }
    if (!finite.empty()) {
      auto [lo, hi] = std::minmax_element(finite.begin(), finite.end());
      finite_min[c] = *lo;
      finite_max[c] = *hi;
    }
    if (policy.missing_value_action == MissingValueAction::impute_median) medians[c] = median_of(std::move(finite));
  }

  Matrix kept(0, cols);
  std::vector<ClassId> kept_labels;
  std::vector<double> row(cols);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    auto src = d.features.row(r);
    std::copy(src.begin(), src.end(), row.begin());

    bool drop_missing = false, drop_inf = false, drop_neg = false;
    std::size_t imputed = 0, inf_clamped = 0, neg_clamped = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      double& v = row[c];
      if (std::isnan(v)) {
        switch (policy.missing_value_action) {
          case MissingValueAction::drop_row: drop_missing = true; break;
          case MissingValueAction::impute_zero: v = 0.0; ++imputed; break;
          case MissingValueAction::impute_median: v = medians[c]; ++imputed; break;
        }
        continue;
      }
      if (std::isinf(v)) {
        if (policy.infinity_action == InfinityAction::drop_row) {
          drop_inf = true;
          continue;
        }
        v = v > 0 ? finite_max[c] : finite_min[c];
        ++inf_clamped;
      }
      if (v < 0.0 && negative_applies[c]) {
        switch (policy.negative_action) {
          case NegativeAction::keep: break;
          case NegativeAction::drop_row: drop_neg = true; break;
          case NegativeAction::clamp_zero: v = 0.0; ++neg_clamped; break;
        }
      }
    }
    // A row dropped for several reasons is counted under the first one.
    if (drop_missing) {
      ++report.missing_rows_dropped;
      continue;
    }
    if (drop_inf) {
      ++report.infinity_rows_dropped;
      continue;
    }
    if (drop_neg) {
      ++report.negative_rows_dropped;
      continue;
    }
    // -0.0 and 0.0 must compare equal in the byte-wise duplicate check
    for (double& v : row) {
      if (v == 0.0) v = 0.0;
    }
    report.missing_cells_imputed += imputed;
    report.infinity_cells_clamped += inf_clamped;
    report.negative_cells_clamped += neg_clamped;
    kept.append_row(row);
    kept_labels.push_back(d.labels[r]);
  }

  std::vector<std::size_t> survivors;
  survivors.reserve(kept_labels.size());
  if (policy.drop_duplicates) {
    std::unordered_set<RowKey, RowKeyHash> seen;
    for (std::size_t r = 0; r < kept_labels.size(); ++r) {
      RowKey key{kept.row(r).data(), cols, kept_labels[r]};
      if (seen.insert(key).second) survivors.push_back(r);
      else ++report.duplicates_dropped;
    }
  } else {
    for (std::size_t r = 0; r < kept_labels.size(); ++r) survivors.push_back(r);
  }

  if (survivors.empty()) throw Error(Errc::AllRowsDropped, "cleaning policy removed every row");

  Dataset cleaned;
  cleaned.features = kept.select_rows(survivors);
  for (std::size_t r : survivors) cleaned.labels.push_back(kept_labels[r]);
  cleaned.class_names = d.class_names;
  cleaned.feature_names = d.feature_names;
  cleaned.label_name = d.label_name;
  report.rows_out = cleaned.rows();
  result.data = std::move(cleaned);
  return result;
}

}  // namespace sbc
