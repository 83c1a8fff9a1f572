#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "sbc/cascade.hpp"
#include "sbc/config.hpp"
#include "sbc/dataset.hpp"
#include "sbc/gbt.hpp"

namespace sbc {

// Identity of the training data a bundle was fitted on.
struct DatasetFingerprint {
  std::size_t rows = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<std::size_t> class_counts;  // indexed like class_names
  std::string content_hash;               // FNV-1a 64 of the canonical CSV, hex

  friend bool operator==(const DatasetFingerprint&, const DatasetFingerprint&) = default;
};

DatasetFingerprint fingerprint(const Dataset& d);

// A trained model plus the provenance needed to use it safely.
struct ModelBundle {
  Method kind = Method::mcc;
  std::variant<GbtModel, SbcModel> model;
  DatasetFingerprint data;
  nlohmann::json config;  // RunConfig snapshot

  const GbtModel& mcc() const { return std::get<GbtModel>(model); }
  const SbcModel& sbc() const { return std::get<SbcModel>(model); }

  // Throws FingerprintMismatch unless `feature_names` equal the training schema.
  void check_schema(const std::vector<std::string>& feature_names) const;
  // Bundle class id per class id of `d`; throws FingerprintMismatch for
  // class names the bundle has never seen.
  std::vector<ClassId> map_classes(const Dataset& d) const;
};

constexpr int kBundleVersion = 1;

nlohmann::json to_json(const ModelBundle& b);
ModelBundle bundle_from_json(const nlohmann::json& j);
void save_bundle(const ModelBundle& b, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace sbc
