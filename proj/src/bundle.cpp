#include "sbc/bundle.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "sbc/error.hpp"

namespace sbc {

namespace {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

DatasetFingerprint fingerprint(const Dataset& d) {
  DatasetFingerprint f;
  f.rows = d.rows();
  f.feature_names = d.feature_names;
  f.class_names = d.class_names;
  f.class_counts.assign(d.num_classes(), 0);
  for (ClassId y : d.labels) ++f.class_counts[static_cast<std::size_t>(y)];
  f.content_hash = fnv1a_hex(to_csv(d));
  return f;
}

void ModelBundle::check_schema(const std::vector<std::string>& feature_names) const {
  if (feature_names != data.feature_names) {
    throw Error(Errc::FingerprintMismatch, "input has " + std::to_string(feature_names.size()) +
                                               " feature columns that do not match the " +
                                               std::to_string(data.feature_names.size()) + " the model was trained on");
  }
}

std::vector<ClassId> ModelBundle::map_classes(const Dataset& d) const {
  std::vector<ClassId> out;
  for (const auto& name : d.class_names) {
    auto it = std::find(data.class_names.begin(), data.class_names.end(), name);
    if (it == data.class_names.end()) {
      throw Error(Errc::FingerprintMismatch, "class '" + name + "' was not present at training time");
    }
    out.push_back(static_cast<ClassId>(it - data.class_names.begin()));
  }
  return out;
}

nlohmann::json to_json(const ModelBundle& b) {
  nlohmann::json model = b.kind == Method::mcc ? to_json(b.mcc()) : to_json(b.sbc());
  return {{"format", "sbc.bundle"},
          {"version", kBundleVersion},
          {"kind", to_string(b.kind)},
          {"provenance",
           {{"config", b.config},
            {"fingerprint",
             {{"rows", b.data.rows},
              {"feature_names", b.data.feature_names},
              {"class_names", b.data.class_names},
              {"class_counts", b.data.class_counts},
              {"content_hash", b.data.content_hash}}}}},
          {"model", std::move(model)}};
}

ModelBundle bundle_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "sbc.bundle") throw Error(Errc::InvalidFormat, "not a model bundle");
    if (!j.contains("version")) throw Error(Errc::InvalidFormat, "bundle has no version");
    if (j.at("version").get<int>() != kBundleVersion) {
      throw Error(Errc::InvalidFormat, "unsupported bundle version " + j.at("version").dump());
    }
    ModelBundle b;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "mcc") b.kind = Method::mcc;
    else if (kind == "sbc") b.kind = Method::sbc;
    else throw Error(Errc::InvalidFormat, "unknown bundle kind '" + kind + "'");
    const auto& prov = j.at("provenance");
    b.config = prov.at("config");
    const auto& fp = prov.at("fingerprint");
    b.data.rows = fp.at("rows").get<std::size_t>();
    b.data.feature_names = fp.at("feature_names").get<std::vector<std::string>>();
    b.data.class_names = fp.at("class_names").get<std::vector<std::string>>();
    b.data.class_counts = fp.at("class_counts").get<std::vector<std::size_t>>();
    b.data.content_hash = fp.at("content_hash").get<std::string>();
    if (b.kind == Method::mcc) b.model = gbt_from_json(j.at("model"));
    else b.model = sbc_from_json(j.at("model"));
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidFormat, std::string("malformed bundle: ") + e.what());
  }
}

void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << to_json(b).dump(1) << '\n';
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return bundle_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidFormat, path.string() + ": " + e.what());
  }
}

}  // namespace sbc
