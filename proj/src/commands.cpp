#include "sbc/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "sbc/error.hpp"

namespace sbc {

namespace {

// Runs one command phase; library errors become CommandError with the
// phase's exit code (configuration errors always map to kExitConfig).
template <typename F>
decltype(auto) phase(int code, F&& fn) {
  try {
    return std::forward<F>(fn)();
  } catch (const Error& e) {
    throw CommandError(e.code() == Errc::InvalidConfig ? kExitConfig : code, e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string timing_rows(const Timings& t) {
  return "HPO time    " + fixed(t.hpo_s, 2) + "\nTrain time  " + fixed(t.train_s, 2) + "\nTest time   " +
         fixed(t.test_s, 2) + "\n";
}

}  // namespace

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidConfig:
      return kExitConfig;
    case Errc::MissingLabelColumn:
    case Errc::MalformedRow:
    case Errc::EmptyDataset:
    case Errc::AllRowsDropped:
    case Errc::InvalidFraction:
    case Errc::InvalidFormat:
    case Errc::Io:
      return kExitData;
    case Errc::SingleClassInput:
    case Errc::EmptyData:
    case Errc::TooFewClasses:
    case Errc::StageOutOfRange:
    case Errc::PolicySourceEmpty:
    case Errc::FoldDegenerate:
    case Errc::ValueNotInGrid:
      return kExitTraining;
    case Errc::DimensionMismatch:
    case Errc::LengthMismatch:
    case Errc::LabelOutOfRange:
    case Errc::FingerprintMismatch:
      return kExitEvaluation;
  }
  return kExitTraining;
}

PrepareResult cmd_prepare(const RunConfig& config) {
  phase(kExitConfig, [&] { config.validate(); });
  if (config.input_path.empty()) throw CommandError(kExitConfig, "prepare needs an input csv");
  return phase(kExitData, [&] {
    PrepareResult r;
    const Dataset raw = load_csv(config.input_path, config.csv);
    CleanResult cleaned = clean(raw, config.cleaning);
    SplitResult split = stratified_split(cleaned.data, config.split);
    ensure_dir(config.out_dir);
    r.train_csv = config.out_dir / "train.csv";
    r.test_csv = config.out_dir / "test.csv";
    r.report_path = config.out_dir / "cleaning_report.txt";
    save_csv(split.train, r.train_csv);
    save_csv(split.test, r.test_csv);
    std::string report = cleaned.report.to_text();
    report += "train_rows: " + std::to_string(split.train.rows()) + "\n";
    report += "test_rows: " + std::to_string(split.test.rows()) + "\n";
    for (const auto& w : split.warnings) report += "warning: " + w + "\n";
    write_text(r.report_path, report);
    r.cleaning = cleaned.report;
    r.warnings = std::move(split.warnings);
    r.train_rows = split.train.rows();
    r.test_rows = split.test.rows();
    return r;
  });
}

TrainOutcome train_model(const RunConfig& config, const Dataset& train) {
  phase(kExitConfig, [&] { config.validate(); });
  return phase(kExitTraining, [&] {
    TrainOutcome out;
    out.bundle.kind = config.method;
    out.bundle.data = fingerprint(train);
    out.bundle.config = to_json(config);
    CvConfig cv = config.cv;
    cv.threads = config.threads;

    if (config.method == Method::mcc) {
      const auto weights = compute_sample_weights(train.labels, config.mcc_weight_scheme());
      GbtParams params;
      if (config.hpo == HpoMode::fixed) {
        params = *config.params;
      } else {
        SearchTask task;
        task.objective = Objective::multiclass_softmax;
        task.scheme = config.mcc_weight_scheme();
        HpoResult r = config.hpo == HpoMode::gs ? grid_search(config.grid, train, cv, task)
                                                : halving_grid_search(config.grid, train, cv, config.halving, task);
        out.timings.hpo_s = r.wall_clock;
        params = r.best_params;
        out.hpo.push_back(std::move(r));
      }
      auto [model, seconds] = timed([&] {
        return train_multiclass(train.features, train.labels, static_cast<int>(train.num_classes()), weights, params);
      });
      out.timings.train_s = seconds;
      out.bundle.model = std::move(model);
      return out;
    }

    const ClassOrdering ordering = order_classes(class_frequencies(train.labels));
    const CascadeOptions options = config.cascade_options();
    if (config.hpo == HpoMode::fixed) {
      const GbtParams params = *config.params;
      auto [model, seconds] = timed([&] { return train_cascade(train, ordering, std::span(&params, 1), options); });
      out.timings.train_s = seconds;
      out.bundle.model = std::move(model);
      return out;
    }
    const SearchMethod method = config.hpo == HpoMode::gs    ? SearchMethod::grid
                                : config.hpo == HpoMode::hgs ? SearchMethod::halving
                                                             : SearchMethod::pruned_halving;
    TunedCascade tuned = tune_cascade(train, ordering, config.grid, method, cv, config.halving, options);
    out.timings.hpo_s = tuned.hpo_seconds;
    out.timings.train_s = tuned.train_seconds;
    out.hpo = std::move(tuned.stage_results);
    out.bundle.model = std::move(tuned.model);
    return out;
  });
}

Evaluation evaluate_bundle(const ModelBundle& bundle, const Dataset& test, UnknownAction action) {
  bundle.check_schema(test.feature_names);
  const auto class_map = bundle.map_classes(test);
  std::vector<int> y_true;
  y_true.reserve(test.rows());
  for (ClassId y : test.labels) y_true.push_back(class_map[static_cast<std::size_t>(y)]);

  const bool unknown_column = bundle.kind == Method::sbc && action == UnknownAction::emit_unknown;
  auto [y_pred, seconds] = timed([&] {
    if (bundle.kind == Method::mcc) return predict_class(bundle.mcc(), test.features);
    return to_labels(predict_batch(bundle.sbc(), test.features, action));
  });

  Evaluation e;
  e.class_names = bundle.data.class_names;
  e.confusion = confusion(y_true, y_pred, bundle.data.class_names.size(), unknown_column);
  const auto report = per_class_report(e.confusion);
  e.summary = summarize(e.confusion, report, {0.0, 0.0, seconds});
  return e;
}

void write_evaluation(const Evaluation& e, const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_text(dir / "report.txt", format_summary(e.summary, e.class_names));
  write_text(dir / "summary.json", summary_to_json(e.summary, e.class_names));
  write_text(dir / "confusion.csv", confusion_to_csv(e.confusion, e.class_names));
  write_text(dir / "confusion_normalized.csv", normalized_to_csv(e.confusion, e.class_names));
}

TrainOutcome cmd_train(const RunConfig& config, std::ostream& log) {
  phase(kExitConfig, [&] { config.validate(); });
  if (config.train_path.empty()) throw CommandError(kExitConfig, "train needs a training csv");
  const Dataset train = phase(kExitData, [&] { return load_csv(config.train_path, config.csv); });
  std::optional<Dataset> test;
  if (!config.test_path.empty()) test = phase(kExitData, [&] { return load_csv(config.test_path, config.csv); });

  TrainOutcome out = train_model(config, train);
  phase(kExitData, [&] {
    ensure_dir(config.out_dir);
    out.bundle_path = config.out_dir / "model.json";
    save_bundle(out.bundle, out.bundle_path);
    if (!out.hpo.empty()) {
      nlohmann::json log_doc = nlohmann::json::array();
      for (const auto& r : out.hpo) log_doc.push_back(to_json(r));
      write_text(config.out_dir / "hpo.json", log_doc.dump(2) + "\n");
    }
  });
  if (test) {
    out.evaluation = phase(kExitEvaluation, [&] { return evaluate_bundle(out.bundle, *test, config.unknown_action); });
    out.timings.test_s = out.evaluation->summary.timings.test_s;
    out.evaluation->summary.timings = out.timings;
    phase(kExitData, [&] { write_evaluation(*out.evaluation, config.out_dir); });
    log << format_summary(out.evaluation->summary, out.evaluation->class_names);
  } else {
    log << timing_rows(out.timings);
  }
  log << "model written to " << out.bundle_path.string() << '\n';
  return out;
}

Evaluation cmd_evaluate(const std::filesystem::path& bundle_path, const std::filesystem::path& test_csv,
                        const CsvOptions& csv, UnknownAction action, const std::filesystem::path& out_dir) {
  const ModelBundle bundle = phase(kExitData, [&] { return load_bundle(bundle_path); });
  const Dataset test = phase(kExitData, [&] { return load_csv(test_csv, csv); });
  Evaluation e = phase(kExitEvaluation, [&] { return evaluate_bundle(bundle, test, action); });
  phase(kExitData, [&] { write_evaluation(e, out_dir); });
  return e;
}

std::vector<std::string> cmd_predict(const std::filesystem::path& bundle_path, const std::filesystem::path& csv_path,
                                     const CsvOptions& csv) {
  const ModelBundle bundle = phase(kExitData, [&] { return load_bundle(bundle_path); });
  const FeatureTable table = phase(kExitData, [&] { return load_feature_csv(csv_path, csv); });
  return phase(kExitEvaluation, [&] {
    bundle.check_schema(table.feature_names);
    std::vector<std::string> lines;
    lines.push_back("row,prediction,trace");
    if (bundle.kind == Method::mcc) {
      const auto labels = predict_class(bundle.mcc(), table.features);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        lines.push_back(std::to_string(i) + "," + bundle.data.class_names[static_cast<std::size_t>(labels[i])] + ",");
      }
      return lines;
    }
    const auto preds = predict_batch(bundle.sbc(), table.features, UnknownAction::emit_unknown);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto& p = preds[i];
      std::string trace = "[";
      for (std::size_t k = 0; k < p.trace.size(); ++k) {
        if (k > 0) trace += ";";
        trace += std::to_string(p.trace[k].stage) + ":" + fixed(p.trace[k].probability, 6);
      }
      trace += "]";
      const std::string name = p.known ? bundle.data.class_names[static_cast<std::size_t>(*p.known)] : "UNKNOWN";
      lines.push_back(std::to_string(i) + "," + name + "," + trace);
    }
    return lines;
  });
}

// ---------------------------------------------------------------- benchmark

BenchmarkReport run_benchmark(const RunConfig& config, const std::vector<std::string>& methods, std::ostream& log) {
  if (config.train_path.empty() || config.test_path.empty()) {
    throw CommandError(kExitConfig, "benchmark needs prepared train and test csv files");
  }
  std::vector<RunConfig> columns;
  for (const auto& spec : methods) {
    RunConfig c = config;
    phase(kExitConfig, [&] { apply_method_spec(c, spec); });
    columns.push_back(std::move(c));
  }
  const Dataset train = phase(kExitData, [&] { return load_csv(config.train_path, config.csv); });
  const Dataset test = phase(kExitData, [&] { return load_csv(config.test_path, config.csv); });

  BenchmarkReport report;
  report.class_names = train.class_names;
  const auto freqs = class_frequencies(train.labels);
  report.class_order = phase(kExitTraining, [&] { return order_classes(freqs).class_at; });
  report.train_counts.assign(train.num_classes(), 0);
  report.test_counts.assign(train.num_classes(), 0);
  for (auto [c, n] : freqs) report.train_counts[static_cast<std::size_t>(c)] = n;
  for (std::size_t r = 0; r < test.rows(); ++r) {
    const auto& name = test.class_names[static_cast<std::size_t>(test.labels[r])];
    auto it = std::find(train.class_names.begin(), train.class_names.end(), name);
    if (it != train.class_names.end()) ++report.test_counts[static_cast<std::size_t>(it - train.class_names.begin())];
  }

  for (std::size_t k = 0; k < columns.size(); ++k) {
    BenchmarkColumn col;
    col.spec = methods[k];
    col.label = columns[k].label();
    log << "[" << (k + 1) << "/" << columns.size() << "] " << col.label << std::endl;
    try {
      TrainOutcome outcome = train_model(columns[k], train);
      Evaluation e = phase(kExitEvaluation,
                           [&] { return evaluate_bundle(outcome.bundle, test, columns[k].unknown_action); });
      outcome.timings.test_s = e.summary.timings.test_s;
      e.summary.timings = outcome.timings;
      col.summary = e.summary;
    } catch (const std::exception& ex) {
      col.error = ex.what();
      log << "  failed: " << col.error << std::endl;
    }
    report.columns.push_back(std::move(col));
  }
  return report;
}

BenchmarkReport cmd_benchmark(const RunConfig& config, const std::vector<std::string>& methods, std::ostream& log) {
  BenchmarkReport report = run_benchmark(config, methods, log);
  phase(kExitData, [&] {
    ensure_dir(config.out_dir);
    write_text(config.out_dir / "benchmark.txt", report.to_text());
    write_text(config.out_dir / "benchmark.csv", report.to_csv());
    write_text(config.out_dir / "benchmark.json", report.to_json().dump(2) + "\n");
  });
  log << report.to_text();
  return report;
}

namespace {

struct ReportGrid {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<std::string>> cells;  // rows x columns
};

ReportGrid build_grid(const BenchmarkReport& r) {
  ReportGrid g;
  for (const auto& c : r.columns) g.col_labels.push_back(c.label);
  auto add_row = [&](std::string label, auto value_of) {
    g.row_labels.push_back(std::move(label));
    std::vector<std::string> row;
    for (const auto& c : r.columns) row.push_back(c.summary ? value_of(*c.summary) : std::string("error"));
    g.cells.push_back(std::move(row));
  };
  for (std::size_t rank = 0; rank < r.class_order.size(); ++rank) {
    const auto c = static_cast<std::size_t>(r.class_order[rank]);
    add_row(std::to_string(rank) + " (" + r.class_names[c] + " | " + std::to_string(r.train_counts[c]) + " | " +
                std::to_string(r.test_counts[c]) + ")",
            [c](const EvalSummary& s) { return c < s.per_class.size() ? fixed(s.per_class[c].f1, 2) : std::string("-"); });
  }
  add_row("Accuracy", [](const EvalSummary& s) { return fixed(s.accuracy, 2); });
  add_row("Average F1", [](const EvalSummary& s) { return fixed(s.avg_f1, 2); });
  add_row("Std-dev F1", [](const EvalSummary& s) { return fixed(s.std_f1, 2); });
  add_row("HPO time", [](const EvalSummary& s) { return fixed(s.timings.hpo_s, 2); });
  add_row("Train time", [](const EvalSummary& s) { return fixed(s.timings.train_s, 2); });
  add_row("Test time", [](const EvalSummary& s) { return fixed(s.timings.test_s, 2); });
  return g;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string BenchmarkReport::to_text() const {
  const ReportGrid g = build_grid(*this);
  std::size_t first = std::string("Class ID (Name | train size | test size)").size();
  for (const auto& l : g.row_labels) first = std::max(first, l.size());
  std::vector<std::size_t> widths;
  for (const auto& c : g.col_labels) widths.push_back(std::max<std::size_t>(c.size(), 8));
  auto pad = [](const std::string& s, std::size_t w, bool right) {
    const std::string fill(w > s.size() ? w - s.size() : 0, ' ');
    return right ? fill + s : s + fill;
  };
  std::string out = pad("Class ID (Name | train size | test size)", first, false);
  for (std::size_t k = 0; k < g.col_labels.size(); ++k) out += " | " + pad(g.col_labels[k], widths[k], true);
  out += "\n" + std::string(out.size() - 1, '-') + "\n";
  for (std::size_t r = 0; r < g.row_labels.size(); ++r) {
    out += pad(g.row_labels[r], first, false);
    for (std::size_t k = 0; k < g.col_labels.size(); ++k) out += " | " + pad(g.cells[r][k], widths[k], true);
    out += "\n";
  }
  for (const auto& c : columns) {
    if (!c.error.empty()) out += "error in " + c.label + ": " + c.error + "\n";
  }
  return out;
}

std::string BenchmarkReport::to_csv() const {
  const ReportGrid g = build_grid(*this);
  std::string out = "row";
  for (const auto& c : g.col_labels) out += "," + csv_field(c);
  out += "\n";
  for (std::size_t r = 0; r < g.row_labels.size(); ++r) {
    out += csv_field(g.row_labels[r]);
    for (const auto& cell : g.cells[r]) out += "," + cell;
    out += "\n";
  }
  return out;
}

nlohmann::json BenchmarkReport::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t rank = 0; rank < class_order.size(); ++rank) {
    const auto c = static_cast<std::size_t>(class_order[rank]);
    classes.push_back({{"rank", rank}, {"name", class_names[c]}, {"train", train_counts[c]}, {"test", test_counts[c]}});
  }
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) {
    nlohmann::json col = {{"spec", c.spec}, {"label", c.label}};
    if (c.summary) {
      nlohmann::json f1 = nlohmann::json::object();
      for (std::size_t k = 0; k < c.summary->per_class.size(); ++k) f1[class_names[k]] = c.summary->per_class[k].f1;
      col["f1"] = std::move(f1);
      col["accuracy"] = c.summary->accuracy;
      col["avg_f1"] = c.summary->avg_f1;
      col["std_f1"] = c.summary->std_f1;
      col["hpo_s"] = c.summary->timings.hpo_s;
      col["train_s"] = c.summary->timings.train_s;
      col["test_s"] = c.summary->timings.test_s;
    } else {
      col["error"] = c.error;
    }
    cols.push_back(std::move(col));
  }
  return {{"classes", std::move(classes)}, {"columns", std::move(cols)}};
}

}  // namespace sbc
