#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "../common/manifest.hpp"
#include "tsc/cli.hpp"
#include "tsc/data.hpp"
#include "tsc/error.hpp"
#include "tsc/explain.hpp"
#include "tsc/models.hpp"
#include "tsc/optim.hpp"
#include "tsc/reservoir.hpp"
#include "tsc/stats.hpp"

namespace tsc::cli {

namespace fs = std::filesystem;

namespace {

// Flag errors detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool is_long_format(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  return line.rfind("series_id,", 0) == 0;
}

std::pair<data::Dataset, data::Dataset> load_pair(const fs::path& train, const fs::path& test) {
  return is_long_format(train) ? data::load_mts_pair(train, test) : data::load_ucr(train, test);
}

// A single file encoded with an existing vocabulary and resampled to `length`.
data::Dataset load_for_model(const fs::path& path, const std::vector<std::string>& vocabulary, std::size_t length) {
  data::Dataset d;
  if (is_long_format(path)) {
    d = data::to_dataset(data::load_mts_long(path), vocabulary, length);
  } else {
    std::ifstream in(path);
    const auto rows = data::parse_ucr(in);
    const std::size_t t = rows.values.front().size();
    if (t != length) {
      throw ParseError(path.string() + " holds series of length " + std::to_string(t) + "; the model expects " +
                       std::to_string(length));
    }
    std::vector<double> buf;
    for (const auto& r : rows.values) buf.insert(buf.end(), r.begin(), r.end());
    d.x = Tensor(Shape{rows.values.size(), t, 1}, std::move(buf));
    d.vocabulary = vocabulary;
    d.labels = data::encode_labels(rows.labels, vocabulary);
    d.min_length = d.max_length = t;
  }
  d.name = path.stem().string();
  return d;
}

std::string read_format(const fs::path& manifest) { return detail::Manifest::read(manifest).get("format"); }

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// ---- train ----

struct TrainFlags {
  std::vector<std::string> archs;
  std::string train, test, out;
  std::size_t runs = 10, jobs = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> epochs, batch;
  std::optional<double> lr;
};

struct RunOutcome {
  stats::RunRecord record;
  std::exception_ptr error;
};

stats::RunRecord train_one(const std::string& arch, const data::Dataset& train, const data::Dataset& test,
                           std::uint64_t seed, const TrainFlags& f, const fs::path& out) {
  const fs::path stem = out / "models" / train.name / arch / ("seed" + std::to_string(seed) + ".model");
  const fs::path log_path = out / "logs" / train.name / arch / ("seed" + std::to_string(seed) + ".csv");
  fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path, std::ios::trunc);

  stats::RunRecord rec{train.name, arch, seed, 0.0, 0.0, 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  if (arch == "twiesn") {
    auto fit = reservoir::twiesn_fit(train, reservoir::Grid::standard(), seed);
    for (const auto& s : fit.scores) {
      const auto& c = s.config;
      log << c.size << ',' << c.sparsity << ',' << c.spectral_radius << ',' << c.ridge << ',' << s.accuracy << '\n';
    }
    fit.model.dataset = train.name;
    double nll = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto p = reservoir::twiesn_posterior(fit.model, train.series(i));
      nll -= std::log(std::max(p.probabilities[train.labels[i]], 1e-12));
    }
    rec.loss = nll / double(train.size());
    rec.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto pred = reservoir::twiesn_predict(fit.model, test);
    rec.accuracy = models::accuracy(pred, test.labels);
    reservoir::save_twiesn(fit.model, stem);
    return rec;
  }

  const auto a = models::parse_architecture(arch);
  auto config = optim::default_config(a);
  config.seed = seed;
  if (f.epochs) config.epochs = *f.epochs;
  if (f.batch) config.batch_size = *f.batch;
  if (f.lr) config.learning_rate = *f.lr;
  auto result = optim::fit(a, train, config, &log);
  result.model.dataset = train.name;
  rec.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.loss = result.history.best_loss;
  const auto pred = models::predict(result.model.network, test, result.model.slicing);
  rec.accuracy = models::accuracy(pred, test.labels);
  models::save_model(result.model, stem);
  return rec;
}

int classify(const std::exception_ptr& e, std::string& message) {
  try {
    std::rethrow_exception(e);
  } catch (const UsageError& x) {
    message = x.what();
    return usage;
  } catch (const UnsupportedArchitecture& x) {
    message = x.what();
    return usage;
  } catch (const DivergenceError& x) {
    message = std::string("training diverged: ") + x.what();
    return numeric_error;
  } catch (const NumericalError& x) {
    message = std::string("numerical failure: ") + x.what();
    return numeric_error;
  } catch (const DegenerateError& x) {
    message = std::string("degenerate input: ") + x.what();
    return numeric_error;
  } catch (const std::exception& x) {
    message = x.what();
    return data_error;
  }
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  for (const auto& a : f.archs) {
    try {
      if (a != "twiesn") models::parse_architecture(a);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  auto [train, test] = load_pair(f.train, f.test);
  const fs::path dir = f.out.empty() ? fs::path(default_out_dir()) : fs::path(f.out);
  fs::create_directories(dir);

  std::mutex io;
  for (const auto& arch : f.archs) {
    std::vector<RunOutcome> outcomes(f.runs);
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t r;
        {
          std::lock_guard lock(io);
          if (next == f.runs) return;
          r = next++;
        }
        const std::uint64_t seed = f.seed + r;
        auto& o = outcomes[r];
        try {
          o.record = train_one(arch, train, test, seed, f, dir);
          std::lock_guard lock(io);
          stats::append_results(dir / "results.csv", {o.record});
          out << arch << ' ' << train.name << " seed " << seed << " accuracy " << fixed(o.record.accuracy, 4)
              << " loss " << fixed(o.record.loss, 6) << " time " << fixed(o.record.train_seconds, 1) << "s\n"
              << std::flush;
        } catch (...) {
          o.error = std::current_exception();
          std::lock_guard lock(io);
          out << arch << ' ' << train.name << " seed " << seed << " failed\n" << std::flush;
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < std::min(f.jobs, f.runs); ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<double> acc;
    for (std::size_t r = 0; r < f.runs; ++r) {
      if (outcomes[r].error) std::rethrow_exception(outcomes[r].error);
      acc.push_back(outcomes[r].record.accuracy);
    }
    double mean = 0, var = 0;
    for (double v : acc) mean += v / double(acc.size());
    for (double v : acc) var += (v - mean) * (v - mean);
    const double sd = acc.size() > 1 ? std::sqrt(var / double(acc.size() - 1)) : 0.0;
    out << arch << ' ' << train.name << " mean accuracy " << fixed(mean, 4) << " ± " << fixed(sd, 4) << " over "
        << acc.size() << " run(s)\n";
  }
  return ok;
}

// ---- compare ----

struct CompareFlags {
  std::vector<std::string> results;
  double alpha = 0.05;
  std::string aggregate = "mean", out, report, group, metadata;
};

int cmd_compare(const CompareFlags& f, std::ostream& out) {
  const auto kind = stats::parse_aggregation(f.aggregate);
  if (!f.group.empty()) {
    stats::parse_group_key(f.group);
    if (f.metadata.empty()) throw UsageError("--group needs --metadata <csv>");
  }
  std::vector<stats::RunRecord> runs;
  for (const auto& p : f.results) {
    const auto part = stats::read_results(fs::path(p));
    runs.insert(runs.end(), part.begin(), part.end());
  }
  const auto table = stats::aggregate(runs, kind);
  const auto rep = stats::compare(table, f.alpha);
  std::string text = "aggregate " + stats::to_string(kind) + "\n" + stats::format_report(rep);
  if (!f.group.empty()) {
    const auto meta = stats::read_metadata(f.metadata);
    for (const auto& g : stats::grouped_ranks(table, meta, f.group)) {
      text += "group " + g.group + " datasets=" + std::to_string(g.datasets.size());
      for (std::size_t c = 0; c < g.ranks.size(); ++c) text += " " + rep.classifiers[c] + "=" + fixed(g.ranks[c], 4);
      text += "\n";
    }
  }
  write_text(f.out, stats::render_cd_diagram(rep));
  fs::path report = f.report.empty() ? fs::path(f.out).replace_extension(".txt") : fs::path(f.report);
  write_text(report, text);
  out << text;
  return ok;
}

// ---- cam / mds ----

struct ExplainFlags {
  std::string model, data, out;
  std::size_t cls = 0;
  bool raw = false;
};

models::TrainedModel load_gap_model(const fs::path& manifest) {
  if (read_format(manifest) == "tsc-twiesn-1")
    throw UnsupportedArchitecture("twiesn has no GAP layer; cam and mds need an fcn or resnet model");
  auto model = models::load_model(manifest);
  if (!explain::gap_headed(model.network.spec().architecture)) {
    throw UnsupportedArchitecture(models::to_string(model.network.spec().architecture) +
                                  " has no GAP layer before its softmax; cam and mds need an fcn or resnet model");
  }
  return model;
}

int cmd_cam(const ExplainFlags& f, std::ostream& out) {
  const auto model = load_gap_model(f.model);
  if (f.cls >= model.network.spec().classes)
    throw UsageError("--class " + std::to_string(f.cls) + " out of range for " +
                     std::to_string(model.network.spec().classes) + " classes");
  const auto d = load_for_model(f.data, model.vocabulary, model.network.spec().length);
  const fs::path dir = f.out.empty() ? fs::path(default_out_dir()) / "cam" : fs::path(f.out);
  fs::create_directories(dir);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto series = d.series(i);
    const auto cam = explain::compute_cam(model.network, series, f.cls);
    const std::string stem = "cam_" + std::to_string(i);
    write_text(dir / (stem + ".svg"), explain::export_cam_svg(series, cam.normalized));
    std::ostringstream csv;
    explain::write_cam_csv(cam, csv);
    write_text(dir / (stem + ".csv"), csv.str());
  }
  out << "wrote " << d.size() << " class-" << f.cls << " activation maps to " << dir.string() << "\n";
  return ok;
}

int cmd_mds(const ExplainFlags& f, std::ostream& out) {
  const auto model = load_gap_model(f.model);
  const auto d = load_for_model(f.data, model.vocabulary, model.network.spec().length);
  const Tensor features = f.raw ? d.x.reshaped(Shape{d.size(), d.length() * d.dims()})
                                : explain::gap_features(model.network, d);
  const auto e = explain::mds_embed(explain::distance_matrix(features));
  const fs::path dir = f.out.empty() ? fs::path(default_out_dir()) / "mds" : fs::path(f.out);
  write_text(dir / "mds.svg", explain::export_mds_svg(e, d.labels, d.vocabulary));
  std::ostringstream csv;
  explain::write_mds_csv(e, d.labels, d.vocabulary, csv);
  write_text(dir / "mds.csv", csv.str());
  out << "embedded " << d.size() << " series, stress " << fixed(e.stress, 6) << " after " << e.iterations
      << " iteration(s), wrote " << (dir / "mds.svg").string() << "\n";
  return ok;
}

}  // namespace

std::string default_out_dir() {
  const char* env = std::getenv("TSC_OUT_DIR");
  return env && *env ? env : "tsc_out";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time series classification: train deep models, compare classifiers, explain predictions."};
  app.name("tsc");
  app.require_subcommand(1, 1);

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Train seeded runs and append them to <out>/results.csv");
  train->add_option("--arch", tf.archs, "Architecture id(s): mlp fcn resnet encoder mcnn tlenet mcdcnn timecnn twiesn")
      ->required()
      ->delimiter(',');
  train->add_option("--train", tf.train, "Training file (archive .tsv/.csv or long-format csv)")->required();
  train->add_option("--test", tf.test, "Test file")->required();
  train->add_option("--runs", tf.runs, "Number of runs")->check(CLI::PositiveNumber);
  train->add_option("--seed", tf.seed, "Base seed; run r uses seed + r");
  train->add_option("--out", tf.out, "Output directory (default $TSC_OUT_DIR or tsc_out)");
  train->add_option("--epochs", tf.epochs, "Override the default epoch count")->check(CLI::PositiveNumber);
  train->add_option("--batch", tf.batch, "Override the default mini-batch size")->check(CLI::PositiveNumber);
  train->add_option("--lr", tf.lr, "Override the default learning rate")->check(CLI::PositiveNumber);
  train->add_option("--jobs", tf.jobs, "Runs trained concurrently")->check(CLI::PositiveNumber);

  CompareFlags cf;
  auto* compare = app.add_subcommand("compare", "Friedman / Wilcoxon-Holm comparison and critical-difference diagram");
  compare->add_option("--results", cf.results, "Results csv (repeatable; own runs or dataset,classifier,accuracy)")
      ->required();
  compare->add_option("--alpha", cf.alpha, "Significance level")->check(CLI::Range(1e-12, 0.999999));
  compare->add_option("--aggregate", cf.aggregate, "mean, median, min or max")
      ->check(CLI::IsMember({"mean", "median", "min", "max"}));
  compare->add_option("--out", cf.out, "Diagram path (.svg)")->required();
  compare->add_option("--report", cf.report, "Report path (default: diagram path with .txt)");
  compare->add_option("--group", cf.group, "Grouped ranks by theme, length or trainsize")
      ->check(CLI::IsMember({"theme", "length", "trainsize"}));
  compare->add_option("--metadata", cf.metadata, "dataset,theme,length,train_size csv for --group");

  ExplainFlags cam_flags, mds_flags;
  auto* cam = app.add_subcommand("cam", "Class activation maps for every series of a file");
  cam->add_option("--model", cam_flags.model, "Model manifest")->required();
  cam->add_option("--data", cam_flags.data, "Series file")->required();
  cam->add_option("--class", cam_flags.cls, "Class index")->required();
  cam->add_option("--out", cam_flags.out, "Output directory");
  auto* mds = app.add_subcommand("mds", "Metric MDS of the GAP features of a file");
  mds->add_option("--model", mds_flags.model, "Model manifest")->required();
  mds->add_option("--data", mds_flags.data, "Series file")->required();
  mds->add_option("--out", mds_flags.out, "Output directory");
  mds->add_flag("--raw", mds_flags.raw, "Embed the raw series instead of GAP features");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? ok : usage;
  }

  try {
    if (*train) return cmd_train(tf, out);
    if (*compare) return cmd_compare(cf, out);
    if (*cam) return cmd_cam(cam_flags, out);
    if (*mds) return cmd_mds(mds_flags, out);
  } catch (const std::exception&) {
    std::string message;
    const int code = classify(std::current_exception(), message);
    err << "tsc: " << message << "\n";
    return code;
  }
  return usage;
}

}  // namespace tsc::cli
