// Command-line front end: dataset generation, training, evaluation,
// prediction, complexity analysis, and latency benchmarking.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ulcnn/analysis.hpp"
#include "ulcnn/dataio.hpp"
#include "ulcnn/error.hpp"
#include "ulcnn/model.hpp"
#include "ulcnn/rng.hpp"
#include "ulcnn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ulcnn;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

/// Files produced by one subcommand. Anything not committed is deleted when
/// the command unwinds, so failures never leave partial outputs behind.
class Artifacts {
 public:
  ~Artifacts() {
    if (committed_) return;
    std::error_code ec;
    for (const fs::path& p : paths_) fs::remove(p, ec);
  }

  void add(const fs::path& p) { paths_.push_back(p); }
  void commit() { committed_ = true; }
  const std::vector<fs::path>& paths() const { return paths_; }

 private:
  std::vector<fs::path> paths_;
  bool committed_ = false;
};

void write_manifest(const fs::path& path, const std::string& command, uint64_t seed,
                    const json& config, const Artifacts& artifacts,
                    const std::string& started) {
  json m;
  m["schema_version"] = 1;
  m["tool"] = {{"name", "ulcnn"}, {"version", kToolVersion}};
  m["command"] = command;
  m["seed"] = seed;
  m["started"] = started;
  m["finished"] = iso_timestamp();
  m["config"] = config;
  json files = json::array();
  for (const fs::path& p : artifacts.paths()) files.push_back(p.string());
  m["artifacts"] = files;

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail_io("cannot open for writing: " + tmp.string());
    out << m.dump(2) << '\n';
    if (!out) fail_io("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail_io("cannot move " + tmp.string() + " to " + path.string());
}

json model_config_json(const ModelConfig& c) {
  return json{{"k", c.k},
              {"n_cv", c.n_cv},
              {"n_pw", c.n_pw},
              {"s_ke", c.s_ke},
              {"n_fmdr", c.n_fmdr},
              {"n_classes", c.n_classes},
              {"shuffle_groups", c.shuffle_groups},
              {"ca_reduction", c.ca_reduction},
              {"use_cv_conv", c.use_cv_conv},
              {"use_ca", c.use_ca},
              {"use_cs", c.use_cs},
              {"use_clff", c.use_clff}};
}

json train_config_json(const TrainConfig& c) {
  return json{{"initial_lr", c.initial_lr},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"use_da", c.use_da},
              {"use_alr", c.use_alr},
              {"alr", {{"patience", c.alr.patience}, {"factor", c.alr.factor},
                       {"min_lr", c.alr.min_lr}}},
              {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2},
                        {"eps", c.adam.eps}}}};
}

template <typename T>
void take(const json& obj, const char* key, T& into) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail_config(std::string("config key \"") + key + "\": " + e.what());
  }
}

void check_known_keys(const json& obj, std::initializer_list<const char*> known,
                      const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end()) {
      fail_config("config: unknown key \"" + key + "\" in " + where);
    }
  }
}

/// Partial overrides from a JSON file: {"model": {...}, "train": {...}}.
void load_config_file(const fs::path& path, ModelConfig& model, TrainConfig& train,
                      bool* n_classes_set = nullptr) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open config: " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    fail_config("config " + path.string() + ": " + e.what());
  }
  check_known_keys(root, {"model", "train"}, "top level");

  if (root.contains("model")) {
    const json& m = root["model"];
    check_known_keys(m,
                     {"k", "n_cv", "n_pw", "s_ke", "n_fmdr", "n_classes", "shuffle_groups",
                      "ca_reduction", "use_cv_conv", "use_ca", "use_cs", "use_clff"},
                     "model");
    take(m, "k", model.k);
    take(m, "n_cv", model.n_cv);
    take(m, "n_pw", model.n_pw);
    take(m, "s_ke", model.s_ke);
    take(m, "n_fmdr", model.n_fmdr);
    take(m, "n_classes", model.n_classes);
    take(m, "shuffle_groups", model.shuffle_groups);
    take(m, "ca_reduction", model.ca_reduction);
    take(m, "use_cv_conv", model.use_cv_conv);
    take(m, "use_ca", model.use_ca);
    take(m, "use_cs", model.use_cs);
    take(m, "use_clff", model.use_clff);
    if (n_classes_set) *n_classes_set = m.contains("n_classes");
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    check_known_keys(t,
                     {"initial_lr", "epochs", "batch_size", "use_da", "use_alr", "alr", "adam"},
                     "train");
    take(t, "initial_lr", train.initial_lr);
    take(t, "epochs", train.epochs);
    take(t, "batch_size", train.batch_size);
    take(t, "use_da", train.use_da);
    take(t, "use_alr", train.use_alr);
    if (t.contains("alr")) {
      const json& a = t["alr"];
      check_known_keys(a, {"patience", "factor", "min_lr"}, "train.alr");
      take(a, "patience", train.alr.patience);
      take(a, "factor", train.alr.factor);
      take(a, "min_lr", train.alr.min_lr);
    }
    if (t.contains("adam")) {
      const json& a = t["adam"];
      check_known_keys(a, {"beta1", "beta2", "eps"}, "train.adam");
      take(a, "beta1", train.adam.beta1);
      take(a, "beta2", train.adam.beta2);
      take(a, "eps", train.adam.eps);
    }
  }
}

void apply_ablations(const std::vector<std::string>& ablate, ModelConfig& config) {
  for (const std::string& name : ablate) {
    if (name == "cv") {
      config.use_cv_conv = false;
    } else if (name == "ca") {
      config.use_ca = false;
    } else if (name == "cs") {
      config.use_cs = false;
    } else if (name == "clff") {
      config.use_clff = false;
    } else {
      fail_config("--ablate: unknown component \"" + name + "\" (expected cv|ca|cs|clff)");
    }
  }
}

Modulation parse_mod_or_fail(const std::string& raw) {
  std::string upper = raw;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  const auto mod = parse_modulation(upper);
  if (!mod) fail_config("unsupported modulation: " + raw);
  return *mod;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::vector<std::string> mods;
  std::vector<int> snrs;
  int frames_per_cell = 0;
  int sps = 8;
  int k = 128;
  uint64_t seed = 0;
  bool noiseless = false;
  double phase_offset = 0.0;
  double cfo = 0.0;
  std::string out;
};

void run_gen_data(const GenArgs& args) {
  const std::string started = iso_timestamp();

  std::vector<Modulation> mods;
  LabelMap labels;
  for (const std::string& name : args.mods) {
    const Modulation m = parse_mod_or_fail(name);
    mods.push_back(m);
    labels.names.push_back(modulation_name(m));
  }
  labels.validate();

  std::vector<Frame> frames;
  frames.reserve(static_cast<size_t>(mods.size() * args.snrs.size()) *
                 static_cast<size_t>(args.frames_per_cell));
  for (size_t mi = 0; mi < mods.size(); ++mi) {
    for (size_t si = 0; si < args.snrs.size(); ++si) {
      GenSpec spec;
      spec.modulation = mods[mi];
      spec.snr_db = args.snrs[si];
      spec.samples_per_symbol = args.sps;
      spec.frames = args.frames_per_cell;
      spec.k = args.k;
      spec.seed = Rng::mix(args.seed, mi, si);
      spec.noiseless = args.noiseless;
      spec.phase_offset_rad = args.phase_offset;
      spec.cfo_cycles_per_sample = args.cfo;
      spec.label = static_cast<uint8_t>(mi);
      std::vector<Frame> cell = generate(spec);
      std::cout << labels.names[mi] << " @ " << args.snrs[si] << " dB: " << cell.size()
                << " frames\n";
      for (Frame& f : cell) frames.push_back(std::move(f));
    }
  }
  std::cout << "total: " << frames.size() << " frames\n";

  Artifacts artifacts;
  const fs::path out(args.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_iqf(frames, labels, out);
  artifacts.add(out);

  json config;
  config["data"] = {{"mods", args.mods},          {"snrs", args.snrs},
                    {"frames_per_cell", args.frames_per_cell},
                    {"sps", args.sps},            {"k", args.k},
                    {"noiseless", args.noiseless}, {"phase_offset_rad", args.phase_offset},
                    {"cfo_cycles_per_sample", args.cfo}};
  const fs::path manifest = out.string() + ".manifest.json";
  write_manifest(manifest, "gen-data", args.seed, config, artifacts, started);
  artifacts.add(manifest);
  artifacts.commit();
  std::cout << "wrote " << out.string() << "\n";
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::vector<double> ratios{0.35, 0.15, 0.5};
  std::string config_path;
  int epochs = -1;
  int batch_size = -1;
  double lr = -1.0;
  bool no_da = false;
  bool no_alr = false;
  std::vector<std::string> ablate;
  uint64_t seed = 0;
  std::string out;
};

void run_train(const TrainArgs& args) {
  const std::string started = iso_timestamp();

  ModelConfig mc;
  TrainConfig tc;
  bool n_classes_from_config = false;
  if (!args.config_path.empty()) {
    load_config_file(args.config_path, mc, tc, &n_classes_from_config);
  }
  apply_ablations(args.ablate, mc);
  if (args.epochs >= 0) tc.epochs = args.epochs;
  if (args.batch_size >= 0) tc.batch_size = args.batch_size;
  if (args.lr >= 0.0) tc.initial_lr = args.lr;
  if (args.no_da) tc.use_da = false;
  if (args.no_alr) tc.use_alr = false;
  tc.seed = args.seed;

  if (args.ratios.size() != 3) fail_config("--split needs exactly three ratios");

  auto [frames, labels] = read_iqf(args.data);
  if (frames.empty()) fail_data(args.data + ": no frames");
  if (n_classes_from_config && mc.n_classes != labels.size()) {
    fail_config("config n_classes " + std::to_string(mc.n_classes) + " != " +
                std::to_string(labels.size()) + " labels in " + args.data);
  }
  mc.n_classes = labels.size();
  mc.k = frames.front().k();

  SplitResult parts = split(frames, {args.ratios[0], args.ratios[1], args.ratios[2]}, args.seed);
  std::cout << "split: " << parts.train.size() << " train, " << parts.val.size() << " val, "
            << parts.test.size() << " test\n";

  Model model(mc, args.seed);
  std::cout << "params: " << model.param_count_total() << "\n";
  std::cout << "train_frames: " << parts.train.size() << "\n";
  std::cout << "effective_train_frames: " << parts.train.size() * (tc.use_da ? 4 : 1) << "\n";

  MetricsReport fit_report = fit(model, parts.train, parts.val, tc);
  const EpochRow& best = fit_report.history[static_cast<size_t>(fit_report.best_epoch - 1)];
  std::cout << "best_epoch: " << fit_report.best_epoch << "\n";
  std::cout << "val_loss: " << best.val_loss << "\n";
  std::cout << "val_acc: " << best.val_acc << "\n";

  MetricsReport test_report = evaluate(model, parts.test);
  std::cout << "test_overall_acc: " << test_report.overall_accuracy << "\n";
  std::cout << "test_average_acc: " << test_report.average_accuracy << "\n";

  Artifacts artifacts;
  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);

  const fs::path weights = out_dir / "weights.ulcw";
  save_weights(model, weights);
  artifacts.add(weights);

  const fs::path history = out_dir / "history.csv";
  write_history_csv(fit_report, history);
  artifacts.add(history);

  const fs::path per_snr = out_dir / "per_snr.csv";
  write_per_snr_csv(test_report, per_snr);
  artifacts.add(per_snr);

  const fs::path confusion = out_dir / "confusion.csv";
  write_confusion_csv(test_report, &labels, confusion);
  artifacts.add(confusion);

  json config;
  config["model"] = model_config_json(mc);
  config["train"] = train_config_json(tc);
  config["data"] = {{"path", args.data}, {"split", args.ratios}, {"labels", labels.names}};
  const fs::path manifest = out_dir / "manifest.json";
  write_manifest(manifest, "train", args.seed, config, artifacts, started);
  artifacts.add(manifest);
  artifacts.commit();
  std::cout << "wrote " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string weights;
  std::string data;
  std::string out;
};

void run_eval(const EvalArgs& args) {
  const std::string started = iso_timestamp();
  Model model = load_model(args.weights);
  auto [frames, labels] = read_iqf(args.data);

  MetricsReport report = evaluate(model, frames);
  std::cout << "frames: " << frames.size() << "\n";
  std::cout << "overall_acc: " << report.overall_accuracy << "\n";
  std::cout << "average_acc: " << report.average_accuracy << "\n";
  for (const auto& [snr, acc] : report.per_snr) {
    std::cout << "snr " << snr << " dB: " << acc << "\n";
  }

  if (!args.out.empty()) {
    Artifacts artifacts;
    const fs::path out_dir(args.out);
    fs::create_directories(out_dir);
    const fs::path per_snr = out_dir / "per_snr.csv";
    write_per_snr_csv(report, per_snr);
    artifacts.add(per_snr);
    const fs::path confusion = out_dir / "confusion.csv";
    write_confusion_csv(report, &labels, confusion);
    artifacts.add(confusion);

    json config;
    config["model"] = model_config_json(model.config());
    config["data"] = {{"path", args.data}, {"weights", args.weights}};
    const fs::path manifest = out_dir / "manifest.json";
    write_manifest(manifest, "eval", 0, config, artifacts, started);
    artifacts.add(manifest);
    artifacts.commit();
    std::cout << "wrote " << out_dir.string() << "\n";
  }
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string weights;
  std::string in;
  std::string out;
};

void run_predict(const PredictArgs& args) {
  const std::string started = iso_timestamp();
  Model model = load_model(args.weights);
  auto [frames, labels] = read_iqf(args.in);
  if (labels.size() != model.config().n_classes) {
    fail_config("label map has " + std::to_string(labels.size()) + " entries but the model has " +
                std::to_string(model.config().n_classes) + " classes");
  }

  std::vector<int> preds;
  preds.reserve(frames.size());
  const size_t chunk = 256;
  for (size_t begin = 0; begin < frames.size(); begin += chunk) {
    const size_t end = std::min(frames.size(), begin + chunk);
    const std::vector<int> part = model.predict(frames_to_tensor(frames, begin, end));
    preds.insert(preds.end(), part.begin(), part.end());
  }
  for (size_t f = 0; f < preds.size(); ++f) {
    std::cout << "frame " << f << ": " << labels.names[static_cast<size_t>(preds[f])] << "\n";
  }

  if (!args.out.empty()) {
    Artifacts artifacts;
    const fs::path out(args.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    {
      std::ofstream csv(out, std::ios::trunc);
      if (!csv) fail_io("cannot open for writing: " + out.string());
      csv << "frame,prediction\n";
      for (size_t f = 0; f < preds.size(); ++f) {
        csv << f << ',' << labels.names[static_cast<size_t>(preds[f])] << '\n';
      }
      if (!csv) fail_io("write failed: " + out.string());
    }
    artifacts.add(out);

    json config;
    config["model"] = model_config_json(model.config());
    config["data"] = {{"path", args.in}, {"weights", args.weights}};
    const fs::path manifest = out.string() + ".manifest.json";
    write_manifest(manifest, "predict", 0, config, artifacts, started);
    artifacts.add(manifest);
    artifacts.commit();
  }
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string config_path;
  std::vector<std::string> ablate;
  std::string csv;
};

void run_analyze(const AnalyzeArgs& args) {
  ModelConfig mc;
  TrainConfig tc_ignored;
  if (!args.config_path.empty()) load_config_file(args.config_path, mc, tc_ignored);
  apply_ablations(args.ablate, mc);

  ComplexityReport report = model_complexity(mc);
  std::cout << format_complexity(report);

  if (!args.csv.empty()) {
    const fs::path out(args.csv);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_complexity_csv(report, out);
    std::cout << "wrote " << out.string() << "\n";
  }
  std::cout << "params: " << report.total_params() << ", macc: " << report.total_macc() << "\n";
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string weights;
  std::vector<int> batches{1, 10, 100, 1000};
  int reps = 30;
  int warmup = 5;
  uint64_t seed = 42;
  int threads = 0;  // 0: take ULCNN_THREADS (default 1)
  std::string out;
};

void run_bench(const BenchArgs& args) {
  Model model = args.weights.empty() ? Model(ModelConfig{}, 1) : load_model(args.weights);

  BenchConfig bc;
  bc.batch_sizes = args.batches;
  bc.repetitions = args.reps;
  bc.warmup = args.warmup;
  bc.seed = args.seed;
  bc.threads = args.threads > 0 ? args.threads : env_thread_count();

  BenchReport report = bench_latency(model, bc);
  std::cout << format_bench(report);

  if (!args.out.empty()) {
    const fs::path out(args.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_bench_csv(report, out);
    std::cout << "wrote " << out.string() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ULCNN modulation classifier"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("ulcnn ") + kToolVersion);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Synthesize an IQF dataset");
  gen_cmd->add_option("--mods", gen.mods, "Modulations (bpsk,qpsk,8psk,pam4,16qam,64qam)")
      ->delimiter(',')
      ->required();
  gen_cmd->add_option("--snrs", gen.snrs, "SNR values in dB")->delimiter(',')->required();
  gen_cmd->add_option("--frames-per-cell", gen.frames_per_cell, "Frames per (mod, snr) cell")
      ->required()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--sps", gen.sps, "Samples per symbol")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--k", gen.k, "Samples per frame")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_flag("--noiseless", gen.noiseless, "Disable AWGN");
  gen_cmd->add_option("--phase-offset", gen.phase_offset, "Carrier phase offset (rad)");
  gen_cmd->add_option("--cfo", gen.cfo, "Carrier frequency offset (cycles/sample)");
  gen_cmd->add_option("--out", gen.out, "Output IQF path")->required();
  gen_cmd->callback([&]() { run_gen_data(gen); });

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train on an IQF dataset");
  train_cmd->add_option("--data", train.data, "Input IQF dataset")->required();
  train_cmd->add_option("--split", train.ratios, "Train,val,test ratios")->delimiter(',');
  train_cmd->add_option("--config", train.config_path, "JSON config overrides");
  train_cmd->add_option("--epochs", train.epochs, "Epoch count");
  train_cmd->add_option("--batch-size", train.batch_size, "Batch size");
  train_cmd->add_option("--lr", train.lr, "Initial learning rate");
  train_cmd->add_flag("--no-da", train.no_da, "Disable rotation augmentation");
  train_cmd->add_flag("--no-alr", train.no_alr, "Disable the plateau lr schedule");
  train_cmd->add_option("--ablate", train.ablate, "Drop components: cv|ca|cs|clff")
      ->delimiter(',');
  train_cmd->add_option("--seed", train.seed, "RNG seed");
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->callback([&]() { run_train(train); });

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate weights on an IQF dataset");
  eval_cmd->add_option("--weights", eval.weights, "Weight file")->required();
  eval_cmd->add_option("--data", eval.data, "Input IQF dataset")->required();
  eval_cmd->add_option("--out", eval.out, "Output directory for CSV reports");
  eval_cmd->callback([&]() { run_eval(eval); });

  PredictArgs predict;
  CLI::App* predict_cmd = app.add_subcommand("predict", "Classify frames from an IQF file");
  predict_cmd->add_option("--weights", predict.weights, "Weight file")->required();
  predict_cmd->add_option("--in", predict.in, "Input IQF file")->required();
  predict_cmd->add_option("--out", predict.out, "Optional CSV output path");
  predict_cmd->callback([&]() { run_predict(predict); });

  AnalyzeArgs analyze;
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "Print the complexity accounting");
  analyze_cmd->add_option("--config", analyze.config_path, "JSON config overrides");
  analyze_cmd->add_option("--ablate", analyze.ablate, "Drop components: cv|ca|cs|clff")
      ->delimiter(',');
  analyze_cmd->add_option("--csv", analyze.csv, "Optional CSV output path");
  analyze_cmd->callback([&]() { run_analyze(analyze); });

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Measure per-sample forward latency");
  bench_cmd->add_option("--weights", bench.weights, "Weight file (default: fresh model)");
  bench_cmd->add_option("--batches", bench.batches, "Batch sizes")->delimiter(',');
  bench_cmd->add_option("--reps", bench.reps, "Timed repetitions (min 30)");
  bench_cmd->add_option("--warmup", bench.warmup, "Warmup runs (min 5)");
  bench_cmd->add_option("--seed", bench.seed, "Data seed");
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (default ULCNN_THREADS)");
  bench_cmd->add_option("--out", bench.out, "Optional CSV output path");
  bench_cmd->callback([&]() { run_bench(bench); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
