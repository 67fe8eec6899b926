#include "ulcnn/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ulcnn/rng.hpp"

namespace ulcnn {

int64_t ComplexityReport::total_trainable() const {
  int64_t n = 0;
  for (const ComplexityRow& r : rows) n += r.params_trainable;
  return n;
}

int64_t ComplexityReport::total_moving() const {
  int64_t n = 0;
  for (const ComplexityRow& r : rows) n += r.params_moving;
  return n;
}

int64_t ComplexityReport::total_params() const { return total_trainable() + total_moving(); }

int64_t ComplexityReport::total_macc() const {
  int64_t n = 0;
  for (const ComplexityRow& r : rows) n += r.macc;
  return n;
}

int64_t macc_cv(int k, int n_cv, int s_ke, int c_in) {
  return 4LL * k * c_in * n_cv * s_ke;
}

int64_t macc_sep(int n_len, int c, int n_pw, int s_ke) {
  const int64_t half = n_len / 2;
  return half * c * s_ke + half * c * n_pw;
}

int64_t macc_standard_conv(int n_len, int c, int n_pw, int s_ke) {
  return static_cast<int64_t>(n_len / 2) * c * n_pw * s_ke;
}

ComplexityReport model_complexity(const ModelConfig& config) {
  config.validate();
  ComplexityReport report;

  const int64_t s = config.s_ke;
  const int64_t width = 2LL * config.n_cv;
  const int64_t n_pw = config.n_pw;

  if (config.use_cv_conv) {
    // Complex conv: re+im kernel planes and re+im biases.
    report.rows.push_back({"iqcf.cv_conv", 2 * (s * 1 * config.n_cv) + 2 * config.n_cv, 0,
                           macc_cv(config.k, config.n_cv, config.s_ke, 1)});
    // Whitening BN: gamma_rr/ri/ii + beta_re/im trainable; mean re/im +
    // three covariance entries moving.
    report.rows.push_back({"iqcf.cvbn", 5LL * config.n_cv, 5LL * config.n_cv, 0});
  } else {
    // Same-width real replacement; its MACC uses the single-input-channel
    // accounting convention of the complex formula, which makes the 4x cost
    // of complex arithmetic versus a 2x-wide real layer explicit.
    report.rows.push_back(
        {"iqcf.conv", s * 2 * width + width, 0, static_cast<int64_t>(config.k) * width * s});
    report.rows.push_back({"iqcf.bn", 2 * width, 2 * width, 0});
  }

  for (int l = 1; l <= config.n_fmdr; ++l) {
    const std::string prefix = "fmdr" + std::to_string(l);
    const int64_t in_ch = (l == 1) ? width : n_pw;
    const int n_len = config.k >> (l - 1);
    const int64_t half = n_len / 2;

    report.rows.push_back({prefix + ".dw", s * in_ch, 0, half * in_ch * s});
    report.rows.push_back({prefix + ".pw", in_ch * n_pw + n_pw, 0, half * in_ch * n_pw});
    report.rows.push_back({prefix + ".bn", 2 * n_pw, 2 * n_pw, 0});
    if (config.use_cs) report.rows.push_back({prefix + ".shuffle", 0, 0, 0});
    if (config.use_ca) {
      const int64_t hidden = n_pw / config.ca_reduction;
      const int64_t params = (n_pw * hidden + hidden) + (hidden * n_pw + n_pw);
      const int64_t macc = 2 * (n_pw * hidden + hidden * n_pw);  // shared MLP, two pooled paths
      report.rows.push_back({prefix + ".ca", params, 0, macc});
    }
  }

  if (config.use_clff) report.rows.push_back({"clff", 0, 0, 0});
  report.rows.push_back({"fc", n_pw * config.n_classes + config.n_classes, 0,
                         n_pw * config.n_classes});
  return report;
}

std::string format_complexity(const ComplexityReport& report) {
  size_t name_w = 5;
  for (const ComplexityRow& r : report.rows) name_w = std::max(name_w, r.name.size());

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w) + 2) << "layer" << std::right
     << std::setw(10) << "trainable" << std::setw(8) << "moving" << std::setw(10) << "macc"
     << '\n';
  for (const ComplexityRow& r : report.rows) {
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << r.name << std::right
       << std::setw(10) << r.params_trainable << std::setw(8) << r.params_moving
       << std::setw(10) << r.macc << '\n';
  }
  os << std::left << std::setw(static_cast<int>(name_w) + 2) << "total" << std::right
     << std::setw(10) << report.total_trainable() << std::setw(8) << report.total_moving()
     << std::setw(10) << report.total_macc() << '\n';
  return os.str();
}

void write_complexity_csv(const ComplexityReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_io("cannot open for writing: " + path.string());
  out << "layer,params_trainable,params_moving,macc\n";
  for (const ComplexityRow& r : report.rows) {
    out << r.name << ',' << r.params_trainable << ',' << r.params_moving << ',' << r.macc
        << '\n';
  }
  out << "total," << report.total_trainable() << ',' << report.total_moving() << ','
      << report.total_macc() << '\n';
  if (!out) fail_io("write failed: " + path.string());
}

namespace {

double percentile(std::vector<double> sorted, double p) {
  const size_t idx = static_cast<size_t>(
      std::llround(p * static_cast<double>(sorted.size() - 1)));
  return sorted[idx];
}

std::string cpu_model_name() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find("model name");
    if (pos == std::string::npos) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) break;
    size_t start = colon + 1;
    while (start < line.size() && line[start] == ' ') ++start;
    return line.substr(start);
  }
  return "unknown cpu";
}

}  // namespace

BenchReport bench_latency(const Model& model, const BenchConfig& config) {
  using clock = std::chrono::steady_clock;

  BenchReport report;
  report.repetitions = std::max(config.repetitions, 30);
  report.warmup = std::max(config.warmup, 5);
  report.threads = std::max(config.threads, 1);
  report.hardware_note = cpu_model_name() + " | threads=" + std::to_string(report.threads);

  const int k = model.config().k;

  struct RowState {
    int batch = 0;
    RealTensor input;
    int inner = 1;
    std::vector<double> per_sample;
  };
  std::vector<RowState> rows;
  for (int batch : config.batch_sizes) {
    if (batch < 1) fail_config("bench: batch size must be positive");
    RowState st;
    st.batch = batch;
    Rng rng(Rng::mix(config.seed, static_cast<uint64_t>(batch)));
    st.input = RealTensor({batch, 2, k});
    for (int64_t i = 0; i < st.input.size(); ++i) st.input[i] = rng.uniform(-1.0, 1.0);
    st.per_sample.reserve(static_cast<size_t>(report.repetitions));
    rows.push_back(std::move(st));
  }

  // Times the public scoring entry point, per-call setup included.
  auto run_once = [&](const RowState& st) {
    (void)eval_forward(model, st.input, report.threads);
  };

  // Warm up each row, then stretch its timed interval past a floor so
  // scheduler noise averages out within a repetition instead of spreading
  // the percentiles.
  constexpr double kMinInterval = 2e-2;  // seconds
  for (RowState& st : rows) {
    for (int w = 0; w < report.warmup; ++w) run_once(st);
    const auto probe_start = clock::now();
    run_once(st);
    const double probe_s =
        std::chrono::duration<double>(clock::now() - probe_start).count();
    if (probe_s < kMinInterval) {
      st.inner = static_cast<int>(kMinInterval / std::max(probe_s, 1e-9)) + 1;
    }
  }

  // Round-robin the repetitions across batch sizes so slow drift in machine
  // load hits every row equally instead of biasing whichever ran last.
  for (int r = 0; r < report.repetitions; ++r) {
    for (RowState& st : rows) {
      const auto start = clock::now();
      for (int i = 0; i < st.inner; ++i) run_once(st);
      const double elapsed = std::chrono::duration<double>(clock::now() - start).count();
      st.per_sample.push_back(elapsed / static_cast<double>(st.inner) /
                              static_cast<double>(st.batch));
    }
  }

  for (RowState& st : rows) {
    std::sort(st.per_sample.begin(), st.per_sample.end());
    BenchRow row;
    row.batch_size = st.batch;
    row.median_per_sample_s = percentile(st.per_sample, 0.5);
    row.p10_per_sample_s = percentile(st.per_sample, 0.1);
    row.p90_per_sample_s = percentile(st.per_sample, 0.9);
    row.inner_loops = st.inner;
    report.rows.push_back(row);
  }
  return report;
}

std::string format_bench(const BenchReport& report) {
  std::ostringstream os;
  os << "hardware: " << report.hardware_note << '\n';
  os << "warmup " << report.warmup << ", repetitions " << report.repetitions << '\n';
  os << std::right << std::setw(10) << "batch" << std::setw(16) << "median_s" << std::setw(16)
     << "p10_s" << std::setw(16) << "p90_s" << std::setw(8) << "inner" << '\n';
  os << std::scientific << std::setprecision(3);
  for (const BenchRow& r : report.rows) {
    os << std::setw(10) << r.batch_size << std::setw(16) << r.median_per_sample_s
       << std::setw(16) << r.p10_per_sample_s << std::setw(16) << r.p90_per_sample_s
       << std::setw(8) << r.inner_loops << '\n';
  }
  return os.str();
}

void write_bench_csv(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_io("cannot open for writing: " + path.string());
  out << "batch_size,median_per_sample_s,p10_per_sample_s,p90_per_sample_s,inner_loops,"
         "repetitions,warmup,threads,hardware\n";
  out << std::scientific << std::setprecision(9);
  for (const BenchRow& r : report.rows) {
    out << r.batch_size << ',' << r.median_per_sample_s << ',' << r.p10_per_sample_s << ','
        << r.p90_per_sample_s << ',' << r.inner_loops << ',' << report.repetitions << ','
        << report.warmup << ',' << report.threads << ",\"" << report.hardware_note << "\"\n";
  }
  if (!out) fail_io("write failed: " + path.string());
}

}  // namespace ulcnn
