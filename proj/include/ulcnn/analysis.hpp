#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ulcnn/model.hpp"

namespace ulcnn {

struct ComplexityRow {
  std::string name;
  int64_t params_trainable = 0;
  int64_t params_moving = 0;
  int64_t macc = 0;
};

struct ComplexityReport {
  std::vector<ComplexityRow> rows;

  int64_t total_trainable() const;
  int64_t total_moving() const;
  int64_t total_params() const;
  int64_t total_macc() const;
};

/// Multiply-accumulate count of the complex front-end convolution:
/// 4 * K * C_in * N_CV * S_ke (four real convolutions per complex one).
int64_t macc_cv(int k, int n_cv, int s_ke, int c_in);

/// Multiply-accumulate count of one stride-2 separable convolution:
/// (N/2)*C*S_ke for the depthwise pass plus (N/2)*C*N_PW for the pointwise.
int64_t macc_sep(int n_len, int c, int n_pw, int s_ke);

/// Same-shape standard convolution at stride 2, for the ratio claim:
/// (N/2)*C*N_PW*S_ke.
int64_t macc_standard_conv(int n_len, int c, int n_pw, int s_ke);

/// Analytic per-layer accounting from the configuration alone. Counts MACC
/// for convolutions, the attention perceptrons, and the classifier head;
/// normalization, activations, pooling, and shuffling are excluded. The
/// parameter totals must match the built model's live enumeration exactly.
ComplexityReport model_complexity(const ModelConfig& config);

std::string format_complexity(const ComplexityReport& report);
void write_complexity_csv(const ComplexityReport& report, const std::filesystem::path& path);

struct BenchConfig {
  std::vector<int> batch_sizes{1, 10, 100, 1000};
  int repetitions = 30;  // clamped up to 30
  int warmup = 5;        // clamped up to 5
  uint64_t seed = 42;
  int threads = 1;       // reference mode is single-threaded
};

struct BenchRow {
  int batch_size = 0;
  double median_per_sample_s = 0.0;
  double p10_per_sample_s = 0.0;
  double p90_per_sample_s = 0.0;
  int inner_loops = 1;  // forwards per timed interval when one is too short
};

struct BenchReport {
  std::vector<BenchRow> rows;
  int repetitions = 0;
  int warmup = 0;
  int threads = 1;
  std::string hardware_note;
};

/// Wall-clock per-sample forward latency over a batch-size sweep on fixed
/// random data. Intervals too short for the clock are stretched by an inner
/// repeat loop, recorded per row.
BenchReport bench_latency(const Model& model, const BenchConfig& config);

std::string format_bench(const BenchReport& report);
void write_bench_csv(const BenchReport& report, const std::filesystem::path& path);

}  // namespace ulcnn
