#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ulcnn/dataio.hpp"
#include "ulcnn/model.hpp"
#include "ulcnn/tensor.hpp"

namespace ulcnn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AlrConfig {
  int patience = 10;
  double factor = 0.8;
  double min_lr = 1e-6;
};

struct TrainConfig {
  double initial_lr = 0.001;
  int epochs = 200;
  int batch_size = 128;
  AlrConfig alr;
  AdamConfig adam;
  uint64_t seed = 0;
  bool use_da = true;   // 4x rotation expansion of the training partition
  bool use_alr = true;  // plateau-decay schedule

  void validate() const;
};

/// Mean negative log-likelihood; probabilities are clamped at 1e-12 before
/// the log so a perfectly confident correct answer gives exactly 0.
double cross_entropy(const RealTensor& probs, const std::vector<int>& labels);

/// d(mean CE)/d(logits) for softmax outputs: (probs - onehot) / B.
RealTensor cross_entropy_grad_logits(const RealTensor& probs, const std::vector<int>& labels);

class Adam {
 public:
  Adam(const std::vector<ParamRef>& params, AdamConfig config);

  /// One update over the same params the optimizer was built with.
  /// Throws on a non-finite gradient, naming the tensor.
  void step(const std::vector<ParamRef>& params, double lr);

  int64_t t() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<RealTensor> m_, v_;
  int64_t t_ = 0;
};

/// Plateau schedule: if the final epoch of `history` completes `patience`
/// epochs without a strict improvement of the running best, the rate decays
/// by `factor` (floored at min_lr) and the window resets. Pure function of
/// the loss history, so callers can drive it incrementally.
double alr_update(const std::vector<double>& val_loss_history, double current_lr,
                  const AlrConfig& config);

struct EpochRow {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct MetricsReport {
  double overall_accuracy = 0.0;
  double average_accuracy = 0.0;  // mean of the per-SNR accuracies
  std::vector<std::pair<int, double>> per_snr;
  std::vector<int64_t> confusion;  // n_classes^2, rows = truth
  int n_classes = 0;
  std::vector<EpochRow> history;
  int best_epoch = 0;  // 1-based epoch whose weights the model retains
};

/// Trains in place: seeded per-epoch shuffle, optional one-time 4x rotation
/// expansion of `train`, per-epoch validation, best-val-loss checkpointing.
/// On a non-finite loss the best weights are restored before the error is
/// thrown. The returned report carries the epoch history.
MetricsReport fit(Model& model, const std::vector<Frame>& train,
                  const std::vector<Frame>& val, const TrainConfig& config);

MetricsReport evaluate(Model& model, const std::vector<Frame>& test);

void write_history_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_per_snr_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_confusion_csv(const MetricsReport& report, const LabelMap* labels,
                         const std::filesystem::path& path);

}  // namespace ulcnn
