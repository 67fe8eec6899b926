#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ulcnn/cv_layers.hpp"
#include "ulcnn/rv_layers.hpp"
#include "ulcnn/tensor.hpp"

namespace ulcnn {

struct ModelConfig {
  int k = 128;           // frame length in complex samples
  int n_cv = 16;         // complex filters in the front end
  int n_pw = 32;         // pointwise filters; equals 2*n_cv with the complex front end
  int s_ke = 5;          // kernel size of the complex conv and every depthwise conv
  int n_fmdr = 6;        // downsampling blocks, each halves the length
  int n_classes = 11;
  int shuffle_groups = 2;
  int ca_reduction = 16;
  bool use_cv_conv = true;
  bool use_ca = true;
  bool use_cs = true;
  bool use_clff = true;

  void validate() const;  // throws listing the violated rule
  int feature_width() const { return n_pw; }
  /// 1-based indices of the blocks whose pooled outputs are fused (the last
  /// three, clamped at the first block for very shallow configs).
  std::vector<int> fusion_taps() const;

  bool operator==(const ModelConfig&) const = default;
};

class Model {
 public:
  Model(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// input [B, 2, K] with row 0 = I, row 1 = Q; returns softmax probabilities
  /// [B, n_classes].
  RealTensor forward(const RealTensor& input, Mode mode);

  /// Inference fast path: the same probabilities as forward(input, Mode::Eval)
  /// bit for bit, with the conv/norm/activation stages fused per slice and all
  /// backward bookkeeping skipped. Large batches are processed in small slices
  /// so intermediate activations stay cache-resident.
  RealTensor score(const RealTensor& input);

  /// Back-propagates d(loss)/d(logits) through the whole network, accumulating
  /// parameter gradients; returns d(loss)/d(input) as [B, 2, K].
  RealTensor backward_from_logits(const RealTensor& grad_logits);

  std::vector<int> predict(const RealTensor& input);

  std::vector<ParamRef> parameters();
  std::vector<ParamRef> moving_statistics();
  void zero_grads();

  /// Snaps every parameter and moving statistic to the float32 grid, keeping
  /// in-memory state identical to what the weight file stores.
  void quantize_storage();

  std::vector<RealTensor> snapshot_weights();
  void restore_weights(const std::vector<RealTensor>& snapshot);

  int64_t param_count_trainable();
  int64_t param_count_moving();
  int64_t param_count_total();

  Model clone() const { return *this; }

 private:
  struct FmdrBlock {
    std::optional<DwConv1d> dw;
    std::optional<PwConv1d> pw;
    std::optional<BatchNorm1d> bn;
    ReluLayer relu;
    std::optional<ChannelShuffleLayer> shuffle;   // absent when disabled
    std::optional<ChannelAttention> attention;    // absent when disabled
  };

  RealTensor forward_front(const RealTensor& input, Mode mode);
  RealTensor backward_front(const RealTensor& grad);

  // One slice of score(): reads input rows [lo, hi), writes the matching rows
  // of `out`. score_front_chunk fuses the front conv, normalization, and
  // activation into a single pass over the slice.
  void score_chunk(const RealTensor& input, int lo, int hi, RealTensor& out);
  RealTensor score_front_chunk(const RealTensor& input, int lo, int hi);

  ModelConfig config_;

  // Complex front end (default) or its real-convolution replacement.
  std::optional<CvConv1d> cv_conv_;
  std::optional<CvBatchNorm> cv_bn_;
  CvRelu cv_relu_;
  CvToReal cv_to_real_;
  std::optional<Conv1dLayer> rv_conv_;
  std::optional<BatchNorm1d> rv_bn_;
  ReluLayer rv_relu_;

  std::vector<FmdrBlock> blocks_;
  std::optional<FullyConnected> fc_;

  std::vector<int> tap_lengths_;  // output length per block, cached in forward
};

/// Weight file round trip. Saving snaps storage to the float32 grid first, so
/// save -> load -> forward reproduces the original forward bit-exactly.
void save_weights(Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
void load_weights_into(Model& model, const std::filesystem::path& path);

/// Batched eval-mode forward. thread counts > 1 split the batch across clones
/// of the model, which keeps results bit-identical to the sequential path.
RealTensor eval_forward(const Model& model, const RealTensor& input, int threads = 1);

/// Thread count from the ULCNN_THREADS environment variable, default 1.
int env_thread_count();

}  // namespace ulcnn
