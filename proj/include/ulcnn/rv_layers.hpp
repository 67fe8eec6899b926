#pragma once

#include <string>
#include <vector>

#include "ulcnn/rng.hpp"
#include "ulcnn/tensor.hpp"

namespace ulcnn {

/// Depthwise convolution: one filter per channel, no cross-channel mixing,
/// no bias. kernel is [S, C]. The architecture only produces even lengths,
/// so stride-2 input length must be even.
RealTensor dw_conv1d(const RealTensor& input, const RealTensor& kernel, int stride = 2,
                     Padding padding = Padding::Same);

/// Pointwise (kernel size 1) convolution with bias; per-position linear map.
RealTensor pw_conv1d(const RealTensor& input, const RealTensor& kernel,
                     const RealTensor& bias);

/// Group-transpose channel permutation: output channel k reads input channel
/// (k mod g)*(C/g) + floor(k/g).
std::vector<int> channel_shuffle_perm(int channels, int groups);
RealTensor channel_shuffle(const RealTensor& input, int groups);

RealTensor global_avg_pool(const RealTensor& input);                    // [B,L,C] -> [B,C]
RealTensor global_avg_pool_backward(const RealTensor& grad_out, int len);
RealTensor global_max_pool(const RealTensor& input, std::vector<int>* argmax = nullptr);

RealTensor softmax(const RealTensor& logits);  // rowwise, [B,N] -> [B,N]

class DwConv1d {
 public:
  DwConv1d(std::string name, int kernel_size, int channels, Rng& rng, int stride = 2,
           Padding padding = Padding::Same);

  /// `inference` skips the backward cache; backward is invalid after such a call.
  RealTensor forward(const RealTensor& input, bool inference = false);
  RealTensor backward(const RealTensor& grad_out);

  void collect_params(std::vector<ParamRef>& out);
  void zero_grads();
  int64_t param_count() const { return kernel_.size(); }

 private:
  std::string name_;
  int kernel_size_, channels_, stride_;
  Padding padding_;
  RealTensor kernel_, g_kernel_;
  RealTensor cached_input_;
};

class PwConv1d {
 public:
  PwConv1d(std::string name, int in_channels, int out_channels, Rng& rng);

  RealTensor forward(const RealTensor& input, bool inference = false);
  RealTensor backward(const RealTensor& grad_out);

  const RealTensor& kernel() const { return kernel_; }  // [1, C_in, C_out]
  const RealTensor& bias() const { return bias_; }

  void collect_params(std::vector<ParamRef>& out);
  void zero_grads();
  int64_t param_count() const { return kernel_.size() + bias_.size(); }

 private:
  std::string name_;
  RealTensor kernel_, bias_, g_kernel_, g_bias_;
  RealTensor cached_input_;
};

/// Standard real convolution layer (front end of the no-complex-conv variant).
class Conv1dLayer {
 public:
  Conv1dLayer(std::string name, int kernel_size, int in_channels, int out_channels,
              Rng& rng, int stride = 1, Padding padding = Padding::Same);

  RealTensor forward(const RealTensor& input, bool inference = false);
  RealTensor backward(const RealTensor& grad_out);

  const RealTensor& kernel() const { return kernel_; }  // [S, C_in, C_out]
  const RealTensor& bias() const { return bias_; }

  void collect_params(std::vector<ParamRef>& out);
  void zero_grads();
  int64_t param_count() const { return kernel_.size() + bias_.size(); }

 private:
  std::string name_;
  int kernel_size_, stride_;
  Padding padding_;
  RealTensor kernel_, bias_, g_kernel_, g_bias_;
  RealTensor cached_input_;
};

class BatchNorm1d {
 public:
  BatchNorm1d(std::string name, int channels, double momentum = 0.99, double eps = 1e-3);

  RealTensor forward(const RealTensor& input, Mode mode, bool inference = false);
  RealTensor backward(const RealTensor& grad_out);

  /// Per-channel terms of the eval-mode transform
  /// y = gamma * (x - mean) * inv_std + beta, derived from the moving
  /// statistics. Fails on a non-positive variance exactly like forward.
  struct EvalCoeffs {
    std::vector<double> mean, inv_std, gamma, beta;
  };
  EvalCoeffs eval_coeffs() const;

  void collect_params(std::vector<ParamRef>& out);
  void collect_moving(std::vector<ParamRef>& out);
  void zero_grads();
  int64_t param_count() const { return 4 * channels_; }  // 2 trainable + 2 moving

 private:
  std::string name_;
  int channels_;
  double momentum_, eps_;
  RealTensor gamma_, beta_, g_gamma_, g_beta_;
  RealTensor mov_mean_, mov_var_;

  struct Cache {
    int batch = 0, len = 0;
    Mode mode = Mode::Train;
    std::vector<double> inv_std;
    RealTensor xhat;
  } cache_;
};

class ReluLayer {
 public:
  RealTensor forward(const RealTensor& input, bool inference = false);
  RealTensor backward(const RealTensor& grad_out);

 private:
  RealTensor mask_;
};

class ChannelShuffleLayer {
 public:
  ChannelShuffleLayer(int channels, int groups);

  RealTensor forward(const RealTensor& input);
  RealTensor backward(const RealTensor& grad_out);

  /// inverse_permutation()[c] is where input channel c lands in the output.
  const std::vector<int>& inverse_permutation() const { return inv_perm_; }

 private:
  std::vector<int> perm_, inv_perm_;
};

/// Channel attention: v = sigmoid(mlp(GAP(x)) + mlp(GMP(x))) with a shared
/// two-layer perceptron (ReLU hidden), broadcast-multiplied over the input.
class ChannelAttention {
 public:
  ChannelAttention(std::string name, int channels, int reduction, Rng& rng);

  RealTensor forward(const RealTensor& input, bool inference = false);
  RealTensor backward(const RealTensor& grad_out);

  void collect_params(std::vector<ParamRef>& out);
  void zero_grads();
  int64_t param_count() const { return w1_.size() + b1_.size() + w2_.size() + b2_.size(); }

 private:
  std::string name_;
  int channels_, hidden_;
  RealTensor w1_, b1_, w2_, b2_;
  RealTensor g_w1_, g_b1_, g_w2_, g_b2_;

  struct Cache {
    RealTensor input;          // [B, L, C]
    RealTensor avg, mx;        // pooled [B, C]
    std::vector<int> argmax;   // per (b, c)
    RealTensor h_avg, h_max;   // hidden activations [B, H]
    RealTensor v;              // attention vector [B, C]
  } cache_;

  // y = mlp(x) for pooled input; fills hidden cache.
  RealTensor mlp_forward(const RealTensor& pooled, RealTensor& hidden) const;
  // Backward through the shared perceptron; accumulates weight grads.
  RealTensor mlp_backward(const RealTensor& pooled, const RealTensor& hidden,
                          const RealTensor& grad_out);
};

class FullyConnected {
 public:
  FullyConnected(std::string name, int in_features, int out_features, Rng& rng);

  RealTensor forward(const RealTensor& input, bool inference = false);  // [B, F] -> [B, N]
  RealTensor backward(const RealTensor& grad_out);

  void collect_params(std::vector<ParamRef>& out);
  void zero_grads();
  int64_t param_count() const { return weight_.size() + bias_.size(); }
  int out_features() const { return weight_.dim(1); }

 private:
  std::string name_;
  RealTensor weight_, bias_, g_weight_, g_bias_;
  RealTensor cached_input_;
};

}  // namespace ulcnn
