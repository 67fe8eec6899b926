#include "ulcnn/rv_layers.hpp"

#include <cmath>

namespace ulcnn {

RealTensor dw_conv1d(const RealTensor& input, const RealTensor& kernel, int stride,
                     Padding padding) {
  if (input.rank() != 3) fail_config("dw_conv1d input must be [B, L, C], got " + input.shape_str());
  if (kernel.rank() != 2 || kernel.dim(1) != input.dim(2)) {
    fail_config("dw_conv1d kernel must be [S, C] matching input channels, got " +
                kernel.shape_str() + " for input " + input.shape_str());
  }
  const int batch = input.dim(0), len = input.dim(1), ch = input.dim(2);
  if (stride == 2 && len % 2 != 0) {
    fail_config("dw_conv1d stride-2 input length must be even, got " + std::to_string(len));
  }
  const int s_ke = kernel.dim(0);
  const int out_len = conv1d_output_length(len, s_ke, stride, padding);
  const int left = conv1d_left_pad(len, s_ke, stride, padding);

  RealTensor out({batch, out_len, ch});
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      double* orow = &out(b, j, 0);
      const int base = j * stride - left;
      for (int s = 0; s < s_ke; ++s) {
        const int l = base + s;
        if (l < 0 || l >= len) continue;
        const double* irow = &input(b, l, 0);
        const double* krow = &kernel(s, 0);
        for (int c = 0; c < ch; ++c) orow[c] += irow[c] * krow[c];
      }
    }
  }
  return out;
}

RealTensor pw_conv1d(const RealTensor& input, const RealTensor& kernel,
                     const RealTensor& bias) {
  if (kernel.rank() != 3 || kernel.dim(0) != 1) {
    fail_config("pw_conv1d kernel must be [1, C, N], got " + kernel.shape_str());
  }
  return conv1d(input, kernel, &bias, 1, Padding::Same);
}

std::vector<int> channel_shuffle_perm(int channels, int groups) {
  if (groups <= 0 || channels % groups != 0) {
    fail_config("channel shuffle groups " + std::to_string(groups) +
                " must divide channel count " + std::to_string(channels));
  }
  const int per = channels / groups;
  std::vector<int> perm(static_cast<size_t>(channels));
  for (int k = 0; k < channels; ++k) perm[static_cast<size_t>(k)] = (k % groups) * per + k / groups;
  return perm;
}

namespace {

RealTensor apply_channel_perm(const RealTensor& input, const std::vector<int>& perm) {
  const int batch = input.dim(0), len = input.dim(1), ch = input.dim(2);
  RealTensor out({batch, len, ch});
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* irow = &input(b, l, 0);
      double* orow = &out(b, l, 0);
      for (int c = 0; c < ch; ++c) orow[c] = irow[perm[static_cast<size_t>(c)]];
    }
  }
  return out;
}

}  // namespace

RealTensor channel_shuffle(const RealTensor& input, int groups) {
  return apply_channel_perm(input, channel_shuffle_perm(input.dim(2), groups));
}

RealTensor global_avg_pool(const RealTensor& input) {
  const int batch = input.dim(0), len = input.dim(1), ch = input.dim(2);
  RealTensor out({batch, ch});
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* irow = &input(b, l, 0);
      for (int c = 0; c < ch; ++c) out(b, c) += irow[c];
    }
  }
  for (int64_t i = 0; i < out.size(); ++i) out[i] /= static_cast<double>(len);
  return out;
}

RealTensor global_avg_pool_backward(const RealTensor& grad_out, int len) {
  const int batch = grad_out.dim(0), ch = grad_out.dim(1);
  RealTensor grad_in({batch, len, ch});
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      double* grow = &grad_in(b, l, 0);
      for (int c = 0; c < ch; ++c) grow[c] = grad_out(b, c) / static_cast<double>(len);
    }
  }
  return grad_in;
}

RealTensor global_max_pool(const RealTensor& input, std::vector<int>* argmax) {
  const int batch = input.dim(0), len = input.dim(1), ch = input.dim(2);
  RealTensor out({batch, ch});
  if (argmax) argmax->assign(static_cast<size_t>(batch) * ch, 0);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      double best = input(b, 0, c);
      int best_l = 0;
      for (int l = 1; l < len; ++l) {
        const double v = input(b, l, c);
        if (v > best) {
          best = v;
          best_l = l;
        }
      }
      out(b, c) = best;
      if (argmax) (*argmax)[static_cast<size_t>(b) * ch + c] = best_l;
    }
  }
  return out;
}

RealTensor softmax(const RealTensor& logits) {
  const int batch = logits.dim(0), n = logits.dim(1);
  RealTensor out({batch, n});
  for (int b = 0; b < batch; ++b) {
    const double* row = &logits(b, 0);
    double mx = row[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    double* orow = &out(b, 0);
    for (int i = 0; i < n; ++i) {
      orow[i] = std::exp(row[i] - mx);
      sum += orow[i];
    }
    for (int i = 0; i < n; ++i) orow[i] /= sum;
  }
  return out;
}

DwConv1d::DwConv1d(std::string name, int kernel_size, int channels, Rng& rng, int stride,
                   Padding padding)
    : name_(std::move(name)),
      kernel_size_(kernel_size),
      channels_(channels),
      stride_(stride),
      padding_(padding),
      kernel_({kernel_size, channels}),
      g_kernel_({kernel_size, channels}) {
  const double limit = std::sqrt(6.0 / (kernel_size + kernel_size));
  for (int64_t i = 0; i < kernel_.size(); ++i) kernel_[i] = rng.uniform(-limit, limit);
  kernel_.round_to_f32();
}

RealTensor DwConv1d::forward(const RealTensor& input, bool inference) {
  if (!inference) cached_input_ = input;
  return dw_conv1d(input, kernel_, stride_, padding_);
}

RealTensor DwConv1d::backward(const RealTensor& grad_out) {
  const int batch = cached_input_.dim(0), len = cached_input_.dim(1), ch = channels_;
  const int out_len = grad_out.dim(1);
  const int left = conv1d_left_pad(len, kernel_size_, stride_, padding_);

  RealTensor grad_in({batch, len, ch});
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      const double* grow = &grad_out(b, j, 0);
      const int base = j * stride_ - left;
      for (int s = 0; s < kernel_size_; ++s) {
        const int l = base + s;
        if (l < 0 || l >= len) continue;
        double* irow = &grad_in(b, l, 0);
        const double* krow = &kernel_(s, 0);
        const double* xrow = &cached_input_(b, l, 0);
        double* gkrow = &g_kernel_(s, 0);
        for (int c = 0; c < ch; ++c) {
          irow[c] += grow[c] * krow[c];
          gkrow[c] += grow[c] * xrow[c];
        }
      }
    }
  }
  return grad_in;
}

void DwConv1d::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".kernel", &kernel_, &g_kernel_});
}

void DwConv1d::zero_grads() { g_kernel_.zero(); }

PwConv1d::PwConv1d(std::string name, int in_channels, int out_channels, Rng& rng)
    : name_(std::move(name)),
      kernel_({1, in_channels, out_channels}),
      bias_({out_channels}),
      g_kernel_({1, in_channels, out_channels}),
      g_bias_({out_channels}) {
  const double limit = std::sqrt(6.0 / (in_channels + out_channels));
  for (int64_t i = 0; i < kernel_.size(); ++i) kernel_[i] = rng.uniform(-limit, limit);
  kernel_.round_to_f32();
}

RealTensor PwConv1d::forward(const RealTensor& input, bool inference) {
  if (!inference) cached_input_ = input;
  return pw_conv1d(input, kernel_, bias_);
}

RealTensor PwConv1d::backward(const RealTensor& grad_out) {
  RealTensor gk = conv1d_backward_kernel(cached_input_, grad_out, 1, 1, Padding::Same);
  for (int64_t i = 0; i < g_kernel_.size(); ++i) g_kernel_[i] += gk[i];
  RealTensor gb = conv1d_backward_bias(grad_out);
  for (int64_t i = 0; i < g_bias_.size(); ++i) g_bias_[i] += gb[i];
  return conv1d_backward_input(grad_out, kernel_, cached_input_.dim(1), 1, Padding::Same);
}

void PwConv1d::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".kernel", &kernel_, &g_kernel_});
  out.push_back({name_ + ".bias", &bias_, &g_bias_});
}

void PwConv1d::zero_grads() {
  g_kernel_.zero();
  g_bias_.zero();
}

Conv1dLayer::Conv1dLayer(std::string name, int kernel_size, int in_channels, int out_channels,
                         Rng& rng, int stride, Padding padding)
    : name_(std::move(name)),
      kernel_size_(kernel_size),
      stride_(stride),
      padding_(padding),
      kernel_({kernel_size, in_channels, out_channels}),
      bias_({out_channels}),
      g_kernel_({kernel_size, in_channels, out_channels}),
      g_bias_({out_channels}) {
  const double limit = std::sqrt(6.0 / (kernel_size * in_channels + out_channels));
  for (int64_t i = 0; i < kernel_.size(); ++i) kernel_[i] = rng.uniform(-limit, limit);
  kernel_.round_to_f32();
}

RealTensor Conv1dLayer::forward(const RealTensor& input, bool inference) {
  if (!inference) cached_input_ = input;
  return conv1d(input, kernel_, &bias_, stride_, padding_);
}

RealTensor Conv1dLayer::backward(const RealTensor& grad_out) {
  RealTensor gk = conv1d_backward_kernel(cached_input_, grad_out, kernel_size_, stride_, padding_);
  for (int64_t i = 0; i < g_kernel_.size(); ++i) g_kernel_[i] += gk[i];
  RealTensor gb = conv1d_backward_bias(grad_out);
  for (int64_t i = 0; i < g_bias_.size(); ++i) g_bias_[i] += gb[i];
  return conv1d_backward_input(grad_out, kernel_, cached_input_.dim(1), stride_, padding_);
}

void Conv1dLayer::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".kernel", &kernel_, &g_kernel_});
  out.push_back({name_ + ".bias", &bias_, &g_bias_});
}

void Conv1dLayer::zero_grads() {
  g_kernel_.zero();
  g_bias_.zero();
}

BatchNorm1d::BatchNorm1d(std::string name, int channels, double momentum, double eps)
    : name_(std::move(name)),
      channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_({channels}),
      beta_({channels}),
      g_gamma_({channels}),
      g_beta_({channels}),
      mov_mean_({channels}),
      mov_var_({channels}) {
  gamma_.fill(1.0);
  mov_var_.fill(1.0);
}

RealTensor BatchNorm1d::forward(const RealTensor& input, Mode mode, bool inference) {
  const int batch = input.dim(0), len = input.dim(1), ch = input.dim(2);
  if (ch != channels_) {
    fail_config(name_ + ": expected " + std::to_string(channels_) + " channels, got " +
                input.shape_str());
  }
  const int64_t n = static_cast<int64_t>(batch) * len;
  const bool use_batch_stats = (mode != Mode::Eval);

  std::vector<double> mean(ch, 0.0), var(ch, 0.0);
  if (use_batch_stats) {
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double* irow = &input(b, l, 0);
        for (int c = 0; c < ch; ++c) mean[c] += irow[c];
      }
    }
    for (int c = 0; c < ch; ++c) mean[c] /= static_cast<double>(n);
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double* irow = &input(b, l, 0);
        for (int c = 0; c < ch; ++c) {
          const double d = irow[c] - mean[c];
          var[c] += d * d;
        }
      }
    }
    for (int c = 0; c < ch; ++c) var[c] /= static_cast<double>(n);
    if (mode == Mode::Train) {
      for (int c = 0; c < ch; ++c) {
        mov_mean_(c) = momentum_ * mov_mean_(c) + (1.0 - momentum_) * mean[c];
        mov_var_(c) = momentum_ * mov_var_(c) + (1.0 - momentum_) * var[c];
      }
    }
  } else {
    for (int c = 0; c < ch; ++c) {
      mean[c] = mov_mean_(c);
      var[c] = mov_var_(c);
    }
  }

  std::vector<double> inv_std(static_cast<size_t>(ch), 0.0);
  for (int c = 0; c < ch; ++c) {
    const double v = var[c] + eps_;
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail_numeric(name_ + ": non-positive variance in channel " + std::to_string(c));
    }
    inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(v);
  }

  RealTensor out({batch, len, ch});
  if (inference) {
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double* irow = &input(b, l, 0);
        double* orow = &out(b, l, 0);
        for (int c = 0; c < ch; ++c) {
          orow[c] = gamma_(c) * (irow[c] - mean[c]) * inv_std[static_cast<size_t>(c)] + beta_(c);
        }
      }
    }
    return out;
  }

  cache_.batch = batch;
  cache_.len = len;
  cache_.mode = mode;
  cache_.inv_std = inv_std;
  cache_.xhat = RealTensor({batch, len, ch});
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* irow = &input(b, l, 0);
      double* xrow = &cache_.xhat(b, l, 0);
      double* orow = &out(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        const double xh = (irow[c] - mean[c]) * cache_.inv_std[c];
        xrow[c] = xh;
        orow[c] = gamma_(c) * xh + beta_(c);
      }
    }
  }
  return out;
}

RealTensor BatchNorm1d::backward(const RealTensor& grad_out) {
  const int batch = cache_.batch, len = cache_.len, ch = channels_;
  const int64_t n = static_cast<int64_t>(batch) * len;

  std::vector<double> sum_g(ch, 0.0), sum_gx(ch, 0.0);
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* grow = &grad_out(b, l, 0);
      const double* xrow = &cache_.xhat(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        sum_g[c] += grow[c];
        sum_gx[c] += grow[c] * xrow[c];
      }
    }
  }
  for (int c = 0; c < ch; ++c) {
    g_beta_(c) += sum_g[c];
    g_gamma_(c) += sum_gx[c];
  }

  RealTensor grad_in({batch, len, ch});
  if (cache_.mode == Mode::Eval) {
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double* grow = &grad_out(b, l, 0);
        double* orow = &grad_in(b, l, 0);
        for (int c = 0; c < ch; ++c) orow[c] = grow[c] * gamma_(c) * cache_.inv_std[c];
      }
    }
    return grad_in;
  }

  // Batch-statistics path:
  // dx = gamma * inv_std * (g - mean(g) - xhat * mean(g * xhat))
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* grow = &grad_out(b, l, 0);
      const double* xrow = &cache_.xhat(b, l, 0);
      double* orow = &grad_in(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        orow[c] = gamma_(c) * cache_.inv_std[c] *
                  (grow[c] - sum_g[c] * inv_n - xrow[c] * sum_gx[c] * inv_n);
      }
    }
  }
  return grad_in;
}

BatchNorm1d::EvalCoeffs BatchNorm1d::eval_coeffs() const {
  const size_t ch = static_cast<size_t>(channels_);
  EvalCoeffs co;
  co.mean.resize(ch);
  co.inv_std.resize(ch);
  co.gamma.resize(ch);
  co.beta.resize(ch);
  for (int c = 0; c < channels_; ++c) {
    const double v = mov_var_(c) + eps_;
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail_numeric(name_ + ": non-positive variance in channel " + std::to_string(c));
    }
    const size_t i = static_cast<size_t>(c);
    co.mean[i] = mov_mean_(c);
    co.inv_std[i] = 1.0 / std::sqrt(v);
    co.gamma[i] = gamma_(c);
    co.beta[i] = beta_(c);
  }
  return co;
}

void BatchNorm1d::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".gamma", &gamma_, &g_gamma_});
  out.push_back({name_ + ".beta", &beta_, &g_beta_});
}

void BatchNorm1d::collect_moving(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".mov_mean", &mov_mean_, nullptr});
  out.push_back({name_ + ".mov_var", &mov_var_, nullptr});
}

void BatchNorm1d::zero_grads() {
  g_gamma_.zero();
  g_beta_.zero();
}

RealTensor ReluLayer::forward(const RealTensor& input, bool inference) {
  RealTensor out = input;
  if (inference) {
    for (int64_t i = 0; i < out.size(); ++i) {
      if (out[i] < 0.0) out[i] = 0.0;
    }
    return out;
  }
  mask_ = RealTensor(input.shape());
  for (int64_t i = 0; i < out.size(); ++i) {
    mask_[i] = out[i] > 0.0 ? 1.0 : 0.0;
    if (out[i] < 0.0) out[i] = 0.0;
  }
  return out;
}

RealTensor ReluLayer::backward(const RealTensor& grad_out) {
  RealTensor grad_in = grad_out;
  for (int64_t i = 0; i < grad_in.size(); ++i) grad_in[i] *= mask_[i];
  return grad_in;
}

ChannelShuffleLayer::ChannelShuffleLayer(int channels, int groups)
    : perm_(channel_shuffle_perm(channels, groups)), inv_perm_(perm_.size()) {
  for (size_t k = 0; k < perm_.size(); ++k) inv_perm_[static_cast<size_t>(perm_[k])] = static_cast<int>(k);
}

RealTensor ChannelShuffleLayer::forward(const RealTensor& input) {
  return apply_channel_perm(input, perm_);
}

RealTensor ChannelShuffleLayer::backward(const RealTensor& grad_out) {
  return apply_channel_perm(grad_out, inv_perm_);
}

ChannelAttention::ChannelAttention(std::string name, int channels, int reduction, Rng& rng)
    : name_(std::move(name)), channels_(channels), hidden_(channels / reduction) {
  if (reduction <= 0 || channels % reduction != 0 || hidden_ < 1) {
    fail_config(name_ + ": reduction " + std::to_string(reduction) +
                " incompatible with " + std::to_string(channels) + " channels");
  }
  w1_ = RealTensor({channels_, hidden_});
  b1_ = RealTensor({hidden_});
  w2_ = RealTensor({hidden_, channels_});
  b2_ = RealTensor({channels_});
  g_w1_ = RealTensor({channels_, hidden_});
  g_b1_ = RealTensor({hidden_});
  g_w2_ = RealTensor({hidden_, channels_});
  g_b2_ = RealTensor({channels_});
  const double lim1 = std::sqrt(6.0 / (channels_ + hidden_));
  for (int64_t i = 0; i < w1_.size(); ++i) w1_[i] = rng.uniform(-lim1, lim1);
  const double lim2 = std::sqrt(6.0 / (hidden_ + channels_));
  for (int64_t i = 0; i < w2_.size(); ++i) w2_[i] = rng.uniform(-lim2, lim2);
  w1_.round_to_f32();
  w2_.round_to_f32();
}

RealTensor ChannelAttention::mlp_forward(const RealTensor& pooled, RealTensor& hidden) const {
  const int batch = pooled.dim(0);
  hidden = RealTensor({batch, hidden_});
  RealTensor out({batch, channels_});
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < hidden_; ++h) {
      double acc = b1_(h);
      for (int c = 0; c < channels_; ++c) acc += pooled(b, c) * w1_(c, h);
      hidden(b, h) = acc > 0.0 ? acc : 0.0;
    }
    for (int c = 0; c < channels_; ++c) {
      double acc = b2_(c);
      for (int h = 0; h < hidden_; ++h) acc += hidden(b, h) * w2_(h, c);
      out(b, c) = acc;
    }
  }
  return out;
}

RealTensor ChannelAttention::mlp_backward(const RealTensor& pooled, const RealTensor& hidden,
                                          const RealTensor& grad_out) {
  const int batch = pooled.dim(0);
  RealTensor grad_pooled({batch, channels_});
  for (int b = 0; b < batch; ++b) {
    std::vector<double> g_hidden(static_cast<size_t>(hidden_), 0.0);
    for (int c = 0; c < channels_; ++c) {
      const double g = grad_out(b, c);
      g_b2_(c) += g;
      for (int h = 0; h < hidden_; ++h) {
        g_w2_(h, c) += hidden(b, h) * g;
        g_hidden[static_cast<size_t>(h)] += w2_(h, c) * g;
      }
    }
    for (int h = 0; h < hidden_; ++h) {
      if (hidden(b, h) <= 0.0) g_hidden[static_cast<size_t>(h)] = 0.0;  // ReLU gate
      const double gh = g_hidden[static_cast<size_t>(h)];
      g_b1_(h) += gh;
      for (int c = 0; c < channels_; ++c) {
        g_w1_(c, h) += pooled(b, c) * gh;
        grad_pooled(b, c) += w1_(c, h) * gh;
      }
    }
  }
  return grad_pooled;
}

RealTensor ChannelAttention::forward(const RealTensor& input, bool inference) {
  const int batch = input.dim(0), len = input.dim(1), ch = input.dim(2);
  if (ch != channels_) {
    fail_config(name_ + ": expected " + std::to_string(channels_) + " channels, got " +
                input.shape_str());
  }
  RealTensor avg = global_avg_pool(input);
  RealTensor mx = global_max_pool(input, inference ? nullptr : &cache_.argmax);

  RealTensor h_avg, h_max;
  RealTensor logits_avg = mlp_forward(avg, h_avg);
  RealTensor logits_max = mlp_forward(mx, h_max);

  RealTensor v({batch, ch});
  for (int64_t i = 0; i < v.size(); ++i) {
    v[i] = 1.0 / (1.0 + std::exp(-(logits_avg[i] + logits_max[i])));
  }

  RealTensor out({batch, len, ch});
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* irow = &input(b, l, 0);
      double* orow = &out(b, l, 0);
      const double* vrow = &v(b, 0);
      for (int c = 0; c < ch; ++c) orow[c] = irow[c] * vrow[c];
    }
  }

  if (!inference) {
    cache_.input = input;
    cache_.avg = std::move(avg);
    cache_.mx = std::move(mx);
    cache_.h_avg = std::move(h_avg);
    cache_.h_max = std::move(h_max);
    cache_.v = std::move(v);
  }
  return out;
}

RealTensor ChannelAttention::backward(const RealTensor& grad_out) {
  const int batch = cache_.input.dim(0), len = cache_.input.dim(1), ch = channels_;

  // Product rule: grad w.r.t. input through the multiply, plus grad w.r.t. v.
  RealTensor grad_in({batch, len, ch});
  RealTensor g_v({batch, ch});
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* grow = &grad_out(b, l, 0);
      const double* irow = &cache_.input(b, l, 0);
      const double* vrow = &cache_.v(b, 0);
      double* orow = &grad_in(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        orow[c] = grow[c] * vrow[c];
        g_v(b, c) += grow[c] * irow[c];
      }
    }
  }

  // Sigmoid, then the two shared-perceptron paths.
  RealTensor g_logits({batch, ch});
  for (int64_t i = 0; i < g_logits.size(); ++i) {
    const double v = cache_.v[i];
    g_logits[i] = g_v[i] * v * (1.0 - v);
  }

  RealTensor g_avg = mlp_backward(cache_.avg, cache_.h_avg, g_logits);
  RealTensor g_max = mlp_backward(cache_.mx, cache_.h_max, g_logits);

  // GAP spreads uniformly; GMP routes to the (first) argmax position.
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double ga = g_avg(b, c) / static_cast<double>(len);
      for (int l = 0; l < len; ++l) grad_in(b, l, c) += ga;
      grad_in(b, cache_.argmax[static_cast<size_t>(b) * ch + c], c) += g_max(b, c);
    }
  }
  return grad_in;
}

void ChannelAttention::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".w1", &w1_, &g_w1_});
  out.push_back({name_ + ".b1", &b1_, &g_b1_});
  out.push_back({name_ + ".w2", &w2_, &g_w2_});
  out.push_back({name_ + ".b2", &b2_, &g_b2_});
}

void ChannelAttention::zero_grads() {
  g_w1_.zero();
  g_b1_.zero();
  g_w2_.zero();
  g_b2_.zero();
}

FullyConnected::FullyConnected(std::string name, int in_features, int out_features, Rng& rng)
    : name_(std::move(name)),
      weight_({in_features, out_features}),
      bias_({out_features}),
      g_weight_({in_features, out_features}),
      g_bias_({out_features}) {
  const double limit = std::sqrt(6.0 / (in_features + out_features));
  for (int64_t i = 0; i < weight_.size(); ++i) weight_[i] = rng.uniform(-limit, limit);
  weight_.round_to_f32();
}

RealTensor FullyConnected::forward(const RealTensor& input, bool inference) {
  const int batch = input.dim(0), f = input.dim(1);
  if (f != weight_.dim(0)) {
    fail_config(name_ + ": expected " + std::to_string(weight_.dim(0)) + " features, got " +
                input.shape_str());
  }
  if (!inference) cached_input_ = input;
  const int n = weight_.dim(1);
  RealTensor out({batch, n});
  for (int b = 0; b < batch; ++b) {
    double* orow = &out(b, 0);
    for (int j = 0; j < n; ++j) orow[j] = bias_(j);
    for (int i = 0; i < f; ++i) {
      const double x = input(b, i);
      if (x == 0.0) continue;
      const double* wrow = &weight_(i, 0);
      for (int j = 0; j < n; ++j) orow[j] += x * wrow[j];
    }
  }
  return out;
}

RealTensor FullyConnected::backward(const RealTensor& grad_out) {
  const int batch = cached_input_.dim(0), f = weight_.dim(0), n = weight_.dim(1);
  RealTensor grad_in({batch, f});
  for (int b = 0; b < batch; ++b) {
    const double* grow = &grad_out(b, 0);
    for (int j = 0; j < n; ++j) g_bias_(j) += grow[j];
    for (int i = 0; i < f; ++i) {
      const double x = cached_input_(b, i);
      double* gwrow = &g_weight_(i, 0);
      const double* wrow = &weight_(i, 0);
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        gwrow[j] += x * grow[j];
        acc += wrow[j] * grow[j];
      }
      grad_in(b, i) = acc;
    }
  }
  return grad_in;
}

void FullyConnected::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".weight", &weight_, &g_weight_});
  out.push_back({name_ + ".bias", &bias_, &g_bias_});
}

void FullyConnected::zero_grads() {
  g_weight_.zero();
  g_bias_.zero();
}

}  // namespace ulcnn
