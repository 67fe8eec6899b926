#include "ulcnn/model.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace ulcnn {

void ModelConfig::validate() const {
  if (k < 1) fail_config("config: K must be positive");
  if (n_cv < 1 || n_pw < 1) fail_config("config: filter counts must be positive");
  if (s_ke < 1) fail_config("config: kernel size must be positive");
  if (n_fmdr < 1 || n_fmdr > 20) fail_config("config: block count must be in [1, 20]");
  if (n_classes < 2) fail_config("config: need at least 2 classes");
  if (use_cv_conv && n_pw != 2 * n_cv) {
    fail_config("config: pointwise width must be twice the complex filter count (" +
                std::to_string(n_pw) + " vs 2*" + std::to_string(n_cv) + ")");
  }
  if (k % (1 << n_fmdr) != 0) {
    fail_config("config: K=" + std::to_string(k) + " must be divisible by 2^" +
                std::to_string(n_fmdr) + " so every block sees an even length");
  }
  if (use_cs && (shuffle_groups <= 0 || n_pw % shuffle_groups != 0)) {
    fail_config("config: shuffle groups " + std::to_string(shuffle_groups) +
                " must divide the channel width " + std::to_string(n_pw));
  }
  if (use_ca) {
    if (ca_reduction <= 0 || n_pw % ca_reduction != 0 || n_pw / ca_reduction < 1) {
      fail_config("config: attention reduction " + std::to_string(ca_reduction) +
                  " incompatible with channel width " + std::to_string(n_pw));
    }
  }
}

std::vector<int> ModelConfig::fusion_taps() const {
  if (!use_clff) return {n_fmdr};
  std::vector<int> taps;
  for (int l = std::max(1, n_fmdr - 2); l <= n_fmdr; ++l) taps.push_back(l);
  return taps;
}

Model::Model(const ModelConfig& config, uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);

  const int front_width = 2 * config_.n_cv;
  if (config_.use_cv_conv) {
    cv_conv_.emplace("iqcf.cv_conv", config_.s_ke, 1, config_.n_cv, rng);
    cv_bn_.emplace("iqcf.cvbn", config_.n_cv);
  } else {
    rv_conv_.emplace("iqcf.conv", config_.s_ke, 2, front_width, rng);
    rv_bn_.emplace("iqcf.bn", front_width);
  }

  blocks_.resize(static_cast<size_t>(config_.n_fmdr));
  for (int l = 1; l <= config_.n_fmdr; ++l) {
    FmdrBlock& blk = blocks_[static_cast<size_t>(l - 1)];
    const std::string prefix = "fmdr" + std::to_string(l);
    const int in_ch = (l == 1) ? front_width : config_.n_pw;
    blk.dw.emplace(prefix + ".dw", config_.s_ke, in_ch, rng, 2, Padding::Same);
    blk.pw.emplace(prefix + ".pw", in_ch, config_.n_pw, rng);
    blk.bn.emplace(prefix + ".bn", config_.n_pw);
    if (config_.use_cs) blk.shuffle.emplace(config_.n_pw, config_.shuffle_groups);
    if (config_.use_ca) {
      blk.attention.emplace(prefix + ".ca", config_.n_pw, config_.ca_reduction, rng);
    }
  }

  fc_.emplace("fc", config_.n_pw, config_.n_classes, rng);
  quantize_storage();
}

RealTensor Model::forward_front(const RealTensor& input, Mode mode) {
  const int batch = input.dim(0), k = config_.k;
  const bool infer = (mode == Mode::Eval);  // eval never back-propagates
  if (config_.use_cv_conv) {
    ComplexTensor cx = ComplexTensor::zeros({batch, k, 1});
    for (int b = 0; b < batch; ++b) {
      for (int t = 0; t < k; ++t) {
        cx.re(b, t, 0) = input(b, 0, t);
        cx.im(b, t, 0) = input(b, 1, t);
      }
    }
    ComplexTensor y = cv_conv_->forward(cx, infer);
    y = cv_bn_->forward(y, mode, infer);
    y = cv_relu_.forward(y, infer);
    return cv_to_real_.forward(y);
  }
  RealTensor rx({batch, k, 2});
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < k; ++t) {
      rx(b, t, 0) = input(b, 0, t);
      rx(b, t, 1) = input(b, 1, t);
    }
  }
  RealTensor y = rv_conv_->forward(rx, infer);
  y = rv_bn_->forward(y, mode, infer);
  return rv_relu_.forward(y, infer);
}

RealTensor Model::backward_front(const RealTensor& grad) {
  const int batch = grad.dim(0), k = config_.k;
  RealTensor grad_input({batch, 2, k});
  if (config_.use_cv_conv) {
    ComplexTensor g = cv_to_real_.backward(grad);
    g = cv_relu_.backward(g);
    g = cv_bn_->backward(g);
    g = cv_conv_->backward(g);
    for (int b = 0; b < batch; ++b) {
      for (int t = 0; t < k; ++t) {
        grad_input(b, 0, t) = g.re(b, t, 0);
        grad_input(b, 1, t) = g.im(b, t, 0);
      }
    }
    return grad_input;
  }
  RealTensor g = rv_relu_.backward(grad);
  g = rv_bn_->backward(g);
  g = rv_conv_->backward(g);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < k; ++t) {
      grad_input(b, 0, t) = g(b, t, 0);
      grad_input(b, 1, t) = g(b, t, 1);
    }
  }
  return grad_input;
}

RealTensor Model::forward(const RealTensor& input, Mode mode) {
  if (input.rank() != 3 || input.dim(1) != 2 || input.dim(2) != config_.k) {
    fail_config("forward: expected input [B, 2, " + std::to_string(config_.k) + "], got " +
                input.shape_str());
  }
  if (!input.all_finite()) fail_numeric("forward: non-finite input");

  RealTensor x = forward_front(input, mode);
  const bool infer = (mode == Mode::Eval);

  std::vector<bool> is_tap(static_cast<size_t>(config_.n_fmdr) + 1, false);
  for (int t : config_.fusion_taps()) is_tap[static_cast<size_t>(t)] = true;

  tap_lengths_.assign(static_cast<size_t>(config_.n_fmdr) + 1, 0);
  RealTensor fused({input.dim(0), config_.n_pw});
  for (int l = 1; l <= config_.n_fmdr; ++l) {
    FmdrBlock& blk = blocks_[static_cast<size_t>(l - 1)];
    x = blk.dw->forward(x, infer);
    x = blk.pw->forward(x, infer);
    x = blk.bn->forward(x, mode, infer);
    x = blk.relu.forward(x, infer);
    if (blk.shuffle) x = blk.shuffle->forward(x);
    if (blk.attention) x = blk.attention->forward(x, infer);
    tap_lengths_[static_cast<size_t>(l)] = x.dim(1);
    if (is_tap[static_cast<size_t>(l)]) {
      RealTensor pooled = global_avg_pool(x);
      for (int64_t i = 0; i < fused.size(); ++i) fused[i] += pooled[i];
    }
  }

  RealTensor logits = fc_->forward(fused, infer);
  return softmax(logits);
}

RealTensor Model::backward_from_logits(const RealTensor& grad_logits) {
  RealTensor g_fused = fc_->backward(grad_logits);

  std::vector<bool> is_tap(static_cast<size_t>(config_.n_fmdr) + 1, false);
  for (int t : config_.fusion_taps()) is_tap[static_cast<size_t>(t)] = true;

  RealTensor down;
  for (int l = config_.n_fmdr; l >= 1; --l) {
    RealTensor g;
    if (l == config_.n_fmdr) {
      g = global_avg_pool_backward(g_fused, tap_lengths_[static_cast<size_t>(l)]);
    } else {
      g = std::move(down);
      if (is_tap[static_cast<size_t>(l)]) {
        RealTensor tap_g = global_avg_pool_backward(g_fused, tap_lengths_[static_cast<size_t>(l)]);
        for (int64_t i = 0; i < g.size(); ++i) g[i] += tap_g[i];
      }
    }
    FmdrBlock& blk = blocks_[static_cast<size_t>(l - 1)];
    if (blk.attention) g = blk.attention->backward(g);
    if (blk.shuffle) g = blk.shuffle->backward(g);
    g = blk.relu.backward(g);
    g = blk.bn->backward(g);
    g = blk.pw->backward(g);
    down = blk.dw->backward(g);
  }
  return backward_front(down);
}

std::vector<int> Model::predict(const RealTensor& input) {
  RealTensor probs = score(input);
  const int batch = probs.dim(0), n = probs.dim(1);
  std::vector<int> out(static_cast<size_t>(batch));
  for (int b = 0; b < batch; ++b) out[static_cast<size_t>(b)] = argmax_row(&probs(b, 0), n);
  return out;
}

namespace {

// Slice width of the inference fast path. Small slices keep every
// intermediate activation cache-resident; scoring is per-sample independent,
// so slicing is exact.
constexpr int kScoreChunk = 4;

}  // namespace

RealTensor Model::score(const RealTensor& input) {
  if (input.rank() != 3 || input.dim(1) != 2 || input.dim(2) != config_.k) {
    fail_config("score: expected input [B, 2, " + std::to_string(config_.k) + "], got " +
                input.shape_str());
  }
  if (!input.all_finite()) fail_numeric("score: non-finite input");

  const int batch = input.dim(0);
  RealTensor out({batch, config_.n_classes});
  for (int lo = 0; lo < batch; lo += kScoreChunk) {
    score_chunk(input, lo, std::min(batch, lo + kScoreChunk), out);
  }
  return out;
}

// The fused stages below replay the reference layer arithmetic term for term
// (same accumulation order, same expression shapes), only without the
// intermediate tensors, so score() stays bit-identical to forward(Eval).

RealTensor Model::score_front_chunk(const RealTensor& input, int lo, int hi) {
  const int chunk = hi - lo, k = config_.k, s_ke = config_.s_ke;
  const int left = conv1d_left_pad(k, s_ke, 1, Padding::Same);

  if (config_.use_cv_conv) {
    const int n_cv = config_.n_cv;
    const CvBatchNorm::EvalCoeffs bn = cv_bn_->eval_coeffs();
    const double* wre = cv_conv_->w_re().data();  // [S, 1, n_cv]
    const double* wim = cv_conv_->w_im().data();
    const double* bre = cv_conv_->b_re().data();
    const double* bim = cv_conv_->b_im().data();

    RealTensor out({chunk, k, 2 * n_cv});
    std::vector<double> rr(static_cast<size_t>(n_cv)), ri(rr), ii(rr), ir(rr);
    for (int r = 0; r < chunk; ++r) {
      const int b = lo + r;
      for (int t = 0; t < k; ++t) {
        for (int c = 0; c < n_cv; ++c) {
          rr[static_cast<size_t>(c)] = bre[c];
          ri[static_cast<size_t>(c)] = bim[c];
          ii[static_cast<size_t>(c)] = 0.0;
          ir[static_cast<size_t>(c)] = 0.0;
        }
        const int base = t - left;
        for (int s = 0; s < s_ke; ++s) {
          const int l = base + s;
          if (l < 0 || l >= k) continue;
          const double xr = input(b, 0, l);
          const double xi = input(b, 1, l);
          const double* wre_s = wre + static_cast<int64_t>(s) * n_cv;
          const double* wim_s = wim + static_cast<int64_t>(s) * n_cv;
          if (xr != 0.0) {
            for (int c = 0; c < n_cv; ++c) {
              rr[static_cast<size_t>(c)] += xr * wre_s[c];
              ri[static_cast<size_t>(c)] += xr * wim_s[c];
            }
          }
          if (xi != 0.0) {
            for (int c = 0; c < n_cv; ++c) {
              ii[static_cast<size_t>(c)] += xi * wim_s[c];
              ir[static_cast<size_t>(c)] += xi * wre_s[c];
            }
          }
        }
        double* orow = &out(r, t, 0);
        for (int c = 0; c < n_cv; ++c) {
          const size_t i = static_cast<size_t>(c);
          const double cr = (rr[i] - ii[i]) - bn.mean_re[i];
          const double ci = (ri[i] + ir[i]) - bn.mean_im[i];
          const double hr = bn.w_rr[i] * cr + bn.w_ri[i] * ci;
          const double hi = bn.w_ri[i] * cr + bn.w_ii[i] * ci;
          double yr = bn.g_rr[i] * hr + bn.g_ri[i] * hi + bn.b_re[i];
          double yi = bn.g_ri[i] * hr + bn.g_ii[i] * hi + bn.b_im[i];
          if (yr < 0.0) yr = 0.0;
          if (yi < 0.0) yi = 0.0;
          orow[c] = yr;
          orow[n_cv + c] = yi;
        }
      }
    }
    return out;
  }

  const int width = 2 * config_.n_cv;
  const BatchNorm1d::EvalCoeffs bn = rv_bn_->eval_coeffs();
  const double* kd = rv_conv_->kernel().data();  // [S, 2, width]
  const double* bd = rv_conv_->bias().data();

  RealTensor out({chunk, k, width});
  std::vector<double> acc(static_cast<size_t>(width));
  for (int r = 0; r < chunk; ++r) {
    const int b = lo + r;
    for (int t = 0; t < k; ++t) {
      for (int c = 0; c < width; ++c) acc[static_cast<size_t>(c)] = bd[c];
      const int base = t - left;
      for (int s = 0; s < s_ke; ++s) {
        const int l = base + s;
        if (l < 0 || l >= k) continue;
        for (int ci = 0; ci < 2; ++ci) {
          const double xv = input(b, ci, l);
          if (xv == 0.0) continue;
          const double* kc = kd + (static_cast<int64_t>(s) * 2 + ci) * width;
          for (int c = 0; c < width; ++c) acc[static_cast<size_t>(c)] += xv * kc[c];
        }
      }
      double* orow = &out(r, t, 0);
      for (int c = 0; c < width; ++c) {
        const size_t i = static_cast<size_t>(c);
        double y = bn.gamma[i] * (acc[i] - bn.mean[i]) * bn.inv_std[i] + bn.beta[i];
        if (y < 0.0) y = 0.0;
        orow[c] = y;
      }
    }
  }
  return out;
}

void Model::score_chunk(const RealTensor& input, int lo, int hi, RealTensor& out) {
  RealTensor x = score_front_chunk(input, lo, hi);
  const int chunk = hi - lo, n_pw = config_.n_pw;

  std::vector<bool> is_tap(static_cast<size_t>(config_.n_fmdr) + 1, false);
  for (int t : config_.fusion_taps()) is_tap[static_cast<size_t>(t)] = true;

  RealTensor fused({chunk, n_pw});
  std::vector<double> acc(static_cast<size_t>(n_pw));
  for (int l = 1; l <= config_.n_fmdr; ++l) {
    FmdrBlock& blk = blocks_[static_cast<size_t>(l - 1)];
    RealTensor t1 = blk.dw->forward(x, true);
    const int len = t1.dim(1), in_ch = t1.dim(2);
    const BatchNorm1d::EvalCoeffs bn = blk.bn->eval_coeffs();
    const double* pwk = blk.pw->kernel().data();  // [1, in_ch, n_pw]
    const double* pwb = blk.pw->bias().data();
    const int* scatter = blk.shuffle ? blk.shuffle->inverse_permutation().data() : nullptr;

    RealTensor x2({chunk, len, n_pw});
    for (int r = 0; r < chunk; ++r) {
      for (int j = 0; j < len; ++j) {
        const double* irow = &t1(r, j, 0);
        for (int c = 0; c < n_pw; ++c) acc[static_cast<size_t>(c)] = pwb[c];
        for (int ci = 0; ci < in_ch; ++ci) {
          const double xv = irow[ci];
          if (xv == 0.0) continue;
          const double* kc = pwk + static_cast<int64_t>(ci) * n_pw;
          for (int c = 0; c < n_pw; ++c) acc[static_cast<size_t>(c)] += xv * kc[c];
        }
        double* orow = &x2(r, j, 0);
        for (int c = 0; c < n_pw; ++c) {
          const size_t i = static_cast<size_t>(c);
          double y = bn.gamma[i] * (acc[i] - bn.mean[i]) * bn.inv_std[i] + bn.beta[i];
          if (y < 0.0) y = 0.0;
          orow[scatter ? scatter[c] : c] = y;
        }
      }
    }

    if (blk.attention) x2 = blk.attention->forward(x2, true);
    if (is_tap[static_cast<size_t>(l)]) {
      RealTensor pooled = global_avg_pool(x2);
      for (int64_t i = 0; i < fused.size(); ++i) fused[i] += pooled[i];
    }
    x = std::move(x2);
  }

  RealTensor logits = fc_->forward(fused, true);
  RealTensor probs = softmax(logits);
  const int n = out.dim(1);
  for (int r = 0; r < chunk; ++r) {
    for (int j = 0; j < n; ++j) out(lo + r, j) = probs(r, j);
  }
}

std::vector<ParamRef> Model::parameters() {
  std::vector<ParamRef> refs;
  if (cv_conv_) cv_conv_->collect_params(refs);
  if (cv_bn_) cv_bn_->collect_params(refs);
  if (rv_conv_) rv_conv_->collect_params(refs);
  if (rv_bn_) rv_bn_->collect_params(refs);
  for (FmdrBlock& blk : blocks_) {
    blk.dw->collect_params(refs);
    blk.pw->collect_params(refs);
    blk.bn->collect_params(refs);
    if (blk.attention) blk.attention->collect_params(refs);
  }
  fc_->collect_params(refs);
  return refs;
}

std::vector<ParamRef> Model::moving_statistics() {
  std::vector<ParamRef> refs;
  if (cv_bn_) cv_bn_->collect_moving(refs);
  if (rv_bn_) rv_bn_->collect_moving(refs);
  for (FmdrBlock& blk : blocks_) blk.bn->collect_moving(refs);
  return refs;
}

void Model::zero_grads() {
  if (cv_conv_) cv_conv_->zero_grads();
  if (cv_bn_) cv_bn_->zero_grads();
  if (rv_conv_) rv_conv_->zero_grads();
  if (rv_bn_) rv_bn_->zero_grads();
  for (FmdrBlock& blk : blocks_) {
    blk.dw->zero_grads();
    blk.pw->zero_grads();
    blk.bn->zero_grads();
    if (blk.attention) blk.attention->zero_grads();
  }
  fc_->zero_grads();
}

void Model::quantize_storage() {
  for (ParamRef& ref : parameters()) ref.value->round_to_f32();
  for (ParamRef& ref : moving_statistics()) ref.value->round_to_f32();
}

std::vector<RealTensor> Model::snapshot_weights() {
  std::vector<RealTensor> snap;
  for (ParamRef& ref : parameters()) snap.push_back(*ref.value);
  for (ParamRef& ref : moving_statistics()) snap.push_back(*ref.value);
  return snap;
}

void Model::restore_weights(const std::vector<RealTensor>& snapshot) {
  std::vector<ParamRef> refs = parameters();
  std::vector<ParamRef> moving = moving_statistics();
  refs.insert(refs.end(), moving.begin(), moving.end());
  if (refs.size() != snapshot.size()) fail_config("restore_weights: snapshot layout mismatch");
  for (size_t i = 0; i < refs.size(); ++i) {
    if (!refs[i].value->same_shape(snapshot[i])) {
      fail_config("restore_weights: shape mismatch at " + refs[i].name);
    }
    *refs[i].value = snapshot[i];
  }
}

int64_t Model::param_count_trainable() {
  int64_t n = 0;
  for (ParamRef& ref : parameters()) n += ref.value->size();
  return n;
}

int64_t Model::param_count_moving() {
  int64_t n = 0;
  for (ParamRef& ref : moving_statistics()) n += ref.value->size();
  return n;
}

int64_t Model::param_count_total() { return param_count_trainable() + param_count_moving(); }

int env_thread_count() {
  const char* s = std::getenv("ULCNN_THREADS");
  if (!s) return 1;
  const int n = std::atoi(s);
  if (n < 1) return 1;
  return n > 64 ? 64 : n;
}

RealTensor eval_forward(const Model& model, const RealTensor& input, int threads) {
  const int batch = input.dim(0);
  if (threads <= 1 || batch <= 1) {
    Model local = model.clone();
    return local.score(input);
  }
  if (threads > batch) threads = batch;

  // Validate up front: a throw inside a worker thread would be fatal.
  if (input.rank() != 3 || input.dim(1) != 2 || input.dim(2) != model.config().k) {
    fail_config("score: expected input [B, 2, " + std::to_string(model.config().k) +
                "], got " + input.shape_str());
  }
  if (!input.all_finite()) fail_numeric("score: non-finite input");

  RealTensor out({batch, model.config().n_classes});
  const int64_t row = static_cast<int64_t>(input.dim(1)) * input.dim(2);
  std::vector<std::thread> pool;
  const int per = (batch + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * per;
    const int hi = std::min(batch, lo + per);
    if (lo >= hi) break;
    pool.emplace_back([&model, &input, &out, lo, hi, row]() {
      Model local = model.clone();
      RealTensor slice({hi - lo, input.dim(1), input.dim(2)});
      const int64_t base = lo * row;
      for (int64_t i = 0; i < (hi - lo) * row; ++i) slice[i] = input[base + i];
      RealTensor probs = local.score(slice);
      const int n = out.dim(1);
      for (int b = lo; b < hi; ++b) {
        for (int j = 0; j < n; ++j) out(b, j) = probs(b - lo, j);
      }
    });
  }
  for (std::thread& th : pool) th.join();
  return out;
}

}  // namespace ulcnn
