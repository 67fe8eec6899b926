#include "ulcnn/cv_layers.hpp"

#include <cmath>

namespace ulcnn {

ComplexTensor::ComplexTensor(RealTensor re_part, RealTensor im_part)
    : re(std::move(re_part)), im(std::move(im_part)) {
  if (!re.same_shape(im)) {
    fail_config("complex tensor planes differ: " + re.shape_str() + " vs " + im.shape_str());
  }
}

ComplexTensor ComplexTensor::zeros(std::vector<int> shape) {
  ComplexTensor t;
  t.re = RealTensor(shape);
  t.im = RealTensor(std::move(shape));
  return t;
}

ComplexTensor cv_conv1d(const ComplexTensor& input, const ComplexTensor& weight,
                        const ComplexTensor* bias, int stride, Padding padding) {
  RealTensor rr = conv1d(input.re, weight.re, bias ? &bias->re : nullptr, stride, padding);
  RealTensor ii = conv1d(input.im, weight.im, nullptr, stride, padding);
  RealTensor ri = conv1d(input.re, weight.im, bias ? &bias->im : nullptr, stride, padding);
  RealTensor ir = conv1d(input.im, weight.re, nullptr, stride, padding);

  ComplexTensor out;
  out.re = std::move(rr);
  out.im = std::move(ri);
  for (int64_t i = 0; i < out.re.size(); ++i) {
    out.re[i] -= ii[i];
    out.im[i] += ir[i];
  }
  return out;
}

ComplexTensor cv_relu(const ComplexTensor& input) {
  ComplexTensor out = input;
  for (int64_t i = 0; i < out.re.size(); ++i) {
    if (out.re[i] < 0.0) out.re[i] = 0.0;
    if (out.im[i] < 0.0) out.im[i] = 0.0;
  }
  return out;
}

RealTensor cv_to_real(const ComplexTensor& input) {
  const int batch = input.dim(0), len = input.dim(1), ch = input.dim(2);
  RealTensor out({batch, len, 2 * ch});
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* re_row = &input.re(b, l, 0);
      const double* im_row = &input.im(b, l, 0);
      double* orow = &out(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        orow[c] = re_row[c];
        orow[ch + c] = im_row[c];
      }
    }
  }
  return out;
}

ComplexTensor real_to_cv(const RealTensor& input) {
  const int batch = input.dim(0), len = input.dim(1), ch2 = input.dim(2);
  if (ch2 % 2 != 0) fail_config("real_to_cv needs an even channel count, got " + input.shape_str());
  const int ch = ch2 / 2;
  ComplexTensor out = ComplexTensor::zeros({batch, len, ch});
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* irow = &input(b, l, 0);
      double* re_row = &out.re(b, l, 0);
      double* im_row = &out.im(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        re_row[c] = irow[c];
        im_row[c] = irow[ch + c];
      }
    }
  }
  return out;
}

CvConv1d::CvConv1d(std::string name, int kernel_size, int in_channels, int out_channels,
                   Rng& rng, int stride, Padding padding)
    : name_(std::move(name)),
      kernel_size_(kernel_size),
      in_channels_(in_channels),
      out_channels_(out_channels),
      stride_(stride),
      padding_(padding),
      w_re_({kernel_size, in_channels, out_channels}),
      w_im_({kernel_size, in_channels, out_channels}),
      b_re_({out_channels}),
      b_im_({out_channels}),
      gw_re_({kernel_size, in_channels, out_channels}),
      gw_im_({kernel_size, in_channels, out_channels}),
      gb_re_({out_channels}),
      gb_im_({out_channels}) {
  const double limit = std::sqrt(6.0 / (kernel_size * in_channels + out_channels));
  for (int64_t i = 0; i < w_re_.size(); ++i) w_re_[i] = rng.uniform(-limit, limit);
  for (int64_t i = 0; i < w_im_.size(); ++i) w_im_[i] = rng.uniform(-limit, limit);
  w_re_.round_to_f32();
  w_im_.round_to_f32();
}

ComplexTensor CvConv1d::forward(const ComplexTensor& input, bool inference) {
  if (!inference) cached_input_ = input;
  ComplexTensor weight;
  weight.re = w_re_;
  weight.im = w_im_;
  ComplexTensor bias;
  bias.re = b_re_;
  bias.im = b_im_;
  return cv_conv1d(input, weight, &bias, stride_, padding_);
}

ComplexTensor CvConv1d::backward(const ComplexTensor& grad_out) {
  const int in_len = cached_input_.dim(1);

  // Real part of the output sees (re*w_re - im*w_im); imaginary sees
  // (re*w_im + im*w_re). Each term back-propagates like a real convolution.
  RealTensor g_in_re = conv1d_backward_input(grad_out.re, w_re_, in_len, stride_, padding_);
  {
    RealTensor t = conv1d_backward_input(grad_out.im, w_im_, in_len, stride_, padding_);
    for (int64_t i = 0; i < g_in_re.size(); ++i) g_in_re[i] += t[i];
  }
  RealTensor g_in_im = conv1d_backward_input(grad_out.im, w_re_, in_len, stride_, padding_);
  {
    RealTensor t = conv1d_backward_input(grad_out.re, w_im_, in_len, stride_, padding_);
    for (int64_t i = 0; i < g_in_im.size(); ++i) g_in_im[i] -= t[i];
  }

  RealTensor gk = conv1d_backward_kernel(cached_input_.re, grad_out.re, kernel_size_, stride_, padding_);
  for (int64_t i = 0; i < gw_re_.size(); ++i) gw_re_[i] += gk[i];
  gk = conv1d_backward_kernel(cached_input_.im, grad_out.im, kernel_size_, stride_, padding_);
  for (int64_t i = 0; i < gw_re_.size(); ++i) gw_re_[i] += gk[i];
  gk = conv1d_backward_kernel(cached_input_.re, grad_out.im, kernel_size_, stride_, padding_);
  for (int64_t i = 0; i < gw_im_.size(); ++i) gw_im_[i] += gk[i];
  gk = conv1d_backward_kernel(cached_input_.im, grad_out.re, kernel_size_, stride_, padding_);
  for (int64_t i = 0; i < gw_im_.size(); ++i) gw_im_[i] -= gk[i];

  RealTensor gb = conv1d_backward_bias(grad_out.re);
  for (int64_t i = 0; i < gb_re_.size(); ++i) gb_re_[i] += gb[i];
  gb = conv1d_backward_bias(grad_out.im);
  for (int64_t i = 0; i < gb_im_.size(); ++i) gb_im_[i] += gb[i];

  ComplexTensor grad_in;
  grad_in.re = std::move(g_in_re);
  grad_in.im = std::move(g_in_im);
  return grad_in;
}

void CvConv1d::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".w_re", &w_re_, &gw_re_});
  out.push_back({name_ + ".w_im", &w_im_, &gw_im_});
  out.push_back({name_ + ".b_re", &b_re_, &gb_re_});
  out.push_back({name_ + ".b_im", &b_im_, &gb_im_});
}

void CvConv1d::zero_grads() {
  gw_re_.zero();
  gw_im_.zero();
  gb_re_.zero();
  gb_im_.zero();
}

int64_t CvConv1d::param_count() const {
  return w_re_.size() + w_im_.size() + b_re_.size() + b_im_.size();
}

CvBatchNorm::CvBatchNorm(std::string name, int channels, double momentum, double eps)
    : name_(std::move(name)),
      channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_rr_({channels}),
      gamma_ri_({channels}),
      gamma_ii_({channels}),
      beta_re_({channels}),
      beta_im_({channels}),
      g_gamma_rr_({channels}),
      g_gamma_ri_({channels}),
      g_gamma_ii_({channels}),
      g_beta_re_({channels}),
      g_beta_im_({channels}),
      mov_mean_re_({channels}),
      mov_mean_im_({channels}),
      mov_vrr_({channels}),
      mov_vii_({channels}),
      mov_vri_({channels}) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  gamma_rr_.fill(inv_sqrt2);
  gamma_ii_.fill(inv_sqrt2);
  mov_vrr_.fill(inv_sqrt2);
  mov_vii_.fill(inv_sqrt2);
  gamma_rr_.round_to_f32();
  gamma_ii_.round_to_f32();
  mov_vrr_.round_to_f32();
  mov_vii_.round_to_f32();
}

ComplexTensor CvBatchNorm::forward(const ComplexTensor& input, Mode mode, bool inference) {
  const int batch = input.dim(0), len = input.dim(1), ch = input.dim(2);
  if (ch != channels_) {
    fail_config(name_ + ": expected " + std::to_string(channels_) + " channels, got " +
                input.re.shape_str());
  }
  const int64_t n = static_cast<int64_t>(batch) * len;
  const bool use_batch_stats = (mode != Mode::Eval);

  std::vector<double> mean_re(ch, 0.0), mean_im(ch, 0.0);
  if (use_batch_stats) {
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double* rrow = &input.re(b, l, 0);
        const double* irow = &input.im(b, l, 0);
        for (int c = 0; c < ch; ++c) {
          mean_re[c] += rrow[c];
          mean_im[c] += irow[c];
        }
      }
    }
    for (int c = 0; c < ch; ++c) {
      mean_re[c] /= static_cast<double>(n);
      mean_im[c] /= static_cast<double>(n);
    }
  } else {
    for (int c = 0; c < ch; ++c) {
      mean_re[c] = mov_mean_re_(c);
      mean_im[c] = mov_mean_im_(c);
    }
  }

  std::vector<double> raw_vrr(ch, 0.0), raw_vii(ch, 0.0), raw_vri(ch, 0.0);
  if (use_batch_stats) {
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double* rrow = &input.re(b, l, 0);
        const double* irow = &input.im(b, l, 0);
        for (int c = 0; c < ch; ++c) {
          const double cr = rrow[c] - mean_re[c];
          const double ci = irow[c] - mean_im[c];
          raw_vrr[c] += cr * cr;
          raw_vii[c] += ci * ci;
          raw_vri[c] += cr * ci;
        }
      }
    }
    for (int c = 0; c < ch; ++c) {
      raw_vrr[c] /= static_cast<double>(n);
      raw_vii[c] /= static_cast<double>(n);
      raw_vri[c] /= static_cast<double>(n);
    }
  } else {
    for (int c = 0; c < ch; ++c) {
      raw_vrr[c] = mov_vrr_(c);
      raw_vii[c] = mov_vii_(c);
      raw_vri[c] = mov_vri_(c);
    }
  }

  if (mode == Mode::Train) {
    const double m = momentum_;
    for (int c = 0; c < ch; ++c) {
      mov_mean_re_(c) = m * mov_mean_re_(c) + (1.0 - m) * mean_re[c];
      mov_mean_im_(c) = m * mov_mean_im_(c) + (1.0 - m) * mean_im[c];
      mov_vrr_(c) = m * mov_vrr_(c) + (1.0 - m) * raw_vrr[c];
      mov_vii_(c) = m * mov_vii_(c) + (1.0 - m) * raw_vii[c];
      mov_vri_(c) = m * mov_vri_(c) + (1.0 - m) * raw_vri[c];
    }
  }

  std::vector<double> w_rr(ch, 0.0), w_ri(ch, 0.0), w_ii(ch, 0.0);
  std::vector<double> vrr_eps(ch, 0.0), vii_eps(ch, 0.0), dets(ch, 0.0), traces(ch, 0.0);
  for (int c = 0; c < ch; ++c) {
    const double vrr = raw_vrr[c] + eps_;
    const double vii = raw_vii[c] + eps_;
    const double vri = raw_vri[c];
    const double det = vrr * vii - vri * vri;
    if (!(det > 0.0) || !std::isfinite(det)) {
      fail_numeric(name_ + ": singular covariance in channel " + std::to_string(c));
    }
    const double s = std::sqrt(det);
    const double t = std::sqrt(vrr + vii + 2.0 * s);
    const double inv = 1.0 / (s * t);
    vrr_eps[c] = vrr;
    vii_eps[c] = vii;
    dets[c] = s;
    traces[c] = t;
    w_rr[c] = (vii + s) * inv;
    w_ii[c] = (vrr + s) * inv;
    w_ri[c] = -vri * inv;
  }

  ComplexTensor out = ComplexTensor::zeros({batch, len, ch});
  if (inference) {
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double* rrow = &input.re(b, l, 0);
        const double* irow = &input.im(b, l, 0);
        double* yr = &out.re(b, l, 0);
        double* yi = &out.im(b, l, 0);
        for (int c = 0; c < ch; ++c) {
          const double cr = rrow[c] - mean_re[c];
          const double ci = irow[c] - mean_im[c];
          const double hr = w_rr[c] * cr + w_ri[c] * ci;
          const double hi = w_ri[c] * cr + w_ii[c] * ci;
          yr[c] = gamma_rr_(c) * hr + gamma_ri_(c) * hi + beta_re_(c);
          yi[c] = gamma_ri_(c) * hr + gamma_ii_(c) * hi + beta_im_(c);
        }
      }
    }
    return out;
  }

  cache_.batch = batch;
  cache_.len = len;
  cache_.mode = mode;
  cache_.vrr = vrr_eps;
  cache_.vii = vii_eps;
  cache_.vri = raw_vri;
  cache_.s = dets;
  cache_.t = traces;
  cache_.w_rr = w_rr;
  cache_.w_ri = w_ri;
  cache_.w_ii = w_ii;
  cache_.c_re = RealTensor({batch, len, ch});
  cache_.c_im = RealTensor({batch, len, ch});
  cache_.xhat_re = RealTensor({batch, len, ch});
  cache_.xhat_im = RealTensor({batch, len, ch});

  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* rrow = &input.re(b, l, 0);
      const double* irow = &input.im(b, l, 0);
      double* cr = &cache_.c_re(b, l, 0);
      double* ci = &cache_.c_im(b, l, 0);
      double* xr = &cache_.xhat_re(b, l, 0);
      double* xi = &cache_.xhat_im(b, l, 0);
      double* yr = &out.re(b, l, 0);
      double* yi = &out.im(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        const double cre = rrow[c] - mean_re[c];
        const double cim = irow[c] - mean_im[c];
        cr[c] = cre;
        ci[c] = cim;
        const double hr = w_rr[c] * cre + w_ri[c] * cim;
        const double hi = w_ri[c] * cre + w_ii[c] * cim;
        xr[c] = hr;
        xi[c] = hi;
        yr[c] = gamma_rr_(c) * hr + gamma_ri_(c) * hi + beta_re_(c);
        yi[c] = gamma_ri_(c) * hr + gamma_ii_(c) * hi + beta_im_(c);
      }
    }
  }
  return out;
}

ComplexTensor CvBatchNorm::backward(const ComplexTensor& grad_out) {
  const int batch = cache_.batch, len = cache_.len, ch = channels_;
  const int64_t n = static_cast<int64_t>(batch) * len;
  const double inv_n = 1.0 / static_cast<double>(n);

  ComplexTensor grad_in = ComplexTensor::zeros({batch, len, ch});

  // Shared head: beta/gamma grads and the gradient w.r.t. the whitened signal.
  RealTensor g_xhat_re({batch, len, ch}), g_xhat_im({batch, len, ch});
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* gr = &grad_out.re(b, l, 0);
      const double* gi = &grad_out.im(b, l, 0);
      const double* xr = &cache_.xhat_re(b, l, 0);
      const double* xi = &cache_.xhat_im(b, l, 0);
      double* hr = &g_xhat_re(b, l, 0);
      double* hi = &g_xhat_im(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        g_beta_re_(c) += gr[c];
        g_beta_im_(c) += gi[c];
        g_gamma_rr_(c) += gr[c] * xr[c];
        g_gamma_ii_(c) += gi[c] * xi[c];
        g_gamma_ri_(c) += gr[c] * xi[c] + gi[c] * xr[c];
        hr[c] = gamma_rr_(c) * gr[c] + gamma_ri_(c) * gi[c];
        hi[c] = gamma_ri_(c) * gr[c] + gamma_ii_(c) * gi[c];
      }
    }
  }

  if (cache_.mode == Mode::Eval) {
    // Whitening matrix and mean are constants in eval mode.
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double* hr = &g_xhat_re(b, l, 0);
        const double* hi = &g_xhat_im(b, l, 0);
        double* or_ = &grad_in.re(b, l, 0);
        double* oi = &grad_in.im(b, l, 0);
        for (int c = 0; c < ch; ++c) {
          or_[c] = cache_.w_rr[c] * hr[c] + cache_.w_ri[c] * hi[c];
          oi[c] = cache_.w_ri[c] * hr[c] + cache_.w_ii[c] * hi[c];
        }
      }
    }
    return grad_in;
  }

  // Batch-statistics path: xhat = W(V) * c, V and the mean depend on x.
  std::vector<double> g_w_rr(ch, 0.0), g_w_ri(ch, 0.0), g_w_ii(ch, 0.0);
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* hr = &g_xhat_re(b, l, 0);
      const double* hi = &g_xhat_im(b, l, 0);
      const double* cr = &cache_.c_re(b, l, 0);
      const double* ci = &cache_.c_im(b, l, 0);
      double* or_ = &grad_in.re(b, l, 0);
      double* oi = &grad_in.im(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        g_w_rr[c] += hr[c] * cr[c];
        g_w_ii[c] += hi[c] * ci[c];
        g_w_ri[c] += hr[c] * ci[c] + hi[c] * cr[c];
        // Direct path through c; statistics paths are added afterwards.
        or_[c] = cache_.w_rr[c] * hr[c] + cache_.w_ri[c] * hi[c];
        oi[c] = cache_.w_ri[c] * hr[c] + cache_.w_ii[c] * hi[c];
      }
    }
  }

  // Scalar chain rule per channel through W(V_rr, V_ii, V_ri).
  std::vector<double> g_vrr(ch, 0.0), g_vii(ch, 0.0), g_vri(ch, 0.0);
  for (int c = 0; c < ch; ++c) {
    const double vrr = cache_.vrr[c], vii = cache_.vii[c], vri = cache_.vri[c];
    const double s = cache_.s[c], t = cache_.t[c];
    const double inv = 1.0 / (s * t);

    const double g_inv = g_w_rr[c] * (vii + s) + g_w_ii[c] * (vrr + s) - g_w_ri[c] * vri;
    double g_s = (g_w_rr[c] + g_w_ii[c]) * inv;
    g_vii[c] += g_w_rr[c] * inv;
    g_vrr[c] += g_w_ii[c] * inv;
    g_vri[c] -= g_w_ri[c] * inv;

    g_s += -g_inv * inv / s;
    const double g_t = -g_inv * inv / t;

    const double g_u = g_t / (2.0 * t);  // u = vrr + vii + 2s
    g_vrr[c] += g_u;
    g_vii[c] += g_u;
    g_s += 2.0 * g_u;

    const double g_d = g_s / (2.0 * s);  // d = vrr*vii - vri^2
    g_vrr[c] += g_d * vii;
    g_vii[c] += g_d * vrr;
    g_vri[c] += -2.0 * g_d * vri;
  }

  // V depends on the centered signal; fold in, then remove the mean path.
  std::vector<double> mean_gc_re(ch, 0.0), mean_gc_im(ch, 0.0);
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      const double* cr = &cache_.c_re(b, l, 0);
      const double* ci = &cache_.c_im(b, l, 0);
      double* or_ = &grad_in.re(b, l, 0);
      double* oi = &grad_in.im(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        or_[c] += inv_n * (2.0 * g_vrr[c] * cr[c] + g_vri[c] * ci[c]);
        oi[c] += inv_n * (2.0 * g_vii[c] * ci[c] + g_vri[c] * cr[c]);
        mean_gc_re[c] += or_[c];
        mean_gc_im[c] += oi[c];
      }
    }
  }
  for (int c = 0; c < ch; ++c) {
    mean_gc_re[c] *= inv_n;
    mean_gc_im[c] *= inv_n;
  }
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < len; ++l) {
      double* or_ = &grad_in.re(b, l, 0);
      double* oi = &grad_in.im(b, l, 0);
      for (int c = 0; c < ch; ++c) {
        or_[c] -= mean_gc_re[c];
        oi[c] -= mean_gc_im[c];
      }
    }
  }
  return grad_in;
}

CvBatchNorm::EvalCoeffs CvBatchNorm::eval_coeffs() const {
  const size_t ch = static_cast<size_t>(channels_);
  EvalCoeffs co;
  co.mean_re.resize(ch);
  co.mean_im.resize(ch);
  co.w_rr.resize(ch);
  co.w_ri.resize(ch);
  co.w_ii.resize(ch);
  co.g_rr.resize(ch);
  co.g_ri.resize(ch);
  co.g_ii.resize(ch);
  co.b_re.resize(ch);
  co.b_im.resize(ch);
  for (int c = 0; c < channels_; ++c) {
    const double vrr = mov_vrr_(c) + eps_;
    const double vii = mov_vii_(c) + eps_;
    const double vri = mov_vri_(c);
    const double det = vrr * vii - vri * vri;
    if (!(det > 0.0) || !std::isfinite(det)) {
      fail_numeric(name_ + ": singular covariance in channel " + std::to_string(c));
    }
    const double s = std::sqrt(det);
    const double t = std::sqrt(vrr + vii + 2.0 * s);
    const double inv = 1.0 / (s * t);
    const size_t i = static_cast<size_t>(c);
    co.mean_re[i] = mov_mean_re_(c);
    co.mean_im[i] = mov_mean_im_(c);
    co.w_rr[i] = (vii + s) * inv;
    co.w_ii[i] = (vrr + s) * inv;
    co.w_ri[i] = -vri * inv;
    co.g_rr[i] = gamma_rr_(c);
    co.g_ri[i] = gamma_ri_(c);
    co.g_ii[i] = gamma_ii_(c);
    co.b_re[i] = beta_re_(c);
    co.b_im[i] = beta_im_(c);
  }
  return co;
}

void CvBatchNorm::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".gamma_rr", &gamma_rr_, &g_gamma_rr_});
  out.push_back({name_ + ".gamma_ri", &gamma_ri_, &g_gamma_ri_});
  out.push_back({name_ + ".gamma_ii", &gamma_ii_, &g_gamma_ii_});
  out.push_back({name_ + ".beta_re", &beta_re_, &g_beta_re_});
  out.push_back({name_ + ".beta_im", &beta_im_, &g_beta_im_});
}

void CvBatchNorm::collect_moving(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".mov_mean_re", &mov_mean_re_, nullptr});
  out.push_back({name_ + ".mov_mean_im", &mov_mean_im_, nullptr});
  out.push_back({name_ + ".mov_vrr", &mov_vrr_, nullptr});
  out.push_back({name_ + ".mov_vii", &mov_vii_, nullptr});
  out.push_back({name_ + ".mov_vri", &mov_vri_, nullptr});
}

void CvBatchNorm::zero_grads() {
  g_gamma_rr_.zero();
  g_gamma_ri_.zero();
  g_gamma_ii_.zero();
  g_beta_re_.zero();
  g_beta_im_.zero();
}

int64_t CvBatchNorm::param_count() const {
  return 10 * channels_;  // 5 trainable + 5 moving vectors
}

ComplexTensor CvRelu::forward(const ComplexTensor& input, bool inference) {
  ComplexTensor out = input;
  if (inference) {
    for (int64_t i = 0; i < out.re.size(); ++i) {
      if (out.re[i] < 0.0) out.re[i] = 0.0;
      if (out.im[i] < 0.0) out.im[i] = 0.0;
    }
    return out;
  }
  mask_re_ = RealTensor(input.shape());
  mask_im_ = RealTensor(input.shape());
  for (int64_t i = 0; i < out.re.size(); ++i) {
    mask_re_[i] = out.re[i] > 0.0 ? 1.0 : 0.0;
    mask_im_[i] = out.im[i] > 0.0 ? 1.0 : 0.0;
    if (out.re[i] < 0.0) out.re[i] = 0.0;
    if (out.im[i] < 0.0) out.im[i] = 0.0;
  }
  return out;
}

ComplexTensor CvRelu::backward(const ComplexTensor& grad_out) {
  ComplexTensor grad_in = grad_out;
  for (int64_t i = 0; i < grad_in.re.size(); ++i) {
    grad_in.re[i] *= mask_re_[i];
    grad_in.im[i] *= mask_im_[i];
  }
  return grad_in;
}

RealTensor CvToReal::forward(const ComplexTensor& input) { return cv_to_real(input); }

ComplexTensor CvToReal::backward(const RealTensor& grad_out) { return real_to_cv(grad_out); }

}  // namespace ulcnn
