#pragma once

#include <string>
#include <vector>

#include "ulcnn/rng.hpp"
#include "ulcnn/tensor.hpp"

namespace ulcnn {

/// Pair of equally shaped real/imaginary planes, each [B, L, C].
struct ComplexTensor {
  RealTensor re, im;

  ComplexTensor() = default;
  ComplexTensor(RealTensor re_part, RealTensor im_part);

  static ComplexTensor zeros(std::vector<int> shape);

  const std::vector<int>& shape() const { return re.shape(); }
  int dim(int axis) const { return re.dim(axis); }
};

/// Complex cross-correlation built from four real convolutions:
///   out.re = conv(in.re, w.re) - conv(in.im, w.im) + b.re
///   out.im = conv(in.re, w.im) + conv(in.im, w.re) + b.im
ComplexTensor cv_conv1d(const ComplexTensor& input, const ComplexTensor& weight,
                        const ComplexTensor* bias, int stride = 1,
                        Padding padding = Padding::Same);

/// ReLU applied independently to both planes.
ComplexTensor cv_relu(const ComplexTensor& input);

/// [B, L, C] complex -> [B, L, 2C] real: channels 0..C-1 are the real plane,
/// C..2C-1 the imaginary plane.
RealTensor cv_to_real(const ComplexTensor& input);
ComplexTensor real_to_cv(const RealTensor& input);

class CvConv1d {
 public:
  CvConv1d(std::string name, int kernel_size, int in_channels, int out_channels,
           Rng& rng, int stride = 1, Padding padding = Padding::Same);

  /// `inference` skips the backward cache; backward is invalid after such a call.
  ComplexTensor forward(const ComplexTensor& input, bool inference = false);
  ComplexTensor backward(const ComplexTensor& grad_out);

  const RealTensor& w_re() const { return w_re_; }  // [S, C_in, C_out]
  const RealTensor& w_im() const { return w_im_; }
  const RealTensor& b_re() const { return b_re_; }
  const RealTensor& b_im() const { return b_im_; }

  void collect_params(std::vector<ParamRef>& out);
  void zero_grads();

  int64_t param_count() const;

 private:
  std::string name_;
  int kernel_size_, in_channels_, out_channels_, stride_;
  Padding padding_;
  RealTensor w_re_, w_im_, b_re_, b_im_;
  RealTensor gw_re_, gw_im_, gb_re_, gb_im_;
  ComplexTensor cached_input_;
};

/// Complex batch normalization with full 2x2 covariance whitening. Per
/// channel the centered signal is multiplied by the inverse square root of
/// its real/imaginary covariance matrix, then scaled by a symmetric 2x2
/// gamma and shifted by a complex beta.
class CvBatchNorm {
 public:
  CvBatchNorm(std::string name, int channels, double momentum = 0.99, double eps = 1e-3);

  ComplexTensor forward(const ComplexTensor& input, Mode mode, bool inference = false);
  ComplexTensor backward(const ComplexTensor& grad_out);

  /// Per-channel terms of the eval-mode transform derived from the moving
  /// statistics: center by mean, whiten by W (inverse square root of the
  /// covariance), then scale by gamma and shift by beta. Fails on a singular
  /// covariance exactly like forward.
  struct EvalCoeffs {
    std::vector<double> mean_re, mean_im, w_rr, w_ri, w_ii;
    std::vector<double> g_rr, g_ri, g_ii, b_re, b_im;
  };
  EvalCoeffs eval_coeffs() const;

  void collect_params(std::vector<ParamRef>& out);
  void collect_moving(std::vector<ParamRef>& out);
  void zero_grads();

  int64_t param_count() const;  // trainable + moving

 private:
  std::string name_;
  int channels_;
  double momentum_, eps_;
  // Trainable: symmetric gamma (rr, ri, ii) and complex beta.
  RealTensor gamma_rr_, gamma_ri_, gamma_ii_, beta_re_, beta_im_;
  RealTensor g_gamma_rr_, g_gamma_ri_, g_gamma_ii_, g_beta_re_, g_beta_im_;
  // Moving statistics: mean and raw covariance (eps applied at use).
  RealTensor mov_mean_re_, mov_mean_im_, mov_vrr_, mov_vii_, mov_vri_;

  // Forward cache for the backward pass (per channel scalars + centered data).
  struct Cache {
    int batch = 0, len = 0;
    Mode mode = Mode::Train;
    std::vector<double> vrr, vii, vri, s, t, w_rr, w_ri, w_ii;
    RealTensor c_re, c_im;    // centered input
    RealTensor xhat_re, xhat_im;
  } cache_;
};

class CvRelu {
 public:
  ComplexTensor forward(const ComplexTensor& input, bool inference = false);
  ComplexTensor backward(const ComplexTensor& grad_out);

 private:
  RealTensor mask_re_, mask_im_;
};

/// Relayout stage [B, L, C] complex -> [B, L, 2C] real with exact inverse
/// for the backward pass.
class CvToReal {
 public:
  RealTensor forward(const ComplexTensor& input);
  ComplexTensor backward(const RealTensor& grad_out);
};

}  // namespace ulcnn
