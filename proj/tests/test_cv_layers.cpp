#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ulcnn/cv_layers.hpp"
#include "ulcnn/gradcheck.hpp"

using namespace ulcnn;
using testing::random_complex;
using testing::random_tensor;

namespace {

/// Direct complex-number sliding-window reference, no reuse of conv1d.
ComplexTensor oracle_cv_conv(const ComplexTensor& x, const ComplexTensor& w,
                             const ComplexTensor* bias, int stride, Padding padding) {
  const int batch = x.dim(0), len = x.dim(1), c_in = x.dim(2);
  const int s_ke = w.dim(0), c_out = w.dim(2);
  const int out_len = conv1d_output_length(len, s_ke, stride, padding);
  const int left = conv1d_left_pad(len, s_ke, stride, padding);
  ComplexTensor out = ComplexTensor::zeros({batch, out_len, c_out});
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      for (int co = 0; co < c_out; ++co) {
        double acc_re = bias ? bias->re(co) : 0.0;
        double acc_im = bias ? bias->im(co) : 0.0;
        for (int s = 0; s < s_ke; ++s) {
          const int l = j * stride - left + s;
          if (l < 0 || l >= len) continue;
          for (int ci = 0; ci < c_in; ++ci) {
            const double xr = x.re(b, l, ci), xi = x.im(b, l, ci);
            const double wr = w.re(s, ci, co), wi = w.im(s, ci, co);
            acc_re += xr * wr - xi * wi;
            acc_im += xr * wi + xi * wr;
          }
        }
        out.re(b, j, co) = acc_re;
        out.im(b, j, co) = acc_im;
      }
    }
  }
  return out;
}

double max_plane_diff(const ComplexTensor& a, const ComplexTensor& b) {
  return std::max(testing::max_abs_diff(a.re, b.re), testing::max_abs_diff(a.im, b.im));
}

}  // namespace

TEST_SUITE_BEGIN("cv_layers");

TEST_CASE("single-tap complex multiply") {
  // (2+3j)(1+j) = -1+5j
  ComplexTensor x = ComplexTensor::zeros({1, 1, 1});
  x.re[0] = 2.0;
  x.im[0] = 3.0;
  ComplexTensor w = ComplexTensor::zeros({1, 1, 1});
  w.re[0] = 1.0;
  w.im[0] = 1.0;
  ComplexTensor y = cv_conv1d(x, w, nullptr);
  CHECK(y.re[0] == -1.0);
  CHECK(y.im[0] == 5.0);
}

TEST_CASE("purely real weights decouple the planes") {
  Rng rng(5);
  ComplexTensor x = random_complex({1, 8, 2}, rng);
  ComplexTensor w = ComplexTensor::zeros({3, 2, 2});
  for (int64_t i = 0; i < w.re.size(); ++i) w.re[i] = rng.uniform(-1.0, 1.0);

  ComplexTensor y = cv_conv1d(x, w, nullptr);
  RealTensor yr = conv1d(x.re, w.re, nullptr, 1, Padding::Same);
  RealTensor yi = conv1d(x.im, w.re, nullptr, 1, Padding::Same);
  CHECK(testing::max_abs_diff(y.re, yr) == 0.0);
  CHECK(testing::max_abs_diff(y.im, yi) == 0.0);
}

TEST_CASE("matches the complex brute-force oracle on random instances") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const int len = 2 + static_cast<int>(rng.below(15));
    const int s_ke = 1 + static_cast<int>(rng.below(5));
    const int c_in = 1 + static_cast<int>(rng.below(4));
    const int c_out = 1 + static_cast<int>(rng.below(4));
    ComplexTensor x = random_complex({2, len, c_in}, rng);
    ComplexTensor w = random_complex({s_ke, c_in, c_out}, rng);
    ComplexTensor b = random_complex({c_out}, rng);
    ComplexTensor got = cv_conv1d(x, w, &b);
    ComplexTensor want = oracle_cv_conv(x, w, &b, 1, Padding::Same);
    CHECK(max_plane_diff(got, want) <= 1e-12);
  }
}

TEST_CASE("complex-linear in the input") {
  Rng rng(9);
  ComplexTensor x = random_complex({1, 10, 2}, rng);
  ComplexTensor w = random_complex({3, 2, 3}, rng);
  const double cr = 0.6, ci = -1.2;  // scalar c

  ComplexTensor cx = ComplexTensor::zeros(x.shape());
  for (int64_t i = 0; i < x.re.size(); ++i) {
    cx.re[i] = cr * x.re[i] - ci * x.im[i];
    cx.im[i] = cr * x.im[i] + ci * x.re[i];
  }
  ComplexTensor y = cv_conv1d(x, w, nullptr);
  ComplexTensor cy = cv_conv1d(cx, w, nullptr);
  for (int64_t i = 0; i < y.re.size(); ++i) {
    CHECK(std::fabs(cy.re[i] - (cr * y.re[i] - ci * y.im[i])) <= 1e-12);
    CHECK(std::fabs(cy.im[i] - (cr * y.im[i] + ci * y.re[i])) <= 1e-12);
  }
}

TEST_CASE("cv_relu clips each plane independently") {
  ComplexTensor x = ComplexTensor::zeros({1, 1, 3});
  x.re[0] = 1.0;
  x.im[0] = 1.0;  // 1+1j fixed point
  x.re[1] = -1.0;
  x.im[1] = -1.0;  // zeroed
  x.re[2] = -2.0;
  x.im[2] = 3.0;  // -2+3j -> 0+3j
  ComplexTensor y = cv_relu(x);
  CHECK(y.re[0] == 1.0);
  CHECK(y.im[0] == 1.0);
  CHECK(y.re[1] == 0.0);
  CHECK(y.im[1] == 0.0);
  CHECK(y.re[2] == 0.0);
  CHECK(y.im[2] == 3.0);
}

TEST_CASE("complex-to-real stacking and its inverse") {
  ComplexTensor one = ComplexTensor::zeros({1, 1, 1});
  one.re[0] = 3.0;
  one.im[0] = 4.0;
  RealTensor flat = cv_to_real(one);
  REQUIRE(flat.shape() == std::vector<int>{1, 1, 2});
  CHECK(flat[0] == 3.0);
  CHECK(flat[1] == 4.0);

  Rng rng(31);
  ComplexTensor x = random_complex({2, 128, 16}, rng);
  RealTensor r = cv_to_real(x);
  CHECK(r.shape() == std::vector<int>{2, 128, 32});
  ComplexTensor back = real_to_cv(r);
  CHECK(max_plane_diff(back, x) == 0.0);
}

namespace {

/// Exactly whitened per-channel data built with test-side 2x2 Cholesky math.
ComplexTensor make_white_input(int batch, int len, int ch, uint64_t seed) {
  Rng rng(seed);
  ComplexTensor x = random_complex({batch, len, ch}, rng);
  const int64_t n = static_cast<int64_t>(batch) * len;
  for (int c = 0; c < ch; ++c) {
    double mr = 0.0, mi = 0.0;
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        mr += x.re(b, l, c);
        mi += x.im(b, l, c);
      }
    }
    mr /= static_cast<double>(n);
    mi /= static_cast<double>(n);
    double vrr = 0.0, vii = 0.0, vri = 0.0;
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double dr = x.re(b, l, c) - mr, di = x.im(b, l, c) - mi;
        vrr += dr * dr;
        vii += di * di;
        vri += dr * di;
      }
    }
    vrr /= static_cast<double>(n);
    vii /= static_cast<double>(n);
    vri /= static_cast<double>(n);
    // Cholesky of the covariance, applied inverted: L = [[a,0],[b,d]].
    const double a = std::sqrt(vrr);
    const double bb = vri / a;
    const double d = std::sqrt(vii - bb * bb);
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double dr = x.re(b, l, c) - mr, di = x.im(b, l, c) - mi;
        const double wr = dr / a;
        const double wi = (di - bb * wr) / d;
        x.re(b, l, c) = wr;
        x.im(b, l, c) = wi;
      }
    }
  }
  return x;
}

}  // namespace

TEST_CASE("whitening already-white data is the identity") {
  ComplexTensor x = make_white_input(4, 16, 3, 77);
  CvBatchNorm bn("bn", 3, 0.99, 1e-12);
  // gamma_rr = gamma_ii = 1, gamma_ri = 0 (identity-equivalent scale).
  std::vector<ParamRef> params;
  bn.collect_params(params);
  params[0].value->fill(1.0);  // gamma_rr
  params[2].value->fill(1.0);  // gamma_ii
  ComplexTensor y = bn.forward(x, Mode::Train);
  CHECK(max_plane_diff(y, x) <= 1e-6);
}

TEST_CASE("eval mode with unit moving stats is a pure shift") {
  Rng rng(13);
  ComplexTensor x = random_complex({2, 8, 2}, rng);
  CvBatchNorm bn("bn", 2, 0.99, 1e-15);
  std::vector<ParamRef> params, moving;
  bn.collect_params(params);
  bn.collect_moving(moving);
  params[0].value->fill(1.0);   // gamma_rr
  params[2].value->fill(1.0);   // gamma_ii
  params[3].value->fill(5.0);   // beta_re
  params[4].value->fill(-2.0);  // beta_im
  moving[2].value->fill(1.0);   // mov_vrr
  moving[3].value->fill(1.0);   // mov_vii

  ComplexTensor y = bn.forward(x, Mode::Eval);
  for (int64_t i = 0; i < x.re.size(); ++i) {
    CHECK(std::fabs(y.re[i] - (x.re[i] + 5.0)) <= 1e-9);
    CHECK(std::fabs(y.im[i] - (x.im[i] - 2.0)) <= 1e-9);
  }
}

TEST_CASE("train-mode output statistics equal gamma * gamma^T") {
  Rng rng(301);
  const int batch = 8, len = 64, ch = 2;
  ComplexTensor x = random_complex({batch, len, ch}, rng, -2.0, 2.0);
  // Correlate the planes so the off-diagonal covariance path is exercised.
  for (int64_t i = 0; i < x.im.size(); ++i) x.im[i] = 0.6 * x.im[i] + 0.7 * x.re[i] + 0.3;

  CvBatchNorm bn("bn", ch, 0.99, 1e-8);
  std::vector<ParamRef> params;
  bn.collect_params(params);
  RealTensor& grr = *params[0].value;
  RealTensor& gri = *params[1].value;
  RealTensor& gii = *params[2].value;
  for (int c = 0; c < ch; ++c) {
    grr(c) = 0.9 + 0.1 * c;
    gri(c) = 0.2 - 0.3 * c;
    gii(c) = 1.1 - 0.2 * c;
  }

  ComplexTensor y = bn.forward(x, Mode::TrainFrozen);
  const int64_t n = static_cast<int64_t>(batch) * len;
  for (int c = 0; c < ch; ++c) {
    double mr = 0.0, mi = 0.0;
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        mr += y.re(b, l, c);
        mi += y.im(b, l, c);
      }
    }
    mr /= static_cast<double>(n);
    mi /= static_cast<double>(n);
    CHECK(std::fabs(mr) <= 1e-4);
    CHECK(std::fabs(mi) <= 1e-4);
    double vrr = 0.0, vii = 0.0, vri = 0.0;
    for (int b = 0; b < batch; ++b) {
      for (int l = 0; l < len; ++l) {
        const double dr = y.re(b, l, c) - mr, di = y.im(b, l, c) - mi;
        vrr += dr * dr;
        vii += di * di;
        vri += dr * di;
      }
    }
    vrr /= static_cast<double>(n);
    vii /= static_cast<double>(n);
    vri /= static_cast<double>(n);
    // Gamma is symmetric, so the expected covariance is Gamma squared.
    const double err = std::fabs(grr(c) * grr(c) + gri(c) * gri(c) - vrr);
    const double eii = std::fabs(gri(c) * gri(c) + gii(c) * gii(c) - vii);
    const double eri = std::fabs(gri(c) * (grr(c) + gii(c)) - vri);
    CHECK(err <= 1e-4);
    CHECK(eii <= 1e-4);
    CHECK(eri <= 1e-4);
  }
}

TEST_CASE("moving statistics update only in train mode") {
  Rng rng(55);
  ComplexTensor x = random_complex({2, 16, 2}, rng);
  CvBatchNorm bn("bn", 2);
  std::vector<ParamRef> moving;
  bn.collect_moving(moving);
  std::vector<double> before;
  for (const ParamRef& m : moving) {
    for (int64_t i = 0; i < m.value->size(); ++i) before.push_back((*m.value)[i]);
  }

  (void)bn.forward(x, Mode::Eval);
  (void)bn.forward(x, Mode::TrainFrozen);
  size_t idx = 0;
  for (const ParamRef& m : moving) {
    for (int64_t i = 0; i < m.value->size(); ++i) CHECK((*m.value)[i] == before[idx++]);
  }

  (void)bn.forward(x, Mode::Train);
  bool changed = false;
  idx = 0;
  for (const ParamRef& m : moving) {
    for (int64_t i = 0; i < m.value->size(); ++i) {
      if ((*m.value)[i] != before[idx++]) changed = true;
    }
  }
  CHECK(changed);
}

TEST_CASE("cv conv layer gradient check") {
  for (uint64_t seed : {101u, 202u, 303u}) {
    Rng rng(seed);
    CvConv1d layer("cvc", 3, 2, 2, rng);
    ComplexTensor x = random_complex({2, 6, 2}, rng);
    ComplexTensor coef = random_complex({2, 6, 2}, rng);

    RealTensor gx_re(x.shape()), gx_im(x.shape());
    std::vector<ParamRef> refs;
    layer.collect_params(refs);
    refs.push_back({"input.re", &x.re, &gx_re});
    refs.push_back({"input.im", &x.im, &gx_im});

    auto loss = [&]() { return testing::weighted_sum(layer.forward(x), coef); };
    auto grads = [&]() {
      layer.zero_grads();
      (void)layer.forward(x);
      ComplexTensor gin = layer.backward(coef);
      gx_re = gin.re;
      gx_im = gin.im;
    };
    GradCheckReport report = grad_check(loss, grads, refs);
    CHECK_MESSAGE(report.pass, "seed ", seed, " worst ", report.worst_name, " err ",
                  report.worst_rel_err);
  }
}

TEST_CASE("cv batch norm gradient check, batch statistics") {
  for (uint64_t seed : {7u, 8u, 9u}) {
    Rng rng(seed);
    CvBatchNorm layer("cvbn", 2);
    ComplexTensor x = random_complex({3, 5, 2}, rng);
    ComplexTensor coef = random_complex({3, 5, 2}, rng);

    RealTensor gx_re(x.shape()), gx_im(x.shape());
    std::vector<ParamRef> refs;
    layer.collect_params(refs);
    refs.push_back({"input.re", &x.re, &gx_re});
    refs.push_back({"input.im", &x.im, &gx_im});

    // Frozen statistics so finite differences see the same normalizer state.
    auto loss = [&]() { return testing::weighted_sum(layer.forward(x, Mode::TrainFrozen), coef); };
    auto grads = [&]() {
      layer.zero_grads();
      (void)layer.forward(x, Mode::TrainFrozen);
      ComplexTensor gin = layer.backward(coef);
      gx_re = gin.re;
      gx_im = gin.im;
    };
    GradCheckReport report = grad_check(loss, grads, refs);
    CHECK_MESSAGE(report.pass, "seed ", seed, " worst ", report.worst_name, " err ",
                  report.worst_rel_err);
  }
}

TEST_CASE("cv batch norm gradient check, eval mode") {
  for (uint64_t seed : {71u, 72u, 73u}) {
    Rng rng(seed);
    CvBatchNorm layer("cvbn", 2);
    std::vector<ParamRef> moving;
    layer.collect_moving(moving);
    for (int c = 0; c < 2; ++c) {
      (*moving[0].value)(c) = rng.uniform(-0.3, 0.3);  // mean re
      (*moving[1].value)(c) = rng.uniform(-0.3, 0.3);  // mean im
      (*moving[2].value)(c) = 0.8 + rng.uniform(0.0, 0.4);
      (*moving[3].value)(c) = 0.8 + rng.uniform(0.0, 0.4);
      (*moving[4].value)(c) = rng.uniform(-0.2, 0.2);
    }
    ComplexTensor x = random_complex({2, 4, 2}, rng);
    ComplexTensor coef = random_complex({2, 4, 2}, rng);

    RealTensor gx_re(x.shape()), gx_im(x.shape());
    std::vector<ParamRef> refs;
    layer.collect_params(refs);
    refs.push_back({"input.re", &x.re, &gx_re});
    refs.push_back({"input.im", &x.im, &gx_im});

    auto loss = [&]() { return testing::weighted_sum(layer.forward(x, Mode::Eval), coef); };
    auto grads = [&]() {
      layer.zero_grads();
      (void)layer.forward(x, Mode::Eval);
      ComplexTensor gin = layer.backward(coef);
      gx_re = gin.re;
      gx_im = gin.im;
    };
    GradCheckReport report = grad_check(loss, grads, refs);
    CHECK_MESSAGE(report.pass, "seed ", seed, " worst ", report.worst_name, " err ",
                  report.worst_rel_err);
  }
}

TEST_CASE("cv relu gradient check away from the kink") {
  for (uint64_t seed : {21u, 22u, 23u}) {
    Rng rng(seed);
    ComplexTensor x = random_complex({2, 6, 3}, rng);
    for (int64_t i = 0; i < x.re.size(); ++i) {
      if (std::fabs(x.re[i]) < 0.05) x.re[i] += x.re[i] >= 0 ? 0.1 : -0.1;
      if (std::fabs(x.im[i]) < 0.05) x.im[i] += x.im[i] >= 0 ? 0.1 : -0.1;
    }
    ComplexTensor coef = random_complex({2, 6, 3}, rng);

    CvRelu layer;
    RealTensor gx_re(x.shape()), gx_im(x.shape());
    std::vector<ParamRef> refs = {{"input.re", &x.re, &gx_re}, {"input.im", &x.im, &gx_im}};
    auto loss = [&]() { return testing::weighted_sum(layer.forward(x), coef); };
    auto grads = [&]() {
      (void)layer.forward(x);
      ComplexTensor gin = layer.backward(coef);
      gx_re = gin.re;
      gx_im = gin.im;
    };
    GradCheckReport report = grad_check(loss, grads, refs);
    CHECK_MESSAGE(report.pass, "seed ", seed, " worst ", report.worst_name, " err ",
                  report.worst_rel_err);
  }
}

TEST_CASE("singular covariance is rejected with the channel name") {
  // Constant input: zero covariance in channel 0 with eps = 0.
  ComplexTensor x = ComplexTensor::zeros({2, 4, 1});
  for (int64_t i = 0; i < x.re.size(); ++i) {
    x.re[i] = 1.0;
    x.im[i] = 2.0;
  }
  CvBatchNorm bn("bn", 1, 0.99, 0.0);
  CHECK_THROWS_WITH_AS(bn.forward(x, Mode::Train), doctest::Contains("channel 0"), Error);
}

TEST_SUITE_END();
