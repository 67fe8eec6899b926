#include "ulcnn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace ulcnn {

int64_t shape_product(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

RealTensor::RealTensor(std::vector<int> shape) : shape_(std::move(shape)) {
  for (int d : shape_) {
    if (d <= 0) fail_config("tensor dimension must be positive, got " + shape_str());
  }
  data_.assign(static_cast<size_t>(shape_product(shape_)), 0.0);
}

RealTensor::RealTensor(std::vector<int> shape, std::vector<double> values)
    : RealTensor(std::move(shape)) {
  if (static_cast<int64_t>(values.size()) != size()) {
    fail_config("tensor value count " + std::to_string(values.size()) +
                " does not match shape " + shape_str());
  }
  data_ = std::move(values);
}

RealTensor RealTensor::full(std::vector<int> shape, double value) {
  RealTensor t(std::move(shape));
  t.fill(value);
  return t;
}

void RealTensor::fill(double v) {
  for (double& x : data_) x = v;
}

bool RealTensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void RealTensor::round_to_f32() {
  for (double& x : data_) x = static_cast<double>(static_cast<float>(x));
}

std::string RealTensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

int conv1d_output_length(int length, int kernel_size, int stride, Padding padding) {
  if (stride != 1 && stride != 2) fail_config("conv1d stride must be 1 or 2");
  if (padding == Padding::Same) return (length + stride - 1) / stride;
  if (length < kernel_size) fail_config("conv1d valid padding needs length >= kernel size");
  return (length - kernel_size) / stride + 1;
}

int conv1d_left_pad(int length, int kernel_size, int stride, Padding padding) {
  if (padding == Padding::Valid) return 0;
  const int out_len = conv1d_output_length(length, kernel_size, stride, padding);
  int total = (out_len - 1) * stride + kernel_size - length;
  if (total < 0) total = 0;
  const int left = (kernel_size - 1) / 2;
  return left < total ? left : total;
}

namespace {

void check_conv_args(const RealTensor& input, const RealTensor& kernel,
                     const RealTensor* bias) {
  if (input.rank() != 3) fail_config("conv1d input must be [B, L, C], got " + input.shape_str());
  if (kernel.rank() != 3) {
    fail_config("conv1d kernel must be [S, C_in, C_out], got " + kernel.shape_str());
  }
  if (input.dim(2) != kernel.dim(1)) {
    fail_config("conv1d channel mismatch: input " + input.shape_str() + " vs kernel " +
                kernel.shape_str());
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != kernel.dim(2))) {
    fail_config("conv1d bias must be [C_out], got " + bias->shape_str());
  }
}

}  // namespace

RealTensor conv1d(const RealTensor& input, const RealTensor& kernel,
                  const RealTensor* bias, int stride, Padding padding) {
  check_conv_args(input, kernel, bias);
  const int batch = input.dim(0), len = input.dim(1), c_in = input.dim(2);
  const int s_ke = kernel.dim(0), c_out = kernel.dim(2);
  const int out_len = conv1d_output_length(len, s_ke, stride, padding);
  const int left = conv1d_left_pad(len, s_ke, stride, padding);

  RealTensor out({batch, out_len, c_out});
  const double* kd = kernel.data();
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      double* orow = &out(b, j, 0);
      if (bias) {
        const double* bd = bias->data();
        for (int co = 0; co < c_out; ++co) orow[co] = bd[co];
      }
      const int base = j * stride - left;
      for (int s = 0; s < s_ke; ++s) {
        const int l = base + s;
        if (l < 0 || l >= len) continue;
        const double* irow = &input(b, l, 0);
        const double* krow = kd + static_cast<int64_t>(s) * c_in * c_out;
        for (int ci = 0; ci < c_in; ++ci) {
          const double xv = irow[ci];
          if (xv == 0.0) continue;
          const double* kc = krow + static_cast<int64_t>(ci) * c_out;
          for (int co = 0; co < c_out; ++co) orow[co] += xv * kc[co];
        }
      }
    }
  }
  return out;
}

RealTensor conv1d_backward_input(const RealTensor& grad_out, const RealTensor& kernel,
                                 int input_length, int stride, Padding padding) {
  const int batch = grad_out.dim(0), out_len = grad_out.dim(1), c_out = grad_out.dim(2);
  const int s_ke = kernel.dim(0), c_in = kernel.dim(1);
  if (kernel.dim(2) != c_out) {
    fail_config("conv1d backward: kernel " + kernel.shape_str() + " vs grad " +
                grad_out.shape_str());
  }
  const int left = conv1d_left_pad(input_length, s_ke, stride, padding);

  RealTensor grad_in({batch, input_length, c_in});
  const double* kd = kernel.data();
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      const double* grow = &grad_out(b, j, 0);
      const int base = j * stride - left;
      for (int s = 0; s < s_ke; ++s) {
        const int l = base + s;
        if (l < 0 || l >= input_length) continue;
        double* irow = &grad_in(b, l, 0);
        const double* krow = kd + static_cast<int64_t>(s) * c_in * c_out;
        for (int ci = 0; ci < c_in; ++ci) {
          const double* kc = krow + static_cast<int64_t>(ci) * c_out;
          double acc = 0.0;
          for (int co = 0; co < c_out; ++co) acc += grow[co] * kc[co];
          irow[ci] += acc;
        }
      }
    }
  }
  return grad_in;
}

RealTensor conv1d_backward_kernel(const RealTensor& input, const RealTensor& grad_out,
                                  int kernel_size, int stride, Padding padding) {
  const int batch = input.dim(0), len = input.dim(1), c_in = input.dim(2);
  const int out_len = grad_out.dim(1), c_out = grad_out.dim(2);
  if (grad_out.dim(0) != batch) {
    fail_config("conv1d backward: input " + input.shape_str() + " vs grad " +
                grad_out.shape_str());
  }
  const int left = conv1d_left_pad(len, kernel_size, stride, padding);

  RealTensor grad_k({kernel_size, c_in, c_out});
  double* kd = grad_k.data();
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      const double* grow = &grad_out(b, j, 0);
      const int base = j * stride - left;
      for (int s = 0; s < kernel_size; ++s) {
        const int l = base + s;
        if (l < 0 || l >= len) continue;
        const double* irow = &input(b, l, 0);
        double* krow = kd + static_cast<int64_t>(s) * c_in * c_out;
        for (int ci = 0; ci < c_in; ++ci) {
          const double xv = irow[ci];
          if (xv == 0.0) continue;
          double* kc = krow + static_cast<int64_t>(ci) * c_out;
          for (int co = 0; co < c_out; ++co) kc[co] += xv * grow[co];
        }
      }
    }
  }
  return grad_k;
}

RealTensor conv1d_backward_bias(const RealTensor& grad_out) {
  const int batch = grad_out.dim(0), out_len = grad_out.dim(1), c_out = grad_out.dim(2);
  RealTensor grad_b({c_out});
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      const double* grow = &grad_out(b, j, 0);
      for (int co = 0; co < c_out; ++co) grad_b(co) += grow[co];
    }
  }
  return grad_b;
}

int argmax_row(const double* row, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

}  // namespace ulcnn
