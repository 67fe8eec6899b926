#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ulcnn/error.hpp"

namespace ulcnn {

enum class Mode {
  Train,        // batch statistics; moving statistics updated
  Eval,         // moving statistics; no state mutated
  TrainFrozen,  // batch statistics; moving statistics untouched
};

enum class Padding { Same, Valid };

/// Dense row-major tensor of doubles. Activations use the batch-major,
/// channel-last layout [B, L, C]; conv kernels are [S, C_in, C_out].
class RealTensor {
 public:
  RealTensor() = default;
  explicit RealTensor(std::vector<int> shape);
  RealTensor(std::vector<int> shape, std::vector<double> values);

  static RealTensor zeros(std::vector<int> shape) { return RealTensor(std::move(shape)); }
  static RealTensor full(std::vector<int> shape, double value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool same_shape(const RealTensor& other) const { return shape_ == other.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const double& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double& operator()(int i) { return data_[static_cast<size_t>(i)]; }
  const double& operator()(int i) const { return data_[static_cast<size_t>(i)]; }

  double& operator()(int i, int j) {
    return data_[static_cast<size_t>(static_cast<int64_t>(i) * shape_[1] + j)];
  }
  const double& operator()(int i, int j) const {
    return data_[static_cast<size_t>(static_cast<int64_t>(i) * shape_[1] + j)];
  }

  double& operator()(int i, int j, int k) {
    return data_[static_cast<size_t>((static_cast<int64_t>(i) * shape_[1] + j) * shape_[2] + k)];
  }
  const double& operator()(int i, int j, int k) const {
    return data_[static_cast<size_t>((static_cast<int64_t>(i) * shape_[1] + j) * shape_[2] + k)];
  }

  void fill(double v);
  void zero() { fill(0.0); }
  bool all_finite() const;

  /// Rounds every element to the nearest float32 value. Parameters and moving
  /// statistics are kept on the float32 grid so the on-disk weight format
  /// round-trips bit-exactly.
  void round_to_f32();

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

/// Named view of a tensor and its gradient slot.
struct ParamRef {
  std::string name;
  RealTensor* value = nullptr;
  RealTensor* grad = nullptr;
};

int64_t shape_product(const std::vector<int>& shape);

/// Output length and left pad for the padding conventions used throughout:
/// Same keeps ceil(L / stride) positions (left pad floor((S-1)/2), remainder
/// right); Valid keeps floor((L - S) / stride) + 1.
int conv1d_output_length(int length, int kernel_size, int stride, Padding padding);
int conv1d_left_pad(int length, int kernel_size, int stride, Padding padding);

/// 1-D cross-correlation with zero padding.
/// input [B, L, C_in], kernel [S, C_in, C_out], optional bias [C_out].
RealTensor conv1d(const RealTensor& input, const RealTensor& kernel,
                  const RealTensor* bias, int stride, Padding padding);

RealTensor conv1d_backward_input(const RealTensor& grad_out, const RealTensor& kernel,
                                 int input_length, int stride, Padding padding);
RealTensor conv1d_backward_kernel(const RealTensor& input, const RealTensor& grad_out,
                                  int kernel_size, int stride, Padding padding);
RealTensor conv1d_backward_bias(const RealTensor& grad_out);

/// Index of the row maximum; ties resolve to the lowest index.
int argmax_row(const double* row, int n);

}  // namespace ulcnn
