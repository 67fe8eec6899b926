#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ulcnn/tensor.hpp"

namespace ulcnn {

struct GradCheckItem {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
  std::string note;
};

struct GradCheckReport {
  std::vector<GradCheckItem> items;
  bool pass = true;
  double worst_rel_err = 0.0;
  std::string worst_name;
};

/// Compares analytic gradients against central finite differences.
///
/// `loss` must recompute the scalar loss from the current tensor values and
/// leave no state behind that changes a later call. `compute_grads` must run
/// the same forward plus a backward pass and populate every grad slot listed
/// in `tensors`. Relative error per element is |a - f| / max(|a|, |f|, 0.01);
/// a non-finite analytic gradient fails the owning tensor outright.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& compute_grads,
                           const std::vector<ParamRef>& tensors,
                           double step = 1e-3, double tolerance = 1e-4);

}  // namespace ulcnn
