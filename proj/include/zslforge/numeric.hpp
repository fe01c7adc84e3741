#ifndef ZSLFORGE_NUMERIC_HPP
#define ZSLFORGE_NUMERIC_HPP

#include "zslforge/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace zslforge {

// A named trainable tensor. Vectors are stored as n x 1.
struct ParamTensor {
  std::string name;
  Mat value;
  Mat grad;

  ParamTensor() = default;
  ParamTensor(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

// Xavier-uniform weight in +-sqrt(6/(rows+cols)).
ParamTensor init_linear(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng);
ParamTensor init_linear(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                        std::uint64_t seed);
// Bias vectors start at zero.
ParamTensor init_bias(const std::string& name, Eigen::Index len);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool amsgrad = false;
};

// Adam / AMSGrad over a fixed parameter list. The AMSGrad variant tracks the
// elementwise max of the bias-corrected second moment.
class AdamOptimizer {
 public:
  AdamOptimizer(AdamHyper hyper, const std::vector<ParamTensor*>& params);

  // Applies one update from the gradients currently stored in the tensors.
  // Throws DataError on a non-finite gradient, naming the parameter.
  void step(const std::vector<ParamTensor*>& params);

  std::int64_t step_count() const { return t_; }

 private:
  struct Slot {
    Mat m, v, vhat_max;
  };
  AdamHyper hyper_;
  std::vector<Slot> slots_;
  std::int64_t t_ = 0;
};

// weight(e) = factor * clamp((e - start) / (end - start), 0, 1).
struct WarmupSchedule {
  double factor = 0.0;
  int start_epoch = 0;
  int end_epoch = 1;

  WarmupSchedule() = default;
  WarmupSchedule(double f, int start, int end);

  double weight(int epoch) const;
};

// Central-difference gradient of `loss` with respect to every entry of every
// tensor in `params`. `loss` must be deterministic (freeze any noise first).
std::vector<Mat> finite_diff_grad(const std::function<double()>& loss,
                                  const std::vector<ParamTensor*>& params, double eps = 1e-5);

}  // namespace zslforge

#endif  // ZSLFORGE_NUMERIC_HPP
