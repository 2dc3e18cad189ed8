// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "augal/tensor.hpp"

namespace augal {

/// Piecewise-constant decay: the learning rate is multiplied by `factor`
/// exactly once per crossed milestone (a milestone at epoch e counts as
/// crossed from epoch e on).
struct LrSchedule {
    std::vector<std::size_t> milestones;  // strictly increasing
    double factor = 1.0;                  // > 0

    void validate() const;
};

/// SGD with momentum and coupled weight decay:
///   v <- momentum * v + (grad + weight_decay * w);  w <- w - lr * v
class SgdOptimizer {
  public:
    SgdOptimizer(double learning_rate, double momentum, double weight_decay);

    void attach(std::vector<Tensor> parameters);

    double learning_rate() const { return lr_; }
    double initial_learning_rate() const { return initial_lr_; }
    double momentum() const { return momentum_; }
    double weight_decay() const { return weight_decay_; }
    std::uint64_t step_count() const { return step_count_; }
    void set_learning_rate(double lr) { lr_ = lr; }

    /// One update over all attached parameters; requires every grad to be
    /// populated. Grads are cleared afterwards.
    void step();

  private:
    double lr_;
    double initial_lr_;
    double momentum_;
    double weight_decay_;
    std::uint64_t step_count_ = 0;
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> velocity_;
};

void sgd_step(SgdOptimizer& optimizer);
void schedule_apply(const LrSchedule& schedule, SgdOptimizer& optimizer,
                    std::size_t epoch);

}  // namespace augal
