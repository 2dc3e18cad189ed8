// SPDX-License-Identifier: Apache-2.0
#include "augal/optimizer.hpp"

#include "augal/errors.hpp"

namespace augal {

void LrSchedule::validate() const {
    if (factor <= 0.0) throw ConfigError("LrSchedule: factor must be positive");
    for (std::size_t i = 1; i < milestones.size(); ++i)
        if (milestones[i] <= milestones[i - 1])
            throw ConfigError("LrSchedule: milestones must be strictly increasing");
}

SgdOptimizer::SgdOptimizer(double learning_rate, double momentum, double weight_decay)
    : lr_(learning_rate),
      initial_lr_(learning_rate),
      momentum_(momentum),
      weight_decay_(weight_decay) {
    if (learning_rate <= 0.0)
        throw ConfigError("SgdOptimizer: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw ConfigError("SgdOptimizer: momentum must be in [0,1)");
    if (weight_decay < 0.0)
        throw ConfigError("SgdOptimizer: weight decay must be nonnegative");
}

void SgdOptimizer::attach(std::vector<Tensor> parameters) {
    params_ = std::move(parameters);
    velocity_.clear();
    velocity_.reserve(params_.size());
    for (const Tensor& p : params_) velocity_.emplace_back(p.size(), 0.0);
}

void SgdOptimizer::step() {
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi];
        if (!p.has_grad())
            throw UsageError("sgd_step: parameter " + std::to_string(pi) +
                             " has no gradient");
        auto& w = p.data();
        const auto& g = p.grad();
        auto& v = velocity_[pi];
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = momentum_ * v[i] + (g[i] + weight_decay_ * w[i]);
            w[i] -= lr_ * v[i];
        }
        p.clear_grad();
    }
    ++step_count_;
}

void sgd_step(SgdOptimizer& optimizer) { optimizer.step(); }

void schedule_apply(const LrSchedule& schedule, SgdOptimizer& optimizer,
                    std::size_t epoch) {
    double lr = optimizer.initial_learning_rate();
    for (std::size_t m : schedule.milestones)
        if (m <= epoch) lr *= schedule.factor;
    optimizer.set_learning_rate(lr);
}

}  // namespace augal
