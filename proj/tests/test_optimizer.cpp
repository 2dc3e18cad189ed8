// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "augal/errors.hpp"
#include "augal/optimizer.hpp"

using namespace augal;

namespace {

void set_grad(Tensor& t, double g) {
    backward(scale(sum(t), g / 1.0));  // d(g*sum(w))/dw = g
}

}  // namespace

TEST_CASE("one explicit vanilla step") {
    Tensor w = Tensor::from_data({1}, {1.0}, true);
    SgdOptimizer opt(0.1, 0.0, 0.0);
    opt.attach({w});
    set_grad(w, 1.0);
    opt.step();
    CHECK(w.data()[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(opt.step_count() == 1);
    CHECK_FALSE(w.has_grad());  // grads cleared
}

TEST_CASE("two-step momentum recurrence: v1=1, w1=0.9; v2=1.9, w2=0.71") {
    Tensor w = Tensor::from_data({1}, {1.0}, true);
    SgdOptimizer opt(0.1, 0.9, 0.0);
    opt.attach({w});
    set_grad(w, 1.0);
    opt.step();
    CHECK(w.data()[0] == doctest::Approx(0.9).epsilon(1e-14));
    set_grad(w, 1.0);
    opt.step();
    CHECK(w.data()[0] == doctest::Approx(0.71).epsilon(1e-14));
}

TEST_CASE("coupled weight decay folds into the gradient") {
    // w=2, grad=0, wd=0.5 -> effective grad 1.0 -> w=1.9
    Tensor w = Tensor::from_data({1}, {2.0}, true);
    SgdOptimizer opt(0.1, 0.0, 0.5);
    opt.attach({w});
    set_grad(w, 0.0);
    opt.step();
    CHECK(w.data()[0] == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("missing gradient is a usage error") {
    Tensor w = Tensor::from_data({1}, {1.0}, true);
    SgdOptimizer opt(0.1, 0.9, 0.0);
    opt.attach({w});
    CHECK_THROWS_AS(opt.step(), UsageError);
}

TEST_CASE("momentum=0, wd=0 equals vanilla gradient descent") {
    Tensor a = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    Tensor b = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    SgdOptimizer opt(0.05, 0.0, 0.0);
    opt.attach({a});
    for (int i = 0; i < 5; ++i) {
        backward(sum(mul(a, a)));
        // manual vanilla descent on b with the same analytic gradient 2*b
        for (std::size_t j = 0; j < 3; ++j) b.data()[j] -= 0.05 * 2.0 * b.data()[j];
        opt.step();
    }
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(a.data()[j] == doctest::Approx(b.data()[j]).epsilon(1e-12));
}

TEST_CASE("lr schedule anchors") {
    SgdOptimizer opt(0.1, 0.9, 0.0);
    LrSchedule paper{{160}, 0.1};

    SUBCASE("milestone reached") {
        schedule_apply(paper, opt, 160);
        CHECK(opt.learning_rate() == doctest::Approx(0.01).epsilon(1e-12));
    }
    SUBCASE("below first milestone: unchanged") {
        schedule_apply(paper, opt, 159);
        CHECK(opt.learning_rate() == 0.1);
    }
    SUBCASE("two milestones crossed at once") {
        LrSchedule cifar{{60, 120, 160}, 0.2};
        schedule_apply(cifar, opt, 120);
        CHECK(opt.learning_rate() == doctest::Approx(0.004).epsilon(1e-12));
    }
    SUBCASE("applying per epoch is equivalent to jumping") {
        LrSchedule cifar{{60, 120, 160}, 0.2};
        SgdOptimizer stepwise(0.1, 0.9, 0.0);
        for (std::size_t e = 0; e <= 130; ++e) schedule_apply(cifar, stepwise, e);
        schedule_apply(cifar, opt, 130);
        CHECK(stepwise.learning_rate() == opt.learning_rate());
    }
}

TEST_CASE("schedule and optimizer validation") {
    CHECK_THROWS_AS(SgdOptimizer(0.0, 0.9, 0.0), ConfigError);
    CHECK_THROWS_AS(SgdOptimizer(0.1, 1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(SgdOptimizer(0.1, 0.9, -1.0), ConfigError);
    LrSchedule bad{{10, 10}, 0.1};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    LrSchedule neg{{10}, 0.0};
    CHECK_THROWS_AS(neg.validate(), ConfigError);
}
