// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "augal/errors.hpp"
#include "augal/rng.hpp"
#include "augal/tensor.hpp"

using namespace augal;

namespace {

Tensor randt(std::vector<std::size_t> shape, bool requires_grad, int key,
             double offset = 0.0) {
    RngStream s(1234, StreamPurpose::SynthData, 0, key);
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.data()) v = s.next_normal() + offset;
    return t;
}

// Central finite differences of loss = sum(f(inputs)^2) against the tape.
double fd_max_rel_error(std::vector<Tensor>& inputs,
                        const std::function<Tensor(const std::vector<Tensor>&)>& f,
                        double eps = 1e-5) {
    auto value = [&]() {
        NoGradGuard ng;
        Tensor out = f(inputs);
        double acc = 0.0;
        for (double v : out.data()) acc += v * v;
        return acc;
    };
    Tensor out = f(inputs);
    backward(sum(mul(out, out)));
    double max_rel = 0.0;
    for (auto& in : inputs) {
        if (!in.requires_grad()) continue;
        for (std::size_t i = 0; i < in.size(); ++i) {
            const double keep = in.data()[i];
            in.data()[i] = keep + eps;
            const double up = value();
            in.data()[i] = keep - eps;
            const double dn = value();
            in.data()[i] = keep;
            const double fd = (up - dn) / (2 * eps);
            const double an = in.has_grad() ? in.grad()[i] : 0.0;
            const double rel =
                std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            max_rel = std::max(max_rel, rel);
        }
        in.clear_grad();
    }
    return max_rel;
}

}  // namespace

TEST_CASE("relu anchor") {
    Tensor y = relu(Tensor::from_data({3}, {-1.0, 0.0, 2.0}));
    CHECK(y.data() == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("softmax of a constant vector is uniform") {
    Tensor y = softmax(Tensor::zeros({10}));
    for (double v : y.data()) CHECK(v == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
    Tensor x = randt({6, 11}, false, 1);
    for (double& v : x.data()) v *= 7.0;  // widen the logits
    Tensor p = softmax(x);
    for (std::size_t r = 0; r < 6; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 11; ++c) {
            const double v = p.data()[r * 11 + c];
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("conv2d anchor: 3x3 ones kernel over 5x5 ones") {
    Tensor x = Tensor::full({1, 1, 5, 5}, 1.0);
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor y = conv2d(x, w, Tensor(), 1, 0);
    CHECK(y.shape() == std::vector<std::size_t>{1, 1, 3, 3});
    for (double v : y.data()) CHECK(v == 9.0);
}

TEST_CASE("shape mismatches name both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("(2,3)"), ConfigError);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(4,5)"), ConfigError);
    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 5, 5}), Tensor::zeros({1, 3, 3, 3}),
                           Tensor(), 1, 0),
                    ConfigError);
    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}),
                           Tensor(), 1, 0),
                    ConfigError);  // kernel larger than padded input
}

TEST_CASE("backward of sum is all-ones") {
    Tensor w = Tensor::from_data({3}, {5.0, -1.0, 2.0}, true);
    backward(sum(w));
    CHECK(w.grad() == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("backward of sum of squares") {
    Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
    backward(sum(mul(w, w)));
    CHECK(w.grad() == std::vector<double>{2.0, 4.0});
}

TEST_CASE("backward rejects non-scalar and off-tape losses") {
    Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(backward(mul(w, w)), UsageError);
    CHECK_THROWS_AS(backward(Tensor::scalar(1.0)), UsageError);
    Tensor loss = sum(w);
    backward(loss);
    // tape consumed: a second pass is a usage error
    CHECK_THROWS_AS(backward(loss), UsageError);
}

TEST_CASE("NaN gradient reports the offending op") {
    Tensor x = Tensor::from_data({2}, {0.0, 1.0}, true);
    Tensor loss = sum(log(x));  // d/dx log(0) = inf
    CHECK_THROWS_WITH_AS(backward(loss), doctest::Contains("log"), NumericError);
}

TEST_CASE("tape replay determinism: identical graphs give identical bits") {
    auto build = [&]() {
        Tensor x = randt({4, 1, 6, 6}, false, 2);
        Tensor w = randt({2, 1, 3, 3}, true, 3);
        Tensor b = randt({2}, true, 4);
        Tensor h = max_pool2d(relu(conv2d(x, w, b, 1, 1)), 2, 2);
        Tensor l = sum(mul(h, h));
        backward(l);
        return std::tuple{l.item(), w.grad(), b.grad()};
    };
    auto [l1, wg1, bg1] = build();
    auto [l2, wg2, bg2] = build();
    CHECK(l1 == l2);
    CHECK(wg1 == wg2);
    CHECK(bg1 == bg2);
}

TEST_CASE("gradient check: every differentiable op vs central differences") {
    struct Case {
        const char* name;
        std::vector<Tensor> inputs;
        std::function<Tensor(const std::vector<Tensor>&)> f;
    };
    std::vector<Case> cases;
    cases.push_back({"matmul", {randt({3, 4}, true, 10), randt({4, 5}, true, 11)},
                     [](const auto& in) { return matmul(in[0], in[1]); }});
    cases.push_back({"conv2d s1 p0",
                     {randt({2, 2, 5, 5}, true, 12), randt({3, 2, 3, 3}, true, 13),
                      randt({3}, true, 14)},
                     [](const auto& in) { return conv2d(in[0], in[1], in[2], 1, 0); }});
    cases.push_back({"conv2d s1 p1",
                     {randt({2, 2, 5, 5}, true, 15), randt({3, 2, 3, 3}, true, 16),
                      randt({3}, true, 17)},
                     [](const auto& in) { return conv2d(in[0], in[1], in[2], 1, 1); }});
    cases.push_back({"conv2d s2 p1",
                     {randt({2, 2, 6, 6}, true, 18), randt({3, 2, 3, 3}, true, 19),
                      randt({3}, true, 20)},
                     [](const auto& in) { return conv2d(in[0], in[1], in[2], 2, 1); }});
    cases.push_back({"max_pool2d", {randt({2, 3, 6, 6}, true, 21)},
                     [](const auto& in) { return max_pool2d(in[0], 2, 2); }});
    cases.push_back({"relu", {randt({4, 7}, true, 22)},
                     [](const auto& in) { return relu(in[0]); }});
    cases.push_back({"softmax", {randt({4, 7}, true, 23)},
                     [](const auto& in) { return softmax(in[0]); }});
    cases.push_back({"log_softmax", {randt({4, 7}, true, 24)},
                     [](const auto& in) { return log_softmax(in[0]); }});
    cases.push_back({"log", {randt({4, 7}, true, 25, /*offset=*/5.0)},
                     [](const auto& in) { return log(in[0]); }});
    cases.push_back({"add", {randt({4, 7}, true, 26), randt({4, 7}, true, 27)},
                     [](const auto& in) { return add(in[0], in[1]); }});
    cases.push_back({"sub", {randt({4, 7}, true, 28), randt({4, 7}, true, 29)},
                     [](const auto& in) { return sub(in[0], in[1]); }});
    cases.push_back({"mul", {randt({4, 7}, true, 30), randt({4, 7}, true, 31)},
                     [](const auto& in) { return mul(in[0], in[1]); }});
    cases.push_back({"scale", {randt({4, 7}, true, 32)},
                     [](const auto& in) { return scale(in[0], -1.7); }});
    cases.push_back({"reshape", {randt({4, 6}, true, 33)},
                     [](const auto& in) { return reshape(in[0], {2, 12}); }});
    cases.push_back({"add_row_bias", {randt({4, 7}, true, 34), randt({7}, true, 35)},
                     [](const auto& in) { return add_row_bias(in[0], in[1]); }});
    for (auto& c : cases) {
        INFO(c.name);
        CHECK(fd_max_rel_error(c.inputs, c.f) < 1e-4);
    }
}

TEST_CASE("reshape rejects size changes") {
    CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {7}), ConfigError);
}

TEST_CASE("item rejects non-scalars") {
    CHECK_THROWS_AS(Tensor::zeros({2}).item(), UsageError);
}
