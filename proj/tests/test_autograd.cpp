#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "esprit/autograd.hpp"

using namespace esprit;
using ag::Tensor;

namespace {

Tensor randn(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
    return ag::uniform_init(r, c, scale, rng);
}

}  // namespace

TEST_CASE("elementwise forward values") {
    auto a = ag::from_values(2, 2, {1, -2, 3, 0.5});
    auto b = ag::from_values(2, 2, {2, 2, -1, 4});
    CHECK(ag::add(a, b)->v == std::vector<double>{3, 0, 2, 4.5});
    CHECK(ag::sub(a, b)->v == std::vector<double>{-1, -4, 4, -3.5});
    CHECK(ag::mul(a, b)->v == std::vector<double>{2, -4, -3, 2});
    CHECK(ag::relu(a)->v == std::vector<double>{1, 0, 3, 0.5});
    CHECK(ag::scale(a, -2)->v == std::vector<double>{-2, 4, -6, -1});
}

TEST_CASE("matmul forward against a hand computation") {
    auto a = ag::from_values(2, 3, {1, 2, 3, 4, 5, 6});
    auto b = ag::from_values(3, 2, {7, 8, 9, 10, 11, 12});
    auto c = ag::matmul(a, b);
    CHECK(c->v == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("gradients flow through a diamond graph") {
    auto x = ag::from_values(1, 3, {1, 2, -3}, true);
    auto y = ag::sum_all(ag::add(ag::mul(x, x), ag::mul(x, x)));
    ag::backward(y);
    // d/dx of 2x^2 is 4x
    CHECK(x->g[0] == doctest::Approx(4));
    CHECK(x->g[1] == doctest::Approx(8));
    CHECK(x->g[2] == doctest::Approx(-12));
}

TEST_CASE("softmax rows sum to one and log_softmax agrees") {
    std::mt19937_64 rng(7);
    auto a = randn(5, 9, rng, 3.0);
    auto sm = ag::softmax_rows(a);
    auto lsm = ag::log_softmax_rows(a);
    for (int r = 0; r < 5; ++r) {
        double sum = 0;
        for (int c = 0; c < 9; ++c) {
            sum += sm->at(r, c);
            CHECK(std::log(sm->at(r, c)) == doctest::Approx(lsm->at(r, c)));
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("layer_norm_rows normalizes each row with unit gain") {
    std::mt19937_64 rng(3);
    auto a = randn(4, 16, rng, 5.0);
    auto gain = ag::from_values(1, 16, std::vector<double>(16, 1.0), true);
    auto bias = ag::make(1, 16, true);
    auto out = ag::layer_norm_rows(a, gain, bias);
    for (int r = 0; r < 4; ++r) {
        double mean = 0, var = 0;
        for (int c = 0; c < 16; ++c) mean += out->at(r, c);
        mean /= 16;
        for (int c = 0; c < 16; ++c) {
            const double d = out->at(r, c) - mean;
            var += d * d;
        }
        var /= 16;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("finite differences validate a deep composite expression") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        std::mt19937_64 rng(seed);
        auto W1 = randn(6, 8, rng, 0.5);
        auto b1 = randn(1, 8, rng, 0.5);
        auto W2 = randn(8, 4, rng, 0.5);
        auto gain = ag::from_values(1, 4, std::vector<double>(4, 1.0), true);
        auto bias = randn(1, 4, rng, 0.2);
        auto emb = randn(5, 6, rng, 0.5);
        const std::vector<int> idx{0, 3, 1, 4};
        const std::vector<int> targets{1, 0, 3, 2};

        std::vector<Tensor> params{W1, b1, W2, gain, bias, emb};
        auto loss_fn = [&]() {
            auto x = ag::gather_rows(emb, idx);
            auto h = ag::relu(ag::add_rowvec(ag::matmul(x, W1), b1));
            auto z = ag::layer_norm_rows(ag::matmul(h, W2), gain, bias);
            auto mix = ag::concat_cols(ag::sigmoid(z), ag::tanh_t(z));
            auto back = ag::slice_cols(mix, 0, 4);
            auto lp = ag::log_softmax_rows(ag::add(back, z));
            return ag::nll_rows(lp, targets);
        };
        CHECK(ag::gradient_check(params, loss_fn) < 1e-4);
    }
}

TEST_CASE("finite differences validate attention-style ops") {
    std::mt19937_64 rng(11);
    auto q = randn(3, 6, rng, 0.7);
    auto k = randn(4, 6, rng, 0.7);
    auto v = randn(4, 6, rng, 0.7);
    std::vector<Tensor> params{q, k, v};
    auto loss_fn = [&]() {
        auto scores = ag::scale(ag::matmul(q, ag::transpose(k)), 1 / std::sqrt(6.0));
        auto att = ag::softmax_rows(scores);
        auto out = ag::matmul(att, v);
        return ag::mean_all(ag::mul(out, out));
    };
    CHECK(ag::gradient_check(params, loss_fn) < 1e-4);
}

TEST_CASE("nll_rows matches a manual computation") {
    auto a = ag::from_values(2, 3, {1, 2, 3, 0, 0, 0}, true);
    auto lp = ag::log_softmax_rows(a);
    auto loss = ag::nll_rows(lp, {2, 0});
    const double lse1 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
    const double expected = -((3 - lse1) + (0 - std::log(3.0))) / 2;
    CHECK(loss->v[0] == doctest::Approx(expected));
}

TEST_CASE("dropout is identity in eval mode and rescales in train mode") {
    std::mt19937_64 rng(5);
    auto a = ag::from_values(1, 10000, std::vector<double>(10000, 1.0));
    auto eval = ag::dropout(a, 0.15, rng, false);
    CHECK(eval.get() == a.get());
    auto train = ag::dropout(a, 0.15, rng, true);
    double mean = 0;
    int zeros = 0;
    for (double x : train->v) {
        mean += x;
        if (x == 0.0) ++zeros;
    }
    mean /= train->size();
    CHECK(mean == doctest::Approx(1.0).epsilon(0.03));
    CHECK(zeros > 1000);
    CHECK(zeros < 2000);
}

TEST_CASE("slice, concat and mean_rows round-trip shapes and grads") {
    std::mt19937_64 rng(13);
    auto a = randn(4, 6, rng);
    auto b = randn(2, 6, rng);
    std::vector<Tensor> params{a, b};
    auto loss_fn = [&]() {
        auto stacked = ag::concat_rows(a, b);
        auto left = ag::slice_rows(stacked, 1, 5);
        auto pooled = ag::mean_rows(left);
        return ag::sum_all(ag::mul(pooled, pooled));
    };
    CHECK(ag::gradient_check(params, loss_fn) < 1e-4);
}

TEST_CASE("graphs release their memory once dropped") {
    std::mt19937_64 rng(5);
    auto W = ag::uniform_init(8, 8, 0.1, rng);
    {
        auto x = ag::uniform_init(4, 8, 1.0, rng);
        auto loss = ag::mean_all(ag::relu(ag::matmul(x, W)));
        ag::backward(loss);
    }
    // a closure holding its own node alive would keep this above 1
    CHECK(W.use_count() == 1);
    {
        auto x = ag::uniform_init(4, 8, 1.0, rng);
        auto h = ag::relu(ag::matmul(x, W));  // inference graph, no backward
        (void)h;
    }
    CHECK(W.use_count() == 1);
}

TEST_CASE("backward rejects non-scalar roots") {
    auto a = ag::make(2, 2, true);
    CHECK_THROWS_AS(ag::backward(a), std::invalid_argument);
    auto b = ag::make(3, 4);
    CHECK_THROWS_AS(ag::matmul(a, b), std::invalid_argument);
    CHECK_THROWS_AS(ag::add(a, b), std::invalid_argument);
}
