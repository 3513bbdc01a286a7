#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace esprit::ag {

struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reverse-mode autodiff over row-major matrices. Graphs are built eagerly;
// backward() runs the recorded closures in reverse topological order.
struct Node;
using Tensor = std::shared_ptr<Node>;

struct Node {
    int rows = 0, cols = 0;
    std::vector<double> v;  // rows*cols values
    std::vector<double> g;  // same layout, lazily zeroed
    bool requires_grad = false;
    std::vector<Tensor> parents;
    std::function<void()> back;

    int size() const { return rows * cols; }
    double& at(int r, int c) { return v[r * cols + c]; }
    double at(int r, int c) const { return v[r * cols + c]; }
};

Tensor make(int rows, int cols, bool requires_grad = false);
Tensor from_values(int rows, int cols, std::vector<double> values,
                   bool requires_grad = false);
Tensor uniform_init(int rows, int cols, double scale, std::mt19937_64& rng);

// Accumulates gradients into every reachable node with requires_grad set.
// `loss` must be 1x1.
void backward(const Tensor& loss);
void zero_grad(const std::vector<Tensor>& params);

Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);          // elementwise
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& a, const Tensor& bias);  // bias is 1 x cols
Tensor mul_rowvec(const Tensor& a, const Tensor& row);   // row is 1 x cols
Tensor rsqrt_t(const Tensor& a, double eps);             // 1/sqrt(x + eps)
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);          // inputs must be positive
Tensor transpose(const Tensor& a);
Tensor sum_all(const Tensor& a);        // 1x1
Tensor mean_all(const Tensor& a);       // 1x1
Tensor mean_rows(const Tensor& a);      // 1 x cols, average over rows
Tensor softmax_rows(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng,
               bool training);
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);

// -sum(log p[r, target[r]]) / rows over row-wise distributions
Tensor nll_rows(const Tensor& log_probs_rows_softmaxed,
                const std::vector<int>& targets);
Tensor log_softmax_rows(const Tensor& a);

// Central-difference check of d(loss)/d(params) for an arbitrary closure.
// Returns the largest relative error over every parameter entry.
double gradient_check(const std::vector<Tensor>& params,
                      const std::function<Tensor()>& loss_fn,
                      double eps = 1e-5);

}  // namespace esprit::ag
