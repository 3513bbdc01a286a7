#include "esprit/autograd.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace esprit::ag {

namespace {

void ensure_grad(const Tensor& t) {
    if (t->g.empty()) t->g.assign(t->size(), 0.0);
}

Tensor result(int rows, int cols, std::vector<Tensor> parents) {
    Tensor t = make(rows, cols);
    for (const auto& p : parents)
        if (p->requires_grad || !p->parents.empty()) t->requires_grad = true;
    t->parents = std::move(parents);
    return t;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a->rows != b->rows || a->cols != b->cols)
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor make(int rows, int cols, bool requires_grad) {
    Tensor t = std::make_shared<Node>();
    t->rows = rows;
    t->cols = cols;
    t->v.assign(static_cast<size_t>(rows) * cols, 0.0);
    t->requires_grad = requires_grad;
    return t;
}

Tensor from_values(int rows, int cols, std::vector<double> values,
                   bool requires_grad) {
    if (static_cast<int>(values.size()) != rows * cols)
        throw std::invalid_argument("from_values: size mismatch");
    Tensor t = make(rows, cols, requires_grad);
    t->v = std::move(values);
    return t;
}

Tensor uniform_init(int rows, int cols, double scale, std::mt19937_64& rng) {
    Tensor t = make(rows, cols, true);
    std::uniform_real_distribution<double> d(-scale, scale);
    for (auto& x : t->v) x = d(rng);
    return t;
}

void backward(const Tensor& loss) {
    if (loss->size() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    // reverse topological order via iterative DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{loss.get(), 0}};
    std::vector<Tensor> keepalive{loss};
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx == 0 && seen.count(n)) {
            stack.pop_back();
            continue;
        }
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (!seen.count(p)) stack.push_back({p, 0});
        } else {
            seen.insert(n);
            order.push_back(n);
            stack.pop_back();
        }
    }
    ensure_grad(loss);
    loss->g[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->back) (*it)->back();
}

void zero_grad(const std::vector<Tensor>& params) {
    for (const auto& p : params) p->g.assign(p->size(), 0.0);
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor t = result(a->rows, a->cols, {a, b});
    for (int i = 0; i < t->size(); ++i) t->v[i] = a->v[i] + b->v[i];
    t->back = [self = t.get(), a, b] {
        ensure_grad(a);
        ensure_grad(b);
        for (int i = 0; i < self->size(); ++i) {
            a->g[i] += self->g[i];
            b->g[i] += self->g[i];
        }
    };
    return t;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor t = result(a->rows, a->cols, {a, b});
    for (int i = 0; i < t->size(); ++i) t->v[i] = a->v[i] - b->v[i];
    t->back = [self = t.get(), a, b] {
        ensure_grad(a);
        ensure_grad(b);
        for (int i = 0; i < self->size(); ++i) {
            a->g[i] += self->g[i];
            b->g[i] -= self->g[i];
        }
    };
    return t;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor t = result(a->rows, a->cols, {a, b});
    for (int i = 0; i < t->size(); ++i) t->v[i] = a->v[i] * b->v[i];
    t->back = [self = t.get(), a, b] {
        ensure_grad(a);
        ensure_grad(b);
        for (int i = 0; i < self->size(); ++i) {
            a->g[i] += self->g[i] * b->v[i];
            b->g[i] += self->g[i] * a->v[i];
        }
    };
    return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a->cols != b->rows) throw std::invalid_argument("matmul: shape mismatch");
    const int m = a->rows, k = a->cols, n = b->cols;
    Tensor t = result(m, n, {a, b});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = a->v[i * k + p];
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) t->v[i * n + j] += av * b->v[p * n + j];
        }
    t->back = [self = t.get(), a, b, m, k, n] {
        ensure_grad(a);
        ensure_grad(b);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const double gv = self->g[i * n + j];
                if (gv == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    a->g[i * k + p] += gv * b->v[p * n + j];
                    b->g[p * n + j] += gv * a->v[i * k + p];
                }
            }
    };
    return t;
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
    if (bias->rows != 1 || bias->cols != a->cols)
        throw std::invalid_argument("add_rowvec: bias must be 1 x cols");
    Tensor t = result(a->rows, a->cols, {a, bias});
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c)
            t->at(r, c) = a->at(r, c) + bias->v[c];
    t->back = [self = t.get(), a, bias] {
        ensure_grad(a);
        ensure_grad(bias);
        for (int r = 0; r < a->rows; ++r)
            for (int c = 0; c < a->cols; ++c) {
                a->g[r * a->cols + c] += self->g[r * self->cols + c];
                bias->g[c] += self->g[r * self->cols + c];
            }
    };
    return t;
}

Tensor mul_rowvec(const Tensor& a, const Tensor& row) {
    if (row->rows != 1 || row->cols != a->cols)
        throw std::invalid_argument("mul_rowvec: row must be 1 x cols");
    Tensor t = result(a->rows, a->cols, {a, row});
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c) t->at(r, c) = a->at(r, c) * row->v[c];
    t->back = [self = t.get(), a, row] {
        ensure_grad(a);
        ensure_grad(row);
        for (int r = 0; r < a->rows; ++r)
            for (int c = 0; c < a->cols; ++c) {
                a->g[r * a->cols + c] += self->g[r * self->cols + c] * row->v[c];
                row->g[c] += self->g[r * self->cols + c] * a->v[r * a->cols + c];
            }
    };
    return t;
}

Tensor rsqrt_t(const Tensor& a, double eps) {
    Tensor t = result(a->rows, a->cols, {a});
    for (int i = 0; i < t->size(); ++i) t->v[i] = 1.0 / std::sqrt(a->v[i] + eps);
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int i = 0; i < self->size(); ++i)
            a->g[i] += self->g[i] * (-0.5) * self->v[i] * self->v[i] * self->v[i];
    };
    return t;
}

Tensor scale(const Tensor& a, double s) {
    Tensor t = result(a->rows, a->cols, {a});
    for (int i = 0; i < t->size(); ++i) t->v[i] = a->v[i] * s;
    t->back = [self = t.get(), a, s] {
        ensure_grad(a);
        for (int i = 0; i < self->size(); ++i) a->g[i] += self->g[i] * s;
    };
    return t;
}

Tensor relu(const Tensor& a) {
    Tensor t = result(a->rows, a->cols, {a});
    for (int i = 0; i < t->size(); ++i) t->v[i] = a->v[i] > 0 ? a->v[i] : 0.0;
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int i = 0; i < self->size(); ++i)
            if (a->v[i] > 0) a->g[i] += self->g[i];
    };
    return t;
}

Tensor sigmoid(const Tensor& a) {
    Tensor t = result(a->rows, a->cols, {a});
    for (int i = 0; i < t->size(); ++i) t->v[i] = 1.0 / (1.0 + std::exp(-a->v[i]));
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int i = 0; i < self->size(); ++i)
            a->g[i] += self->g[i] * self->v[i] * (1.0 - self->v[i]);
    };
    return t;
}

Tensor tanh_t(const Tensor& a) {
    Tensor t = result(a->rows, a->cols, {a});
    for (int i = 0; i < t->size(); ++i) t->v[i] = std::tanh(a->v[i]);
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int i = 0; i < self->size(); ++i)
            a->g[i] += self->g[i] * (1.0 - self->v[i] * self->v[i]);
    };
    return t;
}

Tensor exp_t(const Tensor& a) {
    Tensor t = result(a->rows, a->cols, {a});
    for (int i = 0; i < t->size(); ++i) t->v[i] = std::exp(a->v[i]);
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int i = 0; i < self->size(); ++i) a->g[i] += self->g[i] * self->v[i];
    };
    return t;
}

Tensor log_t(const Tensor& a) {
    Tensor t = result(a->rows, a->cols, {a});
    for (int i = 0; i < t->size(); ++i) t->v[i] = std::log(a->v[i]);
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int i = 0; i < self->size(); ++i) a->g[i] += self->g[i] / a->v[i];
    };
    return t;
}

Tensor transpose(const Tensor& a) {
    Tensor t = result(a->cols, a->rows, {a});
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c) t->at(c, r) = a->at(r, c);
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int r = 0; r < a->rows; ++r)
            for (int c = 0; c < a->cols; ++c)
                a->g[r * a->cols + c] += self->g[c * self->cols + r];
    };
    return t;
}

Tensor sum_all(const Tensor& a) {
    Tensor t = result(1, 1, {a});
    for (double x : a->v) t->v[0] += x;
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int i = 0; i < a->size(); ++i) a->g[i] += self->g[0];
    };
    return t;
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / a->size()); }

Tensor mean_rows(const Tensor& a) {
    Tensor t = result(1, a->cols, {a});
    for (int r = 0; r < a->rows; ++r)
        for (int c = 0; c < a->cols; ++c) t->v[c] += a->at(r, c);
    const double inv = 1.0 / a->rows;
    for (auto& x : t->v) x *= inv;
    t->back = [self = t.get(), a, inv] {
        ensure_grad(a);
        for (int r = 0; r < a->rows; ++r)
            for (int c = 0; c < a->cols; ++c)
                a->g[r * a->cols + c] += self->g[c] * inv;
    };
    return t;
}

Tensor softmax_rows(const Tensor& a) {
    Tensor t = result(a->rows, a->cols, {a});
    for (int r = 0; r < a->rows; ++r) {
        double mx = a->at(r, 0);
        for (int c = 1; c < a->cols; ++c) mx = std::max(mx, a->at(r, c));
        double sum = 0;
        for (int c = 0; c < a->cols; ++c) {
            t->at(r, c) = std::exp(a->at(r, c) - mx);
            sum += t->at(r, c);
        }
        for (int c = 0; c < a->cols; ++c) t->at(r, c) /= sum;
    }
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int r = 0; r < a->rows; ++r) {
            double dot = 0;
            for (int c = 0; c < a->cols; ++c)
                dot += self->g[r * self->cols + c] * self->v[r * self->cols + c];
            for (int c = 0; c < a->cols; ++c)
                a->g[r * a->cols + c] +=
                    self->v[r * self->cols + c] * (self->g[r * self->cols + c] - dot);
        }
    };
    return t;
}

Tensor log_softmax_rows(const Tensor& a) {
    Tensor t = result(a->rows, a->cols, {a});
    for (int r = 0; r < a->rows; ++r) {
        double mx = a->at(r, 0);
        for (int c = 1; c < a->cols; ++c) mx = std::max(mx, a->at(r, c));
        double sum = 0;
        for (int c = 0; c < a->cols; ++c) sum += std::exp(a->at(r, c) - mx);
        const double lse = mx + std::log(sum);
        for (int c = 0; c < a->cols; ++c) t->at(r, c) = a->at(r, c) - lse;
    }
    t->back = [self = t.get(), a] {
        ensure_grad(a);
        for (int r = 0; r < a->rows; ++r) {
            double gsum = 0;
            for (int c = 0; c < a->cols; ++c) gsum += self->g[r * self->cols + c];
            for (int c = 0; c < a->cols; ++c)
                a->g[r * a->cols + c] +=
                    self->g[r * self->cols + c] -
                    std::exp(self->v[r * self->cols + c]) * gsum;
        }
    };
    return t;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a->rows != b->rows)
        throw std::invalid_argument("concat_cols: row mismatch");
    Tensor t = result(a->rows, a->cols + b->cols, {a, b});
    for (int r = 0; r < a->rows; ++r) {
        for (int c = 0; c < a->cols; ++c) t->at(r, c) = a->at(r, c);
        for (int c = 0; c < b->cols; ++c) t->at(r, a->cols + c) = b->at(r, c);
    }
    t->back = [self = t.get(), a, b] {
        ensure_grad(a);
        ensure_grad(b);
        for (int r = 0; r < a->rows; ++r) {
            for (int c = 0; c < a->cols; ++c)
                a->g[r * a->cols + c] += self->g[r * self->cols + c];
            for (int c = 0; c < b->cols; ++c)
                b->g[r * b->cols + c] += self->g[r * self->cols + a->cols + c];
        }
    };
    return t;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a->cols != b->cols)
        throw std::invalid_argument("concat_rows: col mismatch");
    Tensor t = result(a->rows + b->rows, a->cols, {a, b});
    std::copy(a->v.begin(), a->v.end(), t->v.begin());
    std::copy(b->v.begin(), b->v.end(), t->v.begin() + a->size());
    t->back = [self = t.get(), a, b] {
        ensure_grad(a);
        ensure_grad(b);
        for (int i = 0; i < a->size(); ++i) a->g[i] += self->g[i];
        for (int i = 0; i < b->size(); ++i) b->g[i] += self->g[a->size() + i];
    };
    return t;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    if (c0 < 0 || c1 > a->cols || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range");
    Tensor t = result(a->rows, c1 - c0, {a});
    for (int r = 0; r < a->rows; ++r)
        for (int c = c0; c < c1; ++c) t->at(r, c - c0) = a->at(r, c);
    t->back = [self = t.get(), a, c0] {
        ensure_grad(a);
        for (int r = 0; r < self->rows; ++r)
            for (int c = 0; c < self->cols; ++c)
                a->g[r * a->cols + c0 + c] += self->g[r * self->cols + c];
    };
    return t;
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
    if (r0 < 0 || r1 > a->rows || r0 >= r1)
        throw std::invalid_argument("slice_rows: bad range");
    Tensor t = result(r1 - r0, a->cols, {a});
    std::copy(a->v.begin() + r0 * a->cols, a->v.begin() + r1 * a->cols,
              t->v.begin());
    t->back = [self = t.get(), a, r0] {
        ensure_grad(a);
        for (int i = 0; i < self->size(); ++i) a->g[r0 * a->cols + i] += self->g[i];
    };
    return t;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
    Tensor t = result(static_cast<int>(indices.size()), a->cols, {a});
    for (size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] < 0 || indices[r] >= a->rows)
            throw std::invalid_argument("gather_rows: index out of range");
        std::copy(a->v.begin() + indices[r] * a->cols,
                  a->v.begin() + (indices[r] + 1) * a->cols,
                  t->v.begin() + r * a->cols);
    }
    t->back = [self = t.get(), a, indices] {
        ensure_grad(a);
        for (size_t r = 0; r < indices.size(); ++r)
            for (int c = 0; c < a->cols; ++c)
                a->g[indices[r] * a->cols + c] += self->g[r * a->cols + c];
    };
    return t;
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng,
               bool training) {
    if (!training || rate <= 0.0) return a;
    Tensor t = result(a->rows, a->cols, {a});
    auto mask = std::make_shared<std::vector<double>>(a->size());
    std::uniform_real_distribution<double> d(0.0, 1.0);
    const double keep = 1.0 - rate;
    for (int i = 0; i < a->size(); ++i) {
        (*mask)[i] = d(rng) < rate ? 0.0 : 1.0 / keep;
        t->v[i] = a->v[i] * (*mask)[i];
    }
    t->back = [self = t.get(), a, mask] {
        ensure_grad(a);
        for (int i = 0; i < self->size(); ++i) a->g[i] += self->g[i] * (*mask)[i];
    };
    return t;
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps) {
    if (gain->rows != 1 || gain->cols != a->cols || bias->rows != 1 ||
        bias->cols != a->cols)
        throw std::invalid_argument("layer_norm_rows: gain/bias must be 1 x cols");
    Tensor t = result(a->rows, a->cols, {a, gain, bias});
    const int n = a->cols;
    auto mu = std::make_shared<std::vector<double>>(a->rows);
    auto inv_sd = std::make_shared<std::vector<double>>(a->rows);
    for (int r = 0; r < a->rows; ++r) {
        double m = 0;
        for (int c = 0; c < n; ++c) m += a->at(r, c);
        m /= n;
        double var = 0;
        for (int c = 0; c < n; ++c) {
            const double d = a->at(r, c) - m;
            var += d * d;
        }
        var /= n;
        (*mu)[r] = m;
        (*inv_sd)[r] = 1.0 / std::sqrt(var + eps);
        for (int c = 0; c < n; ++c)
            t->at(r, c) =
                (a->at(r, c) - m) * (*inv_sd)[r] * gain->v[c] + bias->v[c];
    }
    t->back = [self = t.get(), a, gain, bias, mu, inv_sd, n] {
        ensure_grad(a);
        ensure_grad(gain);
        ensure_grad(bias);
        for (int r = 0; r < a->rows; ++r) {
            const double is = (*inv_sd)[r];
            double sum_gy = 0, sum_gyx = 0;  // sums of dL/dxhat and dL/dxhat*xhat
            for (int c = 0; c < n; ++c) {
                const double xhat = (a->at(r, c) - (*mu)[r]) * is;
                const double go = self->g[r * n + c];
                gain->g[c] += go * xhat;
                bias->g[c] += go;
                const double gxhat = go * gain->v[c];
                sum_gy += gxhat;
                sum_gyx += gxhat * xhat;
            }
            for (int c = 0; c < n; ++c) {
                const double xhat = (a->at(r, c) - (*mu)[r]) * is;
                const double gxhat = self->g[r * n + c] * gain->v[c];
                a->g[r * n + c] +=
                    is * (gxhat - sum_gy / n - xhat * sum_gyx / n);
            }
        }
    };
    return t;
}

Tensor nll_rows(const Tensor& log_probs, const std::vector<int>& targets) {
    if (static_cast<int>(targets.size()) != log_probs->rows)
        throw std::invalid_argument("nll_rows: target count mismatch");
    Tensor t = result(1, 1, {log_probs});
    for (int r = 0; r < log_probs->rows; ++r)
        t->v[0] -= log_probs->at(r, targets[r]);
    t->v[0] /= log_probs->rows;
    t->back = [self = t.get(), log_probs, targets] {
        ensure_grad(log_probs);
        const double s = -self->g[0] / log_probs->rows;
        for (int r = 0; r < log_probs->rows; ++r)
            log_probs->g[r * log_probs->cols + targets[r]] += s;
    };
    return t;
}

double gradient_check(const std::vector<Tensor>& params,
                      const std::function<Tensor()>& loss_fn, double eps) {
    zero_grad(params);
    Tensor loss = loss_fn();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) {
        if (p->g.empty()) p->g.assign(p->size(), 0.0);
        analytic.push_back(p->g);
    }
    double worst = 0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (int i = 0; i < p->size(); ++i) {
            const double orig = p->v[i];
            p->v[i] = orig + eps;
            const double up = loss_fn()->v[0];
            p->v[i] = orig - eps;
            const double dn = loss_fn()->v[0];
            p->v[i] = orig;
            const double fd = (up - dn) / (2 * eps);
            const double an = analytic[pi][i];
            // the 1e-6 floor keeps central-difference roundoff (~1e-11
            // absolute at eps=1e-5) from dominating near-zero gradients
            const double rel =
                std::abs(an - fd) / std::max(std::abs(an) + std::abs(fd), 1e-6);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace esprit::ag
