#include <algorithm>
#include <cmath>
#include <numeric>

#include "esprit/saliency.hpp"

namespace esprit {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;  // running = (1-m)*running + m*batch

ag::Tensor batch_matrix(const std::vector<FeatureVector13>& x,
                        const std::array<double, 13>& mean,
                        const std::array<double, 13>& sd) {
    ag::Tensor t = ag::make(static_cast<int>(x.size()), 13);
    for (size_t r = 0; r < x.size(); ++r)
        for (int c = 0; c < 13; ++c)
            t->v[r * 13 + c] = (x[r][c] - mean[c]) / sd[c];
    return t;
}

}  // namespace

ag::Tensor Mlp::forward(const std::vector<FeatureVector13>& x, bool training,
                        std::mt19937_64* rng) {
    ag::Tensor h = batch_matrix(x, feat_mean_, feat_sd_);
    const int n = h->rows;
    for (auto& layer : layers_) {
        h = ag::matmul(h, layer.W);
        h = ag::add_rowvec(h, layer.b);
        const int width = h->cols;
        if (training && n > 1) {
            auto mu = ag::mean_rows(h);
            auto centered = ag::add_rowvec(h, ag::scale(mu, -1.0));
            auto var = ag::mean_rows(ag::mul(centered, centered));
            auto inv_sd = ag::rsqrt_t(var, kBnEps);
            h = ag::mul_rowvec(centered, inv_sd);
            for (int c = 0; c < width; ++c) {
                layer.running_mean[c] = (1 - kBnMomentum) * layer.running_mean[c] +
                                        kBnMomentum * mu->v[c];
                layer.running_var[c] = (1 - kBnMomentum) * layer.running_var[c] +
                                       kBnMomentum * var->v[c];
            }
        } else {
            ag::Tensor neg_mu = ag::make(1, width);
            ag::Tensor inv = ag::make(1, width);
            for (int c = 0; c < width; ++c) {
                neg_mu->v[c] = -layer.running_mean[c];
                inv->v[c] = 1.0 / std::sqrt(layer.running_var[c] + kBnEps);
            }
            h = ag::mul_rowvec(ag::add_rowvec(h, neg_mu), inv);
        }
        h = ag::add_rowvec(ag::mul_rowvec(h, layer.gamma), layer.beta);
        h = ag::relu(h);
        if (training && rng)
            h = ag::dropout(h, config_.dropout, *rng, true);
    }
    h = ag::add_rowvec(ag::matmul(h, out_w_), out_b_);
    return ag::sigmoid(h);  // n x 1 probabilities
}

std::vector<ag::Tensor> Mlp::parameters() const {
    std::vector<ag::Tensor> p;
    for (const auto& l : layers_) {
        p.push_back(l.W);
        p.push_back(l.b);
        p.push_back(l.gamma);
        p.push_back(l.beta);
    }
    p.push_back(out_w_);
    p.push_back(out_b_);
    return p;
}

namespace {

ag::Tensor bce_loss(const ag::Tensor& probs, const std::vector<int>& y,
                    double pos_weight) {
    // clamped binary cross-entropy over an n x 1 probability column
    ag::Tensor loss = ag::make(1, 1);
    loss->requires_grad = probs->requires_grad || !probs->parents.empty();
    loss->parents = {probs};
    double total = 0, wsum = 0;
    std::vector<double> w(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
        const double p = std::clamp(probs->v[i], 1e-12, 1.0 - 1e-12);
        w[i] = y[i] ? pos_weight : 1.0;
        total += -w[i] * (y[i] ? std::log(p) : std::log(1 - p));
        wsum += w[i];
    }
    loss->v[0] = total / wsum;
    loss->back = [self = loss.get(), probs, y, w, wsum] {
        if (probs->g.empty()) probs->g.assign(probs->size(), 0.0);
        for (size_t i = 0; i < y.size(); ++i) {
            const double p = std::clamp(probs->v[i], 1e-12, 1.0 - 1e-12);
            const double d = y[i] ? -1.0 / p : 1.0 / (1 - p);
            probs->g[i] += self->g[0] * w[i] * d / wsum;
        }
    };
    return loss;
}

}  // namespace

ag::Tensor Mlp::inference_loss(const std::vector<FeatureVector13>& x,
                               const std::vector<int>& y) const {
    Mlp* self = const_cast<Mlp*>(this);  // inference mode leaves state untouched
    return bce_loss(self->forward(x, false, nullptr), y, config_.pos_weight);
}

Mlp Mlp::train(const std::vector<FeatureVector13>& train_x,
               const std::vector<int>& train_y,
               const std::vector<FeatureVector13>& val_x,
               const std::vector<int>& val_y, const MlpConfig& config) {
    if (train_x.empty() || train_x.size() != train_y.size())
        throw std::invalid_argument("Mlp::train: bad inputs");

    Mlp m;
    m.config_ = config;
    for (int c = 0; c < 13; ++c) {
        double mean = 0;
        for (const auto& row : train_x) mean += row[c];
        mean /= train_x.size();
        double var = 0;
        for (const auto& row : train_x) var += (row[c] - mean) * (row[c] - mean);
        var /= train_x.size();
        m.feat_mean_[c] = mean;
        m.feat_sd_[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }

    std::mt19937_64 rng(config.seed);
    int in_dim = 13;
    for (int width : config.widths) {
        Layer l;
        l.W = ag::uniform_init(in_dim, width, std::sqrt(6.0 / (in_dim + width)),
                               rng);
        l.b = ag::make(1, width, true);
        l.gamma = ag::from_values(1, width, std::vector<double>(width, 1.0), true);
        l.beta = ag::make(1, width, true);
        l.running_mean.assign(width, 0.0);
        l.running_var.assign(width, 1.0);
        m.layers_.push_back(std::move(l));
        in_dim = width;
    }
    m.out_w_ = ag::uniform_init(in_dim, 1, std::sqrt(6.0 / (in_dim + 1)), rng);
    m.out_b_ = ag::make(1, 1, true);

    auto params = m.parameters();
    std::vector<std::vector<double>> velocity;
    for (const auto& p : params) velocity.emplace_back(p->size(), 0.0);

    const int n = static_cast<int>(train_x.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    Mlp best = m;
    double best_f1 = -1;
    int since_best = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < n; start += config.batch) {
            const int end = std::min(n, start + config.batch);
            std::vector<FeatureVector13> bx;
            std::vector<int> by;
            for (int i = start; i < end; ++i) {
                bx.push_back(train_x[order[i]]);
                by.push_back(train_y[order[i]]);
            }
            ag::zero_grad(params);
            auto loss = bce_loss(m.forward(bx, true, &rng), by,
                                 config.pos_weight);
            if (!std::isfinite(loss->v[0]))
                throw ag::NonFiniteLoss("mlp loss diverged at epoch " +
                                        std::to_string(epoch));
            ag::backward(loss);
            for (size_t pi = 0; pi < params.size(); ++pi) {
                auto& p = params[pi];
                if (p->g.empty()) continue;
                for (int i = 0; i < p->size(); ++i) {
                    velocity[pi][i] =
                        config.momentum * velocity[pi][i] - config.lr * p->g[i];
                    p->v[i] += velocity[pi][i];
                }
            }
        }

        if (val_x.empty()) continue;
        std::vector<int> preds;
        for (const auto& row : val_x) preds.push_back(m.predict(row) ? 1 : 0);
        const double f1 = evaluate_prf(preds, val_y).f1;
        if (f1 > best_f1) {
            best_f1 = f1;
            since_best = 0;
            best = m;  // deep enough: tensors copied below
            best.layers_.clear();
            for (const auto& l : m.layers_) {
                Layer c;
                c.W = ag::from_values(l.W->rows, l.W->cols, l.W->v, true);
                c.b = ag::from_values(1, l.b->cols, l.b->v, true);
                c.gamma = ag::from_values(1, l.gamma->cols, l.gamma->v, true);
                c.beta = ag::from_values(1, l.beta->cols, l.beta->v, true);
                c.running_mean = l.running_mean;
                c.running_var = l.running_var;
                best.layers_.push_back(std::move(c));
            }
            best.out_w_ = ag::from_values(m.out_w_->rows, 1, m.out_w_->v, true);
            best.out_b_ = ag::from_values(1, 1, m.out_b_->v, true);
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    return val_x.empty() ? m : best;
}

double Mlp::predict_proba(const FeatureVector13& x) const {
    Mlp* self = const_cast<Mlp*>(this);
    return self->forward({x}, false, nullptr)->v[0];
}

json Mlp::to_json() const {
    json layers = json::array();
    for (const auto& l : layers_)
        layers.push_back({{"W", l.W->v},
                          {"rows", l.W->rows},
                          {"cols", l.W->cols},
                          {"b", l.b->v},
                          {"gamma", l.gamma->v},
                          {"beta", l.beta->v},
                          {"running_mean", l.running_mean},
                          {"running_var", l.running_var}});
    return {{"format", "mlp-v1"},
            {"layers", layers},
            {"out_w", out_w_->v},
            {"out_b", out_b_->v},
            {"feat_mean", feat_mean_},
            {"feat_sd", feat_sd_},
            {"widths", config_.widths},
            {"dropout", config_.dropout}};
}

Mlp Mlp::from_json(const json& j) {
    if (j.at("format") != "mlp-v1")
        throw std::runtime_error("unknown mlp format");
    Mlp m;
    m.config_.widths = j.at("widths").get<std::vector<int>>();
    m.config_.dropout = j.at("dropout");
    for (const auto& lj : j.at("layers")) {
        Layer l;
        l.W = ag::from_values(lj.at("rows"), lj.at("cols"),
                              lj.at("W").get<std::vector<double>>(), true);
        const int width = l.W->cols;
        l.b = ag::from_values(1, width, lj.at("b").get<std::vector<double>>(),
                              true);
        l.gamma = ag::from_values(1, width,
                                  lj.at("gamma").get<std::vector<double>>(), true);
        l.beta = ag::from_values(1, width,
                                 lj.at("beta").get<std::vector<double>>(), true);
        l.running_mean = lj.at("running_mean").get<std::vector<double>>();
        l.running_var = lj.at("running_var").get<std::vector<double>>();
        m.layers_.push_back(std::move(l));
    }
    const auto ow = j.at("out_w").get<std::vector<double>>();
    m.out_w_ = ag::from_values(static_cast<int>(ow.size()), 1, ow, true);
    m.out_b_ = ag::from_values(1, 1, j.at("out_b").get<std::vector<double>>(),
                               true);
    const auto fm = j.at("feat_mean").get<std::vector<double>>();
    const auto fs = j.at("feat_sd").get<std::vector<double>>();
    std::copy(fm.begin(), fm.end(), m.feat_mean_.begin());
    std::copy(fs.begin(), fs.end(), m.feat_sd_.begin());
    return m;
}

}  // namespace esprit
