#include <algorithm>
#include <cmath>
#include <numeric>

#include "esprit/saliency.hpp"

namespace esprit {

PRF evaluate_prf(const std::vector<int>& predictions,
                 const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("evaluate_prf: length mismatch");
    int tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] && labels[i]) ++tp;
        else if (predictions[i] && !labels[i]) ++fp;
        else if (!predictions[i] && labels[i]) ++fn;
    }
    PRF r;
    r.precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    r.recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    r.f1 = r.precision + r.recall
               ? 2 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

namespace {

double gini(int pos, int n) {
    if (n == 0) return 0;
    const double p = static_cast<double>(pos) / n;
    return 2 * p * (1 - p);
}

struct Builder {
    const std::vector<FeatureVector13>& x;
    const std::vector<int>& y;
    const TreeConfig& cfg;
    DecisionTree tree;

    int grow(std::vector<int> idx, int depth) {
        const int n = static_cast<int>(idx.size());
        int pos = 0;
        for (int i : idx) pos += y[i];

        DecisionTree::Node node;
        node.prob = static_cast<double>(pos) / n;
        const int self = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(node);

        if (pos == 0 || pos == n || depth >= cfg.max_depth ||
            n < cfg.min_samples_split)
            return self;

        const double parent_impurity = gini(pos, n);
        double best_gain = 0;
        int best_feat = -1;
        double best_thr = 0;

        for (int f = 0; f < 13; ++f) {
            std::sort(idx.begin(), idx.end(), [&](int a, int b) {
                return x[a][f] < x[b][f];
            });
            int left_pos = 0;
            for (int i = 0; i < n - 1; ++i) {
                left_pos += y[idx[i]];
                if (x[idx[i]][f] == x[idx[i + 1]][f]) continue;
                const int nl = i + 1, nr = n - nl;
                const double gain =
                    parent_impurity - (nl * gini(left_pos, nl) +
                                       nr * gini(pos - left_pos, nr)) /
                                          n;
                const double thr = (x[idx[i]][f] + x[idx[i + 1]][f]) / 2;
                // scanning features then thresholds in ascending order and
                // replacing only on strict improvement breaks ties toward the
                // lowest feature index, then the lowest threshold
                if (gain > best_gain + 1e-15) {
                    best_gain = gain;
                    best_feat = f;
                    best_thr = thr;
                }
            }
        }
        if (best_feat < 0 || best_gain <= 0) return self;

        std::vector<int> left, right;
        for (int i : idx)
            (x[i][best_feat] <= best_thr ? left : right).push_back(i);

        tree.importances[best_feat] +=
            best_gain * n;  // weighted decrease, normalized at the end
        tree.nodes[self].feature = best_feat;
        tree.nodes[self].threshold = best_thr;
        const int l = grow(std::move(left), depth + 1);
        tree.nodes[self].left = l;
        const int r = grow(std::move(right), depth + 1);
        tree.nodes[self].right = r;
        return self;
    }
};

}  // namespace

DecisionTree train_tree(const std::vector<FeatureVector13>& features,
                        const std::vector<int>& labels,
                        const TreeConfig& config) {
    if (features.empty() || features.size() != labels.size())
        throw std::invalid_argument("train_tree: bad inputs");
    const int pos = std::accumulate(labels.begin(), labels.end(), 0);
    if (pos == 0 || pos == static_cast<int>(labels.size()))
        throw DegenerateData("train_tree: all labels identical");

    Builder b{features, labels, config, {}};
    std::vector<int> idx(features.size());
    std::iota(idx.begin(), idx.end(), 0);
    b.grow(std::move(idx), 0);

    double total = 0;
    for (double v : b.tree.importances) total += v;
    if (total > 0)
        for (double& v : b.tree.importances) v /= total;
    return std::move(b.tree);
}

double DecisionTree::predict_proba(const FeatureVector13& x) const {
    int i = 0;
    while (!nodes[i].is_leaf())
        i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left
                                                      : nodes[i].right;
    return nodes[i].prob;
}

std::array<double, 13> feature_importance(const DecisionTree& tree) {
    return tree.importances;
}

json to_json(const DecisionTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes)
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"prob", n.prob}});
    return {{"format", "decision-tree-v1"},
            {"nodes", nodes},
            {"importances", tree.importances}};
}

DecisionTree tree_from_json(const json& j) {
    if (j.at("format") != "decision-tree-v1")
        throw std::runtime_error("unknown tree format");
    DecisionTree t;
    for (const auto& n : j.at("nodes"))
        t.nodes.push_back({n.at("feature"), n.at("threshold"), n.at("left"),
                           n.at("right"), n.at("prob")});
    const auto imp = j.at("importances").get<std::vector<double>>();
    std::copy(imp.begin(), imp.end(), t.importances.begin());
    return t;
}

}  // namespace esprit
