#pragma once

#include <array>

#include "esprit/autograd.hpp"
#include "esprit/events.hpp"

namespace esprit {

struct DegenerateData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PRF {
    double precision = 0, recall = 0, f1 = 0;
};

// Binary precision/recall/F1; zero denominators yield 0.
PRF evaluate_prf(const std::vector<int>& predictions,
                 const std::vector<int>& labels);

struct TreeConfig {
    int max_depth = 10;
    int min_samples_split = 2;
};

struct DecisionTree {
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0;
        int left = -1, right = -1;
        double prob = 0;  // positive fraction at this node
        bool is_leaf() const { return feature < 0; }
    };
    std::vector<Node> nodes;  // nodes[0] is the root
    std::array<double, 13> importances{};

    double predict_proba(const FeatureVector13& x) const;
    bool predict(const FeatureVector13& x) const {
        return predict_proba(x) > 0.5;
    }
};

// Greedy CART on Gini impurity; ties break on lowest feature index, then
// lowest threshold. Throws DegenerateData when all labels are identical.
DecisionTree train_tree(const std::vector<FeatureVector13>& features,
                        const std::vector<int>& labels,
                        const TreeConfig& config = {});

// Normalized total Gini decrease per feature; sums to 1.
std::array<double, 13> feature_importance(const DecisionTree& tree);

json to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const json& j);

struct MlpConfig {
    std::vector<int> widths{128, 128, 32};
    double dropout = 0.15;
    double lr = 1e-3;
    double momentum = 0.9;
    int batch = 64;
    int max_epochs = 500;
    int patience = 25;  // early stop on validation F1
    double pos_weight = 1.0;
    uint64_t seed = 0;
};

class Mlp {
  public:
    // Standardizes features with training-split moments, then trains
    // Linear -> BatchNorm -> ReLU -> Dropout stacks with a sigmoid output
    // under binary cross-entropy. Throws ag::NonFiniteLoss on divergence.
    static Mlp train(const std::vector<FeatureVector13>& train_x,
                     const std::vector<int>& train_y,
                     const std::vector<FeatureVector13>& val_x,
                     const std::vector<int>& val_y, const MlpConfig& config);

    double predict_proba(const FeatureVector13& x) const;
    bool predict(const FeatureVector13& x) const {
        return predict_proba(x) > 0.5;
    }

    json to_json() const;
    static Mlp from_json(const json& j);

    // test hooks: parameter tensors and a batch loss with dropout disabled
    // and batch norm in inference mode
    std::vector<ag::Tensor> parameters() const;
    ag::Tensor inference_loss(const std::vector<FeatureVector13>& x,
                              const std::vector<int>& y) const;

  private:
    friend struct MlpTrainer;
    struct Layer {
        ag::Tensor W, b;          // linear
        ag::Tensor gamma, beta;   // batch norm scale/shift
        std::vector<double> running_mean, running_var;
    };
    std::vector<Layer> layers_;
    ag::Tensor out_w_, out_b_;  // final projection to one logit
    std::array<double, 13> feat_mean_{}, feat_sd_{};
    MlpConfig config_;

    // training mode uses batch statistics and refreshes the running moments
    ag::Tensor forward(const std::vector<FeatureVector13>& x, bool training,
                       std::mt19937_64* rng);
};

}  // namespace esprit
