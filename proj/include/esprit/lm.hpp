#pragma once

#include "esprit/data2text.hpp"

namespace esprit {

struct Prompt {
    enum class Kind { Init, Sim };
    Kind kind = Kind::Init;
    std::vector<std::string> context;
    std::vector<std::string> target;
};

// Object attribute phrases in scene order, closed by the literal cue
// "In the physical simulation".
Prompt build_context_init(const std::vector<ObjectRecord>& objects);

// Initial-scene description closed by the literal cue
// "The red ball is placed and".
Prompt build_context_sim(const std::vector<std::string>& init_description);

struct LmConfig {
    int dim = 128;
    int ffn = 256;
    int heads = 4;
    int blocks = 2;
    int max_seq = 160;
    double lr = 3e-4;
    double warmup = 0.01;        // fraction of total steps
    double weight_decay = 0.01;  // decoupled
    int batch = 12;
    int max_epochs = 50;
    uint64_t seed = 0;
};

class Lm {
  public:
    Lm() = default;
    Lm(const LmConfig& config, const Vocab& vocab);

    // seq x vocab causal logits (tied to the token embedding)
    ag::Tensor logits(const std::vector<int>& tokens) const;

    // mean NLL over continuation positions only (context masked out);
    // the target is extended with <eos>
    ag::Tensor prompt_loss(const Prompt& prompt) const;
    double continuation_accuracy(const std::vector<Prompt>& prompts) const;
    double perplexity(const std::vector<Prompt>& prompts) const;

    std::vector<std::string> sample(const std::vector<std::string>& context,
                                    std::mt19937_64& rng, int top_k = 3,
                                    double temperature = 0.1,
                                    int max_len = 40) const;

    // Adam with linear warmup and decoupled weight decay; returns the
    // checkpoint with the best validation perplexity (final weights when
    // valid is empty). Throws ag::NonFiniteLoss on divergence.
    static Lm train(const std::vector<Prompt>& train_prompts,
                    const std::vector<Prompt>& valid_prompts,
                    const LmConfig& config, const Vocab& vocab);

    std::vector<ag::Tensor> parameters() const;
    json to_json() const;
    static Lm from_json(const json& j);

    const Vocab& vocab() const { return vocab_; }
    const LmConfig& config() const { return config_; }

    struct Block {
        ag::Tensor ln1_g, ln1_b, ln2_g, ln2_b;
        ag::Tensor W_q, W_k, W_v, W_o;
        ag::Tensor ffn_W1, ffn_b1, ffn_W2, ffn_b2;
    };
    ag::Tensor tok_emb, pos_emb, final_g, final_b;  // tied output projection
    std::vector<Block> blocks;

  private:
    LmConfig config_;
    Vocab vocab_;
};

}  // namespace esprit
