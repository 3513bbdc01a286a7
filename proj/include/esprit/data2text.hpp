#pragma once

#include <map>

#include "esprit/autograd.hpp"
#include "esprit/events.hpp"

namespace esprit {

struct Vocab {
    static constexpr int kPad = 0, kBos = 1, kEos = 2, kUnk = 3;

    std::vector<std::string> id_to_token{"<pad>", "<bos>", "<eos>", "<unk>"};
    std::map<std::string, int> token_to_id{
        {"<pad>", 0}, {"<bos>", 1}, {"<eos>", 2}, {"<unk>", 3}};

    int add(const std::string& tok);
    int id(const std::string& tok) const;  // kUnk for unknown tokens
    const std::string& token(int id) const { return id_to_token.at(id); }
    int size() const { return static_cast<int>(id_to_token.size()); }

    static Vocab build(const std::vector<std::vector<std::string>>& texts);
};

json to_json(const Vocab& v);
Vocab vocab_from_json(const json& j);

enum class EncoderMode { Avg, BiLstm };

struct EntityModelConfig {
    int feat_embed = 64;    // per record-feature embedding
    int record_dim = 128;   // record representation e_j (= decoder init dim)
    int decoder_dim = 128;
    int entity_dim = 128;   // entity memory u_k
    int token_embed = 64;
    EncoderMode mode = EncoderMode::Avg;
    double lr = 1e-3;
    double momentum = 0.9;
    double clip = 5.0;  // global gradient norm
    int batch = 8;
    int max_epochs = 125;
    uint64_t seed = 0;
};

using TextPair = std::pair<RecordTable, std::vector<std::string>>;

class EntityModel {
  public:
    EntityModel() = default;
    EntityModel(const EntityModelConfig& config, const Vocab& record_vocab,
                const Vocab& text_vocab);

    struct Encoded {
        ag::Tensor e;  // records x record_dim
        std::vector<std::string> entities;          // distinct, input order
        std::vector<std::vector<int>> entity_recs;  // record rows per entity
        ag::Tensor d0;  // 1 x decoder_dim initial decoder state
    };
    struct Attention {
        std::vector<ag::Tensor> alpha;  // per entity, 1 x |records of entity|
        ag::Tensor phi;                 // 1 x entities
        ag::Tensor q;                   // 1 x record_dim
    };

    ag::Tensor embed_records(const RecordTable& table) const;
    Encoded encode(const RecordTable& table) const;
    std::vector<ag::Tensor> init_entity_memory(const Encoded& enc) const;
    std::vector<ag::Tensor> update_entity_memory(
        const ag::Tensor& d, const std::vector<ag::Tensor>& u_prev) const;
    Attention hierarchical_attention(const ag::Tensor& d, const Encoded& enc,
                                     const std::vector<ag::Tensor>& u) const;

    // Teacher-forced mean NLL of <bos> tokens... <eos> over one pair.
    ag::Tensor pair_loss(const RecordTable& table,
                         const std::vector<std::string>& tokens) const;
    // Teacher-forced next-token accuracy.
    double token_accuracy(const std::vector<TextPair>& pairs) const;

    std::vector<std::string> generate(const RecordTable& table,
                                      int max_len = 60) const;

    // Momentum SGD with gradient clipping; returns the checkpoint with the
    // best validation token accuracy (final weights when valid is empty).
    static EntityModel train(const std::vector<TextPair>& train_pairs,
                             const std::vector<TextPair>& valid_pairs,
                             const EntityModelConfig& config,
                             const Vocab& record_vocab, const Vocab& text_vocab);

    std::vector<ag::Tensor> parameters() const;
    json to_json() const;
    static EntityModel from_json(const json& j);

    const Vocab& text_vocab() const { return text_vocab_; }
    const EntityModelConfig& config() const { return config_; }

    struct Params {
        ag::Tensor feat_emb;          // record-feature embedding table
        ag::Tensor W_r, b_r;          // record feed-forward
        // BiLSTM encoder (unused in AVG mode)
        ag::Tensor lstm_fw, lstm_fb, lstm_bw, lstm_bb;  // [x;h] -> 4*hidden
        ag::Tensor W_init, b_init;    // final-state projection to decoder dim
        ag::Tensor W_i;               // entity memory init
        ag::Tensor W_d, b_d, W_e, b_e, W_f, b_f, W_g;  // memory gating
        ag::Tensor W_a;               // record-level attention
        ag::Tensor W_h;               // entity-level attention
        ag::Tensor gru_zW, gru_rW, gru_hW;  // [x;h] -> hidden each
        ag::Tensor gru_zb, gru_rb, gru_hb;
        ag::Tensor W_c;               // attentional combination [d;q]
        ag::Tensor W_y, b_y;          // output projection
        ag::Tensor tok_emb;           // token embedding table
    };
    Params p;  // exposed so tests can pin weights for endpoint checks

  private:
    EntityModelConfig config_;
    Vocab record_vocab_, text_vocab_;

    ag::Tensor gru_step(const ag::Tensor& x, const ag::Tensor& h) const;
    ag::Tensor decode_logits_step(const ag::Tensor& d,
                                  const ag::Tensor& q) const;
};

// Record-token vocabulary over every value/entity/type/segment string.
Vocab build_record_vocab(const std::vector<RecordTable>& tables);

}  // namespace esprit
