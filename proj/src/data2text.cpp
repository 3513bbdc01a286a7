#include "esprit/data2text.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace esprit {

int Vocab::add(const std::string& tok) {
    auto it = token_to_id.find(tok);
    if (it != token_to_id.end()) return it->second;
    const int id = size();
    token_to_id.emplace(tok, id);
    id_to_token.push_back(tok);
    return id;
}

int Vocab::id(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? kUnk : it->second;
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& texts) {
    Vocab v;
    for (const auto& text : texts)
        for (const auto& tok : text) v.add(tok);
    return v;
}

json to_json(const Vocab& v) { return {{"tokens", v.id_to_token}}; }

Vocab vocab_from_json(const json& j) {
    Vocab v;
    const auto toks = j.at("tokens").get<std::vector<std::string>>();
    for (size_t i = 4; i < toks.size(); ++i) v.add(toks[i]);
    return v;
}

Vocab build_record_vocab(const std::vector<RecordTable>& tables) {
    Vocab v;
    for (const auto& t : tables)
        for (const auto& r : t.records) {
            v.add(r.value);
            v.add(r.entity);
            v.add(r.type);
            v.add(r.segment);
        }
    return v;
}

namespace {

using ag::Tensor;

Tensor zeros_row(int cols) { return ag::make(1, cols); }

void clip_global_norm(const std::vector<Tensor>& params, double max_norm) {
    double sq = 0;
    for (const auto& p : params)
        for (double g : p->g) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (const auto& p : params)
            for (double& g : p->g) g *= s;
    }
}

}  // namespace

EntityModel::EntityModel(const EntityModelConfig& config,
                         const Vocab& record_vocab, const Vocab& text_vocab)
    : config_(config), record_vocab_(record_vocab), text_vocab_(text_vocab) {
    if (config.mode == EncoderMode::Avg &&
        config.record_dim != config.decoder_dim)
        throw std::invalid_argument(
            "avg encoder needs record_dim == decoder_dim");
    if (config.mode == EncoderMode::BiLstm && config.record_dim % 2 != 0)
        throw std::invalid_argument("bilstm encoder needs even record_dim");

    std::mt19937_64 rng(config.seed);
    auto init = [&](int r, int c) {
        return ag::uniform_init(r, c, std::sqrt(6.0 / (r + c)), rng);
    };
    const int fe = config.feat_embed, rd = config.record_dim;
    const int dd = config.decoder_dim, ed = config.entity_dim;
    const int te = config.token_embed;
    const int hidden = rd / 2;

    p.feat_emb = init(record_vocab_.size(), fe);
    p.W_r = init(4 * fe, rd);
    p.b_r = ag::make(1, rd, true);
    p.lstm_fw = init(rd + hidden, 4 * hidden);
    p.lstm_fb = ag::make(1, 4 * hidden, true);
    p.lstm_bw = init(rd + hidden, 4 * hidden);
    p.lstm_bb = ag::make(1, 4 * hidden, true);
    p.W_init = init(rd, dd);
    p.b_init = ag::make(1, dd, true);
    p.W_i = init(rd, ed);
    p.W_d = init(dd, ed);
    p.b_d = ag::make(1, ed, true);
    p.W_e = init(dd, ed);
    p.b_e = ag::make(1, ed, true);
    p.W_f = init(ed, ed);
    p.b_f = ag::make(1, ed, true);
    p.W_g = init(dd, ed);
    p.W_a = init(dd, rd);
    p.W_h = init(dd, ed);
    const int in = te + dd;
    p.gru_zW = init(in + dd, dd);
    p.gru_rW = init(in + dd, dd);
    p.gru_hW = init(in + dd, dd);
    p.gru_zb = ag::make(1, dd, true);
    p.gru_rb = ag::make(1, dd, true);
    p.gru_hb = ag::make(1, dd, true);
    p.W_c = init(dd + rd, dd);
    p.W_y = init(dd, text_vocab_.size());
    p.b_y = ag::make(1, text_vocab_.size(), true);
    p.tok_emb = init(text_vocab_.size(), te);
}

Tensor EntityModel::embed_records(const RecordTable& table) const {
    std::vector<int> v_idx, e_idx, t_idx, s_idx;
    for (const auto& r : table.records) {
        v_idx.push_back(record_vocab_.id(r.value));
        e_idx.push_back(record_vocab_.id(r.entity));
        t_idx.push_back(record_vocab_.id(r.type));
        s_idx.push_back(record_vocab_.id(r.segment));
    }
    Tensor x = ag::concat_cols(
        ag::concat_cols(ag::gather_rows(p.feat_emb, v_idx),
                        ag::gather_rows(p.feat_emb, e_idx)),
        ag::concat_cols(ag::gather_rows(p.feat_emb, t_idx),
                        ag::gather_rows(p.feat_emb, s_idx)));
    return ag::relu(ag::add_rowvec(ag::matmul(x, p.W_r), p.b_r));
}

EntityModel::Encoded EntityModel::encode(const RecordTable& table) const {
    if (table.records.empty())
        throw std::invalid_argument("encode: empty record table");
    Encoded enc;
    Tensor r = embed_records(table);

    if (config_.mode == EncoderMode::Avg) {
        enc.e = r;
        enc.d0 = ag::mean_rows(r);
    } else {
        const int hidden = config_.record_dim / 2;
        const int n = r->rows;
        auto lstm_pass = [&](const Tensor& W, const Tensor& b, bool forward) {
            std::vector<Tensor> hs(n);
            Tensor h = zeros_row(hidden), c = zeros_row(hidden);
            for (int s = 0; s < n; ++s) {
                const int j = forward ? s : n - 1 - s;
                Tensor x = ag::slice_rows(r, j, j + 1);
                Tensor gates =
                    ag::add_rowvec(ag::matmul(ag::concat_cols(x, h), W), b);
                Tensor i_g = ag::sigmoid(ag::slice_cols(gates, 0, hidden));
                Tensor f_g =
                    ag::sigmoid(ag::slice_cols(gates, hidden, 2 * hidden));
                Tensor o_g =
                    ag::sigmoid(ag::slice_cols(gates, 2 * hidden, 3 * hidden));
                Tensor g_g =
                    ag::tanh_t(ag::slice_cols(gates, 3 * hidden, 4 * hidden));
                c = ag::add(ag::mul(f_g, c), ag::mul(i_g, g_g));
                h = ag::mul(o_g, ag::tanh_t(c));
                hs[j] = h;
            }
            return std::pair{hs, h};
        };
        auto [fw_states, fw_final] = lstm_pass(p.lstm_fw, p.lstm_fb, true);
        auto [bw_states, bw_final] = lstm_pass(p.lstm_bw, p.lstm_bb, false);
        Tensor e = ag::concat_cols(fw_states[0], bw_states[0]);
        for (int j = 1; j < n; ++j)
            e = ag::concat_rows(e, ag::concat_cols(fw_states[j], bw_states[j]));
        enc.e = e;
        enc.d0 = ag::add_rowvec(
            ag::matmul(ag::concat_cols(fw_final, bw_final), p.W_init), p.b_init);
    }

    for (size_t j = 0; j < table.records.size(); ++j) {
        const std::string& ent = table.records[j].entity;
        auto it = std::find(enc.entities.begin(), enc.entities.end(), ent);
        if (it == enc.entities.end()) {
            enc.entities.push_back(ent);
            enc.entity_recs.push_back({static_cast<int>(j)});
        } else {
            enc.entity_recs[it - enc.entities.begin()].push_back(
                static_cast<int>(j));
        }
    }
    return enc;
}

std::vector<Tensor> EntityModel::init_entity_memory(const Encoded& enc) const {
    std::vector<Tensor> u;
    for (const auto& recs : enc.entity_recs) {
        Tensor x_k = ag::mean_rows(ag::gather_rows(enc.e, recs));
        u.push_back(ag::matmul(x_k, p.W_i));
    }
    return u;
}

std::vector<Tensor> EntityModel::update_entity_memory(
    const Tensor& d, const std::vector<Tensor>& u_prev) const {
    Tensor gamma = ag::sigmoid(ag::add_rowvec(ag::matmul(d, p.W_d), p.b_d));
    Tensor d_term = ag::add_rowvec(ag::matmul(d, p.W_e), p.b_e);
    Tensor u_tilde = ag::matmul(d, p.W_g);
    std::vector<Tensor> u;
    for (const auto& uk : u_prev) {
        Tensor delta = ag::mul(
            gamma, ag::sigmoid(ag::add(
                       d_term, ag::add_rowvec(ag::matmul(uk, p.W_f), p.b_f))));
        u.push_back(ag::add(uk, ag::mul(delta, ag::sub(u_tilde, uk))));
    }
    return u;
}

EntityModel::Attention EntityModel::hierarchical_attention(
    const Tensor& d, const Encoded& enc, const std::vector<Tensor>& u) const {
    Attention att;
    Tensor da = ag::matmul(d, p.W_a);  // 1 x record_dim
    Tensor dh = ag::matmul(d, p.W_h);  // 1 x entity_dim
    Tensor s_stack, phi_scores;
    for (size_t k = 0; k < enc.entities.size(); ++k) {
        Tensor g_k = ag::gather_rows(enc.e, enc.entity_recs[k]);
        Tensor scores = ag::matmul(da, ag::transpose(g_k));  // 1 x n_k
        Tensor alpha = ag::softmax_rows(scores);
        att.alpha.push_back(alpha);
        Tensor s_k = ag::matmul(alpha, g_k);  // 1 x record_dim
        s_stack = k == 0 ? s_k : ag::concat_rows(s_stack, s_k);
        Tensor score_k = ag::matmul(dh, ag::transpose(u[k]));  // 1 x 1
        phi_scores = k == 0 ? score_k : ag::concat_cols(phi_scores, score_k);
    }
    att.phi = ag::softmax_rows(phi_scores);
    att.q = ag::matmul(att.phi, s_stack);
    return att;
}

Tensor EntityModel::gru_step(const Tensor& x, const Tensor& h) const {
    Tensor xh = ag::concat_cols(x, h);
    Tensor z = ag::sigmoid(ag::add_rowvec(ag::matmul(xh, p.gru_zW), p.gru_zb));
    Tensor r = ag::sigmoid(ag::add_rowvec(ag::matmul(xh, p.gru_rW), p.gru_rb));
    Tensor xrh = ag::concat_cols(x, ag::mul(r, h));
    Tensor h_tilde =
        ag::tanh_t(ag::add_rowvec(ag::matmul(xrh, p.gru_hW), p.gru_hb));
    return ag::add(h, ag::mul(z, ag::sub(h_tilde, h)));
}

Tensor EntityModel::decode_logits_step(const Tensor& d, const Tensor& q) const {
    Tensor d_att = ag::tanh_t(ag::matmul(ag::concat_cols(d, q), p.W_c));
    return ag::add_rowvec(ag::matmul(d_att, p.W_y), p.b_y);
}

ag::Tensor EntityModel::pair_loss(const RecordTable& table,
                                  const std::vector<std::string>& tokens) const {
    Encoded enc = encode(table);
    std::vector<Tensor> u = init_entity_memory(enc);
    std::vector<int> seq{Vocab::kBos};
    for (const auto& t : tokens) seq.push_back(text_vocab_.id(t));
    seq.push_back(Vocab::kEos);

    Tensor d = enc.d0;
    Tensor d_att_prev = zeros_row(config_.decoder_dim);
    Tensor logits_all;
    std::vector<int> targets;
    for (size_t t = 0; t + 1 < seq.size(); ++t) {
        Tensor x = ag::concat_cols(
            ag::gather_rows(p.tok_emb, {seq[t]}), d_att_prev);
        d = gru_step(x, d);
        u = update_entity_memory(d, u);
        Attention att = hierarchical_attention(d, enc, u);
        Tensor d_att =
            ag::tanh_t(ag::matmul(ag::concat_cols(d, att.q), p.W_c));
        d_att_prev = d_att;
        Tensor logits = ag::add_rowvec(ag::matmul(d_att, p.W_y), p.b_y);
        logits_all = t == 0 ? logits : ag::concat_rows(logits_all, logits);
        targets.push_back(seq[t + 1]);
    }
    return ag::nll_rows(ag::log_softmax_rows(logits_all), targets);
}

double EntityModel::token_accuracy(const std::vector<TextPair>& pairs) const {
    int correct = 0, total = 0;
    for (const auto& [table, tokens] : pairs) {
        Encoded enc = encode(table);
        std::vector<Tensor> u = init_entity_memory(enc);
        std::vector<int> seq{Vocab::kBos};
        for (const auto& t : tokens) seq.push_back(text_vocab_.id(t));
        seq.push_back(Vocab::kEos);
        Tensor d = enc.d0;
        Tensor d_att_prev = zeros_row(config_.decoder_dim);
        for (size_t t = 0; t + 1 < seq.size(); ++t) {
            Tensor x = ag::concat_cols(
                ag::gather_rows(p.tok_emb, {seq[t]}), d_att_prev);
            d = gru_step(x, d);
            u = update_entity_memory(d, u);
            Attention att = hierarchical_attention(d, enc, u);
            Tensor d_att =
                ag::tanh_t(ag::matmul(ag::concat_cols(d, att.q), p.W_c));
            d_att_prev = d_att;
            Tensor logits = ag::add_rowvec(ag::matmul(d_att, p.W_y), p.b_y);
            const int pred = static_cast<int>(
                std::max_element(logits->v.begin(), logits->v.end()) -
                logits->v.begin());
            correct += pred == seq[t + 1];
            ++total;
        }
    }
    return total ? static_cast<double>(correct) / total : 0.0;
}

std::vector<std::string> EntityModel::generate(const RecordTable& table,
                                               int max_len) const {
    Encoded enc = encode(table);
    std::vector<Tensor> u = init_entity_memory(enc);
    Tensor d = enc.d0;
    Tensor d_att_prev = zeros_row(config_.decoder_dim);
    int prev = Vocab::kBos;
    std::vector<std::string> out;
    for (int t = 0; t < max_len; ++t) {
        Tensor x =
            ag::concat_cols(ag::gather_rows(p.tok_emb, {prev}), d_att_prev);
        d = gru_step(x, d);
        u = update_entity_memory(d, u);
        Attention att = hierarchical_attention(d, enc, u);
        Tensor d_att =
            ag::tanh_t(ag::matmul(ag::concat_cols(d, att.q), p.W_c));
        d_att_prev = d_att;
        Tensor logits = ag::add_rowvec(ag::matmul(d_att, p.W_y), p.b_y);
        const int pred = static_cast<int>(
            std::max_element(logits->v.begin(), logits->v.end()) -
            logits->v.begin());
        if (pred == Vocab::kEos) break;
        out.push_back(text_vocab_.token(pred));
        prev = pred;
    }
    return out;
}

std::vector<Tensor> EntityModel::parameters() const {
    std::vector<Tensor> out{p.feat_emb, p.W_r, p.b_r};
    if (config_.mode == EncoderMode::BiLstm) {
        out.insert(out.end(), {p.lstm_fw, p.lstm_fb, p.lstm_bw, p.lstm_bb,
                               p.W_init, p.b_init});
    }
    out.insert(out.end(),
               {p.W_i, p.W_d, p.b_d, p.W_e, p.b_e, p.W_f, p.b_f, p.W_g, p.W_a,
                p.W_h, p.gru_zW, p.gru_rW, p.gru_hW, p.gru_zb, p.gru_rb,
                p.gru_hb, p.W_c, p.W_y, p.b_y, p.tok_emb});
    return out;
}

EntityModel EntityModel::train(const std::vector<TextPair>& train_pairs,
                               const std::vector<TextPair>& valid_pairs,
                               const EntityModelConfig& config,
                               const Vocab& record_vocab,
                               const Vocab& text_vocab) {
    if (train_pairs.empty())
        throw std::invalid_argument("EntityModel::train: empty corpus");
    EntityModel m(config, record_vocab, text_vocab);
    auto params = m.parameters();
    std::vector<std::vector<double>> velocity;
    for (const auto& t : params) velocity.emplace_back(t->size(), 0.0);

    std::mt19937_64 rng(config.seed ^ 0x7e3a2bULL);
    std::vector<int> order(train_pairs.size());
    std::iota(order.begin(), order.end(), 0);

    EntityModel best = m;
    double best_acc = -1;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch)) {
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(config.batch));
            ag::zero_grad(params);
            Tensor loss;
            for (size_t i = start; i < end; ++i) {
                const auto& [table, tokens] = train_pairs[order[i]];
                Tensor l = m.pair_loss(table, tokens);
                loss = i == start ? l : ag::add(loss, l);
            }
            loss = ag::scale(loss, 1.0 / (end - start));
            if (!std::isfinite(loss->v[0]))
                throw ag::NonFiniteLoss("data2text loss diverged at epoch " +
                                        std::to_string(epoch));
            ag::backward(loss);
            clip_global_norm(params, config.clip);
            for (size_t pi = 0; pi < params.size(); ++pi) {
                auto& t = params[pi];
                if (t->g.empty()) continue;
                for (int i = 0; i < t->size(); ++i) {
                    velocity[pi][i] =
                        config.momentum * velocity[pi][i] - config.lr * t->g[i];
                    t->v[i] += velocity[pi][i];
                }
            }
        }
        if (!valid_pairs.empty()) {
            const double acc = m.token_accuracy(valid_pairs);
            if (acc > best_acc) {
                best_acc = acc;
                best = EntityModel::from_json(m.to_json());
            }
        }
    }
    return valid_pairs.empty() ? m : best;
}

json EntityModel::to_json() const {
    auto dump = [](const Tensor& t) {
        return json{{"rows", t->rows}, {"cols", t->cols}, {"v", t->v}};
    };
    json weights;
    const std::vector<std::pair<std::string, Tensor>> named = {
        {"feat_emb", p.feat_emb}, {"W_r", p.W_r},       {"b_r", p.b_r},
        {"lstm_fw", p.lstm_fw},   {"lstm_fb", p.lstm_fb},
        {"lstm_bw", p.lstm_bw},   {"lstm_bb", p.lstm_bb},
        {"W_init", p.W_init},     {"b_init", p.b_init}, {"W_i", p.W_i},
        {"W_d", p.W_d},           {"b_d", p.b_d},       {"W_e", p.W_e},
        {"b_e", p.b_e},           {"W_f", p.W_f},       {"b_f", p.b_f},
        {"W_g", p.W_g},           {"W_a", p.W_a},       {"W_h", p.W_h},
        {"gru_zW", p.gru_zW},     {"gru_rW", p.gru_rW}, {"gru_hW", p.gru_hW},
        {"gru_zb", p.gru_zb},     {"gru_rb", p.gru_rb}, {"gru_hb", p.gru_hb},
        {"W_c", p.W_c},           {"W_y", p.W_y},       {"b_y", p.b_y},
        {"tok_emb", p.tok_emb}};
    for (const auto& [name, t] : named) weights[name] = dump(t);
    return {{"format", "entity-model-v1"},
            {"mode", config_.mode == EncoderMode::Avg ? "avg" : "bilstm"},
            {"feat_embed", config_.feat_embed},
            {"record_dim", config_.record_dim},
            {"decoder_dim", config_.decoder_dim},
            {"entity_dim", config_.entity_dim},
            {"token_embed", config_.token_embed},
            {"record_vocab", esprit::to_json(record_vocab_)},
            {"text_vocab", esprit::to_json(text_vocab_)},
            {"weights", weights}};
}

EntityModel EntityModel::from_json(const json& j) {
    if (j.at("format") != "entity-model-v1")
        throw std::runtime_error("unknown entity model format");
    EntityModelConfig cfg;
    cfg.mode = j.at("mode") == "avg" ? EncoderMode::Avg : EncoderMode::BiLstm;
    cfg.feat_embed = j.at("feat_embed");
    cfg.record_dim = j.at("record_dim");
    cfg.decoder_dim = j.at("decoder_dim");
    cfg.entity_dim = j.at("entity_dim");
    cfg.token_embed = j.at("token_embed");
    EntityModel m(cfg, vocab_from_json(j.at("record_vocab")),
                  vocab_from_json(j.at("text_vocab")));
    auto load = [&](const char* name, Tensor& t) {
        const auto& w = j.at("weights").at(name);
        t = ag::from_values(w.at("rows"), w.at("cols"),
                            w.at("v").get<std::vector<double>>(), true);
    };
    load("feat_emb", m.p.feat_emb);
    load("W_r", m.p.W_r);
    load("b_r", m.p.b_r);
    load("lstm_fw", m.p.lstm_fw);
    load("lstm_fb", m.p.lstm_fb);
    load("lstm_bw", m.p.lstm_bw);
    load("lstm_bb", m.p.lstm_bb);
    load("W_init", m.p.W_init);
    load("b_init", m.p.b_init);
    load("W_i", m.p.W_i);
    load("W_d", m.p.W_d);
    load("b_d", m.p.b_d);
    load("W_e", m.p.W_e);
    load("b_e", m.p.b_e);
    load("W_f", m.p.W_f);
    load("b_f", m.p.b_f);
    load("W_g", m.p.W_g);
    load("W_a", m.p.W_a);
    load("W_h", m.p.W_h);
    load("gru_zW", m.p.gru_zW);
    load("gru_rW", m.p.gru_rW);
    load("gru_hW", m.p.gru_hW);
    load("gru_zb", m.p.gru_zb);
    load("gru_rb", m.p.gru_rb);
    load("gru_hb", m.p.gru_hb);
    load("W_c", m.p.W_c);
    load("W_y", m.p.W_y);
    load("b_y", m.p.b_y);
    load("tok_emb", m.p.tok_emb);
    return m;
}

}  // namespace esprit
