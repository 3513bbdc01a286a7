#include "esprit/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace esprit {

namespace {

using ag::Tensor;

const std::vector<std::string> kInitCue{"in", "the", "physical", "simulation"};
const std::vector<std::string> kSimCue{"the", "red", "ball", "is", "placed",
                                       "and"};

}  // namespace

Prompt build_context_init(const std::vector<ObjectRecord>& objects) {
    Prompt p;
    p.kind = Prompt::Kind::Init;
    for (const auto& o : objects) {
        std::istringstream is(object_phrase(o));
        std::string w;
        while (is >> w) p.context.push_back(w);
    }
    p.context.insert(p.context.end(), kInitCue.begin(), kInitCue.end());
    return p;
}

Prompt build_context_sim(const std::vector<std::string>& init_description) {
    Prompt p;
    p.kind = Prompt::Kind::Sim;
    p.context = init_description;
    p.context.insert(p.context.end(), kSimCue.begin(), kSimCue.end());
    return p;
}

Lm::Lm(const LmConfig& config, const Vocab& vocab)
    : config_(config), vocab_(vocab) {
    if (config.dim % config.heads != 0)
        throw std::invalid_argument("lm: dim must divide by heads");
    std::mt19937_64 rng(config.seed);
    auto init = [&](int r, int c) {
        return ag::uniform_init(r, c, std::sqrt(6.0 / (r + c)), rng);
    };
    auto ones = [](int c) {
        return ag::from_values(1, c, std::vector<double>(c, 1.0), true);
    };
    const int d = config.dim;
    tok_emb = init(vocab_.size(), d);
    pos_emb = init(config.max_seq, d);
    final_g = ones(d);
    final_b = ag::make(1, d, true);
    for (int b = 0; b < config.blocks; ++b) {
        Block blk;
        blk.ln1_g = ones(d);
        blk.ln1_b = ag::make(1, d, true);
        blk.ln2_g = ones(d);
        blk.ln2_b = ag::make(1, d, true);
        blk.W_q = init(d, d);
        blk.W_k = init(d, d);
        blk.W_v = init(d, d);
        blk.W_o = init(d, d);
        blk.ffn_W1 = init(d, config.ffn);
        blk.ffn_b1 = ag::make(1, config.ffn, true);
        blk.ffn_W2 = init(config.ffn, d);
        blk.ffn_b2 = ag::make(1, d, true);
        blocks.push_back(std::move(blk));
    }
}

Tensor Lm::logits(const std::vector<int>& tokens) const {
    const int n = static_cast<int>(tokens.size());
    if (n == 0 || n > config_.max_seq)
        throw std::invalid_argument("lm: bad sequence length");
    std::vector<int> pos(n);
    std::iota(pos.begin(), pos.end(), 0);
    Tensor h = ag::add(ag::gather_rows(tok_emb, tokens),
                       ag::gather_rows(pos_emb, pos));

    // strictly-upper-triangular -inf mask shared by every block
    Tensor mask = ag::make(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = r + 1; c < n; ++c) mask->at(r, c) = -1e9;

    const int hd = config_.dim / config_.heads;
    for (const auto& blk : blocks) {
        Tensor x = ag::layer_norm_rows(h, blk.ln1_g, blk.ln1_b);
        Tensor Q = ag::matmul(x, blk.W_q);
        Tensor K = ag::matmul(x, blk.W_k);
        Tensor V = ag::matmul(x, blk.W_v);
        Tensor heads_out;
        for (int hdx = 0; hdx < config_.heads; ++hdx) {
            Tensor q = ag::slice_cols(Q, hdx * hd, (hdx + 1) * hd);
            Tensor k = ag::slice_cols(K, hdx * hd, (hdx + 1) * hd);
            Tensor v = ag::slice_cols(V, hdx * hd, (hdx + 1) * hd);
            Tensor scores = ag::add(
                ag::scale(ag::matmul(q, ag::transpose(k)), 1.0 / std::sqrt(hd)),
                mask);
            Tensor out = ag::matmul(ag::softmax_rows(scores), v);
            heads_out = hdx == 0 ? out : ag::concat_cols(heads_out, out);
        }
        h = ag::add(h, ag::matmul(heads_out, blk.W_o));

        Tensor y = ag::layer_norm_rows(h, blk.ln2_g, blk.ln2_b);
        y = ag::relu(ag::add_rowvec(ag::matmul(y, blk.ffn_W1), blk.ffn_b1));
        y = ag::add_rowvec(ag::matmul(y, blk.ffn_W2), blk.ffn_b2);
        h = ag::add(h, y);
    }
    h = ag::layer_norm_rows(h, final_g, final_b);
    return ag::matmul(h, ag::transpose(tok_emb));
}

namespace {

std::vector<int> prompt_sequence(const Vocab& v, const Prompt& p,
                                 int* context_len) {
    std::vector<int> seq;
    for (const auto& t : p.context) seq.push_back(v.id(t));
    *context_len = static_cast<int>(seq.size());
    for (const auto& t : p.target) seq.push_back(v.id(t));
    seq.push_back(Vocab::kEos);
    return seq;
}

}  // namespace

Tensor Lm::prompt_loss(const Prompt& prompt) const {
    int ctx = 0;
    std::vector<int> seq = prompt_sequence(vocab_, prompt, &ctx);
    Tensor lg = logits(std::vector<int>(seq.begin(), seq.end() - 1));
    // keep only rows predicting continuation tokens (positions >= ctx)
    Tensor rows = ag::slice_rows(lg, ctx - 1, lg->rows);
    std::vector<int> targets(seq.begin() + ctx, seq.end());
    return ag::nll_rows(ag::log_softmax_rows(rows), targets);
}

double Lm::continuation_accuracy(const std::vector<Prompt>& prompts) const {
    int correct = 0, total = 0;
    for (const auto& p : prompts) {
        int ctx = 0;
        std::vector<int> seq = prompt_sequence(vocab_, p, &ctx);
        Tensor lg = logits(std::vector<int>(seq.begin(), seq.end() - 1));
        for (int t = ctx - 1; t < lg->rows; ++t) {
            int arg = 0;
            for (int c = 1; c < lg->cols; ++c)
                if (lg->at(t, c) > lg->at(t, arg)) arg = c;
            correct += arg == seq[t + 1];
            ++total;
        }
    }
    return total ? static_cast<double>(correct) / total : 0.0;
}

double Lm::perplexity(const std::vector<Prompt>& prompts) const {
    double nll = 0;
    int n = 0;
    for (const auto& p : prompts) {
        const int toks = static_cast<int>(p.target.size()) + 1;
        nll += prompt_loss(p)->v[0] * toks;
        n += toks;
    }
    return std::exp(nll / n);
}

std::vector<std::string> Lm::sample(const std::vector<std::string>& context,
                                    std::mt19937_64& rng, int top_k,
                                    double temperature, int max_len) const {
    if (top_k < 1 || temperature <= 0)
        throw std::invalid_argument("lm: bad sampling parameters");
    std::vector<int> seq;
    for (const auto& t : context) seq.push_back(vocab_.id(t));
    std::vector<std::string> out;
    for (int step = 0; step < max_len; ++step) {
        if (static_cast<int>(seq.size()) >= config_.max_seq) break;
        Tensor lg = logits(seq);
        const int last = lg->rows - 1;
        std::vector<std::pair<double, int>> scored;
        for (int c = 0; c < lg->cols; ++c)
            scored.push_back({lg->at(last, c), c});
        const int k = std::min<int>(top_k, static_cast<int>(scored.size()));
        std::partial_sort(scored.begin(), scored.begin() + k, scored.end(),
                          [](const auto& a, const auto& b) {
                              return a.first > b.first;
                          });
        double mx = scored[0].first / temperature, sum = 0;
        std::vector<double> probs(k);
        for (int i = 0; i < k; ++i) {
            probs[i] = std::exp(scored[i].first / temperature - mx);
            sum += probs[i];
        }
        std::uniform_real_distribution<double> d(0.0, sum);
        double r = d(rng);
        int pick = k - 1;
        for (int i = 0; i < k; ++i) {
            if (r < probs[i]) {
                pick = i;
                break;
            }
            r -= probs[i];
        }
        const int tok = scored[pick].second;
        if (tok == Vocab::kEos) break;
        out.push_back(vocab_.token(tok));
        seq.push_back(tok);
    }
    return out;
}

std::vector<Tensor> Lm::parameters() const {
    std::vector<Tensor> p{tok_emb, pos_emb, final_g, final_b};
    for (const auto& b : blocks)
        p.insert(p.end(), {b.ln1_g, b.ln1_b, b.ln2_g, b.ln2_b, b.W_q, b.W_k,
                           b.W_v, b.W_o, b.ffn_W1, b.ffn_b1, b.ffn_W2,
                           b.ffn_b2});
    return p;
}

Lm Lm::train(const std::vector<Prompt>& train_prompts,
             const std::vector<Prompt>& valid_prompts, const LmConfig& config,
             const Vocab& vocab) {
    if (train_prompts.empty())
        throw std::invalid_argument("Lm::train: empty corpus");
    Lm m(config, vocab);
    auto params = m.parameters();
    std::vector<std::vector<double>> adam_m, adam_v;
    for (const auto& t : params) {
        adam_m.emplace_back(t->size(), 0.0);
        adam_v.emplace_back(t->size(), 0.0);
    }

    std::mt19937_64 rng(config.seed ^ 0x1a2bULL);
    std::vector<int> order(train_prompts.size());
    std::iota(order.begin(), order.end(), 0);

    const int steps_per_epoch = static_cast<int>(
        (train_prompts.size() + config.batch - 1) / config.batch);
    const int total_steps = steps_per_epoch * config.max_epochs;
    const int warmup_steps =
        std::max(1, static_cast<int>(std::ceil(config.warmup * total_steps)));
    constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;

    Lm best = m;
    double best_ppl = std::numeric_limits<double>::infinity();
    int step = 0;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch)) {
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(config.batch));
            ag::zero_grad(params);
            Tensor loss;
            for (size_t i = start; i < end; ++i) {
                Tensor l = m.prompt_loss(train_prompts[order[i]]);
                loss = i == start ? l : ag::add(loss, l);
            }
            loss = ag::scale(loss, 1.0 / (end - start));
            if (!std::isfinite(loss->v[0]))
                throw ag::NonFiniteLoss("lm loss diverged at epoch " +
                                        std::to_string(epoch));
            ag::backward(loss);
            ++step;
            const double lr_t =
                step < warmup_steps
                    ? config.lr * step / warmup_steps
                    : config.lr;
            for (size_t pi = 0; pi < params.size(); ++pi) {
                auto& t = params[pi];
                if (t->g.empty()) continue;
                for (int i = 0; i < t->size(); ++i) {
                    adam_m[pi][i] = kB1 * adam_m[pi][i] + (1 - kB1) * t->g[i];
                    adam_v[pi][i] =
                        kB2 * adam_v[pi][i] + (1 - kB2) * t->g[i] * t->g[i];
                    const double mh = adam_m[pi][i] / (1 - std::pow(kB1, step));
                    const double vh = adam_v[pi][i] / (1 - std::pow(kB2, step));
                    t->v[i] -= lr_t * (mh / (std::sqrt(vh) + kEps) +
                                       config.weight_decay * t->v[i]);
                }
            }
        }
        if (!valid_prompts.empty()) {
            const double ppl = m.perplexity(valid_prompts);
            if (ppl < best_ppl) {
                best_ppl = ppl;
                best = Lm::from_json(m.to_json());
            }
        }
    }
    return valid_prompts.empty() ? m : best;
}

json Lm::to_json() const {
    auto dump = [](const Tensor& t) {
        return json{{"rows", t->rows}, {"cols", t->cols}, {"v", t->v}};
    };
    json blks = json::array();
    for (const auto& b : blocks)
        blks.push_back({{"ln1_g", dump(b.ln1_g)}, {"ln1_b", dump(b.ln1_b)},
                        {"ln2_g", dump(b.ln2_g)}, {"ln2_b", dump(b.ln2_b)},
                        {"W_q", dump(b.W_q)},     {"W_k", dump(b.W_k)},
                        {"W_v", dump(b.W_v)},     {"W_o", dump(b.W_o)},
                        {"ffn_W1", dump(b.ffn_W1)}, {"ffn_b1", dump(b.ffn_b1)},
                        {"ffn_W2", dump(b.ffn_W2)}, {"ffn_b2", dump(b.ffn_b2)}});
    return {{"format", "lm-v1"},
            {"dim", config_.dim},
            {"ffn", config_.ffn},
            {"heads", config_.heads},
            {"blocks", config_.blocks},
            {"max_seq", config_.max_seq},
            {"vocab", esprit::to_json(vocab_)},
            {"tok_emb", dump(tok_emb)},
            {"pos_emb", dump(pos_emb)},
            {"final_g", dump(final_g)},
            {"final_b", dump(final_b)},
            {"block_weights", blks}};
}

Lm Lm::from_json(const json& j) {
    if (j.at("format") != "lm-v1") throw std::runtime_error("unknown lm format");
    LmConfig cfg;
    cfg.dim = j.at("dim");
    cfg.ffn = j.at("ffn");
    cfg.heads = j.at("heads");
    cfg.blocks = j.at("blocks");
    cfg.max_seq = j.at("max_seq");
    Lm m(cfg, vocab_from_json(j.at("vocab")));
    auto load = [&](const json& w) {
        return ag::from_values(w.at("rows"), w.at("cols"),
                               w.at("v").get<std::vector<double>>(), true);
    };
    m.tok_emb = load(j.at("tok_emb"));
    m.pos_emb = load(j.at("pos_emb"));
    m.final_g = load(j.at("final_g"));
    m.final_b = load(j.at("final_b"));
    for (int b = 0; b < cfg.blocks; ++b) {
        const auto& bw = j.at("block_weights").at(b);
        auto& blk = m.blocks[b];
        blk.ln1_g = load(bw.at("ln1_g"));
        blk.ln1_b = load(bw.at("ln1_b"));
        blk.ln2_g = load(bw.at("ln2_g"));
        blk.ln2_b = load(bw.at("ln2_b"));
        blk.W_q = load(bw.at("W_q"));
        blk.W_k = load(bw.at("W_k"));
        blk.W_v = load(bw.at("W_v"));
        blk.W_o = load(bw.at("W_o"));
        blk.ffn_W1 = load(bw.at("ffn_W1"));
        blk.ffn_b1 = load(bw.at("ffn_b1"));
        blk.ffn_W2 = load(bw.at("ffn_W2"));
        blk.ffn_b2 = load(bw.at("ffn_b2"));
    }
    return m;
}

}  // namespace esprit
