#pragma once

// Hybrid pointer network for the TSP.
//
// Per decode step the current city is turned into a relative feature context
// (coordinate deltas plus Euclidean distance), embedded, and encoded twice: by a
// transformer encoder (with a learned start-token row) and by a graph
// embedding layer over the complete city graph. An LSTM tracks the selected
// city sequence; two pointer-attention decoders score the cities against the
// two contexts and an aggregation policy turns the clipped logits into one
// distribution over unvisited cities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpn/checkpoint.hpp"
#include "hpn/tensor.hpp"
#include "hpn/tsp.hpp"

namespace hpn {

enum class Aggregator { Sum, Max, Mean, Concat };

inline std::string to_string(Aggregator a) {
    switch (a) {
        case Aggregator::Sum: return "sum";
        case Aggregator::Max: return "max";
        case Aggregator::Mean: return "mean";
        case Aggregator::Concat: return "concat";
    }
    return "sum";
}

inline Aggregator aggregator_from_string(const std::string& s) {
    if (s == "sum") return Aggregator::Sum;
    if (s == "max") return Aggregator::Max;
    if (s == "mean") return Aggregator::Mean;
    if (s == "concat") return Aggregator::Concat;
    throw std::invalid_argument("aggregator: unknown value '" + s +
                                "' (expected sum, max, mean, or concat)");
}

struct ModelConfig {
    int hidden_dim = 128;
    int transformer_layers = 6;
    int graph_layers = 3;
    int feedforward_dim = 512;
    int heads = 8;
    double tanh_clip = 10.0;
    Aggregator aggregator = Aggregator::Sum;
    // When false the encoder contexts are built once from the origin-relative
    // features and reused at every step (ablation switch).
    bool per_step_context = true;

    void validate() const {
        detail::require(hidden_dim >= 1, "model.hidden_dim: must be positive");
        detail::require(transformer_layers >= 1, "model.transformer_layers: must be positive");
        detail::require(graph_layers >= 1, "model.graph_layers: must be positive");
        detail::require(feedforward_dim >= 1, "model.feedforward_dim: must be positive");
        detail::require(heads >= 1, "model.heads: must be positive");
        detail::require(hidden_dim % heads == 0,
                        "model.heads: hidden_dim " + std::to_string(hidden_dim) +
                            " is not divisible by heads " + std::to_string(heads));
        detail::require(tanh_clip > 0.0, "model.tanh_clip: must be positive");
    }
};

enum class DecodeMode { Greedy, Sample };

struct LstmState {
    Tensor h;
    Tensor c;
};

struct EncoderOutputs {
    Tensor transformer_ctx;  // (n+1) x d, start token in row 0
    Tensor graph_ctx;        // n x d
    Tensor lstm_h;           // 1 x d query
};

struct StepDistribution {
    Tensor probs;                       // 1 x n, zero exactly on visited cities
    Tensor u1;                          // 1 x n clipped pointer logits, transformer context
    Tensor u2;                          // 1 x n clipped pointer logits, graph context
    std::vector<std::uint8_t> visited;  // mask the step was decoded under
    int chosen = -1;
};

struct RolloutOptions {
    bool keep_trace = false;
    // Forces the action sequence (one tour per instance); used for scoring a
    // fixed tour under the current parameters.
    const std::vector<std::vector<int>>* forced = nullptr;
};

struct RolloutResult {
    std::vector<std::vector<int>> tours;
    std::vector<double> lengths;
    std::vector<double> log_probs;
    // Populated only while recording; each entry is the summed log-probability
    // node for one instance's chosen actions.
    std::vector<Tensor> log_prob_nodes;
    std::vector<std::vector<StepDistribution>> traces;
};

// Relative feature rows for the current city i: (x_j - x_i, y_j - y_i, d_ij).
inline Tensor extract_features(const Instance& inst, int current) {
    const int n = inst.n();
    detail::require(current >= 0 && current < n,
                    "extract_features: current city " + std::to_string(current) +
                        " out of range for n = " + std::to_string(n));
    std::vector<double> rows(static_cast<std::size_t>(n) * 3);
    const Point c = inst.coords[current];
    for (int j = 0; j < n; ++j) {
        const double dx = inst.coords[j].x - c.x;
        const double dy = inst.coords[j].y - c.y;
        rows[3 * j + 0] = dx;
        rows[3 * j + 1] = dy;
        rows[3 * j + 2] = std::sqrt(dx * dx + dy * dy);
    }
    return Tensor::from_data(n, 3, std::move(rows));
}

// Step-0 context before any city is chosen: features relative to the origin.
inline Tensor origin_features(const Instance& inst) {
    const int n = inst.n();
    std::vector<double> rows(static_cast<std::size_t>(n) * 3);
    for (int j = 0; j < n; ++j) {
        const double dx = inst.coords[j].x;
        const double dy = inst.coords[j].y;
        rows[3 * j + 0] = dx;
        rows[3 * j + 1] = dy;
        rows[3 * j + 2] = std::sqrt(dx * dx + dy * dy);
    }
    return Tensor::from_data(n, 3, std::move(rows));
}

class HpnModel {
  public:
    struct TransformerLayer {
        Tensor Wq, Wk, Wv;
        Tensor bn1_gamma, bn1_beta;
        Tensor ff_W1, ff_b1, ff_W2, ff_b2;
        Tensor bn2_gamma, bn2_beta;
    };
    struct GraphLayer {
        Tensor Wg;        // d x d linear branch
        Tensor W_agg;     // d x d aggregation branch
        Tensor b_agg;     // 1 x d
        Tensor gate;      // 1 x 1 learned gamma
    };
    struct Lstm {
        Tensor Wx;  // d x 4d, gate order i, f, g, o
        Tensor Wh;  // d x 4d
        Tensor b;   // 1 x 4d
    };
    struct Decoder {
        Tensor Wr;  // d x d reference projection
        Tensor Wq;  // d x d query projection
        Tensor v;   // d x 1 scoring vector
    };

    HpnModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        rng::Engine eng(rng::mix(seed, 0x6d6f64656cull));
        const int d = cfg_.hidden_dim;

        feat_W_ = init_weight(eng, 3, d);
        feat_b_ = init_weight(eng, 1, d);
        point_W_ = init_weight(eng, 2, d);
        point_b_ = init_weight(eng, 1, d);
        start_token_ = init_weight(eng, 1, d);
        placeholder_ = init_weight(eng, 1, d);

        layers_.resize(cfg_.transformer_layers);
        for (auto& l : layers_) {
            l.Wq = init_weight(eng, d, d);
            l.Wk = init_weight(eng, d, d);
            l.Wv = init_weight(eng, d, d);
            l.bn1_gamma = param(1, d, 1.0);
            l.bn1_beta = param(1, d, 0.0);
            l.ff_W1 = init_weight(eng, d, cfg_.feedforward_dim);
            l.ff_b1 = init_weight(eng, 1, cfg_.feedforward_dim);
            l.ff_W2 = init_weight(eng, cfg_.feedforward_dim, d);
            l.ff_b2 = init_weight(eng, 1, d);
            l.bn2_gamma = param(1, d, 1.0);
            l.bn2_beta = param(1, d, 0.0);
        }

        glayers_.resize(cfg_.graph_layers);
        for (auto& g : glayers_) {
            g.Wg = init_weight(eng, d, d);
            g.W_agg = init_weight(eng, d, d);
            g.b_agg = init_weight(eng, 1, d);
            g.gate = param(1, 1, 0.5);
        }

        lstm_.Wx = init_weight(eng, d, 4 * d);
        lstm_.Wh = init_weight(eng, d, 4 * d);
        lstm_.b = init_weight(eng, 1, 4 * d);
        for (int j = d; j < 2 * d; ++j) lstm_.b.data()[j] += 1.0;  // forget gate bias

        dec1_.Wr = init_weight(eng, d, d);
        dec1_.Wq = init_weight(eng, d, d);
        dec1_.v = init_weight(eng, d, 1);
        dec2_.Wr = init_weight(eng, d, d);
        dec2_.Wq = init_weight(eng, d, d);
        dec2_.v = init_weight(eng, d, 1);

        agg_W_ = init_weight(eng, 2, 1);
    }

    const ModelConfig& config() const { return cfg_; }

    // Stable order and names; shared handles, so mutations feed back into the
    // model.
    std::vector<std::pair<std::string, Tensor>> named_parameters() {
        std::vector<std::pair<std::string, Tensor>> out;
        out.emplace_back("feat.W", feat_W_);
        out.emplace_back("feat.b", feat_b_);
        out.emplace_back("point.W", point_W_);
        out.emplace_back("point.b", point_b_);
        out.emplace_back("start_token", start_token_);
        out.emplace_back("placeholder", placeholder_);
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const std::string p = "enc." + std::to_string(i) + ".";
            auto& l = layers_[i];
            out.emplace_back(p + "Wq", l.Wq);
            out.emplace_back(p + "Wk", l.Wk);
            out.emplace_back(p + "Wv", l.Wv);
            out.emplace_back(p + "bn1.gamma", l.bn1_gamma);
            out.emplace_back(p + "bn1.beta", l.bn1_beta);
            out.emplace_back(p + "ff.W1", l.ff_W1);
            out.emplace_back(p + "ff.b1", l.ff_b1);
            out.emplace_back(p + "ff.W2", l.ff_W2);
            out.emplace_back(p + "ff.b2", l.ff_b2);
            out.emplace_back(p + "bn2.gamma", l.bn2_gamma);
            out.emplace_back(p + "bn2.beta", l.bn2_beta);
        }
        for (std::size_t i = 0; i < glayers_.size(); ++i) {
            const std::string p = "graph." + std::to_string(i) + ".";
            auto& g = glayers_[i];
            out.emplace_back(p + "Wg", g.Wg);
            out.emplace_back(p + "W_agg", g.W_agg);
            out.emplace_back(p + "b_agg", g.b_agg);
            out.emplace_back(p + "gate", g.gate);
        }
        out.emplace_back("lstm.Wx", lstm_.Wx);
        out.emplace_back("lstm.Wh", lstm_.Wh);
        out.emplace_back("lstm.b", lstm_.b);
        out.emplace_back("dec1.Wr", dec1_.Wr);
        out.emplace_back("dec1.Wq", dec1_.Wq);
        out.emplace_back("dec1.v", dec1_.v);
        out.emplace_back("dec2.Wr", dec2_.Wr);
        out.emplace_back("dec2.Wq", dec2_.Wq);
        out.emplace_back("dec2.v", dec2_.v);
        out.emplace_back("agg.W", agg_W_);
        return out;
    }

    std::vector<Tensor> parameters() {
        std::vector<Tensor> out;
        for (auto& [name, t] : named_parameters()) out.push_back(t);
        return out;
    }

    // Copies parameter values from a structurally identical model.
    void copy_parameters_from(HpnModel& other) {
        auto dst = named_parameters();
        auto src = other.named_parameters();
        detail::require(dst.size() == src.size(), "copy_parameters_from: structure mismatch");
        for (std::size_t i = 0; i < dst.size(); ++i) {
            detail::require(dst[i].first == src[i].first &&
                                dst[i].second.size() == src[i].second.size(),
                            "copy_parameters_from: mismatch at '" + dst[i].first + "'");
            dst[i].second.values() = src[i].second.values();
            dst[i].second.clear_grad();
        }
    }

    std::vector<CheckpointEntry> state_entries(const std::string& prefix = "") {
        std::vector<CheckpointEntry> out;
        for (auto& [name, t] : named_parameters())
            out.push_back(entry_from_tensor(prefix + name, t));
        return out;
    }

    void load_state(const Checkpoint& ck, const std::string& prefix = "") {
        for (auto& [name, t] : named_parameters()) {
            const CheckpointEntry* e = ck.find(prefix + name);
            if (!e) throw std::runtime_error("checkpoint: missing parameter '" + prefix + name + "'");
            if (e->values.size() != t.size())
                throw std::runtime_error("checkpoint: parameter '" + prefix + name + "' has " +
                                         std::to_string(e->values.size()) + " values, model expects " +
                                         std::to_string(t.size()));
            t.values() = e->values;
            t.clear_grad();
        }
    }

    // ------------------------------------------------------------------
    // Encoder stack
    // ------------------------------------------------------------------

    Tensor embed_features(const Tensor& features) {
        detail::require(features.cols() == 3, "embed_features: expected n x 3 features");
        return add_rowvec(matmul(features, feat_W_), feat_b_);
    }

    Tensor with_start_token(const Tensor& embedded) {
        return concat_rows(start_token_, embedded);
    }

    // Multi-head self-attention blocks with residual + batch norm and a
    // position-wise feed-forward, normalizing over the node rows. With a
    // single head the attention is exactly softmax(Q K^T / sqrt(d)) V.
    // attention_out, when given, collects every head's weight matrix.
    Tensor transformer_encode(const Tensor& h0, std::vector<Tensor>* attention_out = nullptr) {
        const int d = cfg_.hidden_dim;
        detail::require(h0.cols() == d, "transformer_encode: expected rows of width " +
                                            std::to_string(d) + ", got " +
                                            std::to_string(h0.cols()));
        const int dh = d / cfg_.heads;
        Tensor h = h0;
        for (auto& l : layers_) {
            Tensor q = matmul(h, l.Wq);
            Tensor k = matmul(h, l.Wk);
            Tensor v = matmul(h, l.Wv);
            std::vector<Tensor> heads;
            heads.reserve(cfg_.heads);
            for (int hd = 0; hd < cfg_.heads; ++hd) {
                Tensor qh = slice_cols(q, hd * dh, dh);
                Tensor kh = slice_cols(k, hd * dh, dh);
                Tensor vh = slice_cols(v, hd * dh, dh);
                Tensor att = softmax_rows(scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(dh)));
                if (attention_out) attention_out->push_back(att);
                heads.push_back(matmul(att, vh));
            }
            Tensor mixed = cfg_.heads == 1 ? heads[0] : concat_cols(heads);
            h = batch_norm_batchstats(add(h, mixed), l.bn1_gamma, l.bn1_beta);
            Tensor ff = add_rowvec(
                matmul(relu(add_rowvec(matmul(h, l.ff_W1), l.ff_b1)), l.ff_W2), l.ff_b2);
            h = batch_norm_batchstats(add(h, ff), l.bn2_gamma, l.bn2_beta);
        }
        return h;
    }

    // Gated graph embedding over the complete graph:
    //   X^l = gate * X^{l-1} Wg + (1 - gate) * relu(X^{l-1} / (n-1) W_agg + b)
    Tensor graph_embed(const Tensor& embedded) {
        const int n = embedded.rows();
        const double neighbors = n > 1 ? static_cast<double>(n - 1) : 1.0;
        Tensor x = embedded;
        Tensor one = Tensor::scalar(1.0);
        for (auto& g : glayers_) {
            Tensor linear = matmul(x, g.Wg);
            Tensor aggregated =
                relu(add_rowvec(matmul(scale(x, 1.0 / neighbors), g.W_agg), g.b_agg));
            x = add(mul_scalar(linear, g.gate), mul_scalar(aggregated, sub(one, g.gate)));
        }
        return x;
    }

    Tensor point_embedding(const Instance& inst, int city) {
        Tensor row = Tensor::from_data(1, 2, {inst.coords[city].x, inst.coords[city].y});
        return add_rowvec(matmul(row, point_W_), point_b_);
    }

    LstmState initial_lstm_state() const {
        return LstmState{Tensor(1, cfg_.hidden_dim, 0.0), Tensor(1, cfg_.hidden_dim, 0.0)};
    }

    // One LSTM cell step over the current-city embedding.
    LstmState point_encode(const Tensor& x, const LstmState& prev) {
        const int d = cfg_.hidden_dim;
        Tensor gates = add(add(matmul(x, lstm_.Wx), matmul(prev.h, lstm_.Wh)), lstm_.b);
        Tensor i = sigmoid(slice_cols(gates, 0, d));
        Tensor f = sigmoid(slice_cols(gates, d, d));
        Tensor g = tanh(slice_cols(gates, 2 * d, d));
        Tensor o = sigmoid(slice_cols(gates, 3 * d, d));
        Tensor c = add(mul(f, prev.c), mul(i, g));
        Tensor h = mul(o, tanh(c));
        return LstmState{h, c};
    }

    // Pointer logits against one reference context, clipped to [-C, C].
    Tensor pointer_logits(const Decoder& dec, const Tensor& refs, const Tensor& query) {
        Tensor t = tanh(add_rowvec(matmul(refs, dec.Wr), matmul(query, dec.Wq)));
        Tensor u = transpose(matmul(t, dec.v));  // 1 x n
        return scale(tanh(u), cfg_.tanh_clip);
    }

    Tensor aggregate_logits(const Tensor& u1, const Tensor& u2) {
        switch (cfg_.aggregator) {
            case Aggregator::Sum: return add(u1, u2);
            case Aggregator::Max: return max_elem(u1, u2);
            case Aggregator::Mean: return scale(add(u1, u2), 0.5);
            case Aggregator::Concat: {
                Tensor cat = concat_cols({transpose(u1), transpose(u2)});  // n x 2
                return transpose(matmul(cat, agg_W_));
            }
        }
        throw std::logic_error("aggregate_logits: unreachable");
    }

    StepDistribution decode_step(const EncoderOutputs& enc,
                                 const std::vector<std::uint8_t>& visited) {
        const int n = enc.graph_ctx.rows();
        detail::require(static_cast<int>(visited.size()) == n,
                        "decode_step: mask size does not match city count");
        bool any_free = false;
        for (auto m : visited)
            if (!m) any_free = true;
        detail::require(any_free, "decode_step: every city is already visited");

        Tensor cities = slice_rows(enc.transformer_ctx, 1, n);  // drop the start-token row
        StepDistribution out;
        out.u1 = pointer_logits(dec1_, cities, enc.lstm_h);
        out.u2 = pointer_logits(dec2_, enc.graph_ctx, enc.lstm_h);
        Tensor agg = aggregate_logits(out.u1, out.u2);
        out.probs = softmax_rows(agg, &visited);
        out.visited = visited;
        return out;
    }

    // ------------------------------------------------------------------
    // Rollout
    // ------------------------------------------------------------------

    RolloutResult rollout(const std::vector<Instance>& batch, DecodeMode mode,
                          std::uint64_t seed = 0, const RolloutOptions& opt = {}) {
        detail::require(!batch.empty(), "rollout: empty batch");
        if (opt.forced)
            detail::require(opt.forced->size() == batch.size(),
                            "rollout: forced tours do not match batch size");
        RolloutResult res;
        res.tours.resize(batch.size());
        res.lengths.resize(batch.size());
        res.log_probs.resize(batch.size());
        if (autograd::recording()) res.log_prob_nodes.resize(batch.size());
        if (opt.keep_trace) res.traces.resize(batch.size());

        for (std::size_t b = 0; b < batch.size(); ++b) {
            const Instance& inst = batch[b];
            const int n = inst.n();
            rng::Engine eng(rng::mix(seed, b));
            std::vector<std::uint8_t> visited(n, 0);
            std::vector<int> tour;
            tour.reserve(n);
            LstmState st = initial_lstm_state();
            Tensor logp;
            EncoderOutputs enc;
            int current = -1;

            for (int step = 0; step < n; ++step) {
                if (step == 0 || cfg_.per_step_context) {
                    Tensor feats =
                        current < 0 ? origin_features(inst) : extract_features(inst, current);
                    Tensor emb = embed_features(feats);
                    enc.transformer_ctx = transformer_encode(with_start_token(emb));
                    enc.graph_ctx = graph_embed(emb);
                }
                Tensor x = step == 0 ? placeholder_ : point_embedding(inst, current);
                st = point_encode(x, st);
                enc.lstm_h = st.h;

                StepDistribution dist = decode_step(enc, visited);
                int choice;
                if (opt.forced) {
                    choice = (*opt.forced)[b][step];
                    detail::require(choice >= 0 && choice < n && !visited[choice],
                                    "rollout: forced tour is not a valid permutation");
                } else if (mode == DecodeMode::Greedy) {
                    choice = argmax_prob(dist.probs);
                } else {
                    choice = sample_prob(dist.probs, eng);
                }

                Tensor lp = log(select(dist.probs, choice));
                logp = step == 0 ? lp : add(logp, lp);
                visited[choice] = 1;
                tour.push_back(choice);
                current = choice;
                if (opt.keep_trace) {
                    dist.chosen = choice;
                    res.traces[b].push_back(dist);
                }
            }

            res.tours[b] = tour;
            res.lengths[b] = tour_length(inst, tour);
            res.log_probs[b] = logp.value();
            if (autograd::recording()) res.log_prob_nodes[b] = logp;
        }
        return res;
    }

  private:
    static int argmax_prob(const Tensor& probs) {
        int best = 0;
        double bv = probs.data()[0];
        for (int j = 1; j < probs.cols(); ++j)
            if (probs.data()[j] > bv) {
                bv = probs.data()[j];
                best = j;
            }
        return best;
    }

    // Draws from the distribution; probabilities below 1e-12 count as zero.
    static int sample_prob(const Tensor& probs, rng::Engine& eng) {
        constexpr double kFloor = 1e-12;
        double total = 0.0;
        for (int j = 0; j < probs.cols(); ++j)
            if (probs.data()[j] >= kFloor) total += probs.data()[j];
        const double r = rng::unit(eng) * total;
        double acc = 0.0;
        int last = -1;
        for (int j = 0; j < probs.cols(); ++j) {
            const double p = probs.data()[j];
            if (p < kFloor) continue;
            acc += p;
            last = j;
            if (r < acc) return j;
        }
        return last;
    }

    static Tensor param(int r, int c, double fill) { return Tensor(r, c, fill, true); }

    Tensor init_weight(rng::Engine& eng, int r, int c) {
        const double k = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_dim));
        Tensor t(r, c, 0.0, true);
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = (2.0 * rng::unit(eng) - 1.0) * k;
        return t;
    }

    ModelConfig cfg_;
    Tensor feat_W_, feat_b_;
    Tensor point_W_, point_b_;
    Tensor start_token_, placeholder_;
    std::vector<TransformerLayer> layers_;
    std::vector<GraphLayer> glayers_;
    Lstm lstm_;
    Decoder dec1_, dec2_;
    Tensor agg_W_;
};

}  // namespace hpn
