#pragma once

// Entity representation functions: single-layer graph attention over
// neighborhoods, bilinear context attention over token states, and a
// per-entity gated fusion of the two.
//
// Each forward exists twice: a plain array version (scoring, inspection)
// and a Tape version (training). Both follow the same reduction order, so
// they agree to the last bit on identical inputs.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "patentkg/autodiff.hpp"
#include "patentkg/common.hpp"
#include "patentkg/graph.hpp"

namespace patentkg {

enum class Method { CNM, TRANSE, GAT, CGAT };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::CNM: return "CNM";
        case Method::TRANSE: return "TRANSE";
        case Method::GAT: return "GAT";
        case Method::CGAT: return "CGAT";
    }
    throw input_error("method_name: bad enum value");
}

inline Method method_from_string(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    if (s == "CNM") return Method::CNM;
    if (s == "TRANSE") return Method::TRANSE;
    if (s == "GAT") return Method::GAT;
    if (s == "CGAT") return Method::CGAT;
    throw config_error("unknown method: " + s + " (expected cnm, transe, gat, or cgat)");
}

struct ModelConfig {
    std::size_t dim_f = 64;       // F: entity base embedding width, GAT input
    std::size_t dim_fprime = 64;  // F': GAT output / fusion width
    std::size_t dim_d = 64;       // d: token state width
    double leaky_slope = 0.2;
    int heads = 1;
    int layers = 1;
    std::uint64_t seed = 0;
    std::size_t max_sentence_tokens = 64;

    void validate() const {
        if (dim_f == 0 || dim_fprime == 0 || dim_d == 0)
            throw config_error("model config: dimensions must be positive");
        if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
            throw config_error("model config: leaky_slope must be in (0, 1)");
        if (heads != 1 || layers != 1)
            throw config_error("model config: only heads=1, layers=1 is supported");
        if (max_sentence_tokens == 0)
            throw config_error("model config: max_sentence_tokens must be positive");
    }
};

// ---------------------------------------------------------------------------
// Parameter layout
// ---------------------------------------------------------------------------

// Relation vectors live in the same space as the entity representations the
// chosen method feeds into the translation objective.
inline std::size_t relation_dim(Method m, const ModelConfig& cfg) {
    return m == Method::TRANSE ? cfg.dim_f : cfg.dim_fprime;
}

// Creation order is fixed; it determines the RNG draw sequence.
inline ParamStore init_params(Method m, std::size_t n_entities, std::size_t vocab_size,
                              const ModelConfig& cfg) {
    cfg.validate();
    if (m == Method::CNM) throw input_error("init_params: CNM has no trainable parameters");
    if (n_entities == 0) throw input_error("init_params: empty entity set");
    ParamStore store(cfg.seed);
    store.add("entity", {n_entities, cfg.dim_f});
    store.add("relation", {1, relation_dim(m, cfg)});
    if (m == Method::GAT || m == Method::CGAT) {
        store.add("gat.w", {cfg.dim_f, cfg.dim_fprime});
        store.add("gat.a", {2 * cfg.dim_fprime});
    }
    if (m == Method::CGAT) {
        if (vocab_size == 0) throw input_error("init_params: CGAT requires a token vocabulary");
        store.add("ctx.tokens", {vocab_size, cfg.dim_d});
        store.add("ctx.w_f", {cfg.dim_f, cfg.dim_d});
        store.add("ctx.proj", {cfg.dim_d, cfg.dim_fprime});
        store.add("gate", {n_entities, cfg.dim_fprime});
    }
    return store;
}

// ---------------------------------------------------------------------------
// Graph attention, plain forward
// ---------------------------------------------------------------------------

struct GatLayer {
    Array w;  // F x F'
    Array a;  // 2F'
    double slope = 0.2;
};

inline GatLayer gat_layer_from(const ParamStore& store, const ModelConfig& cfg) {
    return GatLayer{store.value("gat.w"), store.value("gat.a"), cfg.leaky_slope};
}

struct GatResult {
    Array outputs;                               // N x F'
    std::vector<std::vector<int>> support;       // per node: sorted(N_i + self)
    std::vector<std::vector<double>> attention;  // per node: weights over support
};

namespace detail {

// y[o] = sum_i w[i*out_dim + o] * x[i]; mirrors Tape::matvec_t exactly.
inline std::vector<double> matvec_t_values(const std::vector<double>& w,
                                           const std::vector<double>& x, std::size_t in_dim,
                                           std::size_t out_dim) {
    std::vector<double> out(out_dim, 0.0);
    for (std::size_t i = 0; i < in_dim; ++i) {
        double xi = x[i];
        const double* wrow = w.data() + i * out_dim;
        for (std::size_t o = 0; o < out_dim; ++o) out[o] += wrow[o] * xi;
    }
    return out;
}

inline double dot_values(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline std::vector<int> support_of(const std::vector<int>& nbrs, int self) {
    std::vector<int> support = nbrs;
    auto it = std::lower_bound(support.begin(), support.end(), self);
    if (it == support.end() || *it != self) support.insert(it, self);
    return support;
}

}  // namespace detail

// Eqs. of the attention layer: s_ij = LeakyReLU(a^T [W h_i (+) W h_j]) over
// j in N_i plus a self-loop, alpha = softmax(s_i.), and
// out_i = Sigmoid(sum_j alpha_ij W h_j).
inline GatResult gat_forward(const GatLayer& layer, const Array& features,
                             const std::vector<std::vector<int>>& adjacency) {
    if (features.rank() != 2) throw shape_error("gat_forward: features must be rank-2");
    std::size_t n = features.rows();
    std::size_t dim_f = features.cols();
    if (layer.w.rank() != 2 || layer.w.rows() != dim_f)
        throw shape_error("gat_forward: weight matrix does not match feature width");
    std::size_t dim_out = layer.w.cols();
    if (layer.a.size() != 2 * dim_out)
        throw shape_error("gat_forward: attention vector must have length 2F'");
    if (adjacency.size() != n) throw shape_error("gat_forward: adjacency size mismatch");
    features.require_finite("gat_forward");
    layer.w.require_finite("gat_forward");
    layer.a.require_finite("gat_forward");

    std::vector<double> a_left(layer.a.data.begin(),
                               layer.a.data.begin() + static_cast<std::ptrdiff_t>(dim_out));
    std::vector<double> a_right(layer.a.data.begin() + static_cast<std::ptrdiff_t>(dim_out),
                                layer.a.data.end());

    std::vector<std::vector<double>> z(n);
    std::vector<double> left(n), right(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = detail::matvec_t_values(layer.w.data, features.row(i), dim_f, dim_out);
        left[i] = detail::dot_values(a_left, z[i]);
        right[i] = detail::dot_values(a_right, z[i]);
    }

    GatResult result;
    result.outputs = Array::zeros({n, dim_out});
    result.support.resize(n);
    result.attention.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> support = detail::support_of(adjacency[i], static_cast<int>(i));
        std::vector<double> logits(support.size());
        for (std::size_t k = 0; k < support.size(); ++k)
            logits[k] = leaky_relu_scalar(
                left[i] + right[static_cast<std::size_t>(support[k])], layer.slope);
        std::vector<double> alpha = softmax_values(logits);
        std::vector<double> agg(dim_out, 0.0);
        for (std::size_t k = 0; k < support.size(); ++k) {
            const std::vector<double>& zj = z[static_cast<std::size_t>(support[k])];
            for (std::size_t o = 0; o < dim_out; ++o) agg[o] += alpha[k] * zj[o];
        }
        for (std::size_t o = 0; o < dim_out; ++o)
            result.outputs.at(i, o) = sigmoid_scalar(agg[o]);
        result.support[i] = std::move(support);
        result.attention[i] = std::move(alpha);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Context encoder, plain forward
// ---------------------------------------------------------------------------

struct ContextEncoder {
    Array tokens;      // V x d
    Array w_f;         // F x d
    Array projection;  // d x F'
};

inline ContextEncoder context_encoder_from(const ParamStore& store) {
    return ContextEncoder{store.value("ctx.tokens"), store.value("ctx.w_f"),
                          store.value("ctx.proj")};
}

// Token states H_i are embedding rows; mu_i = e^T W_f H_i, mu = softmax(mu);
// the attention-weighted sum of token states is projected into the fusion
// space. The query `entity_vec` is the entity's base embedding.
inline Array context_forward(const ContextEncoder& enc, const std::vector<double>& entity_vec,
                             const std::vector<int>& token_ids) {
    if (token_ids.empty()) throw input_error("context_forward: empty token list");
    std::size_t dim_f = enc.w_f.rows();
    std::size_t dim_d = enc.w_f.cols();
    if (entity_vec.size() != dim_f)
        throw shape_error("context_forward: entity vector width mismatch");
    if (enc.tokens.cols() != dim_d || enc.projection.rows() != dim_d)
        throw shape_error("context_forward: token state width mismatch");
    std::size_t dim_out = enc.projection.cols();

    std::vector<double> query = detail::matvec_t_values(enc.w_f.data, entity_vec, dim_f, dim_d);
    std::vector<double> scores(token_ids.size());
    for (std::size_t k = 0; k < token_ids.size(); ++k) {
        int tok = token_ids[k];
        if (tok < 0 || static_cast<std::size_t>(tok) >= enc.tokens.rows())
            throw lookup_error("context_forward: token id out of range");
        scores[k] = detail::dot_values(query, enc.tokens.row(static_cast<std::size_t>(tok)));
    }
    std::vector<double> mu = softmax_values(scores);
    std::vector<double> blended(dim_d, 0.0);
    for (std::size_t k = 0; k < token_ids.size(); ++k) {
        std::vector<double> h = enc.tokens.row(static_cast<std::size_t>(token_ids[k]));
        for (std::size_t t = 0; t < dim_d; ++t) blended[t] += mu[k] * h[t];
    }
    return Array::vector_of(detail::matvec_t_values(enc.projection.data, blended, dim_d, dim_out));
}

// ---------------------------------------------------------------------------
// Gate fusion, plain forward
// ---------------------------------------------------------------------------

struct GateParams {
    Array gates;  // N x F'
};

inline GateParams gate_params_from(const ParamStore& store) {
    return GateParams{store.value("gate")};
}

// E = g (.) h + (1 - g) (.) e with g = sigmoid of the entity's gate vector:
// an elementwise convex combination.
inline Array gate_fuse(const GateParams& gp, int entity, const Array& h_graph,
                       const Array& e_ctx) {
    require_same_shape(h_graph, e_ctx, "gate_fuse");
    if (entity < 0 || static_cast<std::size_t>(entity) >= gp.gates.rows())
        throw lookup_error("gate_fuse: unknown entity index " + std::to_string(entity));
    if (h_graph.size() != gp.gates.cols())
        throw shape_error("gate_fuse: gate width mismatch");
    std::vector<double> gate_row = gp.gates.row(static_cast<std::size_t>(entity));
    Array out = Array::zeros(h_graph.shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double g = sigmoid_scalar(gate_row[i]);
        out.data[i] = g * h_graph.data[i] + (1.0 - g) * e_ctx.data[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Token vocabulary and per-entity sentences
// ---------------------------------------------------------------------------

struct Vocab {
    std::vector<std::string> tokens;  // tokens[0] is the reserved unknown row
    std::map<std::string, int> index;

    static Vocab build(const std::vector<std::vector<std::string>>& sentences) {
        std::set<std::string> seen;
        for (const auto& s : sentences) seen.insert(s.begin(), s.end());
        Vocab v;
        v.tokens.push_back("<unk>");
        for (const std::string& t : seen) v.tokens.push_back(t);
        for (std::size_t i = 0; i < v.tokens.size(); ++i)
            v.index[v.tokens[i]] = static_cast<int>(i);
        return v;
    }

    int id(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? 0 : it->second;
    }

    std::size_t size() const { return tokens.size(); }
};

// One sentence per graph entity. Entities without a collected sentence fall
// back to their own lexicon term.
inline std::vector<std::vector<std::string>> entity_sentences(
    const KnowledgeGraph& kg, const std::map<std::string, std::vector<std::string>>& collected,
    std::size_t max_tokens) {
    std::vector<std::vector<std::string>> out(kg.entity_count());
    for (std::size_t i = 0; i < kg.entity_count(); ++i) {
        auto it = collected.find(kg.entities[i]);
        if (it != collected.end() && !it->second.empty())
            out[i] = it->second;
        else
            out[i] = tokenize(kg.entities[i]);
        if (out[i].size() > max_tokens) out[i].resize(max_tokens);
    }
    return out;
}

inline std::vector<std::vector<int>> sentences_to_ids(
    const std::vector<std::vector<std::string>>& sentences, const Vocab& vocab) {
    std::vector<std::vector<int>> out(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        out[i].reserve(sentences[i].size());
        for (const std::string& t : sentences[i]) out[i].push_back(vocab.id(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Whole-graph encoding, plain forward
// ---------------------------------------------------------------------------

inline Array encode_entities(Method mode, const KnowledgeGraph& kg, const ParamStore& store,
                             const ModelConfig& cfg,
                             const std::vector<std::vector<int>>& sentences = {}) {
    const Array& base = store.value("entity");
    if (base.rows() != kg.entity_count())
        throw shape_error("encode_entities: entity table does not match graph");
    switch (mode) {
        case Method::TRANSE:
            return base;
        case Method::GAT:
            return gat_forward(gat_layer_from(store, cfg), base, kg.adjacency()).outputs;
        case Method::CGAT: {
            if (sentences.size() != kg.entity_count())
                throw input_error("encode_entities: CGAT requires a sentence per entity");
            GatResult gat = gat_forward(gat_layer_from(store, cfg), base, kg.adjacency());
            ContextEncoder enc = context_encoder_from(store);
            GateParams gp = gate_params_from(store);
            Array out = Array::zeros({kg.entity_count(), cfg.dim_fprime});
            for (std::size_t i = 0; i < kg.entity_count(); ++i) {
                Array h = Array::vector_of(gat.outputs.row(i));
                Array c = context_forward(enc, base.row(i), sentences[i]);
                Array fused = gate_fuse(gp, static_cast<int>(i), h, c);
                for (std::size_t o = 0; o < cfg.dim_fprime; ++o) out.at(i, o) = fused.data[o];
            }
            return out;
        }
        case Method::CNM:
            break;
    }
    throw input_error("encode_entities: CNM does not produce embeddings");
}

// ---------------------------------------------------------------------------
// Tape-based encoding for training
// ---------------------------------------------------------------------------

// Builds entity representations on a Tape, caching shared subexpressions
// (linear projections, attention logit halves) within the tape's lifetime.
class TapeEncoder {
public:
    TapeEncoder(Tape& tape, ParamStore& store, const KnowledgeGraph& kg, const ModelConfig& cfg,
                Method method, const std::vector<std::vector<int>>* sentences = nullptr)
        : tape_(tape), store_(store), kg_(kg), cfg_(cfg), method_(method), sentences_(sentences) {
        if (method_ == Method::CNM) throw input_error("TapeEncoder: CNM is not trainable");
        if (method_ == Method::CGAT &&
            (!sentences_ || sentences_->size() != kg.entity_count()))
            throw input_error("TapeEncoder: CGAT requires a sentence per entity");
    }

    Var relation() {
        if (relation_.id < 0) relation_ = tape_.param_row(store_, "relation", 0);
        return relation_;
    }

    Var encode(int i) {
        kg_.check_entity(i, "TapeEncoder::encode");
        auto it = encoded_.find(i);
        if (it != encoded_.end()) return it->second;
        Var v;
        switch (method_) {
            case Method::TRANSE: v = entity_row(i); break;
            case Method::GAT: v = gat_row(i); break;
            case Method::CGAT: {
                Var h = gat_row(i);
                Var c = context_row(i);
                Var g = tape_.sigmoid(tape_.param_row(store_, "gate", static_cast<std::size_t>(i)));
                Var one_minus_g = tape_.add_scalar_offset(tape_.scale(g, -1.0), 1.0);
                v = tape_.add(tape_.mul(g, h), tape_.mul(one_minus_g, c));
                break;
            }
            default: throw input_error("TapeEncoder: bad method");
        }
        encoded_.emplace(i, v);
        return v;
    }

private:
    Var entity_row(int i) {
        auto it = entity_rows_.find(i);
        if (it != entity_rows_.end()) return it->second;
        Var v = tape_.param_row(store_, "entity", static_cast<std::size_t>(i));
        entity_rows_.emplace(i, v);
        return v;
    }

    Var gat_w() {
        if (gat_w_.id < 0) gat_w_ = tape_.param(store_, "gat.w");
        return gat_w_;
    }

    void ensure_attention_halves() {
        if (a_left_.id < 0) {
            Var a = tape_.param(store_, "gat.a");
            a_left_ = tape_.slice(a, 0, cfg_.dim_fprime);
            a_right_ = tape_.slice(a, cfg_.dim_fprime, cfg_.dim_fprime);
        }
    }

    Var z(int i) {
        auto it = z_.find(i);
        if (it != z_.end()) return it->second;
        Var v = tape_.matvec_t(gat_w(), entity_row(i), cfg_.dim_f, cfg_.dim_fprime);
        z_.emplace(i, v);
        return v;
    }

    Var logit_left(int i) {
        ensure_attention_halves();
        auto it = left_.find(i);
        if (it != left_.end()) return it->second;
        Var v = tape_.dot(a_left_, z(i));
        left_.emplace(i, v);
        return v;
    }

    Var logit_right(int j) {
        ensure_attention_halves();
        auto it = right_.find(j);
        if (it != right_.end()) return it->second;
        Var v = tape_.dot(a_right_, z(j));
        right_.emplace(j, v);
        return v;
    }

    Var gat_row(int i) {
        auto it = gat_rows_.find(i);
        if (it != gat_rows_.end()) return it->second;
        std::vector<int> support =
            detail::support_of(kg_.adjacency()[static_cast<std::size_t>(i)], i);
        std::vector<Var> logits;
        std::vector<Var> zs;
        logits.reserve(support.size());
        zs.reserve(support.size());
        for (int j : support) {
            logits.push_back(tape_.add(logit_left(i), logit_right(j)));
            zs.push_back(z(j));
        }
        Var alpha = tape_.softmax(tape_.leaky_relu(tape_.stack(logits), cfg_.leaky_slope));
        Var v = tape_.sigmoid(tape_.weighted_sum(alpha, zs));
        gat_rows_.emplace(i, v);
        return v;
    }

    Var token_row(int tok) {
        auto it = token_rows_.find(tok);
        if (it != token_rows_.end()) return it->second;
        Var v = tape_.param_row(store_, "ctx.tokens", static_cast<std::size_t>(tok));
        token_rows_.emplace(tok, v);
        return v;
    }

    Var context_row(int i) {
        auto it = ctx_rows_.find(i);
        if (it != ctx_rows_.end()) return it->second;
        const std::vector<int>& tokens = (*sentences_)[static_cast<std::size_t>(i)];
        if (tokens.empty()) throw input_error("TapeEncoder: empty sentence for entity " +
                                              std::to_string(i));
        if (ctx_wf_.id < 0) {
            ctx_wf_ = tape_.param(store_, "ctx.w_f");
            ctx_proj_ = tape_.param(store_, "ctx.proj");
        }
        Var query = tape_.matvec_t(ctx_wf_, entity_row(i), cfg_.dim_f, cfg_.dim_d);
        std::vector<Var> scores;
        std::vector<Var> states;
        scores.reserve(tokens.size());
        states.reserve(tokens.size());
        for (int tok : tokens) {
            Var h = token_row(tok);
            scores.push_back(tape_.dot(query, h));
            states.push_back(h);
        }
        Var mu = tape_.softmax(tape_.stack(scores));
        Var blended = tape_.weighted_sum(mu, states);
        Var v = tape_.matvec_t(ctx_proj_, blended, cfg_.dim_d, cfg_.dim_fprime);
        ctx_rows_.emplace(i, v);
        return v;
    }

    Tape& tape_;
    ParamStore& store_;
    const KnowledgeGraph& kg_;
    const ModelConfig& cfg_;
    Method method_;
    const std::vector<std::vector<int>>* sentences_;

    Var relation_{}, gat_w_{}, a_left_{}, a_right_{}, ctx_wf_{}, ctx_proj_{};
    std::map<int, Var> entity_rows_, z_, left_, right_, gat_rows_, token_rows_, ctx_rows_,
        encoded_;
};

}  // namespace patentkg
