#pragma once

// Link prediction over a cutoff-year graph: the common-neighbor baseline
// and translation-embedding models (plain table, GAT-encoded, or
// context-gated GAT) trained with a margin hinge objective.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patentkg/autodiff.hpp"
#include "patentkg/checkpoint.hpp"
#include "patentkg/common.hpp"
#include "patentkg/encoders.hpp"
#include "patentkg/graph.hpp"

namespace patentkg {

// ---------------------------------------------------------------------------
// Common neighbor method
// ---------------------------------------------------------------------------

inline int cnm_score(const KnowledgeGraph& kg, int x, int y) {
    if (x == y) throw input_error("cnm_score: x and y must differ");
    kg.check_entity(x, "cnm_score");
    kg.check_entity(y, "cnm_score");
    const auto& adj = kg.adjacency();
    if (adj.empty()) return 0;
    const std::vector<int>& a = adj[static_cast<std::size_t>(x)];
    const std::vector<int>& b = adj[static_cast<std::size_t>(y)];
    int count = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (a[i] > b[j]) ++j;
        else { ++count; ++i; ++j; }
    }
    return count;
}

struct Link {
    int i = -1, j = -1;  // canonical i < j, indices into the source graph
    std::string id_i, id_j;
    double score = 0.0;
};

struct PredictedLinkSet {
    int cutoff_year = 0;
    std::string method;
    double rho_or_zeta = 0.0;  // CNM: threshold applied; others: rho
    std::vector<Link> links;   // sorted by score desc, ties by (i, j)
    std::string warning;
};

namespace detail {

inline void sort_links(std::vector<Link>& links) {
    std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::make_pair(a.i, a.j) < std::make_pair(b.i, b.j);
    });
}

inline Link make_link(const KnowledgeGraph& kg, int i, int j, double score) {
    return Link{i, j, kg.entities[static_cast<std::size_t>(i)],
                kg.entities[static_cast<std::size_t>(j)], score};
}

}  // namespace detail

// Threshold rule: with no explicit zeta, M is the maximum common-neighbor
// count over non-adjacent pairs and the threshold is ceil(M/2). Every
// non-adjacent pair scoring at or above the threshold is emitted.
inline PredictedLinkSet cnm_predict(const KnowledgeGraph& kg, std::optional<int> zeta = {}) {
    PredictedLinkSet out;
    out.cutoff_year = kg.cutoff_year;
    out.method = method_name(Method::CNM);
    int n = static_cast<int>(kg.entity_count());
    if (n < 2) {
        out.rho_or_zeta = zeta.value_or(0);
        return out;
    }
    std::vector<std::pair<std::pair<int, int>, int>> scored;
    int max_score = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (kg.has_edge(i, j)) continue;
            int s = cnm_score(kg, i, j);
            scored.push_back({{i, j}, s});
            max_score = std::max(max_score, s);
        }
    }
    int threshold = zeta.value_or((max_score + 1) / 2);
    out.rho_or_zeta = threshold;
    for (const auto& [pair, s] : scored) {
        if (s >= threshold)
            out.links.push_back(detail::make_link(kg, pair.first, pair.second, s));
    }
    detail::sort_links(out.links);
    return out;
}

// ---------------------------------------------------------------------------
// Translation model
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 200;
    double learning_rate = 0.01;
    double margin = 1.0;  // gamma
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
    ModelConfig model;

    void validate() const {
        if (!(margin > 0.0)) throw config_error("train config: margin must be positive");
        if (!(learning_rate > 0.0)) throw config_error("train config: learning rate must be positive");
        if (batch_size == 0) throw config_error("train config: batch size must be positive");
        model.validate();
    }
};

struct TransEModel {
    Method method = Method::TRANSE;
    ModelConfig config;
    double margin = 1.0;
    std::vector<std::string> entity_ids;
    ParamStore params;
    Vocab vocab;                              // CGAT only
    std::vector<std::vector<int>> sentences;  // CGAT only, token ids per entity
    std::vector<double> loss_trace;
    Array repr;  // entity representations, one row per entity

    std::vector<double> relation_vector() const { return params.value("relation").row(0); }
};

// score = -d(h + r, t) with d the squared L2 distance; higher is more
// plausible, 0 is the maximum.
inline double transe_score(const TransEModel& model, int head, int tail) {
    if (model.repr.size() == 0) throw input_error("transe_score: representations not bound");
    std::size_t n = model.repr.rows();
    if (head < 0 || tail < 0 || static_cast<std::size_t>(head) >= n ||
        static_cast<std::size_t>(tail) >= n)
        throw lookup_error("transe_score: unknown entity index");
    std::vector<double> r = model.relation_vector();
    double sum = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
        double d = model.repr.at(static_cast<std::size_t>(head), k) + r[k] -
                   model.repr.at(static_cast<std::size_t>(tail), k);
        sum += d * d;
    }
    return -sum;
}

// Margin hinge over 1:1 paired positives and corrupted negatives:
// sum_k max(0, gamma + d(h_k + r, t_k) - d(h'_k + r, t'_k)).
inline double transe_loss(const TransEModel& model,
                          const std::vector<std::pair<int, int>>& positives,
                          const std::vector<std::pair<int, int>>& negatives) {
    if (positives.size() != negatives.size())
        throw input_error("transe_loss: positives and negatives must pair 1:1");
    double total = 0.0;
    for (std::size_t k = 0; k < positives.size(); ++k) {
        double d_pos = -transe_score(model, positives[k].first, positives[k].second);
        double d_neg = -transe_score(model, negatives[k].first, negatives[k].second);
        total += std::max(0.0, model.margin + d_pos - d_neg);
    }
    return total;
}

// For each positive, a fair coin picks head or tail; the chosen endpoint is
// replaced by a uniformly random *different* entity. The corrupted pair is
// not filtered against existing edges.
inline std::vector<std::pair<int, int>> sample_negatives(
    const KnowledgeGraph& kg, const std::vector<std::pair<int, int>>& positives,
    std::uint64_t seed) {
    std::size_t n = kg.entity_count();
    if (n < 2) throw input_error("sample_negatives: need at least 2 entities");
    DetRng rng(seed);
    std::vector<std::pair<int, int>> out;
    out.reserve(positives.size());
    for (const auto& [h, t] : positives) {
        bool corrupt_head = rng.coin();
        int original = corrupt_head ? h : t;
        int repl = static_cast<int>(rng.next_below(n - 1));
        if (repl >= original) ++repl;
        out.push_back(corrupt_head ? std::make_pair(repl, t) : std::make_pair(h, repl));
    }
    return out;
}

namespace detail {

inline Var batch_loss(Tape& tape, TapeEncoder& enc, double margin,
                      const std::pair<int, int>* positives, const std::pair<int, int>* negatives,
                      std::size_t count) {
    Var rel = enc.relation();
    std::vector<Var> terms;
    terms.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Var d_pos = tape.sq_l2(tape.add(enc.encode(positives[k].first), rel),
                               enc.encode(positives[k].second));
        Var d_neg = tape.sq_l2(tape.add(enc.encode(negatives[k].first), rel),
                               enc.encode(negatives[k].second));
        terms.push_back(tape.hinge(tape.add_scalar_offset(tape.sub(d_pos, d_neg), margin)));
    }
    return tape.add_many(terms);
}

inline void renormalize_entity_rows(ParamStore& store) {
    Array& table = store.value("entity");
    std::size_t dim = table.cols();
    for (std::size_t i = 0; i < table.rows(); ++i) {
        double norm2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) norm2 += table.at(i, k) * table.at(i, k);
        double norm = std::sqrt(norm2);
        if (norm > 0.0)
            for (std::size_t k = 0; k < dim; ++k) table.at(i, k) /= norm;
    }
}

}  // namespace detail

// Minimizes the margin objective by mini-batch SGD. For GAT/CGAT the head
// and tail representations are encoder outputs and gradients flow into all
// encoder parameters. Entity base embeddings are renormalized to unit L2
// after every epoch. Zero epochs returns the seeded initialization as-is.
inline TransEModel train(Method method, const KnowledgeGraph& kg, const TrainConfig& cfg,
                         const std::map<std::string, std::vector<std::string>>&
                             context_sentences = {}) {
    if (method == Method::CNM) throw input_error("train: CNM is not a trainable method");
    cfg.validate();
    if (kg.entity_count() == 0) throw input_error("train: empty graph");

    TransEModel model;
    model.method = method;
    model.config = cfg.model;
    model.margin = cfg.margin;
    model.entity_ids = kg.entities;

    if (method == Method::CGAT) {
        auto sentences = entity_sentences(kg, context_sentences, cfg.model.max_sentence_tokens);
        model.vocab = Vocab::build(sentences);
        model.sentences = sentences_to_ids(sentences, model.vocab);
    }
    model.params = init_params(method, kg.entity_count(), model.vocab.size(), cfg.model);

    std::vector<std::pair<int, int>> positives;
    for (const auto& [edge, year] : kg.edges) positives.push_back(edge);

    DetRng rng(cfg.seed);
    const std::vector<std::vector<int>>* sent_ids =
        method == Method::CGAT ? &model.sentences : nullptr;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        if (!positives.empty()) {
            std::vector<std::pair<int, int>> shuffled = positives;
            rng.shuffle(shuffled);
            std::vector<std::pair<int, int>> negatives =
                sample_negatives(kg, shuffled, rng.next_u64());
            for (std::size_t start = 0; start < shuffled.size(); start += cfg.batch_size) {
                std::size_t count = std::min(cfg.batch_size, shuffled.size() - start);
                Tape tape;
                TapeEncoder enc(tape, model.params, kg, cfg.model, method, sent_ids);
                Var loss = detail::batch_loss(tape, enc, cfg.margin, shuffled.data() + start,
                                              negatives.data() + start, count);
                double value = tape.scalar_value(loss);
                if (!std::isfinite(value))
                    throw numeric_error("train: non-finite loss at epoch " +
                                        std::to_string(epoch) + ", batch " +
                                        std::to_string(start / cfg.batch_size));
                epoch_loss += value;
                model.params.zero_grads();
                tape.backward(loss, model.params);
                model.params.sgd_step(cfg.learning_rate);
            }
            detail::renormalize_entity_rows(model.params);
        }
        model.loss_trace.push_back(epoch_loss);
    }

    model.repr = encode_entities(method, kg, model.params, cfg.model, model.sentences);
    return model;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

struct PredictConfig {
    double rho = 0.1;        // top-K as a fraction of the edge count
    bool all_pairs = false;  // candidate pool: all non-adjacent pairs
};

// Non-adjacent pairs, optionally restricted to pairs at graph distance 2.
inline std::vector<std::pair<int, int>> candidate_pairs(const KnowledgeGraph& kg,
                                                        bool all_pairs) {
    std::vector<std::pair<int, int>> out;
    int n = static_cast<int>(kg.entity_count());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (kg.has_edge(i, j)) continue;
            if (all_pairs || cnm_score(kg, i, j) > 0) out.push_back({i, j});
        }
    }
    return out;
}

// Scores candidates with the translation model over the canonical (i < j)
// direction and keeps the top round(rho * |edges|).
inline PredictedLinkSet predict_links(Method method, const KnowledgeGraph& kg,
                                      const TransEModel& model, const PredictConfig& cfg) {
    if (method == Method::CNM) throw input_error("predict_links: use cnm_predict for CNM");
    if (model.method != method) throw input_error("predict_links: model was trained for " +
                                                  method_name(model.method));
    if (model.entity_ids != kg.entities)
        throw input_error("predict_links: model entities do not match graph");
    if (!(cfg.rho > 0.0)) throw config_error("predict_links: rho must be positive");

    PredictedLinkSet out;
    out.cutoff_year = kg.cutoff_year;
    out.method = method_name(method);
    out.rho_or_zeta = cfg.rho;

    std::vector<std::pair<int, int>> candidates = candidate_pairs(kg, cfg.all_pairs);
    if (candidates.empty()) return out;

    std::size_t k = static_cast<std::size_t>(std::llround(cfg.rho * static_cast<double>(kg.edge_count())));
    if (k > candidates.size()) {
        out.warning = "requested top-" + std::to_string(k) + " but only " +
                      std::to_string(candidates.size()) + " candidates exist";
        k = candidates.size();
    }

    for (const auto& [i, j] : candidates)
        out.links.push_back(detail::make_link(kg, i, j, transe_score(model, i, j)));
    detail::sort_links(out.links);
    out.links.resize(k);
    return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline nlohmann::json model_to_json(const TransEModel& model) {
    nlohmann::json j = param_store_to_json(model.params);
    j["method"] = method_name(model.method);
    j["margin"] = model.margin;
    j["config"] = {{"dim_f", model.config.dim_f},
                   {"dim_fprime", model.config.dim_fprime},
                   {"dim_d", model.config.dim_d},
                   {"leaky_slope", model.config.leaky_slope},
                   {"heads", model.config.heads},
                   {"layers", model.config.layers},
                   {"seed", model.config.seed},
                   {"max_sentence_tokens", model.config.max_sentence_tokens}};
    j["entity_ids"] = model.entity_ids;
    j["vocab"] = model.vocab.tokens;
    j["sentences"] = model.sentences;
    j["loss_trace"] = model.loss_trace;
    return j;
}

inline TransEModel model_from_json(const nlohmann::json& j) {
    TransEModel model;
    model.params = param_store_from_json(j);
    model.method = method_from_string(j.at("method").get<std::string>());
    model.margin = j.at("margin").get<double>();
    const auto& c = j.at("config");
    model.config.dim_f = c.at("dim_f").get<std::size_t>();
    model.config.dim_fprime = c.at("dim_fprime").get<std::size_t>();
    model.config.dim_d = c.at("dim_d").get<std::size_t>();
    model.config.leaky_slope = c.at("leaky_slope").get<double>();
    model.config.heads = c.at("heads").get<int>();
    model.config.layers = c.at("layers").get<int>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    model.config.max_sentence_tokens = c.at("max_sentence_tokens").get<std::size_t>();
    model.entity_ids = j.at("entity_ids").get<std::vector<std::string>>();
    model.vocab.tokens = j.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < model.vocab.tokens.size(); ++i)
        model.vocab.index[model.vocab.tokens[i]] = static_cast<int>(i);
    model.sentences = j.at("sentences").get<std::vector<std::vector<int>>>();
    model.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    return model;
}

inline void save_model(const TransEModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << model_to_json(model).dump(2) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

// Loads a checkpoint and binds entity representations against the graph it
// was trained on.
inline TransEModel load_model(const std::string& path, const KnowledgeGraph& kg) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("model file " + path + ": " + e.what());
    }
    TransEModel model = model_from_json(j);
    if (model.entity_ids != kg.entities)
        throw input_error("model file " + path + ": entity set does not match graph");
    model.repr = encode_entities(model.method, kg, model.params, model.config, model.sentences);
    return model;
}

inline nlohmann::json links_to_json(const PredictedLinkSet& set) {
    nlohmann::json links = nlohmann::json::array();
    for (const Link& l : set.links) links.push_back({l.id_i, l.id_j, l.score});
    nlohmann::json j = {{"cutoff_year", set.cutoff_year},
                        {"method", set.method},
                        {"rho_or_zeta", set.rho_or_zeta},
                        {"links", links}};
    if (!set.warning.empty()) j["warning"] = set.warning;
    return j;
}

inline void save_links(const PredictedLinkSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << links_to_json(set).dump(2) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

inline PredictedLinkSet load_links(const std::string& path, const KnowledgeGraph& kg) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("links file " + path + ": " + e.what());
    }
    PredictedLinkSet set;
    set.cutoff_year = j.at("cutoff_year").get<int>();
    set.method = j.at("method").get<std::string>();
    set.rho_or_zeta = j.at("rho_or_zeta").get<double>();
    set.warning = j.value("warning", "");
    for (const auto& entry : j.at("links")) {
        if (!entry.is_array() || entry.size() != 3)
            throw format_error("links file " + path + ": bad link record");
        Link l;
        l.id_i = entry[0].get<std::string>();
        l.id_j = entry[1].get<std::string>();
        l.score = entry[2].get<double>();
        l.i = kg.entity_index(l.id_i);
        l.j = kg.entity_index(l.id_j);
        if (l.i < 0 || l.j < 0)
            throw lookup_error("links file " + path + ": unknown entity " +
                               (l.i < 0 ? l.id_i : l.id_j));
        if (l.i > l.j) {
            std::swap(l.i, l.j);
            std::swap(l.id_i, l.id_j);
        }
        set.links.push_back(std::move(l));
    }
    return set;
}

}  // namespace patentkg
