#pragma once

// Patent prediction: add predicted links to the graph, enumerate maximal
// cliques that contain at least one predicted edge, and validate candidates
// against future patents.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "patentkg/common.hpp"
#include "patentkg/graph.hpp"
#include "patentkg/linkpred.hpp"

namespace patentkg {

struct PredictedPatent {
    std::vector<int> entities;                         // sorted ascending
    std::vector<std::pair<int, int>> predicted_edges;  // tagged pairs inside the clique
    int cutoff_year = 0;
    std::string method;
};

// Union of the graph's edges with the predicted links, predicted edges
// tagged. A link that duplicates an existing edge is an upstream invariant
// violation and is rejected.
inline KnowledgeGraph augment_graph(const KnowledgeGraph& kg, const PredictedLinkSet& links) {
    KnowledgeGraph out = kg;
    for (const Link& l : links.links) {
        out.check_entity(l.i, "augment_graph");
        out.check_entity(l.j, "augment_graph");
        auto key = KnowledgeGraph::canonical(l.i, l.j);
        if (kg.edges.count(key))
            throw input_error("augment_graph: predicted link (" + l.id_i + ", " + l.id_j +
                              ") already exists in the graph");
        if (out.predicted_edges.count(key))
            throw input_error("augment_graph: duplicate predicted link (" + l.id_i + ", " +
                              l.id_j + ")");
        out.add_edge(key.first, key.second, kg.cutoff_year);
        out.predicted_edges.insert(key);
    }
    out.adjacency();
    return out;
}

namespace detail {

class Bitset {
public:
    explicit Bitset(std::size_t n = 0) : n_(n), words_((n + 63) / 64, 0) {}

    void set(std::size_t i) { words_[i >> 6] |= 1ULL << (i & 63); }
    void reset(std::size_t i) { words_[i >> 6] &= ~(1ULL << (i & 63)); }
    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1ULL; }

    bool empty() const {
        for (std::uint64_t w : words_)
            if (w) return false;
        return true;
    }

    std::size_t count() const {
        std::size_t c = 0;
        for (std::uint64_t w : words_) c += static_cast<std::size_t>(__builtin_popcountll(w));
        return c;
    }

    Bitset and_with(const Bitset& other) const {
        Bitset out(n_);
        for (std::size_t k = 0; k < words_.size(); ++k) out.words_[k] = words_[k] & other.words_[k];
        return out;
    }

    Bitset or_with(const Bitset& other) const {
        Bitset out(n_);
        for (std::size_t k = 0; k < words_.size(); ++k) out.words_[k] = words_[k] | other.words_[k];
        return out;
    }

    std::size_t intersection_count(const Bitset& other) const {
        std::size_t c = 0;
        for (std::size_t k = 0; k < words_.size(); ++k)
            c += static_cast<std::size_t>(__builtin_popcountll(words_[k] & other.words_[k]));
        return c;
    }

    // Set bits in ascending order.
    std::vector<int> to_vector() const {
        std::vector<int> out;
        for (std::size_t k = 0; k < words_.size(); ++k) {
            std::uint64_t w = words_[k];
            while (w) {
                int bit = __builtin_ctzll(w);
                out.push_back(static_cast<int>(k * 64 + static_cast<std::size_t>(bit)));
                w &= w - 1;
            }
        }
        return out;
    }

private:
    std::size_t n_;
    std::vector<std::uint64_t> words_;
};

struct CliqueEnumerator {
    const std::vector<Bitset>& adj;
    const std::vector<std::pair<int, int>>& tagged;
    std::size_t cap;
    std::vector<std::vector<int>> found;

    bool tagged_pair_within(const Bitset& allowed) const {
        for (const auto& [a, b] : tagged)
            if (allowed.test(static_cast<std::size_t>(a)) &&
                allowed.test(static_cast<std::size_t>(b)))
                return true;
        return false;
    }

    void run(std::vector<int>& clique, Bitset candidates, Bitset excluded, const Bitset& in_clique) {
        if (candidates.empty() && excluded.empty()) {
            if (clique.size() >= 2 && tagged_pair_within(in_clique)) {
                if (found.size() >= cap)
                    throw truncation_error("clique enumeration cap of " + std::to_string(cap) +
                                           " exceeded");
                found.push_back(clique);
            }
            return;
        }
        // No descendant clique can contain a tagged edge outside clique+candidates.
        if (!tagged_pair_within(in_clique.or_with(candidates))) return;

        // Pivot: vertex of candidates|excluded with the most candidate neighbors.
        int pivot = -1;
        std::size_t best = 0;
        for (int u : candidates.or_with(excluded).to_vector()) {
            std::size_t c = candidates.intersection_count(adj[static_cast<std::size_t>(u)]);
            if (pivot < 0 || c > best) {
                pivot = u;
                best = c;
            }
        }
        std::vector<int> order;
        for (int v : candidates.to_vector())
            if (pivot < 0 || !adj[static_cast<std::size_t>(pivot)].test(static_cast<std::size_t>(v)))
                order.push_back(v);
        for (int v : order) {
            Bitset next_in = in_clique;
            next_in.set(static_cast<std::size_t>(v));
            clique.push_back(v);
            run(clique, candidates.and_with(adj[static_cast<std::size_t>(v)]),
                excluded.and_with(adj[static_cast<std::size_t>(v)]), next_in);
            clique.pop_back();
            candidates.reset(static_cast<std::size_t>(v));
            excluded.set(static_cast<std::size_t>(v));
        }
    }
};

}  // namespace detail

// All maximal cliques (size >= 2) of the augmented graph that contain at
// least one predicted edge, in sorted order. Bron-Kerbosch with pivoting;
// branches that cannot reach a predicted edge are pruned.
inline std::vector<PredictedPatent> enumerate_candidate_patents(const KnowledgeGraph& augmented,
                                                                std::size_t cap = 100000,
                                                                const std::string& method = "") {
    std::vector<PredictedPatent> out;
    if (augmented.predicted_edges.empty()) return out;
    std::size_t n = augmented.entity_count();

    std::vector<detail::Bitset> adj(n, detail::Bitset(n));
    for (const auto& [edge, year] : augmented.edges) {
        adj[static_cast<std::size_t>(edge.first)].set(static_cast<std::size_t>(edge.second));
        adj[static_cast<std::size_t>(edge.second)].set(static_cast<std::size_t>(edge.first));
    }

    std::vector<std::pair<int, int>> tagged(augmented.predicted_edges.begin(),
                                            augmented.predicted_edges.end());
    detail::CliqueEnumerator enumerator{adj, tagged, cap, {}};
    detail::Bitset candidates(n), excluded(n), in_clique(n);
    for (std::size_t i = 0; i < n; ++i) candidates.set(i);
    std::vector<int> clique;
    enumerator.run(clique, candidates, excluded, in_clique);

    std::vector<std::vector<int>> cliques = std::move(enumerator.found);
    for (auto& c : cliques) std::sort(c.begin(), c.end());
    std::sort(cliques.begin(), cliques.end());

    out.reserve(cliques.size());
    for (const auto& c : cliques) {
        PredictedPatent p;
        p.entities = c;
        p.cutoff_year = augmented.cutoff_year;
        p.method = method;
        for (std::size_t a = 0; a < c.size(); ++a)
            for (std::size_t b = a + 1; b < c.size(); ++b)
                if (augmented.predicted_edges.count({c[a], c[b]}))
                    p.predicted_edges.push_back({c[a], c[b]});
        out.push_back(std::move(p));
    }
    return out;
}

// True iff some future patent's entity set is a superset of the candidate's.
inline bool validate_patent(const PredictedPatent& p,
                            const std::map<std::string, std::set<int>>& future_patents) {
    for (const auto& [pid, entity_set] : future_patents) {
        bool covered = true;
        for (int e : p.entities) {
            if (!entity_set.count(e)) {
                covered = false;
                break;
            }
        }
        if (covered) return true;
    }
    return false;
}

// Future patent entity sets from documents in (cutoff, cutoff + horizon],
// mapped into `base`'s index space. Entities unknown to `base` are dropped;
// they cannot affect superset checks against candidates drawn from `base`.
inline std::map<std::string, std::set<int>> future_patent_sets(const KnowledgeGraph& base,
                                                               const std::vector<Document>& docs,
                                                               const Lexicon& lex, int cutoff,
                                                               int horizon_years = 0) {
    std::map<std::string, std::set<int>> out;
    for (const Document& doc : docs) {
        if (doc.year <= cutoff) continue;
        if (horizon_years > 0 && doc.year > cutoff + horizon_years) continue;
        std::set<int> indices;
        for (const std::string& id : extract_entities(doc, lex)) {
            int idx = base.entity_index(id);
            if (idx >= 0) indices.insert(idx);
        }
        if (!indices.empty()) out[doc.id] = std::move(indices);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: JSON list of {entities, predicted_edges, valid?}
// ---------------------------------------------------------------------------

inline nlohmann::json candidates_to_json(const std::vector<PredictedPatent>& candidates,
                                         const KnowledgeGraph& kg,
                                         const std::map<std::string, std::set<int>>* futures =
                                             nullptr) {
    nlohmann::json j = nlohmann::json::array();
    for (const PredictedPatent& p : candidates) {
        nlohmann::json entities = nlohmann::json::array();
        for (int e : p.entities) entities.push_back(kg.entities[static_cast<std::size_t>(e)]);
        nlohmann::json edges = nlohmann::json::array();
        for (const auto& [a, b] : p.predicted_edges)
            edges.push_back({kg.entities[static_cast<std::size_t>(a)],
                             kg.entities[static_cast<std::size_t>(b)]});
        nlohmann::json entry = {{"entities", entities}, {"predicted_edges", edges}};
        if (futures) entry["valid"] = validate_patent(p, *futures);
        j.push_back(std::move(entry));
    }
    return j;
}

inline void save_candidates(const std::vector<PredictedPatent>& candidates,
                            const KnowledgeGraph& kg, const std::string& path,
                            const std::map<std::string, std::set<int>>* futures = nullptr) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << candidates_to_json(candidates, kg, futures).dump(2) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

}  // namespace patentkg
