#pragma once

// Year-accumulative co-occurrence knowledge graph: construction from
// documents, snapshots, neighbor queries, and versioned JSON persistence.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "patentkg/common.hpp"
#include "patentkg/corpus.hpp"

namespace patentkg {

struct PatentRecord {
    int year = 0;
    std::vector<int> entity_indices;  // sorted ascending

    bool operator==(const PatentRecord& other) const = default;
};

class KnowledgeGraph {
public:
    // Entity ids sorted lexicographically; indices are positions in that order.
    std::vector<std::string> entities;
    // Canonical undirected edges (i < j) -> first_seen_year.
    std::map<std::pair<int, int>, int> edges;
    std::map<std::string, PatentRecord> patents;
    int cutoff_year = 0;
    // Edges added by link prediction (subset of `edges`); empty for built graphs.
    std::set<std::pair<int, int>> predicted_edges;

    bool operator==(const KnowledgeGraph& other) const {
        return entities == other.entities && edges == other.edges && patents == other.patents &&
               cutoff_year == other.cutoff_year && predicted_edges == other.predicted_edges;
    }

    std::size_t entity_count() const { return entities.size(); }
    std::size_t edge_count() const { return edges.size(); }

    int entity_index(const std::string& id) const {
        auto it = std::lower_bound(entities.begin(), entities.end(), id);
        if (it == entities.end() || *it != id) return -1;
        return static_cast<int>(it - entities.begin());
    }

    void check_entity(int e, const std::string& who) const {
        if (e < 0 || static_cast<std::size_t>(e) >= entities.size())
            throw lookup_error(who + ": unknown entity index " + std::to_string(e));
    }

    bool has_edge(int i, int j) const {
        if (i == j) return false;
        return edges.count(canonical(i, j)) != 0;
    }

    static std::pair<int, int> canonical(int i, int j) {
        return i < j ? std::make_pair(i, j) : std::make_pair(j, i);
    }

    void add_edge(int i, int j, int year) {
        if (i == j) throw input_error("KnowledgeGraph: self-edge rejected");
        check_entity(i, "add_edge");
        check_entity(j, "add_edge");
        auto key = canonical(i, j);
        auto it = edges.find(key);
        if (it == edges.end())
            edges.emplace(key, year);
        else
            it->second = std::min(it->second, year);
        adjacency_.clear();
    }

    // Sorted neighbor lists, built lazily and cached.
    const std::vector<std::vector<int>>& adjacency() const {
        if (adjacency_.empty() && !entities.empty()) {
            adjacency_.assign(entities.size(), {});
            for (const auto& [edge, year] : edges) {
                adjacency_[static_cast<std::size_t>(edge.first)].push_back(edge.second);
                adjacency_[static_cast<std::size_t>(edge.second)].push_back(edge.first);
            }
            for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
        }
        return adjacency_;
    }

private:
    mutable std::vector<std::vector<int>> adjacency_;
};

inline std::vector<int> neighbors(const KnowledgeGraph& kg, int e) {
    kg.check_entity(e, "neighbors");
    const auto& adj = kg.adjacency();
    return adj.empty() ? std::vector<int>{} : adj[static_cast<std::size_t>(e)];
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

// Uses documents with year <= cutoff_year. Every unordered entity pair
// co-occurring in a document becomes an edge with the earliest contributing
// year. Entity extraction may run on several threads; the merge is a
// deterministic single-threaded pass in document order.
inline KnowledgeGraph build_graph(const std::vector<Document>& docs, const Lexicon& lex,
                                  int cutoff_year, unsigned threads = 1) {
    KnowledgeGraph kg;
    kg.cutoff_year = cutoff_year;

    std::vector<const Document*> used;
    for (const Document& d : docs)
        if (d.year <= cutoff_year) used.push_back(&d);
    if (used.empty()) return kg;  // empty-graph case, caller may warn

    std::vector<std::set<std::string>> extracted(used.size());
    if (threads <= 1 || used.size() < 2) {
        for (std::size_t i = 0; i < used.size(); ++i) extracted[i] = extract_entities(*used[i], lex);
    } else {
        unsigned n_threads = std::min<unsigned>(threads, static_cast<unsigned>(used.size()));
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t]() {
                for (std::size_t i = t; i < used.size(); i += n_threads)
                    extracted[i] = extract_entities(*used[i], lex);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::set<std::string> all_ids;
    for (const auto& ids : extracted) all_ids.insert(ids.begin(), ids.end());
    kg.entities.assign(all_ids.begin(), all_ids.end());

    for (std::size_t d = 0; d < used.size(); ++d) {
        if (extracted[d].empty()) continue;
        std::vector<int> idx;
        idx.reserve(extracted[d].size());
        for (const std::string& id : extracted[d]) idx.push_back(kg.entity_index(id));
        std::sort(idx.begin(), idx.end());
        kg.patents[used[d]->id] = PatentRecord{used[d]->year, idx};
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = a + 1; b < idx.size(); ++b)
                kg.add_edge(idx[a], idx[b], used[d]->year);
    }
    kg.adjacency();  // materialize; the graph is immutable from here on
    return kg;
}

// Restriction to patents and edges first seen at or before `year`.
inline KnowledgeGraph snapshot(const KnowledgeGraph& kg, int year) {
    if (year > kg.cutoff_year)
        throw input_error("snapshot: year " + std::to_string(year) + " exceeds cutoff " +
                          std::to_string(kg.cutoff_year));
    KnowledgeGraph out;
    out.cutoff_year = year;

    std::set<std::string> kept_ids;
    for (const auto& [pid, patent] : kg.patents) {
        if (patent.year > year) continue;
        for (int e : patent.entity_indices)
            kept_ids.insert(kg.entities[static_cast<std::size_t>(e)]);
    }
    out.entities.assign(kept_ids.begin(), kept_ids.end());

    for (const auto& [pid, patent] : kg.patents) {
        if (patent.year > year) continue;
        PatentRecord rec;
        rec.year = patent.year;
        for (int e : patent.entity_indices)
            rec.entity_indices.push_back(out.entity_index(kg.entities[static_cast<std::size_t>(e)]));
        std::sort(rec.entity_indices.begin(), rec.entity_indices.end());
        out.patents[pid] = std::move(rec);
    }
    for (const auto& [edge, first_seen] : kg.edges) {
        if (first_seen > year) continue;
        int i = out.entity_index(kg.entities[static_cast<std::size_t>(edge.first)]);
        int j = out.entity_index(kg.entities[static_cast<std::size_t>(edge.second)]);
        out.add_edge(i, j, first_seen);
    }
    out.adjacency();
    return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline nlohmann::json graph_to_json(const KnowledgeGraph& kg) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [edge, year] : kg.edges)
        edges.push_back({edge.first, edge.second, year});
    nlohmann::json patents = nlohmann::json::object();
    for (const auto& [pid, patent] : kg.patents)
        patents[pid] = {{"year", patent.year}, {"entity_indices", patent.entity_indices}};
    return {{"version", kGraphFormatVersion},
            {"cutoff_year", kg.cutoff_year},
            {"entities", kg.entities},
            {"edges", edges},
            {"patents", patents}};
}

inline KnowledgeGraph graph_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("version"))
        throw format_error("graph file: missing version header");
    int version = j.at("version").get<int>();
    if (version != kGraphFormatVersion)
        throw format_error("graph file: expected version " + std::to_string(kGraphFormatVersion) +
                           ", found " + std::to_string(version));
    KnowledgeGraph kg;
    kg.cutoff_year = j.at("cutoff_year").get<int>();
    kg.entities = j.at("entities").get<std::vector<std::string>>();
    if (!std::is_sorted(kg.entities.begin(), kg.entities.end()))
        throw format_error("graph file: entities not sorted");
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 3) throw format_error("graph file: bad edge record");
        kg.add_edge(e[0].get<int>(), e[1].get<int>(), e[2].get<int>());
    }
    const auto& patents = j.at("patents");
    for (auto it = patents.begin(); it != patents.end(); ++it) {
        PatentRecord rec;
        rec.year = it.value().at("year").get<int>();
        rec.entity_indices = it.value().at("entity_indices").get<std::vector<int>>();
        for (int e : rec.entity_indices) kg.check_entity(e, "graph file patent " + it.key());
        kg.patents[it.key()] = std::move(rec);
    }
    kg.adjacency();
    return kg;
}

inline void serialize_graph(const KnowledgeGraph& kg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << graph_to_json(kg).dump(2) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

inline KnowledgeGraph deserialize_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("graph file " + path + ": " + e.what());
    }
    return graph_from_json(j);
}

// head <TAB> co_occurrence <TAB> tail <TAB> year, sorted by (i, j).
inline void export_graph_tsv(const KnowledgeGraph& kg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    for (const auto& [edge, year] : kg.edges) {
        out << kg.entities[static_cast<std::size_t>(edge.first)] << '\t' << "co_occurrence" << '\t'
            << kg.entities[static_cast<std::size_t>(edge.second)] << '\t' << year << '\n';
    }
    if (!out) throw io_error("write failed: " + path);
}

}  // namespace patentkg
