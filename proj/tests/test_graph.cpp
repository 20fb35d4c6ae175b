#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "patentkg/graph.hpp"

using namespace patentkg;

namespace {

Document doc_of(const std::string& id, int year, const std::string& terms) {
    return Document{id, year, "", terms};
}

const Lexicon kAbcLex = Lexicon::from_terms({"aa", "bb", "cc", "dd"});

}  // namespace

TEST_CASE("build_graph: one patent with three entities forms a triangle") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb cc")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2010);
    CHECK(kg.entity_count() == 3);
    CHECK(kg.edge_count() == 3);
    for (const auto& [edge, year] : kg.edges) CHECK(year == 2010);
    CHECK(kg.patents.size() == 1);
    CHECK(kg.patents.at("P1").entity_indices == std::vector<int>{0, 1, 2});
}

TEST_CASE("build_graph: cutoff filters later documents") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb"), doc_of("P2", 2011, "bb cc")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2010);
    CHECK(kg.entity_count() == 2);
    CHECK(kg.edge_count() == 1);
    CHECK(kg.has_edge(kg.entity_index("aa"), kg.entity_index("bb")));
    CHECK(kg.entity_index("cc") == -1);
}

TEST_CASE("build_graph: repeated pair keeps the earliest year") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb"), doc_of("P2", 2012, "aa bb")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2015);
    REQUIRE(kg.edge_count() == 1);
    CHECK(kg.edges.begin()->second == 2010);
    CHECK(kg.patents.size() == 2);
}

TEST_CASE("build_graph: no documents at cutoff gives an empty graph") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2005);
    CHECK(kg.entity_count() == 0);
    CHECK(kg.edge_count() == 0);
    CHECK(kg.patents.empty());
}

TEST_CASE("build_graph: single-entity patents are stored but contribute no edges") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa"), doc_of("P2", 2010, "nothing here")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2010);
    CHECK(kg.entity_count() == 1);
    CHECK(kg.edge_count() == 0);
    CHECK(kg.patents.size() == 1);
    CHECK(kg.patents.count("P1") == 1);
}

TEST_CASE("build_graph: permutation invariance over document order") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb"), doc_of("P2", 2011, "bb cc"),
                                  doc_of("P3", 2012, "cc dd aa")};
    KnowledgeGraph forward = build_graph(docs, kAbcLex, 2012);
    std::vector<Document> reversed(docs.rbegin(), docs.rend());
    KnowledgeGraph backward = build_graph(reversed, kAbcLex, 2012);
    CHECK(forward == backward);
    // Multi-threaded extraction merges deterministically too.
    KnowledgeGraph threaded = build_graph(docs, kAbcLex, 2012, 4);
    CHECK(forward == threaded);
}

TEST_CASE("build_graph: n(n-1)/2 edges for a single patent of n entities") {
    for (std::size_t n = 2; n <= 10; ++n) {
        std::vector<std::string> terms;
        for (std::size_t i = 0; i < n; ++i) terms.push_back("term" + std::to_string(i));
        Lexicon lex = Lexicon::from_terms(terms);
        std::vector<Document> docs = {doc_of("P", 2000, join(terms, " "))};
        KnowledgeGraph kg = build_graph(docs, lex, 2000);
        CHECK(kg.entity_count() == n);
        CHECK(kg.edge_count() == n * (n - 1) / 2);
    }
}

TEST_CASE("snapshot: identity at the cutoff year") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb"), doc_of("P2", 2011, "bb cc")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2011);
    CHECK(snapshot(kg, 2011) == kg);
}

TEST_CASE("snapshot: restriction drops later entities, edges, patents") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb"), doc_of("P2", 2011, "bb cc")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2011);
    KnowledgeGraph s = snapshot(kg, 2010);
    CHECK(s.entity_count() == 2);
    CHECK(s.edge_count() == 1);
    CHECK(s.patents.size() == 1);
    CHECK(s.cutoff_year == 2010);
    CHECK(s.entity_index("cc") == -1);
}

TEST_CASE("snapshot: below the earliest year is empty; above the cutoff errors") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2010);
    KnowledgeGraph s = snapshot(kg, 2000);
    CHECK(s.entity_count() == 0);
    CHECK(s.edge_count() == 0);
    CHECK_THROWS_AS(snapshot(kg, 2011), input_error);
}

TEST_CASE("snapshot: accumulative monotonicity on random corpora") {
    DetRng rng(99);
    std::vector<std::string> terms;
    for (int i = 0; i < 12; ++i) terms.push_back("t" + std::to_string(i));
    Lexicon lex = Lexicon::from_terms(terms);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Document> docs;
        for (int d = 0; d < 25; ++d) {
            int year = 2000 + static_cast<int>(rng.next_below(6));
            std::set<std::string> chosen;
            std::size_t k = 2 + rng.next_below(4);
            while (chosen.size() < k) chosen.insert(terms[rng.next_below(terms.size())]);
            docs.push_back(doc_of("d" + std::to_string(trial) + "_" + std::to_string(d), year,
                                  join(std::vector<std::string>(chosen.begin(), chosen.end()), " ")));
        }
        KnowledgeGraph kg = build_graph(docs, lex, 2005);
        for (int year = 2000; year < 2005; ++year) {
            KnowledgeGraph a = snapshot(kg, year);
            KnowledgeGraph b = snapshot(kg, year + 1);
            for (const auto& [edge, seen] : a.edges) {
                int bi = b.entity_index(a.entities[static_cast<std::size_t>(edge.first)]);
                int bj = b.entity_index(a.entities[static_cast<std::size_t>(edge.second)]);
                REQUIRE(bi >= 0);
                REQUIRE(bj >= 0);
                CHECK(b.has_edge(bi, bj));
            }
            for (const std::string& id : a.entities) CHECK(b.entity_index(id) >= 0);
        }
    }
}

TEST_CASE("neighbors: triangle, isolated entity, star") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb cc")};
    KnowledgeGraph triangle = build_graph(docs, kAbcLex, 2010);
    int a = triangle.entity_index("aa");
    CHECK(neighbors(triangle, a) ==
          std::vector<int>{triangle.entity_index("bb"), triangle.entity_index("cc")});

    std::vector<Document> docs2 = {doc_of("P1", 2010, "aa"), doc_of("P2", 2010, "bb cc")};
    KnowledgeGraph with_isolated = build_graph(docs2, kAbcLex, 2010);
    CHECK(neighbors(with_isolated, with_isolated.entity_index("aa")).empty());

    Lexicon star_lex = Lexicon::from_terms({"hub", "s1", "s2", "s3"});
    std::vector<Document> star_docs = {doc_of("P1", 2010, "hub s1"), doc_of("P2", 2010, "hub s2"),
                                       doc_of("P3", 2010, "hub s3")};
    KnowledgeGraph star = build_graph(star_docs, star_lex, 2010);
    int hub = star.entity_index("hub");
    CHECK(neighbors(star, hub).size() == 3);
    CHECK(neighbors(star, star.entity_index("s1")) == std::vector<int>{hub});
}

TEST_CASE("neighbors: symmetry and unknown-entity error") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb cc"), doc_of("P2", 2010, "cc dd")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2010);
    int n = static_cast<int>(kg.entity_count());
    for (int i = 0; i < n; ++i) {
        for (int j : neighbors(kg, i)) {
            auto back = neighbors(kg, j);
            CHECK(std::find(back.begin(), back.end(), i) != back.end());
        }
    }
    CHECK_THROWS_AS(neighbors(kg, n), lookup_error);
    CHECK_THROWS_AS(neighbors(kg, -1), lookup_error);
}

TEST_CASE("serialize/deserialize: round-trip identity") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb cc"), doc_of("P2", 2011, "cc dd"),
                                  doc_of("P3", 2012, "aa")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2012);
    auto path = std::filesystem::temp_directory_path() / "pkg_graph_rt.json";
    serialize_graph(kg, path.string());
    KnowledgeGraph loaded = deserialize_graph(path.string());
    CHECK(loaded == kg);
    std::filesystem::remove(path);

    KnowledgeGraph empty = build_graph({}, kAbcLex, 2000);
    auto epath = std::filesystem::temp_directory_path() / "pkg_graph_empty.json";
    serialize_graph(empty, epath.string());
    CHECK(deserialize_graph(epath.string()) == empty);
    std::filesystem::remove(epath);
}

TEST_CASE("deserialize: tampered header is a format error") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2010);
    nlohmann::json j = graph_to_json(kg);
    j["version"] = 42;
    CHECK_THROWS_WITH_AS(graph_from_json(j), doctest::Contains("version"), format_error);
    j.erase("version");
    CHECK_THROWS_AS(graph_from_json(j), format_error);
}

TEST_CASE("export_graph_tsv: triple view") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2010);
    auto path = std::filesystem::temp_directory_path() / "pkg_graph.tsv";
    export_graph_tsv(kg, path.string());
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "aa\tco_occurrence\tbb\t2010");
    std::filesystem::remove(path);
}

TEST_CASE("KnowledgeGraph: self-edges rejected, canonical order kept") {
    std::vector<Document> docs = {doc_of("P1", 2010, "aa bb")};
    KnowledgeGraph kg = build_graph(docs, kAbcLex, 2010);
    CHECK_THROWS_AS(kg.add_edge(0, 0, 2010), input_error);
    for (const auto& [edge, year] : kg.edges) CHECK(edge.first < edge.second);
}
