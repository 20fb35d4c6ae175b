#pragma once

// Document loading, lexicon handling, and dictionary-based entity
// extraction.
//
// Matching rule: case-insensitive, whole-token, leftmost-longest,
// non-overlapping with scanning resuming after each match. Multi-word
// terms match as contiguous token sequences only.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "patentkg/common.hpp"

namespace patentkg {

struct Document {
    std::string id;
    int year = 0;
    std::string title;
    std::string abstract_text;

    std::string text() const { return title + " " + abstract_text; }
};

struct EntityMention {
    std::string entity_id;
    std::string doc_id;
    std::size_t begin = 0;  // char span in the normalized text
    std::size_t end = 0;
};

// ---------------------------------------------------------------------------
// Normalization: lowercase, punctuation treated as a separator, whitespace
// runs collapsed. The normalized form is the token sequence joined by
// single spaces.
// ---------------------------------------------------------------------------

inline bool is_token_char(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

inline std::vector<std::string> tokenize(const std::string& raw) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : raw) {
        if (is_token_char(c)) {
            cur += static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

inline std::string normalize_text(const std::string& raw) { return join(tokenize(raw), " "); }

// ---------------------------------------------------------------------------
// Lexicon: normalized terms, each term its own stable entity identifier.
// ---------------------------------------------------------------------------

class Lexicon {
public:
    Lexicon() = default;

    // Normalizes, drops empties, collapses duplicates (counted).
    static Lexicon from_terms(const std::vector<std::string>& raw_terms) {
        Lexicon lex;
        std::set<std::string> seen;
        for (const std::string& raw : raw_terms) {
            std::string term = normalize_text(raw);
            if (term.empty()) continue;
            if (!seen.insert(term).second) {
                ++lex.duplicates_collapsed_;
                continue;
            }
        }
        lex.terms_.assign(seen.begin(), seen.end());
        lex.build_trie();
        return lex;
    }

    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }
    const std::vector<std::string>& terms() const { return terms_; }
    std::size_t duplicates_collapsed() const { return duplicates_collapsed_; }

    bool contains(const std::string& normalized_term) const {
        return std::binary_search(terms_.begin(), terms_.end(), normalized_term);
    }

    // Longest term match starting at token position `pos`; returns the term
    // index and the number of tokens consumed, or (-1, 0).
    std::pair<int, std::size_t> longest_match(const std::vector<std::string>& tokens,
                                              std::size_t pos) const {
        int best_term = -1;
        std::size_t best_len = 0;
        int node = 0;
        for (std::size_t k = pos; k < tokens.size(); ++k) {
            auto it = trie_[static_cast<std::size_t>(node)].children.find(tokens[k]);
            if (it == trie_[static_cast<std::size_t>(node)].children.end()) break;
            node = it->second;
            if (trie_[static_cast<std::size_t>(node)].term >= 0) {
                best_term = trie_[static_cast<std::size_t>(node)].term;
                best_len = k - pos + 1;
            }
        }
        return {best_term, best_len};
    }

private:
    struct TrieNode {
        std::map<std::string, int> children;
        int term = -1;
    };

    void build_trie() {
        trie_.clear();
        trie_.push_back(TrieNode{});
        for (std::size_t t = 0; t < terms_.size(); ++t) {
            int node = 0;
            for (const std::string& tok : split(terms_[t], ' ')) {
                auto it = trie_[static_cast<std::size_t>(node)].children.find(tok);
                if (it == trie_[static_cast<std::size_t>(node)].children.end()) {
                    trie_.push_back(TrieNode{});
                    int next = static_cast<int>(trie_.size() - 1);
                    trie_[static_cast<std::size_t>(node)].children.emplace(tok, next);
                    node = next;
                } else {
                    node = it->second;
                }
            }
            trie_[static_cast<std::size_t>(node)].term = static_cast<int>(t);
        }
    }

    std::vector<std::string> terms_;  // sorted, unique, normalized
    std::size_t duplicates_collapsed_ = 0;
    std::vector<TrieNode> trie_{TrieNode{}};
};

// ---------------------------------------------------------------------------
// Loaders
// ---------------------------------------------------------------------------

enum class DocFormat { jsonl, csv };

namespace detail {

inline void check_document(Document& doc, std::size_t line_no, int min_year, int max_year) {
    if (doc.id.empty())
        throw parse_error("line " + std::to_string(line_no) + ": empty document id");
    if (doc.year < min_year || doc.year > max_year)
        throw parse_error("line " + std::to_string(line_no) + ": year " +
                          std::to_string(doc.year) + " outside configured range [" +
                          std::to_string(min_year) + ", " + std::to_string(max_year) + "]");
    if (normalize_text(doc.text()).empty())
        throw parse_error("line " + std::to_string(line_no) + ": document text empty after normalization");
}

inline std::vector<Document> load_jsonl(std::istream& in, int min_year, int max_year) {
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw parse_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        Document doc;
        try {
            doc.id = j.at("id").get<std::string>();
            doc.year = j.at("year").get<int>();
            doc.title = j.at("title").get<std::string>();
            doc.abstract_text = j.at("abstract").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw parse_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        check_document(doc, line_no, min_year, max_year);
        docs.push_back(std::move(doc));
    }
    return docs;
}

// RFC-4180-style fields: quoted fields may contain commas, doubled quotes,
// and embedded newlines.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
            row_has_content = true;
        } else if (c == ',') {
            row.push_back(field);
            field.clear();
            row_has_content = true;
        } else if (c == '\n') {
            if (!field.empty() || !row.empty() || row_has_content) {
                row.push_back(field);
                rows.push_back(row);
            }
            field.clear();
            row.clear();
            row_has_content = false;
        } else if (c != '\r') {
            field += c;
            row_has_content = true;
        }
    }
    if (in_quotes) throw parse_error("csv: unterminated quoted field");
    if (!field.empty() || !row.empty() || row_has_content) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<Document> load_csv(std::istream& in, int min_year, int max_year) {
    auto rows = parse_csv(in);
    std::vector<Document> docs;
    if (rows.empty()) return docs;
    const std::vector<std::string> expected = {"id", "year", "title", "abstract"};
    if (rows[0] != expected)
        throw parse_error("line 1: csv header must be id,year,title,abstract");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        std::size_t line_no = r + 1;
        if (rows[r].size() != 4)
            throw parse_error("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                              std::to_string(rows[r].size()));
        Document doc;
        doc.id = rows[r][0];
        try {
            std::size_t used = 0;
            doc.year = std::stoi(rows[r][1], &used);
            if (used != rows[r][1].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw parse_error("line " + std::to_string(line_no) + ": bad year '" + rows[r][1] + "'");
        }
        doc.title = rows[r][2];
        doc.abstract_text = rows[r][3];
        check_document(doc, line_no, min_year, max_year);
        docs.push_back(std::move(doc));
    }
    return docs;
}

}  // namespace detail

// Loads documents and orders them by (year, id). Duplicate ids are an error.
inline std::vector<Document> load_documents(const std::string& path, DocFormat format,
                                            int min_year = 1, int max_year = 9999) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    std::vector<Document> docs = format == DocFormat::jsonl
                                     ? detail::load_jsonl(in, min_year, max_year)
                                     : detail::load_csv(in, min_year, max_year);
    std::set<std::string> ids;
    for (const Document& d : docs)
        if (!ids.insert(d.id).second) throw parse_error("duplicate document id: " + d.id);
    std::stable_sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) {
        return a.year != b.year ? a.year < b.year : a.id < b.id;
    });
    return docs;
}

// One term per line; '#'-prefixed comment lines and blank lines skipped.
inline Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    std::vector<std::string> raw;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (line[first] == '#') continue;
        raw.push_back(line);
    }
    return Lexicon::from_terms(raw);
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

// All mentions in document order, with char spans into the normalized text.
inline std::vector<EntityMention> extract_mentions(const Document& doc, const Lexicon& lex) {
    std::vector<EntityMention> mentions;
    if (lex.empty()) return mentions;
    std::vector<std::string> tokens = tokenize(doc.text());
    // Char offset of each token within the normalized (space-joined) text.
    std::vector<std::size_t> starts(tokens.size());
    std::size_t off = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        starts[i] = off;
        off += tokens[i].size() + 1;
    }
    std::size_t pos = 0;
    while (pos < tokens.size()) {
        auto [term, len] = lex.longest_match(tokens, pos);
        if (term >= 0) {
            EntityMention m;
            m.entity_id = lex.terms()[static_cast<std::size_t>(term)];
            m.doc_id = doc.id;
            m.begin = starts[pos];
            m.end = starts[pos + len - 1] + tokens[pos + len - 1].size();
            mentions.push_back(std::move(m));
            pos += len;
        } else {
            ++pos;
        }
    }
    return mentions;
}

inline std::set<std::string> extract_entities(const Document& doc, const Lexicon& lex) {
    std::set<std::string> ids;
    for (const EntityMention& m : extract_mentions(doc, lex)) ids.insert(m.entity_id);
    return ids;
}

// ---------------------------------------------------------------------------
// Context sentences
// ---------------------------------------------------------------------------

// Title is one sentence; the abstract splits on sentence-final punctuation.
inline std::vector<std::string> split_sentences(const Document& doc) {
    std::vector<std::string> sentences;
    sentences.push_back(doc.title);
    std::string cur;
    for (char c : doc.abstract_text) {
        if (c == '.' || c == '!' || c == '?' || c == ';') {
            sentences.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    sentences.push_back(cur);
    return sentences;
}

// First sentence containing each entity, in (year, doc id, offset) order.
// Documents must already be sorted by (year, id), as load_documents returns.
// Entities whose only full-text matches straddle sentence boundaries get no
// sentence here; encoders fall back to the entity's own term.
inline std::map<std::string, std::vector<std::string>> collect_context_sentences(
    const std::vector<Document>& docs, const Lexicon& lex) {
    std::map<std::string, std::vector<std::string>> result;
    for (const Document& doc : docs) {
        for (const std::string& sentence : split_sentences(doc)) {
            std::vector<std::string> tokens = tokenize(sentence);
            if (tokens.empty()) continue;
            Document fragment{doc.id, doc.year, sentence, ""};
            for (const EntityMention& m : extract_mentions(fragment, lex))
                result.emplace(m.entity_id, tokens);
        }
    }
    return result;
}

}  // namespace patentkg
