#pragma once
// Directed multi-relational graph store.
//
// Vocabularies map identifier strings to dense indices in first-appearance
// order. Triples are kept in insertion order (duplicates dropped and
// counted), so save_tsv followed by load_tsv reproduces the graph exactly,
// including index assignment. Adjacency indices are built once at
// construction; the graph is immutable afterwards and safe to read from
// multiple threads.

#include "metaeu/error.hpp"
#include "metaeu/rng.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace metaeu {

struct Triple {
    int32_t h = 0;
    int32_t r = 0;
    int32_t t = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    size_t operator()(const Triple& x) const {
        uint64_t v = (static_cast<uint64_t>(static_cast<uint32_t>(x.h)) << 42) ^
                     (static_cast<uint64_t>(static_cast<uint32_t>(x.r)) << 21) ^
                     static_cast<uint64_t>(static_cast<uint32_t>(x.t));
        v ^= v >> 33;
        v *= 0xff51afd7ed558ccdULL;
        v ^= v >> 33;
        return static_cast<size_t>(v);
    }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

class KnowledgeGraph {
public:
    // Builds vocabularies and indices from (head, relation, tail) string
    // triples in order; duplicate triples are dropped and counted.
    static KnowledgeGraph from_triples(
        const std::vector<std::array<std::string, 3>>& rows);

    // TSV ingestion: one triple per line, fields separated by exactly one
    // TAB, no header. Blank lines are skipped. Throws parse_error with the
    // line number on malformed input and empty_graph if no triples remain.
    static KnowledgeGraph load_tsv(const std::string& path);

    // Rebuilds a graph with a fixed, externally defined vocabulary (stage
    // artifacts store the vocabulary separately from the triples).
    static KnowledgeGraph from_vocab_and_triples(std::vector<std::string> entities,
                                                 std::vector<std::string> relations,
                                                 const std::vector<Triple>& triples);

    // Maps a name TSV onto this graph's vocabulary; unknown names throw.
    std::vector<Triple> parse_triples_tsv(const std::string& path) const;

    // Inverse of load_tsv: writes triples in stored order.
    void save_tsv(const std::string& path) const;

    int32_t entity_count() const { return static_cast<int32_t>(entity_names_.size()); }
    int32_t relation_count() const { return static_cast<int32_t>(relation_names_.size()); }
    const std::vector<Triple>& triples() const { return triples_; }
    size_t duplicate_count() const { return duplicates_; }

    const std::string& entity_name(int32_t e) const { return entity_names_.at(static_cast<size_t>(e)); }
    const std::string& relation_name(int32_t r) const { return relation_names_.at(static_cast<size_t>(r)); }
    const std::vector<std::string>& entity_names() const { return entity_names_; }
    const std::vector<std::string>& relation_names() const { return relation_names_; }

    // -1 when absent
    int32_t entity_index(const std::string& name) const;
    int32_t relation_index(const std::string& name) const;

    bool contains(const Triple& t) const { return triple_set_.count(t) != 0; }
    const TripleSet& triple_set() const { return triple_set_; }

    // O(e) and I(e): relations with some outgoing/ingoing triple at e.
    std::set<int32_t> out_relations(int32_t e) const;
    std::set<int32_t> in_relations(int32_t e) const;

    // Neighbor lists per relation, sorted by relation id; each neighbor list
    // in triple insertion order with duplicates kept out (set semantics on
    // triples already guarantees uniqueness of (e,r,x)).
    const std::vector<std::pair<int32_t, std::vector<int32_t>>>& out_adjacency(int32_t e) const;
    const std::vector<std::pair<int32_t, std::vector<int32_t>>>& in_adjacency(int32_t e) const;

    // All triples with e as head or tail, in stored order.
    std::vector<Triple> incident_triples(int32_t e) const;

private:
    void check_entity(int32_t e) const;
    void build_indices();

    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, int32_t> entity_ids_;
    std::unordered_map<std::string, int32_t> relation_ids_;
    std::vector<Triple> triples_;
    TripleSet triple_set_;
    size_t duplicates_ = 0;

    std::vector<std::vector<std::pair<int32_t, std::vector<int32_t>>>> out_index_;
    std::vector<std::vector<std::pair<int32_t, std::vector<int32_t>>>> in_index_;
    std::vector<std::vector<int32_t>> incident_; // triple positions per entity
};

// Forget/retain partition of a graph's triples.
struct ForgetSplit {
    std::vector<Triple> forget;
    std::vector<Triple> retain;
};

// Fraction mode: |forget| = round(p*|T|), sampled without replacement,
// deterministic for a fixed seed.
ForgetSplit split_forget(const KnowledgeGraph& graph, double fraction, uint64_t seed);

// Explicit mode: every listed triple must be in the graph.
ForgetSplit split_forget(const KnowledgeGraph& graph, const std::vector<Triple>& forget_list);

} // namespace metaeu
