#pragma once
// Link-prediction evaluation: filtered ranking over all entities, MRR and
// Hits@n, and the RAW/Retrained/Unlearned comparison report.
//
// Ranking protocol: for each query triple and each side (head, tail), score
// every candidate replacement; under the filtered setting, candidates that
// form other known true triples are removed (the true candidate always
// stays). Rank = 1 + #strictly-better + ceil(#exact-ties / 2): ties take
// the average position, rounded up.

#include "metaeu/kge.hpp"
#include "metaeu/kgraph.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace metaeu {

enum class QuerySide { Head, Tail };
enum class EvalMode { Filtered, Raw };

struct RankResult {
    Triple query;
    QuerySide side = QuerySide::Tail;
    int64_t rank = 0; // 1..|E|
};

RankResult rank_query(const EmbeddingStore& store, const Triple& triple, QuerySide side,
                      const TripleSet& known, EvalMode mode = EvalMode::Filtered,
                      NormKind norm = NormKind::L1);

double mrr(const std::vector<int64_t>& ranks);
double hits_at(const std::vector<int64_t>& ranks, int64_t n);

struct SplitMetrics {
    double mrr = 0.0;
    double hits1 = 0.0, hits5 = 0.0, hits10 = 0.0;
    size_t query_count = 0;
};

// Head and tail queries for every triple of the split.
SplitMetrics evaluate(const EmbeddingStore& store, const std::vector<Triple>& split,
                      const TripleSet& known, EvalMode mode = EvalMode::Filtered,
                      NormKind norm = NormKind::L1);

// condition (RAW/Retrained/Unlearned/...) x split (test/forget) metric table
struct EvalReport {
    // preserves insertion order of conditions and splits
    std::vector<std::string> conditions;
    std::vector<std::string> splits;
    std::map<std::pair<std::string, std::string>, SplitMetrics> cells;

    void add(const std::string& condition, const std::string& split, const SplitMetrics& m);
    const SplitMetrics* find(const std::string& condition, const std::string& split) const;

    // "condition,split,metric,value,count" rows
    std::string to_csv() const;
    static EvalReport from_csv(const std::string& text);
    // aligned-column comparison table
    std::string to_table() const;
};

} // namespace metaeu
