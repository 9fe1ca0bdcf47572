// Ranking checks: pinned rank cases including the tie convention, an
// exhaustive sort-based oracle, metric arithmetic, filtered-vs-raw ordering,
// monotone Hits, perfect-embedding evaluation and report serialization.

#include "metaeu/evalrank.hpp"

#include "testutil.hpp"
#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace metaeu;

namespace {

// sort-based oracle: explicit candidate list with average-tie ranking
int64_t oracle_rank(const EmbeddingStore& store, const Triple& q, QuerySide side,
                    const TripleSet& known, EvalMode mode, NormKind norm) {
    struct Cand {
        double score;
        bool is_true;
    };
    std::vector<Cand> cands;
    for (int32_t e = 0; e < store.entity_count(); ++e) {
        Triple c = q;
        if (side == QuerySide::Head)
            c.h = e;
        else
            c.t = e;
        bool is_true = side == QuerySide::Head ? e == q.h : e == q.t;
        if (!is_true && mode == EvalMode::Filtered && known.count(c)) continue;
        cands.push_back({score(store, c.h, c.r, c.t, norm), is_true});
    }
    std::sort(cands.begin(), cands.end(),
              [](const Cand& a, const Cand& b) { return a.score > b.score; });
    // positions of the tied block containing the true candidate
    double true_score = 0;
    for (const Cand& c : cands)
        if (c.is_true) true_score = c.score;
    int64_t first = 0, count = 0, idx = 1;
    for (const Cand& c : cands) {
        if (c.score == true_score) {
            if (first == 0) first = idx;
            ++count;
        }
        ++idx;
    }
    // average of positions first..first+count-1, rounded up
    return first + count / 2; // == ceil((2*first + count - 1) / 2) for integer positions
}

} // namespace

TEST_CASE("pinned rank cases") {
    // 3 entities; true candidate strictly highest -> rank 1
    EmbeddingStore s;
    s.model = ModelKind::DistMult;
    s.dim = 1;
    s.entities = Tensor2::from_rows({{1.0}, {2.0}, {3.0}});
    s.relations = Tensor2::from_rows({{1.0}});
    s.rel_out = Tensor2(1, 1);
    s.rel_in = Tensor2(1, 1);
    TripleSet known;
    // query (0, 0, 2): candidate scores h*r*t = 1*1*{1,2,3}; true tail=2 is highest
    CHECK(rank_query(s, {0, 0, 2}, QuerySide::Tail, known).rank == 1);

    // all-tied candidates: average of 1..3 -> 2
    EmbeddingStore tied = s;
    tied.entities = Tensor2::from_rows({{1.0}, {1.0}, {1.0}});
    CHECK(rank_query(tied, {0, 0, 2}, QuerySide::Tail, known).rank == 2);

    // two tied: average of 1..2 = 1.5, rounded up -> 2
    EmbeddingStore two = s;
    two.entities = Tensor2::from_rows({{1.0}, {1.0}, {0.5}});
    CHECK(rank_query(two, {0, 0, 1}, QuerySide::Tail, known).rank == 2);
}

TEST_CASE("metric arithmetic") {
    CHECK(mrr({1, 1, 1}) == 1.0);
    CHECK(hits_at({1, 1, 1}, 1) == 1.0);
    CHECK(testutil::rel_err(mrr({1, 2, 4}), 7.0 / 12.0) < 1e-15);
    CHECK(testutil::rel_err(hits_at({1, 3, 11}, 10), 2.0 / 3.0) < 1e-15);
    CHECK_THROWS_AS(mrr({}), Error);
    CHECK_THROWS_AS(hits_at({}, 5), Error);
}

TEST_CASE("filtered ranks match the exhaustive sort oracle on small graphs") {
    Rng rng(2718);
    for (int inst = 0; inst < 12; ++inst) {
        int32_t n_entities = 5 + static_cast<int32_t>(rng.uniform_index(46)); // 5..50
        KnowledgeGraph g = testutil::random_graph(n_entities, 3, 4 * n_entities, rng.next_u64());
        EmbeddingStore s = EmbeddingStore::init(ModelKind::TransE, g.entity_count(), 3, 4,
                                                rng.next_u64());
        // inject exact ties: several entities share one embedding row
        if (g.entity_count() >= 4)
            for (int64_t j = 0; j < s.dim; ++j) {
                s.entities.at(1, j) = s.entities.at(0, j);
                s.entities.at(3, j) = s.entities.at(2, j);
            }
        for (const Triple& q : g.triples()) {
            for (QuerySide side : {QuerySide::Head, QuerySide::Tail}) {
                for (EvalMode mode : {EvalMode::Filtered, EvalMode::Raw}) {
                    int64_t got = rank_query(s, q, side, g.triple_set(), mode).rank;
                    int64_t want = oracle_rank(s, q, side, g.triple_set(), mode, NormKind::L1);
                    CHECK(got == want);
                }
            }
        }
    }
}

TEST_CASE("filtered rank never exceeds raw rank") {
    Rng rng(3141);
    KnowledgeGraph g = testutil::random_graph(30, 3, 150, 99);
    EmbeddingStore s = EmbeddingStore::init(ModelKind::DistMult, 30, 3, 6, 17);
    for (const Triple& q : g.triples()) {
        for (QuerySide side : {QuerySide::Head, QuerySide::Tail}) {
            int64_t filtered = rank_query(s, q, side, g.triple_set(), EvalMode::Filtered).rank;
            int64_t raw = rank_query(s, q, side, g.triple_set(), EvalMode::Raw).rank;
            CHECK(filtered <= raw);
        }
    }
}

TEST_CASE("oracle-perfect embeddings score MRR 1 and metrics are monotone") {
    // construct exact TransE translations on a 5-triple chain with all-distinct rows
    std::vector<std::array<std::string, 3>> rows;
    for (int i = 0; i < 5; ++i)
        rows.push_back({"e" + std::to_string(i), "r", "e" + std::to_string(i + 1)});
    KnowledgeGraph g = KnowledgeGraph::from_triples(rows);
    EmbeddingStore s;
    s.model = ModelKind::TransE;
    s.dim = 2;
    s.entities = Tensor2(6, 2);
    s.relations = Tensor2(1, 2);
    s.rel_out = Tensor2(1, 2);
    s.rel_in = Tensor2(1, 2);
    // entity i at (i, i), relation (1, 1): every chain triple is an exact
    // translation and the true candidate is the unique maximizer
    for (int i = 0; i < 6; ++i) {
        s.entities.at(i, 0) = static_cast<double>(i);
        s.entities.at(i, 1) = static_cast<double>(i);
    }
    s.relations.at(0, 0) = 1.0;
    s.relations.at(0, 1) = 1.0;
    SplitMetrics m = evaluate(s, g.triples(), g.triple_set());
    CHECK(m.mrr == 1.0);
    CHECK(m.hits1 == 1.0);

    // monotone Hits and determinism
    SplitMetrics m2 = evaluate(s, g.triples(), g.triple_set());
    CHECK(m.mrr == m2.mrr);
    CHECK(m.hits1 <= m.hits5);
    CHECK(m.hits5 <= m.hits10);
    CHECK(m.mrr >= m.hits1);
}

TEST_CASE("report serialization round-trips and orders conditions") {
    EvalReport r;
    SplitMetrics m1{0.5, 0.25, 0.5, 0.75, 100};
    SplitMetrics m2{0.3, 0.1, 0.3, 0.5, 40};
    r.add("RAW", "test", m1);
    r.add("RAW", "forget", m2);
    r.add("Unlearned", "forget", m2);
    std::string csv = r.to_csv();
    CHECK(csv.find("condition,split,metric,value,count") == 0);
    EvalReport r2 = EvalReport::from_csv(csv);
    CHECK(r2.conditions == r.conditions);
    CHECK(r2.find("RAW", "test")->mrr == doctest::Approx(0.5));
    CHECK(r2.find("Unlearned", "forget")->query_count == 40);
    CHECK(r2.to_csv() == csv);
    std::string table = r.to_table();
    CHECK(table.find("RAW/test") != std::string::npos);
}
