#include "metaeu/evalrank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace metaeu {

RankResult rank_query(const EmbeddingStore& store, const Triple& triple, QuerySide side,
                      const TripleSet& known, EvalMode mode, NormKind norm) {
    const int32_t n_entities = static_cast<int32_t>(store.entity_count());
    const double true_score = score(store, triple.h, triple.r, triple.t, norm);

    int64_t higher = 0, ties = 0;
    for (int32_t e = 0; e < n_entities; ++e) {
        Triple cand = triple;
        if (side == QuerySide::Head)
            cand.h = e;
        else
            cand.t = e;
        bool is_true = (side == QuerySide::Head ? e == triple.h : e == triple.t);
        if (is_true) continue;
        if (mode == EvalMode::Filtered && known.count(cand)) continue;
        double s = score(store, cand.h, cand.r, cand.t, norm);
        if (s > true_score)
            ++higher;
        else if (s == true_score)
            ++ties;
    }
    RankResult r;
    r.query = triple;
    r.side = side;
    r.rank = 1 + higher + (ties + 1) / 2; // average-tie, rounded up
    return r;
}

double mrr(const std::vector<int64_t>& ranks) {
    if (ranks.empty()) throw Error("contract_error", "empty rank list");
    double acc = 0.0;
    for (int64_t r : ranks) acc += 1.0 / static_cast<double>(r);
    return acc / static_cast<double>(ranks.size());
}

double hits_at(const std::vector<int64_t>& ranks, int64_t n) {
    if (ranks.empty()) throw Error("contract_error", "empty rank list");
    int64_t hit = 0;
    for (int64_t r : ranks)
        if (r <= n) ++hit;
    return static_cast<double>(hit) / static_cast<double>(ranks.size());
}

SplitMetrics evaluate(const EmbeddingStore& store, const std::vector<Triple>& split,
                      const TripleSet& known, EvalMode mode, NormKind norm) {
    if (split.empty()) throw Error("contract_error", "empty evaluation split");
    std::vector<int64_t> ranks;
    ranks.reserve(split.size() * 2);
    for (const Triple& t : split) {
        ranks.push_back(rank_query(store, t, QuerySide::Head, known, mode, norm).rank);
        ranks.push_back(rank_query(store, t, QuerySide::Tail, known, mode, norm).rank);
    }
    SplitMetrics m;
    m.mrr = mrr(ranks);
    m.hits1 = hits_at(ranks, 1);
    m.hits5 = hits_at(ranks, 5);
    m.hits10 = hits_at(ranks, 10);
    m.query_count = ranks.size();
    return m;
}

void EvalReport::add(const std::string& condition, const std::string& split,
                     const SplitMetrics& m) {
    if (std::find(conditions.begin(), conditions.end(), condition) == conditions.end())
        conditions.push_back(condition);
    if (std::find(splits.begin(), splits.end(), split) == splits.end()) splits.push_back(split);
    cells[{condition, split}] = m;
}

const SplitMetrics* EvalReport::find(const std::string& condition,
                                     const std::string& split) const {
    auto it = cells.find({condition, split});
    return it == cells.end() ? nullptr : &it->second;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "condition,split,metric,value,count\n";
    for (const auto& c : conditions) {
        for (const auto& s : splits) {
            const SplitMetrics* m = find(c, s);
            if (!m) continue;
            out << c << ',' << s << ",mrr," << fmt(m->mrr) << ',' << m->query_count << '\n';
            out << c << ',' << s << ",hits1," << fmt(m->hits1) << ',' << m->query_count << '\n';
            out << c << ',' << s << ",hits5," << fmt(m->hits5) << ',' << m->query_count << '\n';
            out << c << ',' << s << ",hits10," << fmt(m->hits10) << ',' << m->query_count << '\n';
        }
    }
    return out.str();
}

EvalReport EvalReport::from_csv(const std::string& text) {
    EvalReport report;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "condition,split,metric,value,count")
        throw Error("parse_error", "bad report header");
    std::map<std::pair<std::string, std::string>, SplitMetrics> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cond, split, metric, value, count;
        if (!std::getline(row, cond, ',') || !std::getline(row, split, ',') ||
            !std::getline(row, metric, ',') || !std::getline(row, value, ',') ||
            !std::getline(row, count))
            throw Error("parse_error", "bad report row: " + line);
        SplitMetrics& m = cells[{cond, split}];
        double v = std::stod(value);
        if (metric == "mrr")
            m.mrr = v;
        else if (metric == "hits1")
            m.hits1 = v;
        else if (metric == "hits5")
            m.hits5 = v;
        else if (metric == "hits10")
            m.hits10 = v;
        else
            throw Error("parse_error", "unknown metric: " + metric);
        m.query_count = static_cast<size_t>(std::stoull(count));
        if (std::find(report.conditions.begin(), report.conditions.end(), cond) ==
            report.conditions.end())
            report.conditions.push_back(cond);
        if (std::find(report.splits.begin(), report.splits.end(), split) ==
            report.splits.end())
            report.splits.push_back(split);
    }
    report.cells = std::move(cells);
    return report;
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    out << "metric      ";
    for (const auto& c : conditions)
        for (const auto& s : splits)
            if (find(c, s)) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), " %18s", (c + "/" + s).c_str());
                out << buf;
            }
    out << '\n';
    const char* names[4] = {"mrr", "hits@1", "hits@5", "hits@10"};
    for (int row = 0; row < 4; ++row) {
        char head[16];
        std::snprintf(head, sizeof(head), "%-12s", names[row]);
        out << head;
        for (const auto& c : conditions) {
            for (const auto& s : splits) {
                const SplitMetrics* m = find(c, s);
                if (!m) continue;
                double v = row == 0 ? m->mrr : row == 1 ? m->hits1 : row == 2 ? m->hits5 : m->hits10;
                char buf[32];
                std::snprintf(buf, sizeof(buf), " %18.4f", v);
                out << buf;
            }
        }
        out << '\n';
    }
    return out.str();
}

} // namespace metaeu
