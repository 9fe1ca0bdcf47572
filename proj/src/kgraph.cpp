#include "metaeu/kgraph.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

namespace metaeu {

namespace {

int32_t intern(std::vector<std::string>& names,
               std::unordered_map<std::string, int32_t>& ids, const std::string& s) {
    auto it = ids.find(s);
    if (it != ids.end()) return it->second;
    int32_t idx = static_cast<int32_t>(names.size());
    names.push_back(s);
    ids.emplace(s, idx);
    return idx;
}

} // namespace

KnowledgeGraph KnowledgeGraph::from_triples(
    const std::vector<std::array<std::string, 3>>& rows) {
    KnowledgeGraph g;
    for (const auto& row : rows) {
        int32_t h = intern(g.entity_names_, g.entity_ids_, row[0]);
        int32_t r = intern(g.relation_names_, g.relation_ids_, row[1]);
        int32_t t = intern(g.entity_names_, g.entity_ids_, row[2]);
        Triple tr{h, r, t};
        if (g.triple_set_.insert(tr).second)
            g.triples_.push_back(tr);
        else
            ++g.duplicates_;
    }
    if (g.triples_.empty()) throw Error("empty_graph", "no triples in input");
    g.build_indices();
    return g;
}

KnowledgeGraph KnowledgeGraph::load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io_error", "cannot open " + path);
    std::vector<std::array<std::string, 3>> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        size_t tab1 = line.find('\t');
        size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        size_t tab3 = tab2 == std::string::npos ? std::string::npos : line.find('\t', tab2 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos || tab3 != std::string::npos)
            throw Error("parse_error",
                        path + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
        rows.push_back({line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1),
                        line.substr(tab2 + 1)});
    }
    if (rows.empty()) throw Error("empty_graph", path + ": no triples");
    return from_triples(rows);
}

KnowledgeGraph KnowledgeGraph::from_vocab_and_triples(std::vector<std::string> entities,
                                                      std::vector<std::string> relations,
                                                      const std::vector<Triple>& triples) {
    KnowledgeGraph g;
    g.entity_names_ = std::move(entities);
    g.relation_names_ = std::move(relations);
    for (size_t i = 0; i < g.entity_names_.size(); ++i)
        g.entity_ids_.emplace(g.entity_names_[i], static_cast<int32_t>(i));
    for (size_t i = 0; i < g.relation_names_.size(); ++i)
        g.relation_ids_.emplace(g.relation_names_[i], static_cast<int32_t>(i));
    for (const Triple& t : triples) {
        if (t.h < 0 || t.h >= g.entity_count() || t.t < 0 || t.t >= g.entity_count() ||
            t.r < 0 || t.r >= g.relation_count())
            throw Error("index_error", "triple references an unknown vocabulary index");
        if (g.triple_set_.insert(t).second)
            g.triples_.push_back(t);
        else
            ++g.duplicates_;
    }
    // empty triple lists are allowed here: stage reloads use a vocabulary-only
    // graph to map name TSVs before the real graph is assembled
    g.build_indices();
    return g;
}

std::vector<Triple> KnowledgeGraph::parse_triples_tsv(const std::string& path) const {
    std::ifstream in(path);
    if (!in) throw Error("io_error", "cannot open " + path);
    std::vector<Triple> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        size_t tab1 = line.find('\t');
        size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        size_t tab3 = tab2 == std::string::npos ? std::string::npos : line.find('\t', tab2 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos || tab3 != std::string::npos)
            throw Error("parse_error",
                        path + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
        int32_t h = entity_index(line.substr(0, tab1));
        int32_t r = relation_index(line.substr(tab1 + 1, tab2 - tab1 - 1));
        int32_t t = entity_index(line.substr(tab2 + 1));
        if (h < 0 || r < 0 || t < 0)
            throw Error("unknown_triple",
                        path + ":" + std::to_string(lineno) + ": name not in vocabulary");
        out.push_back({h, r, t});
    }
    return out;
}

void KnowledgeGraph::save_tsv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("io_error", "cannot write " + path);
    for (const Triple& t : triples_)
        out << entity_name(t.h) << '\t' << relation_name(t.r) << '\t' << entity_name(t.t)
            << '\n';
    if (!out) throw Error("io_error", "write failed: " + path);
}

int32_t KnowledgeGraph::entity_index(const std::string& name) const {
    auto it = entity_ids_.find(name);
    return it == entity_ids_.end() ? -1 : it->second;
}

int32_t KnowledgeGraph::relation_index(const std::string& name) const {
    auto it = relation_ids_.find(name);
    return it == relation_ids_.end() ? -1 : it->second;
}

void KnowledgeGraph::check_entity(int32_t e) const {
    if (e < 0 || e >= entity_count())
        throw Error("index_error", "entity index " + std::to_string(e) + " out of range");
}

void KnowledgeGraph::build_indices() {
    out_index_.assign(entity_names_.size(), {});
    in_index_.assign(entity_names_.size(), {});
    incident_.assign(entity_names_.size(), {});

    auto push = [](std::vector<std::pair<int32_t, std::vector<int32_t>>>& adj, int32_t r,
                   int32_t other) {
        for (auto& [rel, nbrs] : adj)
            if (rel == r) {
                nbrs.push_back(other);
                return;
            }
        adj.push_back({r, {other}});
    };

    for (size_t pos = 0; pos < triples_.size(); ++pos) {
        const Triple& t = triples_[pos];
        push(out_index_[static_cast<size_t>(t.h)], t.r, t.t);
        push(in_index_[static_cast<size_t>(t.t)], t.r, t.h);
        incident_[static_cast<size_t>(t.h)].push_back(static_cast<int32_t>(pos));
        if (t.t != t.h) incident_[static_cast<size_t>(t.t)].push_back(static_cast<int32_t>(pos));
    }
    auto by_rel = [](const auto& a, const auto& b) { return a.first < b.first; };
    for (auto& adj : out_index_) std::sort(adj.begin(), adj.end(), by_rel);
    for (auto& adj : in_index_) std::sort(adj.begin(), adj.end(), by_rel);
}

std::set<int32_t> KnowledgeGraph::out_relations(int32_t e) const {
    check_entity(e);
    std::set<int32_t> rels;
    for (const auto& [r, nbrs] : out_index_[static_cast<size_t>(e)]) rels.insert(r);
    return rels;
}

std::set<int32_t> KnowledgeGraph::in_relations(int32_t e) const {
    check_entity(e);
    std::set<int32_t> rels;
    for (const auto& [r, nbrs] : in_index_[static_cast<size_t>(e)]) rels.insert(r);
    return rels;
}

const std::vector<std::pair<int32_t, std::vector<int32_t>>>& KnowledgeGraph::out_adjacency(
    int32_t e) const {
    check_entity(e);
    return out_index_[static_cast<size_t>(e)];
}

const std::vector<std::pair<int32_t, std::vector<int32_t>>>& KnowledgeGraph::in_adjacency(
    int32_t e) const {
    check_entity(e);
    return in_index_[static_cast<size_t>(e)];
}

std::vector<Triple> KnowledgeGraph::incident_triples(int32_t e) const {
    check_entity(e);
    std::vector<Triple> out;
    out.reserve(incident_[static_cast<size_t>(e)].size());
    for (int32_t pos : incident_[static_cast<size_t>(e)])
        out.push_back(triples_[static_cast<size_t>(pos)]);
    return out;
}

ForgetSplit split_forget(const KnowledgeGraph& graph, double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw Error("config_error", "forget fraction must be in (0,1)");
    const auto& triples = graph.triples();
    std::vector<size_t> order(triples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    size_t n_forget = static_cast<size_t>(
        std::llround(fraction * static_cast<double>(triples.size())));

    std::vector<char> is_forget(triples.size(), 0);
    for (size_t i = 0; i < n_forget; ++i) is_forget[order[i]] = 1;

    ForgetSplit split;
    for (size_t i = 0; i < triples.size(); ++i)
        (is_forget[i] ? split.forget : split.retain).push_back(triples[i]);
    return split;
}

ForgetSplit split_forget(const KnowledgeGraph& graph, const std::vector<Triple>& forget_list) {
    TripleSet forget_set;
    for (const Triple& t : forget_list) {
        if (!graph.contains(t))
            throw Error("unknown_triple", "listed triple is not in the graph");
        forget_set.insert(t);
    }
    ForgetSplit split;
    for (const Triple& t : graph.triples())
        (forget_set.count(t) ? split.forget : split.retain).push_back(t);
    return split;
}

} // namespace metaeu
