#include "metaeu/metatask.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

namespace metaeu {

std::vector<Triple> MetaTask::all_triples() const {
    std::vector<Triple> all = support;
    all.insert(all.end(), query.begin(), query.end());
    return all;
}

void TaskParams::validate() const {
    if (n_entities < 2) throw Error("config_error", "task needs at least 2 entities");
    if (max_triples < 1) throw Error("config_error", "max_triples must be positive");
    if (!(support_fraction > 0.0 && support_fraction < 1.0))
        throw Error("config_error", "support_fraction must be in (0,1)");
}

namespace {

struct Draw {
    std::vector<int32_t> entities;  // global ids, discovery order
    std::vector<Triple> skeleton;   // global triples that connected the walk
};

// Random-walk expansion: grow an entity set from the seed by repeatedly
// picking a random member and a random incident triple, keeping the triples
// that first reached a new entity as the connected skeleton.
bool expand(const KnowledgeGraph& graph, int32_t seed_entity, int32_t target, Rng& rng,
            Draw& out) {
    std::unordered_map<int32_t, int32_t> local;
    out.entities.clear();
    out.skeleton.clear();
    auto add = [&](int32_t e) {
        if (local.count(e)) return false;
        local.emplace(e, static_cast<int32_t>(out.entities.size()));
        out.entities.push_back(e);
        return true;
    };
    add(seed_entity);

    int stall = 0;
    while (static_cast<int32_t>(out.entities.size()) < target && stall < 64) {
        int32_t from = out.entities[rng.uniform_index(out.entities.size())];
        auto incident = graph.incident_triples(from);
        if (incident.empty()) return out.entities.size() >= 2;
        const Triple& tr = incident[rng.uniform_index(incident.size())];
        int32_t other = tr.h == from ? tr.t : tr.h;
        if (add(other))
            out.skeleton.push_back(tr);
        else
            ++stall; // saturated neighborhood; eventually give up on growth
    }
    return out.entities.size() >= 2;
}

} // namespace

MetaTask sample_task(const KnowledgeGraph& graph, const TaskParams& params,
                     const std::vector<int32_t>& seed_pool, Rng& rng) {
    params.validate();
    if (seed_pool.empty()) throw Error("config_error", "empty seed-entity pool");

    for (int attempt = 0; attempt < 32; ++attempt) {
        int32_t seed_entity = seed_pool[rng.uniform_index(seed_pool.size())];
        Draw draw;
        if (!expand(graph, seed_entity, params.n_entities, rng, draw)) continue;

        std::unordered_map<int32_t, int32_t> local;
        for (size_t i = 0; i < draw.entities.size(); ++i)
            local.emplace(draw.entities[i], static_cast<int32_t>(i));

        // induced triples, skeleton first so the cap keeps connectivity
        TripleSet chosen(draw.skeleton.begin(), draw.skeleton.end());
        std::vector<Triple> kept = draw.skeleton;
        std::vector<Triple> extra;
        for (const Triple& t : graph.triples())
            if (local.count(t.h) && local.count(t.t) && !chosen.count(t)) extra.push_back(t);
        rng.shuffle(extra);
        for (const Triple& t : extra) {
            if (static_cast<int32_t>(kept.size()) >= params.max_triples) break;
            kept.push_back(t);
        }
        if (kept.size() < 2) continue; // cannot split into nonempty support and query

        // support/query split
        std::vector<size_t> order(kept.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        size_t n_support = static_cast<size_t>(std::llround(
            params.support_fraction * static_cast<double>(kept.size())));
        n_support = std::clamp<size_t>(n_support, 1, kept.size() - 1);

        std::vector<char> in_support(kept.size(), 0);
        for (size_t i = 0; i < n_support; ++i) in_support[order[i]] = 1;

        // coverage repair: move query triples whose endpoints never appear in
        // support into support, until stable
        auto covered = [&](int32_t e) {
            for (size_t i = 0; i < kept.size(); ++i)
                if (in_support[i] && (kept[i].h == e || kept[i].t == e)) return true;
            return false;
        };
        bool moved = true;
        while (moved) {
            moved = false;
            for (size_t i = 0; i < kept.size(); ++i) {
                if (in_support[i]) continue;
                if (!covered(kept[i].h) || !covered(kept[i].t)) {
                    in_support[i] = 1;
                    moved = true;
                }
            }
        }

        MetaTask task;
        bool query_empty = true;
        for (size_t i = 0; i < kept.size(); ++i) {
            Triple t{local.at(kept[i].h), kept[i].r, local.at(kept[i].t)};
            if (in_support[i])
                task.support.push_back(t);
            else {
                task.query.push_back(t);
                query_empty = false;
            }
        }
        if (query_empty) continue; // the query loss is undefined on an empty set

        task.entity_to_global = draw.entities;
        std::set<int32_t> rels;
        for (const Triple& t : kept) rels.insert(t.r);
        task.relation_to_global.assign(rels.begin(), rels.end());
        // triples keep global relation ids; only entities are re-indexed
        return task;
    }
    throw Error("sampling_error", "could not sample a valid task after 32 attempts");
}

TaskStream task_stream(const KnowledgeGraph& graph, int32_t k_train, int32_t k_valid,
                       const TaskParams& params, uint64_t seed) {
    params.validate();
    if (k_train <= 0 || k_valid < 0) throw Error("config_error", "bad task counts");

    std::vector<int32_t> entities(static_cast<size_t>(graph.entity_count()));
    for (size_t i = 0; i < entities.size(); ++i) entities[i] = static_cast<int32_t>(i);
    Rng pool_rng = Rng(seed).fork(0xb001ULL);
    pool_rng.shuffle(entities);

    // 9:1 train/valid seed-pool split (validation pool only if requested)
    size_t n_valid_pool = k_valid > 0 ? std::max<size_t>(1, entities.size() / 10) : 0;
    if (entities.size() < n_valid_pool + 2)
        throw Error("config_error", "graph too small for disjoint seed pools");
    std::vector<int32_t> valid_pool(entities.begin(),
                                    entities.begin() + static_cast<long>(n_valid_pool));
    std::vector<int32_t> train_pool(entities.begin() + static_cast<long>(n_valid_pool),
                                    entities.end());

    TaskStream stream;
    stream.train.reserve(static_cast<size_t>(k_train));
    stream.valid.reserve(static_cast<size_t>(k_valid));
    for (int32_t i = 0; i < k_train; ++i) {
        Rng task_rng = Rng(seed).fork(0x7a5c0000ULL + static_cast<uint64_t>(i));
        stream.train.push_back(sample_task(graph, params, train_pool, task_rng));
    }
    for (int32_t i = 0; i < k_valid; ++i) {
        Rng task_rng = Rng(seed).fork(0x7a5cf0000ULL + static_cast<uint64_t>(i));
        stream.valid.push_back(sample_task(graph, params, valid_pool, task_rng));
    }
    return stream;
}

std::string dump_tasks(const std::vector<MetaTask>& tasks) {
    std::ostringstream out;
    for (size_t i = 0; i < tasks.size(); ++i) {
        const MetaTask& t = tasks[i];
        out << "task " << i << " entities";
        for (int32_t e : t.entity_to_global) out << ' ' << e;
        out << "\n support";
        for (const Triple& tr : t.support)
            out << ' ' << t.entity_to_global[static_cast<size_t>(tr.h)] << ':' << tr.r << ':'
                << t.entity_to_global[static_cast<size_t>(tr.t)];
        out << "\n query";
        for (const Triple& tr : t.query)
            out << ' ' << t.entity_to_global[static_cast<size_t>(tr.h)] << ':' << tr.r << ':'
                << t.entity_to_global[static_cast<size_t>(tr.t)];
        out << '\n';
    }
    return out.str();
}

} // namespace metaeu
