#pragma once
// Episodic task sampling. A task is a connected subgraph obtained by
// random-walk expansion from a seed entity; its triples are split into a
// support set (used to generate embeddings for the task's entities, all of
// which are treated as unseen) and a query set (used to compute the loss).
//
// Invariants kept by the sampler:
//   - support and query partition the task triples, query nonempty
//   - every query triple has both endpoints in at least one support triple
//     (uncovered query triples are repaired by moving them to support)
//   - the subgraph is connected when edge direction is ignored

#include "metaeu/kgraph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace metaeu {

struct MetaTask {
    // local index space 0..n_entities-1
    std::vector<int32_t> entity_to_global;   // local entity -> global entity
    std::vector<int32_t> relation_to_global; // local relation -> global relation (sorted)
    std::vector<Triple> support;             // local indices
    std::vector<Triple> query;               // local indices

    int32_t entity_count() const { return static_cast<int32_t>(entity_to_global.size()); }
    std::vector<Triple> all_triples() const;
};

struct TaskParams {
    int32_t n_entities = 20;
    int32_t max_triples = 200;
    double support_fraction = 0.7;

    void validate() const;
};

// Samples one task seeded from `seed_pool` (global entity ids). Resamples
// internally on degenerate draws (isolated seed, empty query) and throws
// sampling_error after 32 failures.
MetaTask sample_task(const KnowledgeGraph& graph, const TaskParams& params,
                     const std::vector<int32_t>& seed_pool, Rng& rng);

struct TaskStream {
    std::vector<MetaTask> train;
    std::vector<MetaTask> valid;
};

// k_train + k_valid tasks with seed entities drawn from disjoint pools.
// Task i's randomness derives from (seed, i), so streams are reproducible
// and independent of evaluation order.
TaskStream task_stream(const KnowledgeGraph& graph, int32_t k_train, int32_t k_valid,
                       const TaskParams& params, uint64_t seed);

// Debug dump: one record per task listing support/query triples by global
// ids, stable across runs for a fixed seed.
std::string dump_tasks(const std::vector<MetaTask>& tasks);

} // namespace metaeu
