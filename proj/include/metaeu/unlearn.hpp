#pragma once
// Embedding generation and unlearning.
//
// A base learner generates embeddings for unseen entities in three stages:
//   init       E_e = mean of its outgoing/ingoing relation vectors, taken
//              from the R_out / R_in tables over the support triples
//   propagate  L layers of relation-typed neighbor averaging
//              E_e^(l+1) = relu( sum_r mean_{n in N_r(e)} E_n^(l) W_r^(l)
//                                + E_e^(l) W_0^(l) )
//   integrate  E_e = concat(E_e^(0..L)) W_hei
//
// An ensemble combines N such learners under simplex weights. Losses:
//   L1  weighted per-learner margin loss on retain-context queries (descend)
//   L2  the same form on forget-context queries (ascend)
//   L3  w_a*L1 - w_b*L2, the single descent objective
//   L4  lambda4 * mean squared row distance between the combined generated
//       rows and their RAW counterparts, over retain-adjacent entities
//   L5  brief margin-loss fine-tuning of the replaced rows on retain triples
//
// meta_train learns the learner parameters, the ensemble weights and the
// R_out/R_in tables across episodic tasks; unlearn builds one task around
// the forget set, optimizes under L3+L4, splices the generated rows into a
// copy of RAW and applies L5. Rows of entities not incident to the forget
// set are bit-identical to RAW.
//
// Matrices are stored so that embeddings are row vectors and linear maps
// apply on the right (row_out = row_in * W).

#include "metaeu/kge.hpp"
#include "metaeu/metatask.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace metaeu {

struct BaseLearner {
    int32_t layers = 3;
    int64_t dim = 0;
    uint64_t init_seed = 0;
    std::vector<Tensor2> w_self;                   // L matrices, d x d
    std::map<int32_t, std::vector<Tensor2>> w_rel; // relation id -> L matrices (lazy)
    Tensor2 w_hei;                                 // (L+1)d x d

    static BaseLearner init(int32_t layers, int64_t dim, uint64_t seed);
    // The deterministic initial W_r stack for a relation; what
    // ensure_relation would install.
    std::vector<Tensor2> relation_init(int32_t rel) const;
    void ensure_relation(int32_t rel);
};

struct Ensemble {
    std::vector<BaseLearner> learners;
    std::vector<double> weights; // simplex: nonnegative, sums to 1
    Tensor2 rel_out, rel_in;     // |R| x d generation tables
    uint64_t seed = 0;

    int32_t size() const { return static_cast<int32_t>(learners.size()); }
    static Ensemble init(int32_t n_learners, int32_t layers, int64_t dim,
                         const Tensor2& rel_out0, const Tensor2& rel_in0, uint64_t seed);
    void validate() const;
};

struct AblationConfig {
    std::optional<int32_t> drop_learner; // remove f_i, renormalize w
    bool disable_raeeg = false;          // seeded random rows instead of relation means
    bool disable_neem = false;           // final embedding = initial embedding
};

// Removes one learner and renormalizes the weights; config_error when the
// index is invalid or it is the last learner.
Ensemble drop_learner(const Ensemble& ensemble, int32_t index);

// Euclidean projection onto the probability simplex.
void project_simplex(std::vector<double>& w);

// ---------------------------------------------------------------------------
// Generation context: which rows are generated, from what relation context,
// with what neighborhoods. Entities are task-local; the first n_unseen rows
// are generated, remaining rows (if any) start from fixed values.

struct GenContext {
    int32_t n_entities = 0;
    int32_t n_unseen = 0;                       // prefix of rows to generate
    std::vector<std::vector<int64_t>> out_rels; // per unseen entity, relation ids
    std::vector<std::vector<int64_t>> in_rels;
    std::vector<int32_t> relations;             // relations appearing in support, sorted
    // neighbors[k][e]: support neighbors of entity e via relations[k]
    std::vector<std::vector<std::vector<int64_t>>> neighbors;
    Tensor2 fixed_rows;                         // (n_entities - n_unseen) x d, may be 0 x d

    static GenContext from_task(const MetaTask& task);
};

// Forward-only generation of the ensemble-combined rows.
Tensor2 ensemble_embed(const GenContext& ctx, const Ensemble& ensemble,
                       const AblationConfig& abl = {}, const Tensor2* random_init = nullptr);

// Number of propagation stacks built since process start (test probe).
uint64_t neem_forward_count();

// ---------------------------------------------------------------------------
// Plain-tensor wrappers used by oracle tests; same code path as training.

Tensor2 raeeg_init_rows(const Tensor2& rel_out, const Tensor2& rel_in,
                        const std::vector<std::vector<int64_t>>& out_lists,
                        const std::vector<std::vector<int64_t>>& in_lists);
std::vector<Tensor2> neem_forward_layers(const GenContext& ctx, const BaseLearner& learner,
                                         const Tensor2& x0);
Tensor2 hei_integrate(const std::vector<Tensor2>& layer_embeddings, const Tensor2& w_hei);

// Weighted per-learner margin loss over a query set scored with generated
// embeddings (the ensemble learning/unlearning loss form). Negatives are
// supplied explicitly and paired with the query in order.
double ensemble_query_loss(const GenContext& ctx, const Ensemble& ensemble,
                           const std::vector<Triple>& query, const std::vector<Triple>& negatives,
                           ModelKind model, NormKind norm, double margin,
                           const Tensor2& relation_table);

// w_a*l1 - w_b*l2 with w_a + w_b = 1, both in [0,1]; the descent objective.
double loss_l3(double l1, double l2, double w_a, double w_b);

// lambda4 * mean squared row distance; both matrices cover the same rows.
double loss_l4(const Tensor2& generated, const Tensor2& reference, double lambda4);

// ---------------------------------------------------------------------------
// Meta-training

struct MetaTrainConfig {
    int epochs = 10;
    int meta_batch = 64;
    double learning_rate = 0.01;
    double margin = 1.0;
    int negatives_per_positive = 1;
    int layers = 3;
    int n_learners = 4;
    uint64_t seed = 0;
    NormKind norm = NormKind::L1;
    bool skip_validation = false;

    void validate() const;
};

struct MetaTrainReport {
    std::vector<double> train_loss; // mean task loss per epoch
    std::vector<double> valid_loss; // empty when validation is skipped
};

// Observer invoked after every optimizer step (invariant checks in tests).
using EnsembleObserver = std::function<void(const Ensemble&)>;

// Component switches (disable_raeeg / disable_neem) apply to the whole
// pipeline including meta-training; drop_learner is post-hoc and ignored
// here.
Ensemble meta_train(const KnowledgeGraph& graph, const EmbeddingStore& raw,
                    const TaskStream& tasks, const MetaTrainConfig& cfg,
                    MetaTrainReport* report = nullptr, const EnsembleObserver& on_step = {},
                    const AblationConfig& abl = {});

// ---------------------------------------------------------------------------
// Unlearning

struct UnlearnConfig {
    double w_a = 0.5; // w_b = 1 - w_a
    double lambda4 = 3.0;
    double offset_cap = 0.3; // per-row norm ball for the surgical offsets
    double adapt_lr = 0.0005; // learner-adaptation rate (inner_lr drives the offsets)
    int finetune_steps = 100; // L5
    int budget = 500;         // L3+L4 steps
    double inner_lr = 0.01;
    double margin = 1.0;
    double support_fraction = 0.7; // retain-query holdout
    int negatives_per_positive = 1;
    uint64_t seed = 0;
    NormKind norm = NormKind::L1;

    void validate() const;
};

// The task built around the forget set: unseen rows are the entities
// incident to forget triples, boundary rows are their retain neighbors.
struct UnlearnTask {
    // affected first, then boundary entities with support context (also
    // generated), then boundary entities that stay at their RAW rows
    std::vector<int32_t> entity_to_global;
    int32_t n_affected = 0;
    int32_t n_generated = 0; // prefix of generated rows (>= n_affected)
    std::vector<Triple> support;      // local h/t, global r; retain triples
    std::vector<Triple> retain_query; // held-out retain triples
    std::vector<Triple> forget_query; // all forget triples
    std::vector<int32_t> fallback;    // local ids generated from forget context only
};

UnlearnTask build_unlearn_task(const KnowledgeGraph& graph, const ForgetSplit& split,
                               double support_fraction, uint64_t seed);

struct UnlearnReport {
    std::vector<double> l1_history, l2_history, l3_history, l4_history;
    std::vector<double> finetune_loss;
    size_t n_affected = 0;
    size_t n_fallback = 0;
};

EmbeddingStore unlearn(const KnowledgeGraph& graph, const EmbeddingStore& raw,
                       const ForgetSplit& split, const Ensemble& trained,
                       const UnlearnConfig& cfg, UnlearnReport* report = nullptr,
                       const AblationConfig& abl = {}, const EnsembleObserver& on_step = {});

// ---------------------------------------------------------------------------
// Ensemble checkpoint: text header (MEU1, N, L, d, |R|, seed, materialized
// relation ids), then little-endian doubles: weights, per learner
// [W_0 x L][W_r x L per listed relation][W_hei], then R_out, R_in.
// Round-trips bit-exactly.

void save_ensemble(const Ensemble& ensemble, const std::string& path);
Ensemble load_ensemble(const std::string& path);

} // namespace metaeu
