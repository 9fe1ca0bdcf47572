#pragma once
// The four scoring models, margin ranking loss, negative sampling, and the
// plain mini-batch SGD training loop that produces RAW and Retrained
// embedding stores.
//
// Scoring conventions (higher = more plausible):
//   TransE    -||E_h + R_r - E_t||        (L1 or L2, per norm kind)
//   DistMult  sum_k E_h[k] R_r[k] E_t[k]
//   ComplEx   Re(<E_h, R_r, conj(E_t)>)   (first half real, second half imaginary)
//   RotatE    -||E_h ∘ rot(R_r) - E_t||_2 (complex Hadamard rotation; relation
//              coordinates are phases in [-pi, pi), one per complex coordinate)
//
// E, R, R_out and R_in are independent tables. R is the scoring table;
// R_out/R_in only feed relation-aware embedding generation and are not
// touched by this trainer.

#include "metaeu/kgraph.hpp"
#include "metaeu/tape.hpp"
#include "metaeu/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace metaeu {

enum class ModelKind { TransE, DistMult, ComplEx, RotatE };
enum class NormKind { L1, L2 };

const char* model_name(ModelKind kind);
ModelKind parse_model(const std::string& name);
const char* norm_name(NormKind kind);
NormKind parse_norm(const std::string& name);

struct EmbeddingStore {
    ModelKind model = ModelKind::TransE;
    int64_t dim = 0;
    Tensor2 entities;   // |E| x d
    Tensor2 relations;  // |R| x d, scoring table
    Tensor2 rel_out;    // |R| x d, outgoing-relation table for generation
    Tensor2 rel_in;     // |R| x d, ingoing-relation table for generation

    int64_t entity_count() const { return entities.rows; }
    int64_t relation_count() const { return relations.rows; }

    // Uniform init in [-6/sqrt(d), 6/sqrt(d)]; RotatE relation rows are
    // phases in [-pi, pi). ComplEx/RotatE require even d.
    static EmbeddingStore init(ModelKind kind, int64_t n_entities, int64_t n_relations,
                               int64_t dim, uint64_t seed);

    void check_finite(const char* where) const;
};

// Plain scalar scoring of one triple.
double score(const EmbeddingStore& store, int32_t h, int32_t r, int32_t t,
             NormKind norm = NormKind::L1);

// Tape scoring of a batch: H, R, T are n x d nodes holding the head,
// relation and tail rows for n triples; returns an n x 1 score node.
Tape::Id score_batch(Tape& tape, ModelKind model, NormKind norm, Tape::Id H, Tape::Id R,
                     Tape::Id T);

// sum over pairs of max(0, gamma + s(neg) - s(pos)); pos/neg are paired.
Tape::Id hinge_margin(Tape& tape, Tape::Id pos_scores, Tape::Id neg_scores, double gamma);

// Scalar version of the pairwise margin loss over explicit triples.
double margin_loss(const EmbeddingStore& store, const std::vector<Triple>& positives,
                   const std::vector<Triple>& negatives, double gamma,
                   NormKind norm = NormKind::L1);

// Corrupts head or tail (fair coin) with a uniform entity until the result
// leaves the known set; throws sampling_error after 64 rejected draws.
Triple negative_sample(const KnowledgeGraph& graph, const Triple& triple, Rng& rng);
Triple negative_sample(int32_t n_entities, const TripleSet& known, const Triple& triple,
                       Rng& rng);

struct TrainConfig {
    double learning_rate = 0.01;
    double margin = 1.0;
    int epochs = 100;
    int batch_size = 64;
    int negatives_per_positive = 1;
    uint64_t seed = 0;
    NormKind norm = NormKind::L1;

    void validate() const;
};

// Mini-batch SGD on the margin loss over `train_triples`. The store is
// sized by `vocab_graph` so that RAW and Retrained runs share indexing;
// negative sampling excludes membership in `train_triples`.
EmbeddingStore train_baseline(const KnowledgeGraph& vocab_graph,
                              const std::vector<Triple>& train_triples, ModelKind kind,
                              int64_t dim, const TrainConfig& cfg,
                              std::vector<double>* epoch_losses = nullptr);

// Checkpoint: text header (KGEU1, model, |E|, |R|, d) followed by row-major
// little-endian doubles for E, R, R_out, R_in. Vocabulary sidecars
// <path>.entities.txt / <path>.relations.txt hold one identifier per line
// in index order. Round-trips bit-exactly.
void save_store(const EmbeddingStore& store, const std::string& path,
                const std::vector<std::string>& entity_names,
                const std::vector<std::string>& relation_names);
EmbeddingStore load_store(const std::string& path);
std::vector<std::string> load_vocab_sidecar(const std::string& path);

} // namespace metaeu
