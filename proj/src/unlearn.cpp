#include "metaeu/unlearn.hpp"
#include "metaeu/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

namespace metaeu {

namespace {

std::atomic<uint64_t> g_neem_count{0};

Tensor2 scaled_uniform(int64_t rows, int64_t cols, int64_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor2::uniform(rows, cols, -bound, bound, rng);
}

} // namespace

uint64_t neem_forward_count() { return g_neem_count.load(); }

BaseLearner BaseLearner::init(int32_t layers, int64_t dim, uint64_t seed) {
    if (layers < 0) throw Error("config_error", "layer count must be nonnegative");
    if (dim <= 0) throw Error("config_error", "dimension must be positive");
    BaseLearner b;
    b.layers = layers;
    b.dim = dim;
    b.init_seed = seed;
    Rng rng(seed);
    for (int32_t l = 0; l < layers; ++l) b.w_self.push_back(scaled_uniform(dim, dim, dim, rng));
    b.w_hei = scaled_uniform((layers + 1) * dim, dim, (layers + 1) * dim, rng);
    return b;
}

std::vector<Tensor2> BaseLearner::relation_init(int32_t rel) const {
    Rng rng(Rng(init_seed).fork(0x47e1ULL + static_cast<uint64_t>(rel)).next_u64());
    std::vector<Tensor2> mats;
    for (int32_t l = 0; l < layers; ++l) mats.push_back(scaled_uniform(dim, dim, dim, rng));
    return mats;
}

void BaseLearner::ensure_relation(int32_t rel) {
    if (w_rel.count(rel)) return;
    w_rel.emplace(rel, relation_init(rel));
}

Ensemble Ensemble::init(int32_t n_learners, int32_t layers, int64_t dim,
                        const Tensor2& rel_out0, const Tensor2& rel_in0, uint64_t seed) {
    if (n_learners < 1) throw Error("config_error", "ensemble needs at least one learner");
    Ensemble e;
    e.seed = seed;
    for (int32_t i = 0; i < n_learners; ++i)
        e.learners.push_back(BaseLearner::init(
            layers, dim, Rng(seed).fork(0x1ea0ULL + static_cast<uint64_t>(i)).next_u64()));
    e.weights.assign(static_cast<size_t>(n_learners), 1.0 / n_learners);
    e.rel_out = rel_out0;
    e.rel_in = rel_in0;
    return e;
}

void Ensemble::validate() const {
    if (learners.empty()) throw Error("config_error", "empty ensemble");
    if (weights.size() != learners.size())
        throw Error("config_error", "weight count does not match learner count");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw Error("config_error", "negative ensemble weight");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw Error("config_error", "ensemble weights must sum to 1");
}

Ensemble drop_learner(const Ensemble& ensemble, int32_t index) {
    if (index < 0 || index >= ensemble.size())
        throw Error("config_error", "learner index out of range");
    if (ensemble.size() == 1) throw Error("config_error", "cannot drop the last learner");
    Ensemble out;
    out.seed = ensemble.seed;
    out.rel_out = ensemble.rel_out;
    out.rel_in = ensemble.rel_in;
    double kept = 0.0;
    for (int32_t i = 0; i < ensemble.size(); ++i) {
        if (i == index) continue;
        out.learners.push_back(ensemble.learners[static_cast<size_t>(i)]);
        out.weights.push_back(ensemble.weights[static_cast<size_t>(i)]);
        kept += ensemble.weights[static_cast<size_t>(i)];
    }
    if (kept <= 0.0) {
        // the dropped learner held all the mass
        for (double& w : out.weights) w = 1.0 / static_cast<double>(out.weights.size());
    } else {
        for (double& w : out.weights) w /= kept;
    }
    return out;
}

void project_simplex(std::vector<double>& w) {
    const size_t n = w.size();
    std::vector<double> u = w;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    for (size_t i = 0; i < n; ++i) {
        css += u[i];
        double t = (css - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) theta = t;
    }
    double sum = 0.0;
    for (double& v : w) {
        v = std::max(v - theta, 0.0);
        sum += v;
    }
    // guard against accumulated rounding
    if (sum > 0.0)
        for (double& v : w) v /= sum;
    else
        for (double& v : w) v = 1.0 / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Generation context

GenContext GenContext::from_task(const MetaTask& task) {
    GenContext ctx;
    ctx.n_entities = task.entity_count();
    ctx.n_unseen = task.entity_count();
    ctx.out_rels.assign(static_cast<size_t>(ctx.n_entities), {});
    ctx.in_rels.assign(static_cast<size_t>(ctx.n_entities), {});

    std::set<int32_t> rels;
    for (const Triple& t : task.support) rels.insert(t.r);
    ctx.relations.assign(rels.begin(), rels.end());
    std::unordered_map<int32_t, size_t> rel_slot;
    for (size_t k = 0; k < ctx.relations.size(); ++k) rel_slot.emplace(ctx.relations[k], k);

    std::vector<std::set<int64_t>> out_sets(static_cast<size_t>(ctx.n_entities));
    std::vector<std::set<int64_t>> in_sets(static_cast<size_t>(ctx.n_entities));
    std::vector<std::vector<std::set<int64_t>>> nbr_sets(
        ctx.relations.size(), std::vector<std::set<int64_t>>(static_cast<size_t>(ctx.n_entities)));

    for (const Triple& t : task.support) {
        out_sets[static_cast<size_t>(t.h)].insert(t.r);
        in_sets[static_cast<size_t>(t.t)].insert(t.r);
        size_t k = rel_slot.at(t.r);
        nbr_sets[k][static_cast<size_t>(t.h)].insert(t.t);
        nbr_sets[k][static_cast<size_t>(t.t)].insert(t.h);
    }
    for (int32_t e = 0; e < ctx.n_entities; ++e) {
        ctx.out_rels[static_cast<size_t>(e)].assign(out_sets[static_cast<size_t>(e)].begin(),
                                                    out_sets[static_cast<size_t>(e)].end());
        ctx.in_rels[static_cast<size_t>(e)].assign(in_sets[static_cast<size_t>(e)].begin(),
                                                   in_sets[static_cast<size_t>(e)].end());
    }
    ctx.neighbors.resize(ctx.relations.size());
    for (size_t k = 0; k < ctx.relations.size(); ++k) {
        ctx.neighbors[k].resize(static_cast<size_t>(ctx.n_entities));
        for (int32_t e = 0; e < ctx.n_entities; ++e)
            ctx.neighbors[k][static_cast<size_t>(e)].assign(
                nbr_sets[k][static_cast<size_t>(e)].begin(),
                nbr_sets[k][static_cast<size_t>(e)].end());
    }
    return ctx;
}

// ---------------------------------------------------------------------------
// Tape builders

namespace {

// Tape leaves for one learner's parameters, restricted to the relations a
// context needs; w_rel ids are positionally aligned with ctx.relations.
struct LearnerNodes {
    std::vector<Tape::Id> w_self;
    std::vector<std::vector<Tape::Id>> w_rel;
    Tape::Id w_hei = Tape::kNone;
};

using Bindings = std::vector<std::pair<Tensor2*, Tape::Id>>;

// Training binding: materializes lazy relation matrices and records
// (parameter, leaf) pairs for the optimizer.
LearnerNodes bind_learner_train(Tape& tape, BaseLearner& learner,
                                const std::vector<int32_t>& rels, Bindings& bindings) {
    LearnerNodes nodes;
    auto bind = [&](Tensor2& t) {
        Tape::Id id = tape.leaf(t, true);
        bindings.push_back({&t, id});
        return id;
    };
    for (auto& w : learner.w_self) nodes.w_self.push_back(bind(w));
    for (int32_t r : rels) {
        learner.ensure_relation(r);
        std::vector<Tape::Id> ids;
        for (auto& m : learner.w_rel.at(r)) ids.push_back(bind(m));
        nodes.w_rel.push_back(std::move(ids));
    }
    nodes.w_hei = bind(learner.w_hei);
    return nodes;
}

// Evaluation binding: constants only; never mutates the learner. Relations
// the learner has not materialized use their deterministic initial values.
LearnerNodes bind_learner_const(Tape& tape, const BaseLearner& learner,
                                const std::vector<int32_t>& rels) {
    LearnerNodes nodes;
    for (const auto& w : learner.w_self) nodes.w_self.push_back(tape.constant(w));
    for (int32_t r : rels) {
        std::vector<Tape::Id> ids;
        auto it = learner.w_rel.find(r);
        if (it != learner.w_rel.end()) {
            for (const auto& m : it->second) ids.push_back(tape.constant(m));
        } else {
            for (auto& m : learner.relation_init(r)) ids.push_back(tape.constant(std::move(m)));
        }
        nodes.w_rel.push_back(std::move(ids));
    }
    nodes.w_hei = tape.constant(learner.w_hei);
    return nodes;
}

Tape::Id raeeg_node(Tape& tape, const GenContext& ctx, Tape::Id rel_out_node,
                    Tape::Id rel_in_node) {
    std::vector<double> weights(static_cast<size_t>(ctx.n_unseen), 0.0);
    for (int32_t e = 0; e < ctx.n_unseen; ++e) {
        size_t total = ctx.out_rels[static_cast<size_t>(e)].size() +
                       ctx.in_rels[static_cast<size_t>(e)].size();
        if (total == 0)
            throw Error("contract_error",
                        "entity " + std::to_string(e) + " has no support relation context");
        weights[static_cast<size_t>(e)] = 1.0 / static_cast<double>(total);
    }
    std::vector<std::vector<int64_t>> outs(ctx.out_rels.begin(),
                                           ctx.out_rels.begin() + ctx.n_unseen);
    std::vector<std::vector<int64_t>> ins(ctx.in_rels.begin(),
                                          ctx.in_rels.begin() + ctx.n_unseen);
    Tape::Id o = tape.gather_sum(rel_out_node, std::move(outs), weights);
    Tape::Id i = tape.gather_sum(rel_in_node, std::move(ins), weights);
    return tape.add(o, i);
}

Tape::Id neem_stack(Tape& tape, const GenContext& ctx, const LearnerNodes& learner,
                    Tape::Id x0, std::vector<Tape::Id>* layers_out) {
    std::vector<Tape::Id> layers{x0};
    for (size_t l = 0; l < learner.w_self.size(); ++l) {
        Tape::Id acc = tape.matmul(layers.back(), learner.w_self[l]);
        for (size_t k = 0; k < ctx.relations.size(); ++k) {
            const auto& lists = ctx.neighbors[k];
            bool any = false;
            std::vector<double> weights(lists.size(), 0.0);
            for (size_t e = 0; e < lists.size(); ++e) {
                if (!lists[e].empty()) {
                    weights[e] = 1.0 / static_cast<double>(lists[e].size());
                    any = true;
                }
            }
            if (!any) continue;
            Tape::Id agg = tape.gather_sum(layers.back(), lists, weights);
            acc = tape.add(acc, tape.matmul(agg, learner.w_rel[k][l]));
        }
        layers.push_back(tape.relu(acc));
    }
    g_neem_count.fetch_add(1);
    if (layers_out) *layers_out = layers;
    Tape::Id cat = layers[0];
    for (size_t l = 1; l < layers.size(); ++l) cat = tape.concat_cols(cat, layers[l]);
    return tape.matmul(cat, learner.w_hei);
}

// Full generation graph for one learner: n_entities x d final rows.
Tape::Id generate_embeddings(Tape& tape, const GenContext& ctx, const LearnerNodes& learner,
                             Tape::Id rel_out_node, Tape::Id rel_in_node,
                             const AblationConfig& abl, const Tensor2* random_init) {
    Tape::Id init;
    if (abl.disable_raeeg) {
        if (!random_init || random_init->rows != ctx.n_unseen)
            throw Error("contract_error", "disable-raeeg requires replacement init rows");
        init = tape.constant(*random_init);
    } else {
        init = raeeg_node(tape, ctx, rel_out_node, rel_in_node);
    }
    Tape::Id x0 = init;
    if (ctx.n_unseen < ctx.n_entities) x0 = tape.concat_rows(init, tape.constant(ctx.fixed_rows));
    if (abl.disable_neem) return x0;
    return neem_stack(tape, ctx, learner, x0, nullptr);
}

} // namespace

Tensor2 ensemble_embed(const GenContext& ctx, const Ensemble& ensemble,
                       const AblationConfig& abl, const Tensor2* random_init) {
    ensemble.validate();
    Tape tape;
    Tape::Id ro = tape.constant(ensemble.rel_out);
    Tape::Id ri = tape.constant(ensemble.rel_in);
    Tensor2 combined(ctx.n_entities, ensemble.rel_out.cols);
    for (int32_t i = 0; i < ensemble.size(); ++i) {
        LearnerNodes nodes =
            bind_learner_const(tape, ensemble.learners[static_cast<size_t>(i)], ctx.relations);
        Tape::Id emb = generate_embeddings(tape, ctx, nodes, ro, ri, abl, random_init);
        kern::ops().axpy(ensemble.weights[static_cast<size_t>(i)], tape.value(emb).data.data(),
                         combined.data.data(), combined.size());
    }
    return combined;
}

// ---------------------------------------------------------------------------
// Oracle-facing wrappers (same tape builders, plain tensors in and out)

Tensor2 raeeg_init_rows(const Tensor2& rel_out, const Tensor2& rel_in,
                        const std::vector<std::vector<int64_t>>& out_lists,
                        const std::vector<std::vector<int64_t>>& in_lists) {
    GenContext ctx;
    ctx.n_entities = static_cast<int32_t>(out_lists.size());
    ctx.n_unseen = ctx.n_entities;
    ctx.out_rels = out_lists;
    ctx.in_rels = in_lists;
    Tape tape;
    Tape::Id node = raeeg_node(tape, ctx, tape.constant(rel_out), tape.constant(rel_in));
    return tape.value(node);
}

std::vector<Tensor2> neem_forward_layers(const GenContext& ctx, const BaseLearner& learner,
                                         const Tensor2& x0) {
    Tape tape;
    LearnerNodes nodes = bind_learner_const(tape, learner, ctx.relations);
    std::vector<Tape::Id> layer_ids;
    neem_stack(tape, ctx, nodes, tape.constant(x0), &layer_ids);
    std::vector<Tensor2> out;
    for (Tape::Id id : layer_ids) out.push_back(tape.value(id));
    return out;
}

Tensor2 hei_integrate(const std::vector<Tensor2>& layer_embeddings, const Tensor2& w_hei) {
    if (layer_embeddings.empty()) throw Error("dim_error", "no layer embeddings");
    int64_t d = layer_embeddings[0].cols;
    if (w_hei.rows != static_cast<int64_t>(layer_embeddings.size()) * d)
        throw Error("dim_error", "integrator width does not match layer count");
    Tape tape;
    Tape::Id cat = tape.constant(layer_embeddings[0]);
    for (size_t l = 1; l < layer_embeddings.size(); ++l)
        cat = tape.concat_cols(cat, tape.constant(layer_embeddings[l]));
    return tape.value(tape.matmul(cat, tape.constant(w_hei)));
}

double loss_l3(double l1, double l2, double w_a, double w_b) {
    if (!(w_a >= 0.0 && w_a <= 1.0 && w_b >= 0.0 && w_b <= 1.0) ||
        std::fabs(w_a + w_b - 1.0) > 1e-12)
        throw Error("config_error", "w_a and w_b must lie on the simplex");
    return w_a * l1 - w_b * l2;
}

double loss_l4(const Tensor2& generated, const Tensor2& reference, double lambda4) {
    if (!generated.same_shape(reference))
        throw Error("contract_error", "generated/reference rows must cover the same entities");
    if (generated.rows == 0) return 0.0;
    double acc = 0.0;
    for (int64_t i = 0; i < generated.rows; ++i) {
        for (int64_t j = 0; j < generated.cols; ++j) {
            double dlt = generated.at(i, j) - reference.at(i, j);
            acc += dlt * dlt;
        }
    }
    return lambda4 * acc / static_cast<double>(generated.rows);
}

// ---------------------------------------------------------------------------
// Shared loss plumbing

namespace {

struct PairedBatch {
    std::vector<int64_t> hp, rp, tp, hn, rn, tn; // row ids + global relation ids
};

Tape::Id paired_hinge(Tape& tape, ModelKind model, NormKind norm, double margin,
                      Tape::Id entity_rows, Tape::Id relation_table, const PairedBatch& b) {
    Tape::Id pos = score_batch(tape, model, norm, tape.gather_rows(entity_rows, b.hp),
                               tape.gather_rows(relation_table, b.rp),
                               tape.gather_rows(entity_rows, b.tp));
    Tape::Id neg = score_batch(tape, model, norm, tape.gather_rows(entity_rows, b.hn),
                               tape.gather_rows(relation_table, b.rn),
                               tape.gather_rows(entity_rows, b.tn));
    return hinge_margin(tape, pos, neg, margin);
}

// Paired negatives for a meta-task query: corrupt inside the task entity
// set, excluding the task's own triples.
PairedBatch draw_task_negatives(const MetaTask& task, int negatives, Rng& rng) {
    TripleSet known;
    for (const Triple& t : task.support) known.insert(t);
    for (const Triple& t : task.query) known.insert(t);
    int32_t n = task.entity_count();
    PairedBatch item;
    for (const Triple& q : task.query) {
        for (int k = 0; k < negatives; ++k) {
            Triple cand = negative_sample(n, known, q, rng);
            item.hp.push_back(q.h);
            item.rp.push_back(q.r);
            item.tp.push_back(q.t);
            item.hn.push_back(cand.h);
            item.rn.push_back(cand.r);
            item.tn.push_back(cand.t);
        }
    }
    return item;
}

void accumulate(std::map<Tensor2*, Tensor2>& accum, const Tape& tape, const Bindings& bindings) {
    for (const auto& [param, node] : bindings) {
        auto it = accum.find(param);
        if (it == accum.end()) it = accum.emplace(param, Tensor2(param->rows, param->cols)).first;
        const Tensor2& g = tape.grad(node);
        kern::ops().axpy(1.0, g.data.data(), it->second.data.data(), g.size());
    }
}

} // namespace

double ensemble_query_loss(const GenContext& ctx, const Ensemble& ensemble,
                           const std::vector<Triple>& query, const std::vector<Triple>& negatives,
                           ModelKind model, NormKind norm, double margin,
                           const Tensor2& relation_table) {
    ensemble.validate();
    if (query.size() != negatives.size())
        throw Error("contract_error", "query and negatives must be paired");
    PairedBatch batch;
    for (size_t i = 0; i < query.size(); ++i) {
        batch.hp.push_back(query[i].h);
        batch.rp.push_back(query[i].r);
        batch.tp.push_back(query[i].t);
        batch.hn.push_back(negatives[i].h);
        batch.rn.push_back(negatives[i].r);
        batch.tn.push_back(negatives[i].t);
    }
    Tape tape;
    Tape::Id ro = tape.constant(ensemble.rel_out);
    Tape::Id ri = tape.constant(ensemble.rel_in);
    Tape::Id rel_table = tape.constant(relation_table);
    double total = 0.0;
    for (int32_t i = 0; i < ensemble.size(); ++i) {
        LearnerNodes nodes =
            bind_learner_const(tape, ensemble.learners[static_cast<size_t>(i)], ctx.relations);
        Tape::Id emb = generate_embeddings(tape, ctx, nodes, ro, ri, {}, nullptr);
        Tape::Id li = paired_hinge(tape, model, norm, margin, emb, rel_table, batch);
        total += ensemble.weights[static_cast<size_t>(i)] * tape.value(li).data[0];
    }
    return total;
}

// ---------------------------------------------------------------------------
// Meta-training

void MetaTrainConfig::validate() const {
    if (epochs <= 0 || meta_batch <= 0) throw Error("config_error", "bad meta-training sizes");
    if (learning_rate <= 0.0 || margin <= 0.0)
        throw Error("config_error", "learning_rate and margin must be positive");
    if (negatives_per_positive <= 0) throw Error("config_error", "negatives must be positive");
    if (layers < 0 || n_learners < 1) throw Error("config_error", "bad ensemble shape");
}

Ensemble meta_train(const KnowledgeGraph& graph, const EmbeddingStore& raw,
                    const TaskStream& tasks, const MetaTrainConfig& cfg,
                    MetaTrainReport* report, const EnsembleObserver& on_step,
                    const AblationConfig& abl) {
    (void)graph; // vocabulary owner; tasks and the raw store carry the data
    cfg.validate();
    if (tasks.train.empty()) throw Error("contract_error", "empty training task stream");

    Ensemble ensemble = Ensemble::init(cfg.n_learners, cfg.layers, raw.dim, raw.rel_out,
                                       raw.rel_in, Rng(cfg.seed).fork(0xe5e2b1eULL).next_u64());

    std::vector<size_t> order(tasks.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng = Rng(cfg.seed).fork(0x3e7a0000ULL + static_cast<uint64_t>(epoch));
        epoch_rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t n_batches = 0;

        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(cfg.meta_batch)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.meta_batch));
            std::map<Tensor2*, Tensor2> accum;
            Tensor2 w_grad(1, ensemble.size());
            double batch_loss = 0.0;

            for (size_t pos = start; pos < end; ++pos) {
                const MetaTask& task = tasks.train[order[pos]];
                // negatives keyed by (epoch, task identity) so evaluating
                // validation tasks can never shift the training stream
                Rng task_rng = Rng(cfg.seed).fork(0x9e90000000ULL +
                                                  static_cast<uint64_t>(epoch) * 1000003ULL +
                                                  order[pos]);
                PairedBatch item = draw_task_negatives(task, cfg.negatives_per_positive, task_rng);

                GenContext ctx = GenContext::from_task(task);
                Tensor2 random_init;
                if (abl.disable_raeeg) {
                    // redrawn every epoch: the replacement init is noise, not
                    // a learnable input signal
                    Rng init_rng = Rng(cfg.seed).fork(
                        0xab1a000000ULL + static_cast<uint64_t>(epoch) * 1000003ULL + order[pos]);
                    double bound = 6.0 / std::sqrt(static_cast<double>(raw.dim));
                    random_init =
                        Tensor2::uniform(ctx.n_unseen, raw.dim, -bound, bound, init_rng);
                }
                Tape tape;
                Bindings bindings;
                Tape::Id ro = tape.leaf(ensemble.rel_out);
                Tape::Id ri = tape.leaf(ensemble.rel_in);
                bindings.push_back({&ensemble.rel_out, ro});
                bindings.push_back({&ensemble.rel_in, ri});
                Tensor2 wt(1, ensemble.size());
                for (int32_t i = 0; i < ensemble.size(); ++i)
                    wt.data[static_cast<size_t>(i)] = ensemble.weights[static_cast<size_t>(i)];
                Tape::Id w_node = tape.leaf(wt);
                Tape::Id rel_table = tape.constant(raw.relations);

                Tape::Id total = Tape::kNone;
                for (int32_t i = 0; i < ensemble.size(); ++i) {
                    LearnerNodes nodes = bind_learner_train(
                        tape, ensemble.learners[static_cast<size_t>(i)], ctx.relations, bindings);
                    Tape::Id emb = generate_embeddings(tape, ctx, nodes, ro, ri, abl,
                                                       abl.disable_raeeg ? &random_init : nullptr);
                    Tape::Id li =
                        paired_hinge(tape, raw.model, cfg.norm, cfg.margin, emb, rel_table, item);
                    Tape::Id term = tape.mul_scalar(li, tape.slice_cols(w_node, i, i + 1));
                    total = total == Tape::kNone ? term : tape.add(total, term);
                }

                double loss = tape.value(total).data[0];
                if (!std::isfinite(loss))
                    throw Error("training_error",
                                "meta loss diverged on task " + std::to_string(order[pos]));
                batch_loss += loss;
                tape.backward(total);
                accumulate(accum, tape, bindings);
                kern::ops().axpy(1.0, tape.grad(w_node).data.data(), w_grad.data.data(),
                                 w_grad.size());
            }

            double inv = 1.0 / static_cast<double>(end - start);
            for (auto& [param, grad] : accum)
                kern::ops().axpy(-cfg.learning_rate * inv, grad.data.data(), param->data.data(),
                                 param->size());
            for (int32_t i = 0; i < ensemble.size(); ++i)
                ensemble.weights[static_cast<size_t>(i)] -=
                    cfg.learning_rate * inv * w_grad.data[static_cast<size_t>(i)];
            project_simplex(ensemble.weights);
            if (on_step) on_step(ensemble);
            epoch_loss += batch_loss * inv;
            ++n_batches;
        }

        if (report) report->train_loss.push_back(epoch_loss / static_cast<double>(n_batches));

        if (!cfg.skip_validation && !tasks.valid.empty()) {
            double valid_loss = 0.0;
            for (size_t vi = 0; vi < tasks.valid.size(); ++vi) {
                const MetaTask& task = tasks.valid[vi];
                Rng task_rng = Rng(cfg.seed).fork(0xa1dd0000000ULL +
                                                  static_cast<uint64_t>(epoch) * 1000003ULL + vi);
                PairedBatch item = draw_task_negatives(task, cfg.negatives_per_positive, task_rng);
                GenContext ctx = GenContext::from_task(task);
                Tensor2 random_init;
                if (abl.disable_raeeg) {
                    Rng init_rng = Rng(cfg.seed).fork(0xab1af0000000ULL + vi);
                    double bound = 6.0 / std::sqrt(static_cast<double>(raw.dim));
                    random_init =
                        Tensor2::uniform(ctx.n_unseen, raw.dim, -bound, bound, init_rng);
                }
                Tape tape;
                Tape::Id ro = tape.constant(ensemble.rel_out);
                Tape::Id ri = tape.constant(ensemble.rel_in);
                Tape::Id rel_table = tape.constant(raw.relations);
                double task_loss = 0.0;
                for (int32_t i = 0; i < ensemble.size(); ++i) {
                    LearnerNodes nodes = bind_learner_const(
                        tape, ensemble.learners[static_cast<size_t>(i)], ctx.relations);
                    Tape::Id emb = generate_embeddings(tape, ctx, nodes, ro, ri, abl,
                                                       abl.disable_raeeg ? &random_init : nullptr);
                    Tape::Id li =
                        paired_hinge(tape, raw.model, cfg.norm, cfg.margin, emb, rel_table, item);
                    task_loss +=
                        ensemble.weights[static_cast<size_t>(i)] * tape.value(li).data[0];
                }
                valid_loss += task_loss;
            }
            if (report)
                report->valid_loss.push_back(valid_loss /
                                             static_cast<double>(tasks.valid.size()));
        }
    }
    return ensemble;
}

// ---------------------------------------------------------------------------
// Unlearning

void UnlearnConfig::validate() const {
    if (!(w_a >= 0.0 && w_a <= 1.0)) throw Error("config_error", "w_a must be in [0,1]");
    if (lambda4 < 0.0) throw Error("config_error", "lambda4 must be nonnegative");
    if (finetune_steps < 0 || budget < 0) throw Error("config_error", "negative step count");
    if (inner_lr <= 0.0 || margin <= 0.0)
        throw Error("config_error", "inner_lr and margin must be positive");
    if (adapt_lr <= 0.0) throw Error("config_error", "adapt_lr must be positive");
    if (offset_cap < 0.0) throw Error("config_error", "offset_cap must be nonnegative");
    if (!(support_fraction > 0.0 && support_fraction < 1.0))
        throw Error("config_error", "support_fraction must be in (0,1)");
    if (negatives_per_positive <= 0) throw Error("config_error", "negatives must be positive");
}

UnlearnTask build_unlearn_task(const KnowledgeGraph& graph, const ForgetSplit& split,
                               double support_fraction, uint64_t seed) {
    (void)graph;
    if (split.forget.empty()) throw Error("contract_error", "empty forget set");

    std::set<int32_t> affected_set;
    for (const Triple& t : split.forget) {
        affected_set.insert(t.h);
        affected_set.insert(t.t);
    }

    std::vector<Triple> incident;
    for (const Triple& t : split.retain)
        if (affected_set.count(t.h) || affected_set.count(t.t)) incident.push_back(t);

    // holdout split of the incident retain triples
    std::vector<size_t> order(incident.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng(seed).fork(0x140e27ULL);
    rng.shuffle(order);
    size_t n_support = 0;
    if (!incident.empty()) {
        n_support = static_cast<size_t>(
            std::llround(support_fraction * static_cast<double>(incident.size())));
        n_support = std::clamp<size_t>(n_support, 1, incident.size());
    }
    std::vector<char> in_support(incident.size(), 0);
    for (size_t i = 0; i < n_support; ++i) in_support[order[i]] = 1;

    // every affected entity with any incident retain triple must appear in
    // at least one support triple; pull one of its query triples over if not
    for (int32_t e : affected_set) {
        bool has_support = false, has_any = false;
        size_t first_query = incident.size();
        for (size_t i = 0; i < incident.size(); ++i) {
            if (incident[i].h != e && incident[i].t != e) continue;
            has_any = true;
            if (in_support[i])
                has_support = true;
            else if (first_query == incident.size())
                first_query = i;
        }
        if (has_any && !has_support && first_query < incident.size())
            in_support[first_query] = 1;
    }

    UnlearnTask task;
    std::vector<int32_t> affected(affected_set.begin(), affected_set.end());
    std::set<int32_t> boundary_supported, boundary_fixed;
    for (size_t i = 0; i < incident.size(); ++i) {
        for (int32_t e : {incident[i].h, incident[i].t}) {
            if (affected_set.count(e)) continue;
            if (in_support[i])
                boundary_supported.insert(e);
            else
                boundary_fixed.insert(e);
        }
    }
    for (int32_t e : boundary_supported) boundary_fixed.erase(e);
    task.entity_to_global = affected;
    task.entity_to_global.insert(task.entity_to_global.end(), boundary_supported.begin(),
                                 boundary_supported.end());
    task.entity_to_global.insert(task.entity_to_global.end(), boundary_fixed.begin(),
                                 boundary_fixed.end());
    task.n_affected = static_cast<int32_t>(affected.size());
    task.n_generated = static_cast<int32_t>(affected.size() + boundary_supported.size());

    std::unordered_map<int32_t, int32_t> local;
    for (size_t i = 0; i < task.entity_to_global.size(); ++i)
        local.emplace(task.entity_to_global[i], static_cast<int32_t>(i));

    for (size_t i = 0; i < incident.size(); ++i) {
        Triple t{local.at(incident[i].h), incident[i].r, local.at(incident[i].t)};
        if (in_support[i])
            task.support.push_back(t);
        else
            task.retain_query.push_back(t);
    }
    for (const Triple& t : split.forget)
        task.forget_query.push_back({local.at(t.h), t.r, local.at(t.t)});

    // affected entities with no retain-support context fall back to their
    // forget-relation context so generation still has something to work with
    for (int32_t e = 0; e < task.n_affected; ++e) {
        bool covered = false;
        for (const Triple& t : task.support)
            if (t.h == e || t.t == e) {
                covered = true;
                break;
            }
        if (!covered) task.fallback.push_back(e);
    }
    return task;
}

namespace {

GenContext context_from_unlearn_task(const UnlearnTask& task, const EmbeddingStore& raw) {
    // Generation works in the same regime the generators were meta-trained
    // in: every task row with support context is generated from that
    // context. Boundary rows without any support triple stay fixed at RAW.
    // build_unlearn_task orders entities so that generated rows form a
    // prefix (affected first, supported boundary next, unsupported last).
    GenContext ctx;
    ctx.n_entities = static_cast<int32_t>(task.entity_to_global.size());
    ctx.n_unseen = task.n_generated;
    ctx.out_rels.assign(static_cast<size_t>(task.n_generated), {});
    ctx.in_rels.assign(static_cast<size_t>(task.n_generated), {});

    std::vector<std::set<int64_t>> out_sets(static_cast<size_t>(task.n_generated));
    std::vector<std::set<int64_t>> in_sets(static_cast<size_t>(task.n_generated));
    for (const Triple& t : task.support) {
        if (t.h < task.n_generated) out_sets[static_cast<size_t>(t.h)].insert(t.r);
        if (t.t < task.n_generated) in_sets[static_cast<size_t>(t.t)].insert(t.r);
    }
    // fallback rows take their relation context from the forget triples
    std::set<int32_t> fallback_set(task.fallback.begin(), task.fallback.end());
    for (const Triple& t : task.forget_query) {
        if (fallback_set.count(t.h)) out_sets[static_cast<size_t>(t.h)].insert(t.r);
        if (fallback_set.count(t.t)) in_sets[static_cast<size_t>(t.t)].insert(t.r);
    }
    for (int32_t e = 0; e < task.n_generated; ++e) {
        ctx.out_rels[static_cast<size_t>(e)].assign(out_sets[static_cast<size_t>(e)].begin(),
                                                    out_sets[static_cast<size_t>(e)].end());
        ctx.in_rels[static_cast<size_t>(e)].assign(in_sets[static_cast<size_t>(e)].begin(),
                                                   in_sets[static_cast<size_t>(e)].end());
    }

    // neighborhoods from support triples over the whole task
    std::set<int32_t> rels;
    for (const Triple& t : task.support) rels.insert(t.r);
    ctx.relations.assign(rels.begin(), rels.end());
    std::unordered_map<int32_t, size_t> rel_slot;
    for (size_t k = 0; k < ctx.relations.size(); ++k) rel_slot.emplace(ctx.relations[k], k);
    std::vector<std::vector<std::set<int64_t>>> nbr_sets(
        ctx.relations.size(), std::vector<std::set<int64_t>>(static_cast<size_t>(ctx.n_entities)));
    for (const Triple& t : task.support) {
        size_t k = rel_slot.at(t.r);
        nbr_sets[k][static_cast<size_t>(t.h)].insert(t.t);
        nbr_sets[k][static_cast<size_t>(t.t)].insert(t.h);
    }
    ctx.neighbors.resize(ctx.relations.size());
    for (size_t k = 0; k < ctx.relations.size(); ++k) {
        ctx.neighbors[k].resize(static_cast<size_t>(ctx.n_entities));
        for (int32_t e = 0; e < ctx.n_entities; ++e)
            ctx.neighbors[k][static_cast<size_t>(e)].assign(
                nbr_sets[k][static_cast<size_t>(e)].begin(),
                nbr_sets[k][static_cast<size_t>(e)].end());
    }

    // rows without support context stay at their RAW embeddings
    ctx.fixed_rows = Tensor2(ctx.n_entities - task.n_generated, raw.dim);
    for (int32_t e = task.n_generated; e < ctx.n_entities; ++e) {
        const double* src = raw.entities.row(task.entity_to_global[static_cast<size_t>(e)]);
        double* dst = ctx.fixed_rows.row(e - task.n_generated);
        for (int64_t j = 0; j < raw.dim; ++j) dst[j] = src[j];
    }
    return ctx;
}

// Negatives for unlearn queries corrupt with global entities; rows for
// entities outside the task come from the RAW store appended after the
// generated rows (row id = n_task + global id).
PairedBatch draw_unlearn_negatives(const KnowledgeGraph& graph, const UnlearnTask& task,
                                   const std::unordered_map<int32_t, int32_t>& local,
                                   const std::vector<Triple>& query_local, int negatives,
                                   Rng& rng) {
    int64_t n_task = static_cast<int64_t>(task.entity_to_global.size());
    auto row_of = [&](int32_t global_e) -> int64_t {
        auto it = local.find(global_e);
        return it != local.end() ? it->second : n_task + global_e;
    };

    PairedBatch out;
    for (const Triple& q : query_local) {
        Triple q_global{task.entity_to_global[static_cast<size_t>(q.h)], q.r,
                        task.entity_to_global[static_cast<size_t>(q.t)]};
        for (int k = 0; k < negatives; ++k) {
            Triple cand = negative_sample(graph.entity_count(), graph.triple_set(), q_global, rng);
            out.hp.push_back(q.h);
            out.rp.push_back(q.r);
            out.tp.push_back(q.t);
            out.hn.push_back(row_of(cand.h));
            out.rn.push_back(cand.r);
            out.tn.push_back(row_of(cand.t));
        }
    }
    return out;
}

} // namespace

EmbeddingStore unlearn(const KnowledgeGraph& graph, const EmbeddingStore& raw,
                       const ForgetSplit& split, const Ensemble& trained,
                       const UnlearnConfig& cfg, UnlearnReport* report,
                       const AblationConfig& abl, const EnsembleObserver& on_step) {
    cfg.validate();
    trained.validate();

    EmbeddingStore out = raw;
    if (split.forget.empty()) return out; // nothing to unlearn

    Ensemble ensemble = trained;
    if (abl.drop_learner) ensemble = drop_learner(ensemble, *abl.drop_learner);

    UnlearnTask task = build_unlearn_task(graph, split, cfg.support_fraction, cfg.seed);
    GenContext ctx = context_from_unlearn_task(task, raw);
    if (report) {
        report->n_affected = static_cast<size_t>(task.n_affected);
        report->n_fallback = task.fallback.size();
    }

    std::unordered_map<int32_t, int32_t> local;
    for (size_t i = 0; i < task.entity_to_global.size(); ++i)
        local.emplace(task.entity_to_global[i], static_cast<int32_t>(i));

    // retain-adjacent generated rows anchor to RAW under L4
    std::vector<int64_t> anchored;
    {
        std::set<int32_t> retain_touch;
        for (const Triple& t : task.support) {
            retain_touch.insert(t.h);
            retain_touch.insert(t.t);
        }
        for (const Triple& t : task.retain_query) {
            retain_touch.insert(t.h);
            retain_touch.insert(t.t);
        }
        for (int32_t e = 0; e < task.n_generated; ++e)
            if (retain_touch.count(e)) anchored.push_back(e);
    }
    Tensor2 anchor_rows(static_cast<int64_t>(anchored.size()), raw.dim);
    for (size_t i = 0; i < anchored.size(); ++i) {
        const double* src =
            raw.entities.row(task.entity_to_global[static_cast<size_t>(anchored[i])]);
        for (int64_t j = 0; j < raw.dim; ++j) anchor_rows.at(static_cast<int64_t>(i), j) = src[j];
    }

    // random replacement rows when the relation-context init is ablated;
    // redrawn per step so the noise cannot be memorized through adaptation
    Tensor2 random_init;
    auto redraw_init = [&](uint64_t stream) {
        if (!abl.disable_raeeg) return;
        Rng rng = Rng(cfg.seed).fork(0xab1a7e000000ULL + stream);
        double bound = 6.0 / std::sqrt(static_cast<double>(raw.dim));
        random_init = Tensor2::uniform(task.n_generated, raw.dim, -bound, bound, rng);
    };
    redraw_init(0);

    double w_b = 1.0 - cfg.w_a;

    // The generated rows themselves are optimized alongside the learners,
    // through two channels with disjoint gradients:
    //   ascent   a free per-row offset on the unseen rows receives only the
    //            forget term (-w_b L2) and is projected onto a norm ball,
    //            so the surgery is targeted and bounded
    //   learning the learner parameters receive the retain and balance
    //            terms (w_a L1 + L4), adapting generation to the target KG
    // The ensemble weights follow the combined objective in closed form
    // (d/dw_i = w_a l1_i - w_b l2_i) with a simplex projection per step.
    Tensor2 delta(task.n_affected, raw.dim);
    Tensor2 delta_pad_zeros(ctx.n_entities - task.n_affected, raw.dim);

    for (int step = 0; step < cfg.budget; ++step) {
        Rng step_rng = Rng(cfg.seed).fork(0x57e90000ULL + static_cast<uint64_t>(step));
        redraw_init(1 + static_cast<uint64_t>(step));
        PairedBatch retain_q = draw_unlearn_negatives(graph, task, local, task.retain_query,
                                                      cfg.negatives_per_positive, step_rng);
        PairedBatch forget_q = draw_unlearn_negatives(graph, task, local, task.forget_query,
                                                      cfg.negatives_per_positive, step_rng);

        // ---- pass 1: learners are constants; offsets see the forget term
        std::vector<double> l1_parts(static_cast<size_t>(ensemble.size()), 0.0);
        std::vector<double> l2_parts(static_cast<size_t>(ensemble.size()), 0.0);
        double l4_value = 0.0;
        {
            Tape tape;
            Tape::Id ro = tape.constant(ensemble.rel_out);
            Tape::Id ri = tape.constant(ensemble.rel_in);
            Tape::Id raw_rows = tape.constant(raw.entities);
            Tape::Id rel_table = tape.constant(raw.relations);
            Tape::Id delta_node = tape.leaf(delta);
            Tape::Id delta_pad =
                ctx.n_entities > task.n_affected
                    ? tape.concat_rows(delta_node, tape.constant(delta_pad_zeros))
                    : delta_node;

            Tape::Id l2_obj = Tape::kNone;
            Tensor2 combined_rows(ctx.n_entities, raw.dim);
            for (int32_t i = 0; i < ensemble.size(); ++i) {
                // relation matrices materialize here so pass 2 and the
                // checkpoint see a consistent set
                LearnerNodes nodes = bind_learner_const(
                    tape, ensemble.learners[static_cast<size_t>(i)], ctx.relations);
                Tape::Id gen = generate_embeddings(tape, ctx, nodes, ro, ri, abl,
                                                   abl.disable_raeeg ? &random_init : nullptr);
                Tape::Id emb = tape.add(gen, delta_pad);
                Tape::Id rows = tape.concat_rows(emb, raw_rows);
                if (!task.retain_query.empty()) {
                    Tape::Id li = paired_hinge(tape, raw.model, cfg.norm, cfg.margin, rows,
                                               rel_table, retain_q);
                    l1_parts[static_cast<size_t>(i)] = tape.value(li).data[0];
                }
                Tape::Id l2i = paired_hinge(tape, raw.model, cfg.norm, cfg.margin, rows,
                                            rel_table, forget_q);
                l2_parts[static_cast<size_t>(i)] = tape.value(l2i).data[0];
                Tape::Id term =
                    tape.scale(l2i, -w_b * ensemble.weights[static_cast<size_t>(i)]);
                l2_obj = l2_obj == Tape::kNone ? term : tape.add(l2_obj, term);
                kern::ops().axpy(ensemble.weights[static_cast<size_t>(i)],
                                 tape.value(gen).data.data(), combined_rows.data.data(),
                                 combined_rows.size());
            }

            double l1v = 0.0, l2v = 0.0;
            for (int32_t i = 0; i < ensemble.size(); ++i) {
                l1v += ensemble.weights[static_cast<size_t>(i)] * l1_parts[static_cast<size_t>(i)];
                l2v += ensemble.weights[static_cast<size_t>(i)] * l2_parts[static_cast<size_t>(i)];
            }
            if (cfg.lambda4 > 0.0 && !anchored.empty()) {
                Tensor2 gen_rows(static_cast<int64_t>(anchored.size()), raw.dim);
                for (size_t a = 0; a < anchored.size(); ++a)
                    for (int64_t j = 0; j < raw.dim; ++j)
                        gen_rows.at(static_cast<int64_t>(a), j) =
                            combined_rows.at(anchored[a], j);
                l4_value = loss_l4(gen_rows, anchor_rows, cfg.lambda4);
            }
            if (!std::isfinite(l1v) || !std::isfinite(l2v))
                throw Error("training_error",
                            "unlearn objective diverged at step " + std::to_string(step));
            if (report) {
                report->l1_history.push_back(l1v);
                report->l2_history.push_back(l2v);
                report->l3_history.push_back(loss_l3(l1v, l2v, cfg.w_a, w_b));
                report->l4_history.push_back(l4_value);
            }

            tape.backward(l2_obj);
            kern::ops().axpy(-cfg.inner_lr, tape.grad(delta_node).data.data(),
                             delta.data.data(), delta.size());
            // per-row projection keeps the surgery bounded
            if (cfg.offset_cap > 0.0) {
                for (int64_t e = 0; e < delta.rows; ++e) {
                    double nrm = std::sqrt(
                        kern::ops().sumsq(delta.row(e), static_cast<size_t>(delta.cols)));
                    if (nrm > cfg.offset_cap)
                        kern::ops().scale(delta.row(e), cfg.offset_cap / nrm, delta.row(e),
                                          static_cast<size_t>(delta.cols));
                }
            }
        }

        // ---- ensemble weights: closed-form combined-objective gradient
        for (int32_t i = 0; i < ensemble.size(); ++i)
            ensemble.weights[static_cast<size_t>(i)] -=
                cfg.inner_lr * (cfg.w_a * l1_parts[static_cast<size_t>(i)] -
                                w_b * l2_parts[static_cast<size_t>(i)]);
        project_simplex(ensemble.weights);

        // ---- pass 2: learner adaptation under w_a L1 + L4
        if (!task.retain_query.empty() || (cfg.lambda4 > 0.0 && !anchored.empty())) {
            Tape tape;
            Tape::Id ro = tape.constant(ensemble.rel_out);
            Tape::Id ri = tape.constant(ensemble.rel_in);
            Tape::Id raw_rows = tape.constant(raw.entities);
            Tape::Id rel_table = tape.constant(raw.relations);
            Tape::Id delta_pad =
                ctx.n_entities > task.n_affected
                    ? tape.concat_rows(tape.constant(delta), tape.constant(delta_pad_zeros))
                    : tape.constant(delta);
            Bindings bindings;
            Tape::Id l1_obj = Tape::kNone, combined = Tape::kNone;
            for (int32_t i = 0; i < ensemble.size(); ++i) {
                LearnerNodes nodes = bind_learner_train(
                    tape, ensemble.learners[static_cast<size_t>(i)], ctx.relations, bindings);
                Tape::Id gen = generate_embeddings(tape, ctx, nodes, ro, ri, abl,
                                                   abl.disable_raeeg ? &random_init : nullptr);
                Tape::Id emb = tape.add(gen, delta_pad);
                Tape::Id rows = tape.concat_rows(emb, raw_rows);
                if (!task.retain_query.empty()) {
                    Tape::Id li = paired_hinge(tape, raw.model, cfg.norm, cfg.margin, rows,
                                               rel_table, retain_q);
                    Tape::Id term =
                        tape.scale(li, cfg.w_a * ensemble.weights[static_cast<size_t>(i)]);
                    l1_obj = l1_obj == Tape::kNone ? term : tape.add(l1_obj, term);
                }
                Tape::Id weighted = tape.scale(gen, ensemble.weights[static_cast<size_t>(i)]);
                combined = combined == Tape::kNone ? weighted : tape.add(combined, weighted);
            }
            Tape::Id obj = l1_obj;
            if (cfg.lambda4 > 0.0 && !anchored.empty()) {
                Tape::Id gen = tape.gather_rows(combined, anchored);
                Tape::Id diff = tape.sub(gen, tape.constant(anchor_rows));
                Tape::Id msd = tape.mean_rows(tape.sum_rows(tape.mul(diff, diff)));
                Tape::Id l4n = tape.scale(msd, cfg.lambda4);
                obj = obj == Tape::kNone ? l4n : tape.add(obj, l4n);
            }
            if (obj != Tape::kNone) {
                tape.backward(obj);
                for (const auto& [param, node] : bindings)
                    kern::ops().axpy(-cfg.adapt_lr, tape.grad(node).data.data(),
                                     param->data.data(), param->size());
            }
        }
        if (on_step) on_step(ensemble);
    }

    // ---- splice generated rows into the copy of RAW
    redraw_init(0xf1a1ULL);
    Tensor2 final_rows =
        ensemble_embed(ctx, ensemble, abl, abl.disable_raeeg ? &random_init : nullptr);
    for (int32_t e = 0; e < task.n_affected; ++e) {
        int32_t g = task.entity_to_global[static_cast<size_t>(e)];
        for (int64_t j = 0; j < raw.dim; ++j)
            out.entities.at(g, j) = final_rows.at(e, j) + delta.at(e, j);
    }

    // ---- L5: brief margin fine-tuning of the replaced rows on retain triples
    std::vector<Triple> touched; // retain triples incident to regenerated entities
    {
        std::set<int32_t> affected(task.entity_to_global.begin(),
                                   task.entity_to_global.begin() + task.n_affected);
        for (const Triple& t : split.retain)
            if (affected.count(t.h) || affected.count(t.t)) touched.push_back(t);
    }
    if (cfg.finetune_steps > 0 && !touched.empty()) {
        TripleSet retain_set(split.retain.begin(), split.retain.end());
        std::unordered_map<int32_t, int64_t> aff_row;
        Tensor2 aff(task.n_affected, raw.dim);
        for (int32_t e = 0; e < task.n_affected; ++e) {
            int32_t g = task.entity_to_global[static_cast<size_t>(e)];
            aff_row.emplace(g, e);
            for (int64_t j = 0; j < raw.dim; ++j) aff.at(e, j) = out.entities.at(g, j);
        }
        int64_t n_aff = task.n_affected;
        auto row_of = [&](int32_t g) -> int64_t {
            auto it = aff_row.find(g);
            return it != aff_row.end() ? it->second : n_aff + g;
        };

        // mini-batch SGD: one step = one shuffled batch of 64 touched triples
        const size_t batch = 64;
        std::vector<size_t> order(touched.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng = Rng(cfg.seed).fork(0xf17e5efULL);
        size_t cursor = order.size();
        for (int step = 0; step < cfg.finetune_steps; ++step) {
            Rng step_rng = Rng(cfg.seed).fork(0xf17e0000ULL + static_cast<uint64_t>(step));
            PairedBatch b;
            for (size_t i = 0; i < batch; ++i) {
                if (cursor == order.size()) {
                    shuffle_rng.shuffle(order);
                    cursor = 0;
                }
                const Triple& pos = touched[order[cursor++]];
                for (int k = 0; k < cfg.negatives_per_positive; ++k) {
                    Triple cand = negative_sample(graph.entity_count(), retain_set, pos, step_rng);
                    b.hp.push_back(row_of(pos.h));
                    b.rp.push_back(pos.r);
                    b.tp.push_back(pos.t);
                    b.hn.push_back(row_of(cand.h));
                    b.rn.push_back(cand.r);
                    b.tn.push_back(row_of(cand.t));
                }
            }
            Tape tape;
            Tape::Id aff_node = tape.leaf(aff);
            Tape::Id rows = tape.concat_rows(aff_node, tape.constant(out.entities));
            Tape::Id rel_table = tape.constant(raw.relations);
            Tape::Id loss =
                paired_hinge(tape, raw.model, cfg.norm, cfg.margin, rows, rel_table, b);
            double v = tape.value(loss).data[0];
            if (!std::isfinite(v))
                throw Error("training_error",
                            "fine-tune loss diverged at step " + std::to_string(step));
            if (report) report->finetune_loss.push_back(v);
            if (v == 0.0) continue;
            tape.backward(loss);
            kern::ops().axpy(-cfg.adapt_lr, tape.grad(aff_node).data.data(), aff.data.data(),
                             aff.size());
        }
        for (int32_t e = 0; e < task.n_affected; ++e) {
            int32_t g = task.entity_to_global[static_cast<size_t>(e)];
            for (int64_t j = 0; j < raw.dim; ++j) out.entities.at(g, j) = aff.at(e, j);
        }
    }

    out.check_finite("unlearn");
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

void write_f64_le(std::ostream& outs, const double* values, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        uint64_t bits;
        std::memcpy(&bits, &values[i], 8);
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
        outs.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_f64_le(std::istream& ins, double* values, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        unsigned char b[8];
        ins.read(reinterpret_cast<char*>(b), 8);
        if (!ins) throw Error("io_error", "ensemble checkpoint truncated");
        uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(b[k]) << (8 * k);
        std::memcpy(&values[i], &bits, 8);
    }
}

} // namespace

void save_ensemble(const Ensemble& ensemble, const std::string& path) {
    ensemble.validate();
    std::set<int32_t> rel_union;
    for (const auto& learner : ensemble.learners)
        for (const auto& [r, mats] : learner.w_rel) rel_union.insert(r);

    std::ofstream outs(path, std::ios::binary);
    if (!outs) throw Error("io_error", "cannot write " + path);
    int32_t layers = ensemble.learners.front().layers;
    outs << "MEU1\n"
         << ensemble.size() << '\n'
         << layers << '\n'
         << ensemble.learners.front().dim << '\n'
         << ensemble.rel_out.rows << '\n'
         << ensemble.seed << '\n';
    outs << rel_union.size();
    for (int32_t r : rel_union) outs << ' ' << r;
    outs << '\n';

    write_f64_le(outs, ensemble.weights.data(), ensemble.weights.size());
    for (const auto& learner : ensemble.learners) {
        for (const auto& w : learner.w_self) write_f64_le(outs, w.data.data(), w.size());
        for (int32_t r : rel_union) {
            auto it = learner.w_rel.find(r);
            if (it != learner.w_rel.end()) {
                for (const auto& w : it->second) write_f64_le(outs, w.data.data(), w.size());
            } else {
                for (const auto& w : learner.relation_init(r))
                    write_f64_le(outs, w.data.data(), w.size());
            }
        }
        write_f64_le(outs, learner.w_hei.data.data(), learner.w_hei.size());
    }
    write_f64_le(outs, ensemble.rel_out.data.data(), ensemble.rel_out.size());
    write_f64_le(outs, ensemble.rel_in.data.data(), ensemble.rel_in.size());
    if (!outs) throw Error("io_error", "write failed: " + path);
}

Ensemble load_ensemble(const std::string& path) {
    std::ifstream ins(path, std::ios::binary);
    if (!ins) throw Error("io_error", "cannot open " + path);
    std::string magic;
    std::getline(ins, magic);
    if (magic != "MEU1") throw Error("parse_error", path + ": not a MEU1 checkpoint");
    int32_t n = 0, layers = 0;
    int64_t d = 0, nrel = 0;
    uint64_t seed = 0;
    size_t n_listed = 0;
    ins >> n >> layers >> d >> nrel >> seed >> n_listed;
    std::vector<int32_t> rels(n_listed);
    for (auto& r : rels) ins >> r;
    ins.ignore();
    if (!ins || n < 1 || layers < 0 || d <= 0 || nrel <= 0)
        throw Error("parse_error", path + ": bad ensemble header");

    Ensemble e;
    e.seed = seed;
    e.weights.resize(static_cast<size_t>(n));
    read_f64_le(ins, e.weights.data(), e.weights.size());
    for (int32_t i = 0; i < n; ++i) {
        BaseLearner b;
        b.layers = layers;
        b.dim = d;
        b.init_seed = Rng(seed).fork(0x1ea0ULL + static_cast<uint64_t>(i)).next_u64();
        for (int32_t l = 0; l < layers; ++l) {
            Tensor2 w(d, d);
            read_f64_le(ins, w.data.data(), w.size());
            b.w_self.push_back(std::move(w));
        }
        for (int32_t r : rels) {
            std::vector<Tensor2> mats;
            for (int32_t l = 0; l < layers; ++l) {
                Tensor2 w(d, d);
                read_f64_le(ins, w.data.data(), w.size());
                mats.push_back(std::move(w));
            }
            b.w_rel.emplace(r, std::move(mats));
        }
        b.w_hei = Tensor2((layers + 1) * d, d);
        read_f64_le(ins, b.w_hei.data.data(), b.w_hei.size());
        e.learners.push_back(std::move(b));
    }
    e.rel_out = Tensor2(nrel, d);
    e.rel_in = Tensor2(nrel, d);
    read_f64_le(ins, e.rel_out.data.data(), e.rel_out.size());
    read_f64_le(ins, e.rel_in.data.data(), e.rel_in.size());
    return e;
}

} // namespace metaeu
