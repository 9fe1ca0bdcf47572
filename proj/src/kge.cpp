#include "metaeu/kge.hpp"
#include "metaeu/kernels.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace metaeu {

const char* model_name(ModelKind kind) {
    switch (kind) {
    case ModelKind::TransE: return "TransE";
    case ModelKind::DistMult: return "DistMult";
    case ModelKind::ComplEx: return "ComplEx";
    case ModelKind::RotatE: return "RotatE";
    }
    return "?";
}

ModelKind parse_model(const std::string& name) {
    if (name == "TransE") return ModelKind::TransE;
    if (name == "DistMult") return ModelKind::DistMult;
    if (name == "ComplEx") return ModelKind::ComplEx;
    if (name == "RotatE") return ModelKind::RotatE;
    throw Error("config_error", "unknown model kind: " + name);
}

const char* norm_name(NormKind kind) { return kind == NormKind::L1 ? "L1" : "L2"; }

NormKind parse_norm(const std::string& name) {
    if (name == "L1") return NormKind::L1;
    if (name == "L2") return NormKind::L2;
    throw Error("config_error", "unknown norm kind: " + name);
}

EmbeddingStore EmbeddingStore::init(ModelKind kind, int64_t n_entities, int64_t n_relations,
                                    int64_t dim, uint64_t seed) {
    if (dim <= 0) throw Error("config_error", "embedding dimension must be positive");
    if ((kind == ModelKind::ComplEx || kind == ModelKind::RotatE) && dim % 2 != 0)
        throw Error("config_error", "ComplEx/RotatE require an even dimension");
    Rng rng(seed);
    double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    EmbeddingStore s;
    s.model = kind;
    s.dim = dim;
    s.entities = Tensor2::uniform(n_entities, dim, -bound, bound, rng);
    if (kind == ModelKind::RotatE)
        s.relations = Tensor2::uniform(n_relations, dim, -std::numbers::pi, std::numbers::pi, rng);
    else
        s.relations = Tensor2::uniform(n_relations, dim, -bound, bound, rng);
    s.rel_out = Tensor2::uniform(n_relations, dim, -bound, bound, rng);
    s.rel_in = Tensor2::uniform(n_relations, dim, -bound, bound, rng);
    return s;
}

void EmbeddingStore::check_finite(const char* where) const {
    if (!entities.all_finite() || !relations.all_finite() || !rel_out.all_finite() ||
        !rel_in.all_finite())
        throw Error("training_error", std::string(where) + ": non-finite parameter state");
}

namespace {

void check_index(const EmbeddingStore& s, int32_t h, int32_t r, int32_t t) {
    if (h < 0 || h >= s.entity_count() || t < 0 || t >= s.entity_count() || r < 0 ||
        r >= s.relation_count())
        throw Error("index_error", "triple index out of range");
}

} // namespace

double score(const EmbeddingStore& s, int32_t h, int32_t r, int32_t t, NormKind norm) {
    check_index(s, h, r, t);
    const double* eh = s.entities.row(h);
    const double* rr = s.relations.row(r);
    const double* et = s.entities.row(t);
    int64_t d = s.dim;
    switch (s.model) {
    case ModelKind::TransE: {
        double acc = 0.0;
        if (norm == NormKind::L1) {
            for (int64_t k = 0; k < d; ++k) acc += std::fabs(eh[k] + rr[k] - et[k]);
        } else {
            for (int64_t k = 0; k < d; ++k) {
                double v = eh[k] + rr[k] - et[k];
                acc += v * v;
            }
            acc = std::sqrt(acc);
        }
        return -acc;
    }
    case ModelKind::DistMult: {
        double acc = 0.0;
        for (int64_t k = 0; k < d; ++k) acc += eh[k] * rr[k] * et[k];
        return acc;
    }
    case ModelKind::ComplEx: {
        int64_t half = d / 2;
        double acc = 0.0;
        for (int64_t k = 0; k < half; ++k) {
            double hre = eh[k], him = eh[k + half];
            double rre = rr[k], rim = rr[k + half];
            double tre = et[k], tim = et[k + half];
            acc += rre * (hre * tre + him * tim) + rim * (hre * tim - him * tre);
        }
        return acc;
    }
    case ModelKind::RotatE: {
        int64_t half = d / 2;
        double acc = 0.0;
        for (int64_t k = 0; k < half; ++k) {
            double c = std::cos(rr[k]), sn = std::sin(rr[k]);
            double re = eh[k] * c - eh[k + half] * sn - et[k];
            double im = eh[k] * sn + eh[k + half] * c - et[k + half];
            acc += re * re + im * im;
        }
        return -std::sqrt(acc);
    }
    }
    return 0.0;
}

Tape::Id score_batch(Tape& tape, ModelKind model, NormKind norm, Tape::Id H, Tape::Id R,
                     Tape::Id T) {
    switch (model) {
    case ModelKind::TransE: {
        Tape::Id diff = tape.sub(tape.add(H, R), T);
        Tape::Id n = norm == NormKind::L1 ? tape.rownorm_l1(diff) : tape.rownorm_l2(diff);
        return tape.scale(n, -1.0);
    }
    case ModelKind::DistMult:
        return tape.sum_rows(tape.mul(tape.mul(H, R), T));
    case ModelKind::ComplEx: {
        int64_t d = tape.value(H).cols;
        int64_t half = d / 2;
        Tape::Id hre = tape.slice_cols(H, 0, half), him = tape.slice_cols(H, half, d);
        Tape::Id rre = tape.slice_cols(R, 0, half), rim = tape.slice_cols(R, half, d);
        Tape::Id tre = tape.slice_cols(T, 0, half), tim = tape.slice_cols(T, half, d);
        Tape::Id a = tape.mul(rre, tape.add(tape.mul(hre, tre), tape.mul(him, tim)));
        Tape::Id b = tape.mul(rim, tape.sub(tape.mul(hre, tim), tape.mul(him, tre)));
        return tape.sum_rows(tape.add(a, b));
    }
    case ModelKind::RotatE: {
        int64_t d = tape.value(H).cols;
        int64_t half = d / 2;
        Tape::Id hre = tape.slice_cols(H, 0, half), him = tape.slice_cols(H, half, d);
        Tape::Id tre = tape.slice_cols(T, 0, half), tim = tape.slice_cols(T, half, d);
        Tape::Id phase = tape.slice_cols(R, 0, half);
        Tape::Id c = tape.cos(phase), sn = tape.sin(phase);
        Tape::Id re = tape.sub(tape.sub(tape.mul(hre, c), tape.mul(him, sn)), tre);
        Tape::Id im = tape.sub(tape.add(tape.mul(hre, sn), tape.mul(him, c)), tim);
        Tape::Id n = tape.rownorm_l2(tape.concat_cols(re, im));
        return tape.scale(n, -1.0);
    }
    }
    throw Error("config_error", "unknown model kind");
}

Tape::Id hinge_margin(Tape& tape, Tape::Id pos_scores, Tape::Id neg_scores, double gamma) {
    if (gamma <= 0.0) throw Error("config_error", "margin must be positive");
    if (tape.value(pos_scores).rows == 0) throw Error("contract_error", "empty batch");
    if (tape.value(pos_scores).rows != tape.value(neg_scores).rows)
        throw Error("contract_error", "positives and negatives must be paired");
    Tape::Id margin = tape.add_const(tape.sub(neg_scores, pos_scores), gamma);
    return tape.sum_all(tape.relu(margin));
}

double margin_loss(const EmbeddingStore& store, const std::vector<Triple>& positives,
                   const std::vector<Triple>& negatives, double gamma, NormKind norm) {
    if (positives.empty()) throw Error("contract_error", "empty batch");
    if (positives.size() != negatives.size())
        throw Error("contract_error", "positives and negatives must be paired");
    if (gamma <= 0.0) throw Error("config_error", "margin must be positive");
    double acc = 0.0;
    for (size_t i = 0; i < positives.size(); ++i) {
        const Triple& p = positives[i];
        const Triple& n = negatives[i];
        double term = gamma + score(store, n.h, n.r, n.t, norm) - score(store, p.h, p.r, p.t, norm);
        if (term > 0.0) acc += term;
    }
    return acc;
}

Triple negative_sample(int32_t n_entities, const TripleSet& known, const Triple& triple,
                       Rng& rng) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        Triple cand = triple;
        bool corrupt_head = rng.coin();
        int32_t e = static_cast<int32_t>(rng.uniform_index(static_cast<size_t>(n_entities)));
        if (corrupt_head)
            cand.h = e;
        else
            cand.t = e;
        if (!known.count(cand)) return cand;
    }
    throw Error("sampling_error", "could not corrupt triple after 64 attempts");
}

Triple negative_sample(const KnowledgeGraph& graph, const Triple& triple, Rng& rng) {
    if (!graph.contains(triple)) throw Error("contract_error", "triple not in graph");
    return negative_sample(graph.entity_count(), graph.triple_set(), triple, rng);
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw Error("config_error", "learning_rate must be positive");
    if (margin <= 0.0) throw Error("config_error", "margin must be positive");
    if (epochs <= 0) throw Error("config_error", "epochs must be positive");
    if (batch_size <= 0) throw Error("config_error", "batch_size must be positive");
    if (negatives_per_positive <= 0)
        throw Error("config_error", "negatives_per_positive must be positive");
}

namespace {

// Keeps RotatE relation coordinates inside [-pi, pi).
void wrap_phases(Tensor2& relations) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (double& v : relations.data) {
        v = std::remainder(v, two_pi);
        if (v >= std::numbers::pi) v -= two_pi;
    }
}

} // namespace

EmbeddingStore train_baseline(const KnowledgeGraph& vocab_graph,
                              const std::vector<Triple>& train_triples, ModelKind kind,
                              int64_t dim, const TrainConfig& cfg,
                              std::vector<double>* epoch_losses) {
    cfg.validate();
    if (train_triples.empty()) throw Error("contract_error", "empty training set");

    TripleSet known(train_triples.begin(), train_triples.end());
    EmbeddingStore store = EmbeddingStore::init(kind, vocab_graph.entity_count(),
                                                vocab_graph.relation_count(), dim, cfg.seed);
    std::vector<size_t> order(train_triples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng = Rng(cfg.seed).fork(0x7e000000ULL + static_cast<uint64_t>(epoch));
        epoch_rng.shuffle(order);
        double epoch_loss = 0.0;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<int64_t> hp, rp, tp, hn, rn, tn;
            for (size_t i = start; i < end; ++i) {
                const Triple& pos = train_triples[order[i]];
                for (int neg = 0; neg < cfg.negatives_per_positive; ++neg) {
                    Triple cand =
                        negative_sample(vocab_graph.entity_count(), known, pos, epoch_rng);
                    hp.push_back(pos.h);
                    rp.push_back(pos.r);
                    tp.push_back(pos.t);
                    hn.push_back(cand.h);
                    rn.push_back(cand.r);
                    tn.push_back(cand.t);
                }
            }

            Tape tape;
            Tape::Id E = tape.leaf(store.entities);
            Tape::Id R = tape.leaf(store.relations);
            Tape::Id pos = score_batch(tape, kind, cfg.norm, tape.gather_rows(E, hp),
                                       tape.gather_rows(R, rp), tape.gather_rows(E, tp));
            Tape::Id neg = score_batch(tape, kind, cfg.norm, tape.gather_rows(E, hn),
                                       tape.gather_rows(R, rn), tape.gather_rows(E, tn));
            Tape::Id loss = hinge_margin(tape, pos, neg, cfg.margin);

            double batch_loss = tape.value(loss).data[0];
            if (!std::isfinite(batch_loss))
                throw Error("training_error",
                            "loss diverged at epoch " + std::to_string(epoch) + " batch " +
                                std::to_string(start / static_cast<size_t>(cfg.batch_size)));
            epoch_loss += batch_loss;
            if (batch_loss == 0.0) continue; // hinge floor, no gradient

            tape.backward(loss);
            kern::ops().axpy(-cfg.learning_rate, tape.grad(E).data.data(),
                             store.entities.data.data(), store.entities.size());
            kern::ops().axpy(-cfg.learning_rate, tape.grad(R).data.data(),
                             store.relations.data.data(), store.relations.size());
            if (kind == ModelKind::RotatE) wrap_phases(store.relations);
        }
        if (epoch_losses) epoch_losses->push_back(epoch_loss);
    }
    store.check_finite("train_baseline");
    return store;
}

namespace {

void write_f64_le(std::ostream& out, const double* values, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        uint64_t bits;
        std::memcpy(&bits, &values[i], 8);
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_f64_le(std::istream& in, double* values, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw Error("io_error", "checkpoint truncated");
        uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(b[k]) << (8 * k);
        double v;
        std::memcpy(&v, &bits, 8);
        values[i] = v;
    }
}

void write_vocab(const std::string& path, const std::vector<std::string>& names) {
    std::ofstream out(path);
    if (!out) throw Error("io_error", "cannot write " + path);
    for (const auto& n : names) out << n << '\n';
}

} // namespace

void save_store(const EmbeddingStore& store, const std::string& path,
                const std::vector<std::string>& entity_names,
                const std::vector<std::string>& relation_names) {
    if (static_cast<int64_t>(entity_names.size()) != store.entity_count() ||
        static_cast<int64_t>(relation_names.size()) != store.relation_count())
        throw Error("contract_error", "vocabulary sizes do not match the store");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io_error", "cannot write " + path);
    out << "KGEU1\n"
        << model_name(store.model) << '\n'
        << store.entity_count() << '\n'
        << store.relation_count() << '\n'
        << store.dim << '\n';
    write_f64_le(out, store.entities.data.data(), store.entities.size());
    write_f64_le(out, store.relations.data.data(), store.relations.size());
    write_f64_le(out, store.rel_out.data.data(), store.rel_out.size());
    write_f64_le(out, store.rel_in.data.data(), store.rel_in.size());
    if (!out) throw Error("io_error", "write failed: " + path);
    write_vocab(path + ".entities.txt", entity_names);
    write_vocab(path + ".relations.txt", relation_names);
}

EmbeddingStore load_store(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io_error", "cannot open " + path);
    std::string magic, model;
    int64_t ne = 0, nr = 0, d = 0;
    std::getline(in, magic);
    std::getline(in, model);
    in >> ne >> nr >> d;
    in.ignore(); // trailing newline before the binary payload
    if (magic != "KGEU1" || ne <= 0 || nr <= 0 || d <= 0)
        throw Error("parse_error", path + ": not a KGEU1 checkpoint");
    EmbeddingStore s;
    s.model = parse_model(model);
    s.dim = d;
    s.entities = Tensor2(ne, d);
    s.relations = Tensor2(nr, d);
    s.rel_out = Tensor2(nr, d);
    s.rel_in = Tensor2(nr, d);
    read_f64_le(in, s.entities.data.data(), s.entities.size());
    read_f64_le(in, s.relations.data.data(), s.relations.size());
    read_f64_le(in, s.rel_out.data.data(), s.rel_out.size());
    read_f64_le(in, s.rel_in.data.data(), s.rel_in.size());
    return s;
}

std::vector<std::string> load_vocab_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io_error", "cannot open " + path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) names.push_back(line);
    return names;
}

} // namespace metaeu
