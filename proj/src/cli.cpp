#include "metaeu/cli.hpp"

#include "metaeu/config.hpp"
#include "metaeu/evalrank.hpp"
#include "metaeu/kernels.hpp"
#include "metaeu/kge.hpp"
#include "metaeu/kgraph.hpp"
#include "metaeu/metatask.hpp"
#include "metaeu/unlearn.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace metaeu {

namespace fs = std::filesystem;

namespace {

uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io_error", "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string s = buf.str();
    return fnv1a64(s.data(), s.size());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io_error", "cannot write " + path);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io_error", "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------------------
// Stage manifests

struct Manifest {
    std::string stage;
    std::string config_hash;
    uint64_t seed = 0;
    std::map<std::string, std::string> extra;             // counters etc.
    std::vector<std::pair<std::string, std::string>> artifacts; // name, hash

    std::string serialize() const {
        std::ostringstream out;
        out << "stage=" << stage << "\n";
        out << "config_hash=" << config_hash << "\n";
        out << "seed=" << seed << "\n";
        for (const auto& [k, v] : extra) out << k << "=" << v << "\n";
        for (const auto& [name, h] : artifacts) out << "artifact=" << name << " " << h << "\n";
        return out.str();
    }

    static Manifest parse(const std::string& text) {
        Manifest m;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            size_t eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(0, eq), value = line.substr(eq + 1);
            if (key == "stage") m.stage = value;
            else if (key == "config_hash") m.config_hash = value;
            else if (key == "seed") m.seed = std::stoull(value);
            else if (key == "artifact") {
                size_t sp = value.rfind(' ');
                m.artifacts.push_back({value.substr(0, sp), value.substr(sp + 1)});
            } else m.extra[key] = value;
        }
        return m;
    }
};

struct StageContext {
    RunConfig cfg;
    std::string cfg_hash;
    fs::path run_dir;

    fs::path stage_dir(const std::string& stage) const { return run_dir / stage; }

    fs::path begin_stage(const std::string& stage) const {
        fs::path dir = stage_dir(stage);
        if (fs::exists(dir))
            throw Error("stage_exists",
                        dir.string() + " already exists; use a fresh run directory");
        fs::create_directories(dir);
        return dir;
    }

    Manifest require_stage(const std::string& stage, const std::string& needed_by) const {
        fs::path mf = stage_dir(stage) / "manifest.txt";
        if (!fs::exists(mf))
            throw Error("missing_artifact",
                        needed_by + " needs the " + stage + " stage; run `" + stage + "` first");
        Manifest m = Manifest::parse(read_text(mf.string()));
        if (m.config_hash != cfg_hash)
            throw Error("staleness_error", stage + " was produced under config hash " +
                                               m.config_hash + ", current is " + cfg_hash);
        return m;
    }

    void finish_stage(const std::string& stage, Manifest m) const {
        m.stage = stage;
        m.config_hash = cfg_hash;
        m.seed = cfg.seed;
        // hash artifacts in place
        for (auto& [name, h] : m.artifacts)
            h = hash_hex(hash_file((stage_dir(stage) / name).string()));
        write_text((stage_dir(stage) / "manifest.txt").string(), m.serialize());
    }
};

// ---------------------------------------------------------------------------
// Dataset plumbing

struct Dataset {
    KnowledgeGraph graph;        // vocabulary over all splits, train triples
    std::vector<Triple> valid;   // may be empty
    std::vector<Triple> test;    // may be empty
    ForgetSplit split;
    TripleSet known;             // train + valid + test, the ranking filter
};

std::vector<std::array<std::string, 3>> read_rows(const std::string& path, bool required) {
    std::vector<std::array<std::string, 3>> rows;
    std::ifstream in(path);
    if (!in) {
        if (required) throw Error("io_error", "cannot open " + path);
        return rows;
    }
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
    return rows;
}

void write_triples(const KnowledgeGraph& vocab, const std::vector<Triple>& triples,
                   const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("io_error", "cannot write " + path);
    for (const Triple& t : triples)
        out << vocab.entity_name(t.h) << '\t' << vocab.relation_name(t.r) << '\t'
            << vocab.entity_name(t.t) << '\n';
}

void write_vocab_file(const std::vector<std::string>& names, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("io_error", "cannot write " + path);
    for (const auto& n : names) out << n << '\n';
}

std::vector<std::string> read_vocab_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io_error", "cannot open " + path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) names.push_back(line);
    return names;
}

// Reloads the ingest artifacts into a Dataset.
Dataset load_dataset(const StageContext& ctx, const std::string& needed_by) {
    ctx.require_stage("ingest", needed_by);
    fs::path dir = ctx.stage_dir("ingest");
    auto entities = read_vocab_file((dir / "entities.txt").string());
    auto relations = read_vocab_file((dir / "relations.txt").string());

    // two-phase: a vocabulary-only graph maps the name TSVs first
    KnowledgeGraph vocab_only = KnowledgeGraph::from_vocab_and_triples(entities, relations, {});
    std::vector<Triple> train = vocab_only.parse_triples_tsv((dir / "train.tsv").string());

    Dataset d{KnowledgeGraph::from_vocab_and_triples(entities, relations, train), {}, {}, {}, {}};
    if (fs::exists(dir / "valid.tsv"))
        d.valid = d.graph.parse_triples_tsv((dir / "valid.tsv").string());
    if (fs::exists(dir / "test.tsv"))
        d.test = d.graph.parse_triples_tsv((dir / "test.tsv").string());
    d.split.forget = d.graph.parse_triples_tsv((dir / "forget.tsv").string());
    d.split.retain = d.graph.parse_triples_tsv((dir / "retain.tsv").string());
    d.known = d.graph.triple_set();
    for (const Triple& t : d.valid) d.known.insert(t);
    for (const Triple& t : d.test) d.known.insert(t);
    return d;
}

// ---------------------------------------------------------------------------
// Stages

void cmd_ingest(const StageContext& ctx) {
    fs::path data(ctx.cfg.dataset_path);
    auto train_rows = read_rows((data / "train.txt").string(), true);
    auto valid_rows = read_rows((data / "valid.txt").string(), false);
    auto test_rows = read_rows((data / "test.txt").string(), false);
    if (train_rows.empty()) throw Error("empty_graph", "no training triples");

    // one vocabulary across all splits, first-appearance order
    std::vector<std::array<std::string, 3>> all = train_rows;
    all.insert(all.end(), valid_rows.begin(), valid_rows.end());
    all.insert(all.end(), test_rows.begin(), test_rows.end());
    KnowledgeGraph whole = KnowledgeGraph::from_triples(all);

    auto to_ids = [&](const std::vector<std::array<std::string, 3>>& rows) {
        std::vector<Triple> out;
        TripleSet seen;
        for (const auto& row : rows) {
            Triple t{whole.entity_index(row[0]), whole.relation_index(row[1]),
                     whole.entity_index(row[2])};
            if (seen.insert(t).second) out.push_back(t);
        }
        return out;
    };
    std::vector<Triple> train = to_ids(train_rows);
    std::vector<Triple> valid = to_ids(valid_rows);
    std::vector<Triple> test = to_ids(test_rows);
    size_t duplicates = train_rows.size() + valid_rows.size() + test_rows.size() -
                        (train.size() + valid.size() + test.size());

    KnowledgeGraph graph = KnowledgeGraph::from_vocab_and_triples(whole.entity_names(),
                                                                  whole.relation_names(), train);

    ForgetSplit split;
    if (!ctx.cfg.forget_file.empty()) {
        std::vector<Triple> listed = graph.parse_triples_tsv(ctx.cfg.forget_file);
        split = split_forget(graph, listed);
    } else {
        split = split_forget(graph, ctx.cfg.forget_fraction,
                             Rng(ctx.cfg.seed).fork(0xf063ULL).next_u64());
    }

    fs::path dir = ctx.begin_stage("ingest");
    write_vocab_file(graph.entity_names(), (dir / "entities.txt").string());
    write_vocab_file(graph.relation_names(), (dir / "relations.txt").string());
    write_triples(graph, train, (dir / "train.tsv").string());
    if (!valid.empty()) write_triples(graph, valid, (dir / "valid.tsv").string());
    if (!test.empty()) write_triples(graph, test, (dir / "test.tsv").string());
    write_triples(graph, split.forget, (dir / "forget.tsv").string());
    write_triples(graph, split.retain, (dir / "retain.tsv").string());

    Manifest m;
    m.extra["entities"] = std::to_string(graph.entity_count());
    m.extra["relations"] = std::to_string(graph.relation_count());
    m.extra["train_triples"] = std::to_string(train.size());
    m.extra["valid_triples"] = std::to_string(valid.size());
    m.extra["test_triples"] = std::to_string(test.size());
    m.extra["forget_triples"] = std::to_string(split.forget.size());
    m.extra["retain_triples"] = std::to_string(split.retain.size());
    m.extra["duplicates"] = std::to_string(duplicates);
    m.artifacts = {{"entities.txt", ""}, {"relations.txt", ""}, {"train.tsv", ""},
                   {"forget.tsv", ""},   {"retain.tsv", ""}};
    if (!valid.empty()) m.artifacts.push_back({"valid.tsv", ""});
    if (!test.empty()) m.artifacts.push_back({"test.tsv", ""});
    ctx.finish_stage("ingest", std::move(m));
    std::cout << "ingest: " << graph.entity_count() << " entities, "
              << graph.relation_count() << " relations, " << train.size()
              << " train triples (" << duplicates << " duplicates dropped), forget "
              << split.forget.size() << "\n";
}

TrainConfig train_config(const RunConfig& cfg) {
    TrainConfig t;
    t.learning_rate = cfg.learning_rate;
    t.margin = cfg.margin;
    t.epochs = cfg.epochs;
    t.batch_size = cfg.batch_size;
    t.negatives_per_positive = cfg.negatives;
    t.seed = cfg.seed;
    t.norm = cfg.norm;
    return t;
}

void write_history(const std::string& path, const std::vector<double>& values,
                   const char* label) {
    std::ostringstream out;
    for (size_t i = 0; i < values.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s %zu %.17g\n", label, i, values[i]);
        out << buf;
    }
    write_text(path, out.str());
}

void cmd_train(const StageContext& ctx, bool retrain) {
    Dataset d = load_dataset(ctx, retrain ? "retrain" : "train-raw");
    const char* stage = retrain ? "retrain" : "train-raw";
    const std::vector<Triple>& triples =
        retrain ? d.split.retain : d.graph.triples();

    std::vector<double> losses;
    EmbeddingStore store =
        train_baseline(d.graph, triples, ctx.cfg.model, ctx.cfg.dim, train_config(ctx.cfg), &losses);

    fs::path dir = ctx.begin_stage(stage);
    std::string name = retrain ? "retrained.kgeu" : "raw.kgeu";
    save_store(store, (dir / name).string(), d.graph.entity_names(), d.graph.relation_names());
    write_history((dir / "loss.txt").string(), losses, "epoch");

    Manifest m;
    m.extra["triples"] = std::to_string(triples.size());
    m.extra["final_loss"] = std::to_string(losses.empty() ? 0.0 : losses.back());
    m.artifacts = {{name, ""}, {"loss.txt", ""}};
    ctx.finish_stage(stage, std::move(m));
    std::cout << stage << ": trained on " << triples.size() << " triples, final epoch loss "
              << (losses.empty() ? 0.0 : losses.back()) << "\n";
}

MetaTrainConfig meta_config(const RunConfig& cfg) {
    MetaTrainConfig mc;
    mc.epochs = cfg.meta_epochs;
    mc.meta_batch = cfg.meta_batch;
    mc.learning_rate = cfg.learning_rate;
    mc.margin = cfg.margin;
    mc.negatives_per_positive = cfg.negatives;
    mc.layers = cfg.layers;
    mc.n_learners = cfg.learners;
    mc.seed = cfg.seed;
    mc.norm = cfg.norm;
    return mc;
}

TaskParams task_params(const RunConfig& cfg) {
    TaskParams tp;
    tp.n_entities = cfg.task_entities;
    tp.max_triples = cfg.max_task_triples;
    tp.support_fraction = cfg.support_fraction;
    return tp;
}

void cmd_meta_train(const StageContext& ctx) {
    Dataset d = load_dataset(ctx, "meta-train");
    ctx.require_stage("train-raw", "meta-train");
    EmbeddingStore raw = load_store((ctx.stage_dir("train-raw") / "raw.kgeu").string());

    TaskStream tasks = task_stream(d.graph, ctx.cfg.tasks_train, ctx.cfg.tasks_valid,
                                   task_params(ctx.cfg),
                                   Rng(ctx.cfg.seed).fork(0x7a53ULL).next_u64());

    MetaTrainReport report;
    Ensemble ensemble = meta_train(d.graph, raw, tasks, meta_config(ctx.cfg), &report);

    fs::path dir = ctx.begin_stage("meta-train");
    save_ensemble(ensemble, (dir / "ensemble.meu").string());
    std::ostringstream hist;
    for (size_t i = 0; i < report.train_loss.size(); ++i) {
        hist << "epoch " << i << " train " << report.train_loss[i];
        if (i < report.valid_loss.size()) hist << " valid " << report.valid_loss[i];
        hist << "\n";
    }
    write_text((dir / "loss.txt").string(), hist.str());

    Manifest m;
    m.extra["tasks_train"] = std::to_string(tasks.train.size());
    m.extra["tasks_valid"] = std::to_string(tasks.valid.size());
    m.artifacts = {{"ensemble.meu", ""}, {"loss.txt", ""}};
    ctx.finish_stage("meta-train", std::move(m));
    std::cout << "meta-train: " << tasks.train.size() << " train tasks, final train loss "
              << (report.train_loss.empty() ? 0.0 : report.train_loss.back()) << "\n";
}

UnlearnConfig unlearn_config(const RunConfig& cfg) {
    UnlearnConfig u;
    u.w_a = cfg.w_a;
    u.lambda4 = cfg.lambda4;
    u.finetune_steps = cfg.finetune_steps;
    u.budget = cfg.budget;
    u.inner_lr = cfg.inner_lr;
    u.adapt_lr = cfg.adapt_lr;
    u.offset_cap = cfg.offset_cap;
    u.margin = cfg.margin;
    u.support_fraction = cfg.unlearn_support_fraction;
    u.negatives_per_positive = cfg.negatives;
    u.seed = cfg.seed;
    u.norm = cfg.norm;
    return u;
}

std::string ablation_label(const AblationConfig& abl) {
    if (abl.drop_learner) return "drop-learner-" + std::to_string(*abl.drop_learner);
    if (abl.disable_raeeg) return "disable-raeeg";
    if (abl.disable_neem) return "disable-neem";
    return "";
}

void cmd_unlearn(const StageContext& ctx, const AblationConfig& abl) {
    Dataset d = load_dataset(ctx, "unlearn");
    ctx.require_stage("train-raw", "unlearn");
    EmbeddingStore raw = load_store((ctx.stage_dir("train-raw") / "raw.kgeu").string());

    std::string label = ablation_label(abl);
    std::string stage = label.empty() ? "unlearn" : "ablate-" + label;
    bool component_ablation = abl.disable_raeeg || abl.disable_neem;

    // component switches apply to the whole pipeline: the generator is
    // re-meta-trained with the component off; dropping a learner reuses the
    // trained ensemble and renormalizes
    Ensemble ensemble;
    if (component_ablation) {
        TaskStream tasks = task_stream(d.graph, ctx.cfg.tasks_train, ctx.cfg.tasks_valid,
                                       task_params(ctx.cfg),
                                       Rng(ctx.cfg.seed).fork(0x7a53ULL).next_u64());
        ensemble = meta_train(d.graph, raw, tasks, meta_config(ctx.cfg), nullptr, {}, abl);
    } else {
        ctx.require_stage("meta-train", "unlearn");
        ensemble = load_ensemble((ctx.stage_dir("meta-train") / "ensemble.meu").string());
    }

    UnlearnReport report;
    EmbeddingStore result =
        unlearn(d.graph, raw, d.split, ensemble, unlearn_config(ctx.cfg), &report, abl);

    fs::path dir = ctx.begin_stage(stage);
    save_store(result, (dir / "unlearned.kgeu").string(), d.graph.entity_names(),
               d.graph.relation_names());
    write_history((dir / "l3.txt").string(), report.l3_history, "step");
    if (component_ablation) save_ensemble(ensemble, (dir / "ensemble-ablated.meu").string());

    Manifest m;
    m.extra["affected_entities"] = std::to_string(report.n_affected);
    m.extra["fallback_entities"] = std::to_string(report.n_fallback);
    if (!label.empty()) m.extra["ablation"] = label;
    m.artifacts = {{"unlearned.kgeu", ""}, {"l3.txt", ""}};
    if (component_ablation) m.artifacts.push_back({"ensemble-ablated.meu", ""});
    ctx.finish_stage(stage, std::move(m));
    std::cout << stage << ": regenerated " << report.n_affected << " entities ("
              << report.n_fallback << " fallback)\n";
}

void cmd_eval(const StageContext& ctx) {
    Dataset d = load_dataset(ctx, "eval");
    EvalReport report;

    auto eval_store = [&](const std::string& stage, const std::string& file,
                          const std::string& condition) {
        fs::path p = ctx.stage_dir(stage) / file;
        if (!fs::exists(p)) return false;
        ctx.require_stage(stage, "eval");
        EmbeddingStore store = load_store(p.string());
        if (!d.test.empty())
            report.add(condition, "test",
                       evaluate(store, d.test, d.known, ctx.cfg.eval_mode, ctx.cfg.norm));
        if (!d.split.forget.empty())
            report.add(condition, "forget",
                       evaluate(store, d.split.forget, d.known, ctx.cfg.eval_mode, ctx.cfg.norm));
        return true;
    };

    bool any = eval_store("train-raw", "raw.kgeu", "RAW");
    any |= eval_store("retrain", "retrained.kgeu", "Retrained");
    any |= eval_store("unlearn", "unlearned.kgeu", "Unlearned");
    // ablated variants, in directory-name order
    std::vector<std::string> ablate_stages;
    if (fs::exists(ctx.run_dir))
        for (const auto& entry : fs::directory_iterator(ctx.run_dir))
            if (entry.is_directory() && entry.path().filename().string().rfind("ablate-", 0) == 0)
                ablate_stages.push_back(entry.path().filename().string());
    std::sort(ablate_stages.begin(), ablate_stages.end());
    for (const auto& stage : ablate_stages)
        any |= eval_store(stage, "unlearned.kgeu",
                          "Unlearned[" + stage.substr(std::string("ablate-").size()) + "]");

    if (!any)
        throw Error("missing_artifact", "eval found no trained stores; run `train-raw` first");

    fs::path dir = ctx.begin_stage("eval");
    write_text((dir / "report.csv").string(), report.to_csv());
    write_text((dir / "report.txt").string(), report.to_table());

    Manifest m;
    m.artifacts = {{"report.csv", ""}, {"report.txt", ""}};
    ctx.finish_stage("eval", std::move(m));
    std::cout << report.to_table();
}

void cmd_report(const StageContext& ctx) {
    ctx.require_stage("eval", "report");
    EvalReport report =
        EvalReport::from_csv(read_text((ctx.stage_dir("eval") / "report.csv").string()));
    fs::path dir = ctx.begin_stage("report");
    write_text((dir / "report.txt").string(), report.to_table());
    Manifest m;
    m.artifacts = {{"report.txt", ""}};
    ctx.finish_stage("report", std::move(m));
    std::cout << report.to_table();
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"knowledge-graph embedding engine with meta-learned unlearning"};
    app.require_subcommand(1);

    std::string config_path, run_dir, ablate_switch;
    uint64_t seed_override = 0;
    bool has_seed_override = false;

    app.add_option("--config", config_path, "run configuration file")->required();
    app.add_option("--run-dir", run_dir, "run directory for stage artifacts")->required();
    auto* seed_opt = app.add_option("--seed", seed_override, "override [run] seed");
    app.add_option("--ablate", ablate_switch,
                   "ablation switch: drop-learner-<i> | disable-raeeg | disable-neem");

    auto sub = [&](const char* name, const char* help) {
        CLI::App* s = app.add_subcommand(name, help);
        s->fallthrough(); // global options may follow the subcommand
        return s;
    };
    auto* ingest = sub("ingest", "load the dataset and build the forget split");
    auto* train_raw = sub("train-raw", "train embeddings on the full dataset");
    auto* meta = sub("meta-train", "meta-train the generation ensemble");
    auto* unl = sub("unlearn", "apply unlearning to the RAW embeddings");
    auto* retrain = sub("retrain", "train embeddings on the retain set only");
    auto* eval = sub("eval", "rank test and forget splits for every store");
    auto* report = sub("report", "render the comparison table");
    auto* ablate = sub("ablate", "unlearn with a pipeline component ablated");
    bool flag_raeeg = false, flag_neem = false;
    int flag_drop = -1;
    ablate->add_flag("--disable-raeeg", flag_raeeg, "random init instead of relation context");
    ablate->add_flag("--disable-neem", flag_neem, "skip neighborhood propagation");
    ablate->add_option("--drop-learner", flag_drop, "drop base learner i and renormalize");

    std::vector<const char*> argv;
    argv.push_back("metaeu");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << "error:usage: " << e.what() << "\n";
        return 1;
    }
    has_seed_override = seed_opt->count() > 0;

    try {
        StageContext ctx;
        ctx.cfg = RunConfig::parse_file(config_path);
        if (has_seed_override) ctx.cfg.seed = seed_override;
        ctx.cfg_hash = hash_hex(ctx.cfg.hash());
        ctx.run_dir = run_dir;
        fs::create_directories(ctx.run_dir);

        AblationConfig abl;
        if (!ablate_switch.empty()) {
            if (ablate_switch == "disable-raeeg") abl.disable_raeeg = true;
            else if (ablate_switch == "disable-neem") abl.disable_neem = true;
            else if (ablate_switch.rfind("drop-learner-", 0) == 0)
                abl.drop_learner = std::stoi(ablate_switch.substr(13));
            else throw Error("config_error", "unknown ablation switch: " + ablate_switch);
        }

        if (ingest->parsed()) cmd_ingest(ctx);
        else if (train_raw->parsed()) cmd_train(ctx, false);
        else if (retrain->parsed()) cmd_train(ctx, true);
        else if (meta->parsed()) cmd_meta_train(ctx);
        else if (unl->parsed()) cmd_unlearn(ctx, abl);
        else if (eval->parsed()) cmd_eval(ctx);
        else if (report->parsed()) cmd_report(ctx);
        else if (ablate->parsed()) {
            if (flag_raeeg) abl.disable_raeeg = true;
            if (flag_neem) abl.disable_neem = true;
            if (flag_drop >= 0) abl.drop_learner = flag_drop;
            if (!abl.disable_raeeg && !abl.disable_neem && !abl.drop_learner)
                throw Error("config_error",
                            "ablate needs --disable-raeeg, --disable-neem or --drop-learner");
            cmd_unlearn(ctx, abl);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error:" << e.tag() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error:internal: " << e.what() << "\n";
        return 2;
    }
}

} // namespace metaeu
