#include "metaeu/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace metaeu {

uint64_t fnv1a64(const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error("config_error", "bad numeric value for " + key + ": " + v);
    }
}

int64_t to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long long n = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw Error("config_error", "bad integer value for " + key + ": " + v);
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw Error("config_error", "bad seed value for " + key + ": " + v);
    }
}

} // namespace

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[' && s.back() == ']') {
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw Error("config_error", "line " + std::to_string(lineno) + ": expected key=value");
        std::string key = section + "." + trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));

        if (key == "dataset.path") cfg.dataset_path = value;
        else if (key == "dataset.forget_fraction") cfg.forget_fraction = to_double(key, value);
        else if (key == "dataset.forget_file") cfg.forget_file = value;
        else if (key == "model.kind") cfg.model = parse_model(value);
        else if (key == "model.dim") cfg.dim = to_int(key, value);
        else if (key == "model.norm") cfg.norm = parse_norm(value);
        else if (key == "train.learning_rate") cfg.learning_rate = to_double(key, value);
        else if (key == "train.margin") cfg.margin = to_double(key, value);
        else if (key == "train.epochs") cfg.epochs = static_cast<int>(to_int(key, value));
        else if (key == "train.batch_size") cfg.batch_size = static_cast<int>(to_int(key, value));
        else if (key == "train.negatives") cfg.negatives = static_cast<int>(to_int(key, value));
        else if (key == "meta.tasks_train") cfg.tasks_train = static_cast<int>(to_int(key, value));
        else if (key == "meta.tasks_valid") cfg.tasks_valid = static_cast<int>(to_int(key, value));
        else if (key == "meta.epochs") cfg.meta_epochs = static_cast<int>(to_int(key, value));
        else if (key == "meta.batch_size") cfg.meta_batch = static_cast<int>(to_int(key, value));
        else if (key == "meta.task_entities") cfg.task_entities = static_cast<int>(to_int(key, value));
        else if (key == "meta.max_task_triples") cfg.max_task_triples = static_cast<int>(to_int(key, value));
        else if (key == "meta.support_fraction") cfg.support_fraction = to_double(key, value);
        else if (key == "meta.learners") cfg.learners = static_cast<int>(to_int(key, value));
        else if (key == "meta.layers") cfg.layers = static_cast<int>(to_int(key, value));
        else if (key == "unlearn.w_a") cfg.w_a = to_double(key, value);
        else if (key == "unlearn.lambda4") cfg.lambda4 = to_double(key, value);
        else if (key == "unlearn.finetune_steps") cfg.finetune_steps = static_cast<int>(to_int(key, value));
        else if (key == "unlearn.budget") cfg.budget = static_cast<int>(to_int(key, value));
        else if (key == "unlearn.inner_lr") cfg.inner_lr = to_double(key, value);
        else if (key == "unlearn.adapt_lr") cfg.adapt_lr = to_double(key, value);
        else if (key == "unlearn.offset_cap") cfg.offset_cap = to_double(key, value);
        else if (key == "unlearn.support_fraction") cfg.unlearn_support_fraction = to_double(key, value);
        else if (key == "eval.mode") {
            if (value == "filtered") cfg.eval_mode = EvalMode::Filtered;
            else if (value == "raw") cfg.eval_mode = EvalMode::Raw;
            else throw Error("config_error", "eval.mode must be filtered or raw");
        }
        else if (key == "run.seed") cfg.seed = to_u64(key, value);
        else throw Error("config_error", "unknown config key: " + key);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io_error", "cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

void RunConfig::validate() const {
    if (dataset_path.empty()) throw Error("config_error", "dataset.path is required");
    if (forget_file.empty() && !(forget_fraction > 0.0 && forget_fraction < 1.0))
        throw Error("config_error", "dataset.forget_fraction must be in (0,1)");
    if (dim <= 0) throw Error("config_error", "model.dim must be positive");
    if (learning_rate <= 0.0 || margin <= 0.0 || inner_lr <= 0.0)
        throw Error("config_error", "rates and margin must be positive");
    if (epochs <= 0 || batch_size <= 0 || negatives <= 0)
        throw Error("config_error", "training sizes must be positive");
    if (tasks_train <= 0 || tasks_valid < 0 || meta_epochs <= 0 || meta_batch <= 0)
        throw Error("config_error", "meta-training sizes must be positive");
    if (task_entities < 2 || max_task_triples < 1)
        throw Error("config_error", "bad task parameters");
    if (!(support_fraction > 0.0 && support_fraction < 1.0) ||
        !(unlearn_support_fraction > 0.0 && unlearn_support_fraction < 1.0))
        throw Error("config_error", "support fractions must be in (0,1)");
    if (learners < 1 || layers < 0) throw Error("config_error", "bad ensemble shape");
    if (!(w_a >= 0.0 && w_a <= 1.0)) throw Error("config_error", "unlearn.w_a must be in [0,1]");
    if (lambda4 < 0.0) throw Error("config_error", "unlearn.lambda4 must be nonnegative");
    if (adapt_lr <= 0.0) throw Error("config_error", "unlearn.adapt_lr must be positive");
    if (offset_cap < 0.0) throw Error("config_error", "unlearn.offset_cap must be nonnegative");
    if (finetune_steps < 0 || budget < 0) throw Error("config_error", "negative step counts");
}

std::string RunConfig::canonical() const {
    std::map<std::string, std::string> kv;
    char buf[64];
    auto put_d = [&](const char* k, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        kv[k] = buf;
    };
    kv["dataset.path"] = dataset_path;
    put_d("dataset.forget_fraction", forget_fraction);
    kv["dataset.forget_file"] = forget_file;
    kv["model.kind"] = model_name(model);
    kv["model.dim"] = std::to_string(dim);
    kv["model.norm"] = norm_name(norm);
    put_d("train.learning_rate", learning_rate);
    put_d("train.margin", margin);
    kv["train.epochs"] = std::to_string(epochs);
    kv["train.batch_size"] = std::to_string(batch_size);
    kv["train.negatives"] = std::to_string(negatives);
    kv["meta.tasks_train"] = std::to_string(tasks_train);
    kv["meta.tasks_valid"] = std::to_string(tasks_valid);
    kv["meta.epochs"] = std::to_string(meta_epochs);
    kv["meta.batch_size"] = std::to_string(meta_batch);
    kv["meta.task_entities"] = std::to_string(task_entities);
    kv["meta.max_task_triples"] = std::to_string(max_task_triples);
    put_d("meta.support_fraction", support_fraction);
    kv["meta.learners"] = std::to_string(learners);
    kv["meta.layers"] = std::to_string(layers);
    put_d("unlearn.w_a", w_a);
    put_d("unlearn.lambda4", lambda4);
    kv["unlearn.finetune_steps"] = std::to_string(finetune_steps);
    kv["unlearn.budget"] = std::to_string(budget);
    put_d("unlearn.inner_lr", inner_lr);
    put_d("unlearn.adapt_lr", adapt_lr);
    put_d("unlearn.offset_cap", offset_cap);
    put_d("unlearn.support_fraction", unlearn_support_fraction);
    kv["eval.mode"] = eval_mode == EvalMode::Filtered ? "filtered" : "raw";
    kv["run.seed"] = std::to_string(seed);

    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

uint64_t RunConfig::hash() const {
    std::string c = canonical();
    return fnv1a64(c.data(), c.size());
}

} // namespace metaeu
