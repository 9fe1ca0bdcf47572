#pragma once
// Run configuration: plain-text key=value with [section] headers, '#'
// comments. Unknown keys are rejected so typos fail loudly. The config
// hash covers the canonical parsed form (sorted section.key=value lines,
// seed included), which is what stage manifests record.

#include "metaeu/evalrank.hpp"
#include "metaeu/kge.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace metaeu {

struct RunConfig {
    // [dataset]
    std::string dataset_path;
    double forget_fraction = 0.05;
    std::string forget_file; // overrides the fraction when set

    // [model]
    ModelKind model = ModelKind::TransE;
    int64_t dim = 32;
    NormKind norm = NormKind::L1;

    // [train]
    double learning_rate = 0.01;
    double margin = 1.0;
    int epochs = 100;
    int batch_size = 64;
    int negatives = 1;

    // [meta]
    int tasks_train = 10000;
    int tasks_valid = 200;
    int meta_epochs = 10;
    int meta_batch = 64;
    int task_entities = 20;
    int max_task_triples = 200;
    double support_fraction = 0.7;
    int learners = 4;
    int layers = 3;

    // [unlearn]
    double w_a = 0.5;
    double lambda4 = 3.0;
    int finetune_steps = 100;
    int budget = 500;
    double inner_lr = 0.01;
    double adapt_lr = 0.0005;
    double offset_cap = 0.3;
    double unlearn_support_fraction = 0.7;

    // [eval]
    EvalMode eval_mode = EvalMode::Filtered;

    // [run]
    uint64_t seed = 0;

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text);

    std::string canonical() const;  // sorted section.key=value lines
    uint64_t hash() const;          // FNV-1a over canonical()
    void validate() const;
};

uint64_t fnv1a64(const void* data, size_t n);
std::string hash_hex(uint64_t h);

} // namespace metaeu
