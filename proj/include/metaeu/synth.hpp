#pragma once
// Synthetic benchmark graphs. Entities live in clusters; each relation links
// one source cluster to one target cluster, and each head connects to a
// bounded random subset of the target cluster. The cluster rule makes the
// data learnable by the scoring models while the per-head subsets leave
// enough idiosyncrasy to separate memorization from generalization.

#include "metaeu/kgraph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace metaeu {

struct SynthParams {
    int32_t clusters = 10;
    int32_t entities_per_cluster = 20;
    int32_t relations = 10;
    int32_t triples = 2200;    // before the test holdout
    int32_t fanout = 20;       // scales per-head tail subsets (activity-skewed)
    double test_fraction = 0.1;
    uint64_t seed = 0;
};

struct SynthDataset {
    std::vector<std::array<std::string, 3>> train;
    std::vector<std::array<std::string, 3>> test;
};

SynthDataset make_synth(const SynthParams& params);

// Writes train.txt / test.txt (and an empty-free valid.txt when asked).
void write_synth(const SynthDataset& data, const std::string& dir);

} // namespace metaeu
