// Generates a synthetic cluster-structured benchmark dataset (train.txt,
// test.txt) for pipeline runs and experiments.

#include "metaeu/error.hpp"
#include "metaeu/synth.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"synthetic knowledge-graph benchmark generator"};
    std::string out_dir;
    metaeu::SynthParams p;
    app.add_option("--out", out_dir, "output directory")->required();
    app.add_option("--clusters", p.clusters, "number of entity clusters");
    app.add_option("--entities-per-cluster", p.entities_per_cluster, "cluster size");
    app.add_option("--relations", p.relations, "number of relations");
    app.add_option("--triples", p.triples, "triples before the test holdout");
    app.add_option("--fanout", p.fanout, "tails a head may use per relation");
    app.add_option("--test-fraction", p.test_fraction, "test holdout fraction");
    app.add_option("--seed", p.seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        metaeu::SynthDataset data = metaeu::make_synth(p);
        metaeu::write_synth(data, out_dir);
        std::cout << "wrote " << data.train.size() << " train and " << data.test.size()
                  << " test triples to " << out_dir << "\n";
        return 0;
    } catch (const metaeu::Error& e) {
        std::cerr << "error:" << e.tag() << ": " << e.what() << "\n";
        return 1;
    }
}
