#include "metaeu/synth.hpp"
#include "metaeu/error.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

namespace metaeu {

SynthDataset make_synth(const SynthParams& p) {
    if (p.clusters < 2 || p.entities_per_cluster < 2 || p.relations < 1 || p.triples < 10)
        throw Error("config_error", "degenerate synthetic parameters");
    Rng rng(p.seed);

    // relation r: source cluster r mod C, target cluster drawn so that every
    // cluster is covered as a target at least once
    std::vector<int32_t> src(static_cast<size_t>(p.relations)), dst(static_cast<size_t>(p.relations));
    for (int32_t r = 0; r < p.relations; ++r) {
        src[static_cast<size_t>(r)] = r % p.clusters;
        if (r < p.clusters)
            dst[static_cast<size_t>(r)] =
                static_cast<int32_t>((r + 1 + rng.uniform_index(static_cast<size_t>(p.clusters - 1)))) %
                p.clusters;
        else
            dst[static_cast<size_t>(r)] = static_cast<int32_t>(rng.uniform_index(static_cast<size_t>(p.clusters)));
    }

    auto entity = [&](int32_t cluster, int32_t k) {
        return "e" + std::to_string(cluster) + "_" + std::to_string(k);
    };
    auto relation = [&](int32_t r) { return "r" + std::to_string(r); };

    // heavy-tailed degrees: each entity carries an activity level that
    // scales how often it appears and how many distinct tails it uses
    int32_t n_entities = p.clusters * p.entities_per_cluster;
    std::vector<int32_t> activity(static_cast<size_t>(n_entities));
    for (auto& a : activity) a = 1 + static_cast<int32_t>(rng.uniform_index(4)); // 1..4

    // per (head, relation): a bounded preferred tail subset
    std::vector<std::vector<std::vector<int32_t>>> prefs(
        static_cast<size_t>(p.relations),
        std::vector<std::vector<int32_t>>(static_cast<size_t>(n_entities)));

    std::set<std::array<int32_t, 3>> seen;
    std::vector<std::array<std::string, 3>> rows;
    int guard = 0;
    while (static_cast<int32_t>(rows.size()) < p.triples && guard < p.triples * 200) {
        ++guard;
        int32_t r = static_cast<int32_t>(rng.uniform_index(static_cast<size_t>(p.relations)));
        int32_t hk = static_cast<int32_t>(rng.uniform_index(static_cast<size_t>(p.entities_per_cluster)));
        int32_t h = src[static_cast<size_t>(r)] * p.entities_per_cluster + hk;
        if (rng.uniform_index(4) >= static_cast<size_t>(activity[static_cast<size_t>(h)]))
            continue; // active heads appear more often
        int32_t cap = (p.fanout * activity[static_cast<size_t>(h)]) / 4;
        if (cap < 1) cap = 1;
        auto& pref = prefs[static_cast<size_t>(r)][static_cast<size_t>(h)];
        int32_t tk;
        if (static_cast<int32_t>(pref.size()) < cap) {
            tk = static_cast<int32_t>(rng.uniform_index(static_cast<size_t>(p.entities_per_cluster)));
            int32_t cand = dst[static_cast<size_t>(r)] * p.entities_per_cluster + tk;
            if (rng.uniform_index(4) >= static_cast<size_t>(activity[static_cast<size_t>(cand)]))
                continue; // popular tails attract more edges
            if (std::find(pref.begin(), pref.end(), tk) == pref.end()) pref.push_back(tk);
        } else {
            tk = pref[rng.uniform_index(pref.size())];
        }
        int32_t t = dst[static_cast<size_t>(r)] * p.entities_per_cluster + tk;
        if (!seen.insert({h, r, t}).second) continue;
        rows.push_back({entity(h / p.entities_per_cluster, h % p.entities_per_cluster),
                        relation(r),
                        entity(t / p.entities_per_cluster, t % p.entities_per_cluster)});
    }
    if (static_cast<int32_t>(rows.size()) < p.triples / 2)
        throw Error("config_error", "synthetic parameters too tight to generate triples");

    // holdout split, but keep every entity present in train so that test
    // queries never hit untrained rows
    std::vector<size_t> order(rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    size_t n_test = static_cast<size_t>(p.test_fraction * static_cast<double>(rows.size()));

    SynthDataset out;
    std::unordered_set<std::string> train_entities;
    std::vector<char> is_test(rows.size(), 0);
    for (size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;
    for (size_t i = 0; i < rows.size(); ++i)
        if (!is_test[i]) {
            train_entities.insert(rows[i][0]);
            train_entities.insert(rows[i][2]);
        }
    for (size_t i = 0; i < rows.size(); ++i) {
        if (is_test[i] && train_entities.count(rows[i][0]) && train_entities.count(rows[i][2]))
            out.test.push_back(rows[i]);
        else
            out.train.push_back(rows[i]);
    }
    return out;
}

void write_synth(const SynthDataset& data, const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::vector<std::array<std::string, 3>>& rows) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw Error("io_error", "cannot write " + dir + "/" + name);
        for (const auto& row : rows) out << row[0] << '\t' << row[1] << '\t' << row[2] << '\n';
    };
    write("train.txt", data.train);
    write("test.txt", data.test);
}

} // namespace metaeu
