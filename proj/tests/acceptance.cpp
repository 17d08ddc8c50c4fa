// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Everything runs on synthkit data and replay fixtures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "neuronscope/neuronscope.hpp"
#include "pipeline.hpp"
#include "test_util.hpp"

using namespace neuronscope;

namespace {

struct Check {
    std::string name;
    double budget_s;
    std::function<std::string()> body;  // empty string = pass, otherwise the reason
};

std::string require(bool ok, const std::string& why) { return ok ? std::string() : why; }

std::string exemplar_sizing() {
    if (exemplar_count(43474, 1.0) != 435) return "exemplar_count(43474, 1) = " + std::to_string(exemplar_count(43474, 1.0));
    SplitMix64 rng(1);
    std::vector<float> col(43474);
    for (auto& v : col) v = static_cast<float>(rng.gaussian());
    const ActivationStore store("acc", 1, 1, testutil::ids_of(col.size()), col);
    const auto ex = exemplar_set(store, {0, 0}, 1.0);
    return require(ex.ranked_ids.size() == 435, "exemplar_set returned " + std::to_string(ex.ranked_ids.size()));
}

std::string oracle_equivalence() {
    SplitMix64 rng(2);
    const auto grid = threshold_grid(0.05);
    for (int i = 0; i < 50; ++i) {
        synth::SynthSpec spec;
        spec.seed = rng.next();
        spec.n_sentences = 200 + rng.below(801);
        spec.n_descriptors = 2 + rng.below(10);
        spec.layers = 1 + static_cast<std::uint32_t>(rng.below(4));
        spec.neurons_per_layer = 1 + static_cast<std::uint32_t>(rng.below(32 / spec.layers));
        spec.descriptor_density = 0.05 + 0.05 * static_cast<double>(rng.below(6));
        spec.noise_std = 0.5 + static_cast<double>(rng.below(3));
        const auto d = synth::generate(spec);
        const double k = 1.0 + static_cast<double>(rng.below(5));
        for (double t : grid) {
            const auto got = attribute(d.calibration, d.matrix, d.calibration.all_neurons(), {k, t, 4});
            if (got != synth::oracle_attribution(d.matrix, d.calibration, k, t))
                return "instance " + std::to_string(i) + " differs at t=" + std::to_string(t);
        }
    }
    return {};
}

std::string planted_end_to_end() {
    synth::SynthSpec spec;  // 2,000 sentences, 8 descriptors, 4 x 16 neurons, signal 3, noise 1
    const auto d = synth::generate(spec);
    if (d.calibration.width() != 64) return "expected 64 neurons";
    const auto neurons = d.calibration.all_neurons();
    const auto cal = attribute(d.calibration, d.matrix, neurons, {1.0, 0.35, 4});
    const auto val = attribute(d.validation, d.matrix, neurons, {1.0, 0.35, 4});
    EvalInputs in;
    in.cal = &cal;
    in.val = &val;
    in.truth = &d.truth;
    const auto rep = evaluation_report(in);
    const double p1 = rep["pr_at_k"][0]["precision"]["mean"].get<double>();
    double j = -1;
    for (const auto& p : rep["neuron_jaccard"])
        if (std::abs(p["t"].get<double>() - 0.35) < 1e-12) j = p["jaccard"]["mean"].get<double>();
    std::ostringstream why;
    why << "P@1=" << p1 << " J(0.35)=" << j;
    return require(p1 >= 0.95 && j >= 0.9, why.str());
}

std::string monotonicity() {
    const auto d = synth::generate(synth::SynthSpec{});
    const auto grid = threshold_grid(0.05);
    const auto base = attribute(d.calibration, d.matrix, d.calibration.all_neurons(), {1.0, 0.0, 4});
    for (const auto& nd : base)
        for (std::size_t a = 0; a < grid.size(); ++a)
            for (std::size_t b = a; b < grid.size(); ++b) {
                const auto lo = assigned_at(nd.ranked, grid[a]), hi = assigned_at(nd.ranked, grid[b]);
                const std::set<std::string> ls(lo.begin(), lo.end());
                for (const auto& l : hi)
                    if (!ls.contains(l)) return "neuron " + nd.neuron.str() + " gains '" + l + "' as t grows";
            }
    return {};
}

std::string metric_identities() {
    SplitMix64 rng(3);
    const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h"};
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> ranked = pool;
        shuffle(std::span<std::string>(ranked), rng);
        ranked.resize(rng.below(pool.size() + 1));
        std::set<std::string> truth;
        for (const auto& l : pool)
            if (rng.below(3) == 0) truth.insert(l);
        const std::size_t k = 1 + rng.below(5);
        std::size_t inter = 0;
        for (std::size_t j = 0; j < std::min(k, ranked.size()); ++j) inter += truth.count(ranked[j]);
        const auto pr = precision_recall_at_k(ranked, truth, k);
        if (std::abs(*pr.precision * static_cast<double>(k) - static_cast<double>(inter)) > 1e-12)
            return "P@K*K != |intersection| on instance " + std::to_string(i);
        if (!truth.empty() && std::abs(*pr.recall * static_cast<double>(truth.size()) - static_cast<double>(inter)) > 1e-12)
            return "R@K*|truth| != |intersection| on instance " + std::to_string(i);
    }
    std::vector<std::uint8_t> a, b;
    auto add = [&](int n, std::uint8_t x, std::uint8_t y) {
        a.insert(a.end(), n, x);
        b.insert(b.end(), n, y);
    };
    add(20, 1, 1);
    add(5, 1, 0);
    add(10, 0, 1);
    add(15, 0, 0);
    const auto kappa = cohens_kappa(a, b);
    if (!kappa || std::abs(*kappa - 0.4) > 1e-12) return "kappa on 20/5/10/15 is not 0.4";
    BinaryMatrix m({"r0", "r1", "r2", "r3"}, {"Positive", "Negative"});
    m.set(0, 0, true);
    m.set(1, 0, true);
    m.set(2, 1, true);
    m.set(3, 1, true);
    const auto phi = phi_correlation(m);
    return require(phi.values[0][1] == -1.0 && phi.values[0][0] == 1.0 && phi.values[1][1] == 1.0,
                   "phi is not -1 off-diagonal / +1 on the diagonal");
}

std::string serialization() {
    SplitMix64 rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto store = testutil::random_store(rng, rng.below(60), 1 + static_cast<std::uint32_t>(rng.below(4)),
                                                  1 + static_cast<std::uint32_t>(rng.below(16)));
        const auto nact = encode_nact(store);
        if (encode_nact(decode_nact(nact)) != nact || decode_nact(nact) != store) return "NACT fixture " + std::to_string(i);

        const std::uint32_t dim = 1 + static_cast<std::uint32_t>(rng.below(48));
        EmbeddingTable table(dim);
        const auto rows = rng.below(40);
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> v(dim);
            double n = 0;
            for (auto& x : v) {
                x = rng.gaussian();
                n += x * x;
            }
            std::vector<float> f;
            for (double x : v) f.push_back(static_cast<float>(x / std::sqrt(n)));
            table.add("surface " + std::to_string(r), f);
        }
        const auto nemb = encode_nemb(table);
        if (encode_nemb(decode_nemb(nemb)) != nemb || decode_nemb(nemb) != table) return "NEMB fixture " + std::to_string(i);

        const auto matrix = testutil::random_matrix(rng, testutil::ids_of(rng.below(120)), rng.below(30), 0.3, 0.05);
        const auto nbin = encode_nbin(matrix);
        if (encode_nbin(decode_nbin(nbin)) != nbin || decode_nbin(nbin) != matrix) return "nbin fixture " + std::to_string(i);
    }
    return {};
}

std::string replay_determinism() {
    testutil::TempDir dir;
    const auto root = dir.path() / "work";
    const auto first = testutil::run_pipeline(root);
    if (first.failed_step >= 0) return "first run failed:\n" + first.log;
    std::filesystem::remove_all(root);
    const auto second = testutil::run_pipeline(root);
    if (second.failed_step >= 0) return "second run failed:\n" + second.log;
    std::size_t manifests = 0;
    for (const auto& [path, hash] : first.file_hashes) manifests += path.ends_with(".manifest.json");
    if (manifests < 8) return "expected a manifest per step, found " + std::to_string(manifests);
    for (const auto& [path, hash] : first.file_hashes) {
        auto it = second.file_hashes.find(path);
        if (it == second.file_hashes.end() || it->second != hash) return "artifact differs: " + path;
    }
    return require(first.file_hashes.size() == second.file_hashes.size(), "different artifact sets");
}

// Greedy rule restated independently of the library.
std::vector<DescriptorCluster> reference_clusters(const std::vector<std::string>& names, const EmbeddingTable& t,
                                                  double threshold, std::size_t min_size) {
    std::set<std::string> sorted(names.begin(), names.end());
    std::map<std::string, std::set<std::string>> nb;
    for (const auto& a : sorted)
        for (const auto& b : sorted) {
            const auto va = t.at(a), vb = t.at(b);
            double d = 0;
            for (std::size_t k = 0; k < va.size(); ++k) d += double(va[k]) * double(vb[k]);
            if (a == b || d >= threshold) nb[a].insert(b);
        }
    std::vector<std::pair<long, std::string>> order;
    for (const auto& [s, n] : nb)
        if (n.size() >= min_size) order.emplace_back(-static_cast<long>(n.size()), s);
    std::sort(order.begin(), order.end());
    std::set<std::string> claimed;
    std::vector<DescriptorCluster> out;
    for (const auto& [neg, seed] : order) {
        std::vector<std::string> fresh;
        for (const auto& m : nb[seed])
            if (!claimed.contains(m)) fresh.push_back(m);
        if (fresh.size() < min_size) continue;
        claimed.insert(fresh.begin(), fresh.end());
        out.push_back({fresh, seed, false, std::nullopt});
    }
    for (const auto& s : sorted)
        if (!claimed.contains(s)) out.push_back({{s}, std::nullopt, true, std::nullopt});
    return out;
}

std::string clustering() {
    SplitMix64 rng(5);
    const std::uint32_t dim = 8;
    for (int i = 0; i < 50; ++i) {
        const std::size_t centers = 1 + rng.below(6);
        std::vector<std::vector<double>> c(centers, std::vector<double>(dim));
        for (auto& v : c)
            for (auto& x : v) x = rng.gaussian();
        EmbeddingTable t(dim);
        std::vector<std::string> names;
        const double spread = 0.1 + 0.05 * static_cast<double>(rng.below(6));
        for (std::size_t s = 0; s < 50; ++s) {
            const auto& base = c[rng.below(centers)];
            double bn = 0;
            for (double x : base) bn += x * x;
            std::vector<double> v(dim);
            double n = 0;
            for (std::size_t k = 0; k < dim; ++k) {
                v[k] = base[k] / std::sqrt(bn) + spread * rng.gaussian();
                n += v[k] * v[k];
            }
            std::vector<float> f;
            for (double x : v) f.push_back(static_cast<float>(x / std::sqrt(n)));
            names.push_back("s" + std::to_string(100 + s));
            t.add(names.back(), f);
        }
        const double threshold = 0.6 + 0.05 * static_cast<double>(rng.below(7));
        const std::size_t min_size = 1 + rng.below(6);
        const auto got = cluster_descriptors(names, t, {threshold, min_size});
        if (got != reference_clusters(names, t, threshold, min_size)) return "instance " + std::to_string(i) + " differs";
        for (const auto& cl : got) {
            if (!cl.seed) continue;
            for (const auto& m : cl.members)
                if (m != *cl.seed && dot(t.at(m), t.at(*cl.seed)) < threshold)
                    return "member below threshold in instance " + std::to_string(i);
        }
    }
    return {};
}

} // namespace

int main() {
    const std::vector<Check> checks = {
        {"exemplar sizing: ceil(1% of 43,474) = 435", 5, exemplar_sizing},
        {"attribution equals oracle on 50 synth instances, t = 0..1 step 0.05", 30, oracle_equivalence},
        {"planted truth end to end: P@1 >= 0.95, mean J(t=0.35) >= 0.9", 60, planted_end_to_end},
        {"threshold monotonicity over the full grid", 60, monotonicity},
        {"metric identities: P@K/R@K on 1,000 instances, kappa 0.4, phi -1/+1", 5, metric_identities},
        {"NACT, NEMB and nbin round trips are byte-exact on 100 fixtures", 10, serialization},
        {"replay pipeline run twice gives identical artifacts and manifests", 60, replay_determinism},
        {"clustering equals the greedy reference on 50 instances of 50 vectors", 60, clustering},
    };
    int failed = 0;
    for (const auto& c : checks) {
        const auto start = std::chrono::steady_clock::now();
        std::string why;
        try {
            why = c.body();
        } catch (const std::exception& e) {
            why = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (why.empty() && secs > c.budget_s) why = "over the time budget";
        char timing[64];
        std::snprintf(timing, sizeof timing, "%.2fs / %.0fs", secs, c.budget_s);
        std::cout << (why.empty() ? "[PASS] " : "[FAIL] ") << c.name << " (" << timing << ")";
        if (!why.empty()) std::cout << ": " << why;
        std::cout << "\n";
        failed += !why.empty();
    }
    std::cout << (checks.size() - static_cast<std::size_t>(failed)) << "/" << checks.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
