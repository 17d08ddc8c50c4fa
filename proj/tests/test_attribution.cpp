#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "neuronscope/attribution.hpp"
#include "test_util.hpp"

using namespace neuronscope;

namespace {

DescriptorFrequencies freqs(std::size_t size, std::vector<std::pair<std::string, std::size_t>> counts) {
    DescriptorFrequencies f;
    f.neuron = {0, 0};
    f.exemplar_size = size;
    for (auto& [l, c] : counts) {
        f.labels.push_back(l);
        f.counts.push_back(c);
    }
    return f;
}

ActivationStore column_store(const std::vector<float>& column) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < column.size(); ++i) ids.push_back("row" + std::to_string(i));
    return {"m", 1, 1, ids, column};
}

// Sort every row, take the first m.
std::vector<std::size_t> sort_all(const ActivationStore& s, NeuronId n, std::size_t m) {
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.at(a, n) > s.at(b, n); });
    idx.resize(m);
    return idx;
}

} // namespace

TEST(Exemplars, SizingMatchesHalfCorpus) {
    EXPECT_EQ(exemplar_count(43474, 1.0), 435u);
    EXPECT_EQ(exemplar_count(100, 1.0), 1u);
    EXPECT_EQ(exemplar_count(50, 1.0), 1u);
    EXPECT_EQ(exemplar_count(200, 1.0), 2u);
    EXPECT_EQ(exemplar_count(201, 1.0), 3u);
    EXPECT_EQ(exemplar_count(10, 100.0), 10u);
    EXPECT_EQ(exemplar_count(0, 1.0), 0u);
    EXPECT_THROW(exemplar_count(10, 0.0), UsageError);
    EXPECT_THROW(exemplar_count(10, 100.5), UsageError);

    SplitMix64 rng(31);
    std::vector<float> col(43474);
    for (auto& v : col) v = static_cast<float>(rng.gaussian());
    const auto ex = exemplar_set(column_store(col), {0, 0}, 1.0);
    EXPECT_EQ(ex.ranked_ids.size(), 435u);
}

TEST(Exemplars, EqualActivationsPickFirstRow) {
    const auto ex = exemplar_set(column_store(std::vector<float>(100, 0.5f)), {0, 0}, 1.0);
    EXPECT_EQ(ex.ranked_ids, std::vector<std::string>{"row0"});
    const auto five = exemplar_set(column_store(std::vector<float>(100, 0.5f)), {0, 0}, 5.0);
    EXPECT_EQ(five.rows, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Exemplars, MatchesSortAll) {
    SplitMix64 rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        // Coarse values force plenty of ties.
        std::vector<float> col(500);
        for (auto& v : col) v = static_cast<float>(rng.below(trial % 2 ? 20 : 100000)) - 10.0f;
        const auto store = column_store(col);
        const double k = 0.5 + rng.below(40);
        const auto ex = exemplar_set(store, {0, 0}, k);
        EXPECT_EQ(ex.rows, sort_all(store, {0, 0}, ex.rows.size()));
        EXPECT_EQ(ex.rows.size(), static_cast<std::size_t>(std::ceil(k * 500 / 100)));
    }
}

TEST(Exemplars, Errors) {
    const ActivationStore empty("m", 1, 1, {}, {});
    EXPECT_THROW(exemplar_set(empty, {0, 0}, 1.0), DataError);
    const auto s = column_store({1, 2});
    EXPECT_THROW(exemplar_set(s, {0, 1}, 1.0), DataError);
    EXPECT_THROW(exemplar_set(s, {1, 0}, 1.0), DataError);
    EXPECT_THROW(exemplar_set(s, {0, 0}, 0.0), UsageError);
}

TEST(Exemplars, InvariantUnderPositiveAffineMap) {
    SplitMix64 rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<float> col(300), scaled(300);
        for (std::size_t i = 0; i < col.size(); ++i) {
            col[i] = static_cast<float>(rng.below(64)) / 4.0f;  // exact under 2a+3
            scaled[i] = 2.0f * col[i] + 3.0f;
        }
        EXPECT_EQ(exemplar_set(column_store(col), {0, 0}, 5.0).ranked_ids,
                  exemplar_set(column_store(scaled), {0, 0}, 5.0).ranked_ids);
    }
}

TEST(Frequencies, AllAndNone) {
    BinaryMatrix m(testutil::ids_of(4, "row"), {"Color", "Price"});
    for (std::size_t r = 0; r < 4; ++r) m.set(r, 0, true);
    const auto ex = exemplar_set(column_store({4, 3, 2, 1}), {0, 0}, 50.0);
    const auto f = descriptor_frequencies(ex, m);
    EXPECT_EQ(f.f(0), 1.0);
    EXPECT_EQ(f.f(1), 0.0);
    EXPECT_EQ(f.entries(), (std::map<std::string, double>{{"Color", 1.0}, {"Price", 0.0}}));

    EXPECT_THROW(descriptor_frequencies(ex, BinaryMatrix({"row0"}, {"Color"})), DataError);
}

TEST(Frequencies, MatchColumnTally) {
    SplitMix64 rng(34);
    const auto ids = testutil::ids_of(43500, "row");
    auto m = testutil::random_matrix(rng, ids, 23, 0.25);
    std::vector<float> col(ids.size());
    for (auto& v : col) v = static_cast<float>(rng.gaussian());
    const auto store = column_store(col);
    const auto ex = exemplar_set(store, {0, 0}, 1.0);
    ASSERT_EQ(ex.rows.size(), 435u);
    const auto f = descriptor_frequencies(ex, m);
    for (std::size_t c = 0; c < 23; ++c) {
        std::size_t tally = 0;
        for (const auto& id : ex.ranked_ids) tally += m.get(std::stoul(id.substr(3)), c) ? 1 : 0;
        EXPECT_EQ(f.counts[c], tally);
        EXPECT_DOUBLE_EQ(f.f(c), static_cast<double>(tally) / 435.0);
    }
}

TEST(Assign, StrictThreshold) {
    const auto f = freqs(20, {{"Color", 10}, {"Price", 7}, {"Smell", 2}});
    EXPECT_EQ(f.f(1), 0.35);
    EXPECT_EQ(assign_descriptors(f, 0.35).assigned, std::vector<std::string>{"Color"});
    EXPECT_EQ(assign_descriptors(f, 0.0).assigned, (std::vector<std::string>{"Color", "Price", "Smell"}));
    EXPECT_TRUE(assign_descriptors(f, 1.0).assigned.empty());
    const auto nd = assign_descriptors(f, 1.0);
    EXPECT_EQ(nd.ranked.size(), 3u);
    EXPECT_THROW(assign_descriptors(f, 1.5), UsageError);
    EXPECT_THROW(assign_descriptors(f, -0.1), UsageError);

    const auto with_zero = freqs(20, {{"Color", 10}, {"Gift", 0}});
    EXPECT_EQ(assign_descriptors(with_zero, 0.0).assigned, std::vector<std::string>{"Color"});
}

TEST(TopK, Examples) {
    const auto f = freqs(10, {{"Smell", 2}, {"Price", 4}, {"Color", 6}});
    EXPECT_EQ(top_k_descriptors(f, 2), (std::vector<std::string>{"Color", "Price"}));
    const auto tie = freqs(10, {{"Price", 5}, {"Color", 5}});
    EXPECT_EQ(top_k_descriptors(tie, 1), std::vector<std::string>{"Color"});
    const auto few = freqs(10, {{"A", 3}, {"B", 0}, {"C", 1}});
    EXPECT_EQ(top_k_descriptors(few, 5), (std::vector<std::string>{"A", "C"}));
    EXPECT_THROW(top_k_descriptors(few, 0), UsageError);
}

TEST(Invert, Examples) {
    std::vector<NeuronDescriptors> all(2);
    all[0].neuron = {0, 1};
    all[0].assigned = {"Color"};
    all[1].neuron = {2, 3};
    all[1].assigned = {"Color", "Price"};
    const auto inv = invert_mapping(all);
    EXPECT_EQ(inv, (InverseMap{{"Color", {{0, 1}, {2, 3}}}, {"Price", {{2, 3}}}}));
    EXPECT_EQ(inverse_from_json(inverse_to_json(inv)), inv);

    for (auto& nd : all) nd.assigned.clear();
    EXPECT_TRUE(invert_mapping(all).empty());
    all[1].neuron = all[0].neuron;
    EXPECT_THROW(invert_mapping(all), DataError);
}

TEST(Invert, MembershipOracle) {
    SplitMix64 rng(35);
    const std::vector<std::string> labels = {"A", "B", "C", "D", "E"};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<NeuronDescriptors> all;
        for (std::uint32_t i = 0; i < 30; ++i) {
            NeuronDescriptors nd;
            nd.neuron = {i / 8, i % 8};
            for (const auto& l : labels)
                if (rng.below(3) == 0) nd.assigned.push_back(l);
            all.push_back(nd);
        }
        const auto inv = invert_mapping(all);
        for (const auto& nd : all)
            for (const auto& l : labels) {
                const bool in_inverse = inv.contains(l) && inv.at(l).contains(nd.neuron);
                const bool assigned = std::find(nd.assigned.begin(), nd.assigned.end(), l) != nd.assigned.end();
                EXPECT_EQ(in_inverse, assigned);
            }
    }
}

TEST(Attribution, PropertiesOnRandomData) {
    SplitMix64 rng(36);
    for (int trial = 0; trial < 10; ++trial) {
        const auto store = testutil::random_store(rng, 300, 2, 6);
        const auto m = testutil::random_matrix(rng, store.sentence_ids(), 7, 0.3);
        const auto neurons = store.all_neurons();
        const auto base = attribute(store, m, neurons, {3.0, 0.0, 2});
        for (const auto& nd : base) {
            const auto ex_size = nd.exemplar_size;
            EXPECT_EQ(ex_size, 9u);
            std::size_t positive = 0;
            for (const auto& [label, f] : nd.ranked) {
                // f lies on the grid {0, 1/|E|, ..., 1}.
                const double scaled = f * static_cast<double>(ex_size);
                EXPECT_EQ(scaled, std::round(scaled));
                EXPECT_GE(f, 0.0);
                EXPECT_LE(f, 1.0);
                positive += f > 0;
            }
            EXPECT_LE(positive, m.cols());
            for (std::size_t k = 1; k < 7; ++k) {
                const auto a = top_k_descriptors(nd.ranked, k), b = top_k_descriptors(nd.ranked, k + 1);
                EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
            }
        }
        // Assigned sets shrink as t grows.
        auto prev = attribute(store, m, neurons, {3.0, 0.0, 3});
        for (int i = 1; i <= 20; ++i) {
            const auto cur = attribute(store, m, neurons, {3.0, i / 20.0, 3});
            for (std::size_t n = 0; n < cur.size(); ++n) {
                const auto a = prev[n].assigned_set(), b = cur[n].assigned_set();
                EXPECT_TRUE(std::includes(a.begin(), a.end(), b.begin(), b.end()));
            }
            prev = cur;
        }
    }
}

TEST(Attribution, ParallelMatchesSerialAndRoundTrips) {
    SplitMix64 rng(37);
    const auto store = testutil::random_store(rng, 200, 3, 5);
    const auto m = testutil::random_matrix(rng, store.sentence_ids(), 5, 0.4);
    const auto serial = attribute(store, m, store.all_neurons(), {2.0, 0.35, 1});
    const auto parallel = attribute(store, m, store.all_neurons(), {2.0, 0.35, 4});
    EXPECT_EQ(serial, parallel);
    EXPECT_EQ(parse_attribution_jsonl(attribution_to_jsonl(serial)), serial);
    EXPECT_THROW(parse_attribution_jsonl("{\"layer\": 1}\n"), DataError);
    EXPECT_THROW(attribute(store, m, {{9, 9}}, {}), DataError);
    EXPECT_THROW(attribute(store, m, {{0, 0}}, {1.0, 2.0, 1}), UsageError);
}
