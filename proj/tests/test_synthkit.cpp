#include <gtest/gtest.h>

#include "neuronscope/attribution.hpp"
#include "neuronscope/descriptor_pipeline.hpp"
#include "neuronscope/synthkit.hpp"
#include "test_util.hpp"

using namespace neuronscope;

namespace {
synth::SynthSpec small_spec() {
    synth::SynthSpec s;
    s.n_sentences = 600;
    s.n_descriptors = 5;
    s.layers = 2;
    s.neurons_per_layer = 5;
    s.descriptor_density = 0.15;
    s.seed = 7;
    return s;
}
} // namespace

TEST(Synth, ShapesAndSplit) {
    const auto d = synth::generate(small_spec());
    EXPECT_EQ(d.corpus.size(), 600u);
    EXPECT_EQ(d.matrix.rows(), 600u);
    EXPECT_EQ(d.matrix.cols(), 5u);
    EXPECT_EQ(d.calibration.size(), 300u);
    EXPECT_EQ(d.validation.size(), 300u);
    EXPECT_EQ(d.calibration.width(), 10u);
    EXPECT_EQ(d.truth.labels.size(), 10u);
    EXPECT_EQ(d.truth.labels.at({1, 2}), std::vector<std::string>{d.descriptors.descriptors[7 % 5]});
    std::set<std::string> ids(d.calibration.sentence_ids().begin(), d.calibration.sentence_ids().end());
    for (const auto& id : d.validation.sentence_ids()) EXPECT_FALSE(ids.contains(id));
}

TEST(Synth, SeedDeterminesEverything) {
    const auto a = synth::generate(small_spec()), b = synth::generate(small_spec());
    EXPECT_EQ(encode_nact(a.calibration), encode_nact(b.calibration));
    EXPECT_EQ(encode_nact(a.validation), encode_nact(b.validation));
    EXPECT_EQ(encode_nbin(a.matrix), encode_nbin(b.matrix));
    EXPECT_EQ(corpus_to_jsonl(a.corpus), corpus_to_jsonl(b.corpus));
    auto other = small_spec();
    other.seed = 8;
    EXPECT_NE(encode_nact(synth::generate(other).calibration), encode_nact(a.calibration));

    testutil::TempDir x, y;
    synth::write_bundle(a, x.path());
    synth::write_bundle(b, y.path());
    for (const char* f : {"embeddings.nemb", "matrix.nbin", "cal.nact", "truth.json", "label_map.json"})
        EXPECT_EQ(read_file_bytes((x.path() / f).string()), read_file_bytes((y.path() / f).string())) << f;
}

TEST(Synth, NoiselessPlantedDescriptorHasFullFrequency) {
    auto spec = small_spec();
    spec.noise_std = 0.0;
    const auto d = synth::generate(spec);
    const auto out = attribute(d.calibration, d.matrix, d.calibration.all_neurons(), {1.0, 0.35, 1});
    for (const auto& nd : out) {
        const auto planted = d.truth.labels.at(nd.neuron).front();
        const auto it = std::find_if(nd.ranked.begin(), nd.ranked.end(), [&](auto& e) { return e.first == planted; });
        ASSERT_NE(it, nd.ranked.end());
        EXPECT_EQ(it->second, 1.0);
    }
}

TEST(Synth, ExclusiveNoiselessAssignsExactlyPlanted) {
    auto spec = small_spec();
    spec.noise_std = 0.0;
    spec.exclusive = true;
    const auto d = synth::generate(spec);
    for (std::size_t r = 0; r < d.matrix.rows(); ++r) {
        std::size_t ones = 0;
        for (std::size_t c = 0; c < d.matrix.cols(); ++c) ones += d.matrix.get(r, c);
        EXPECT_EQ(ones, 1u);
    }
    for (double t : {0.0, 0.35, 0.9}) {
        const auto out = attribute(d.validation, d.matrix, d.validation.all_neurons(), {1.0, t, 1});
        for (const auto& nd : out) EXPECT_EQ(nd.assigned, d.truth.labels.at(nd.neuron));
    }
}

TEST(Synth, DegenerateSpecsRejected) {
    auto s = small_spec();
    s.n_sentences = 0;
    EXPECT_THROW(synth::generate(s), UsageError);
    s = small_spec();
    s.n_descriptors = 0;
    EXPECT_THROW(synth::generate(s), UsageError);
    s = small_spec();
    s.planted = {1, 2};
    EXPECT_THROW(synth::generate(s), UsageError);
    s = small_spec();
    s.noise_std = -1;
    EXPECT_THROW(synth::generate(s), UsageError);
    EXPECT_EQ(synth::to_json(synth::spec_from_json(synth::to_json(small_spec()))), synth::to_json(small_spec()));
}

TEST(Synth, OracleAgreesWithAttribution) {
    SplitMix64 rng(51);
    for (int trial = 0; trial < 5; ++trial) {
        auto spec = small_spec();
        spec.seed = rng.next();
        spec.n_sentences = 100 + rng.below(300);
        const auto d = synth::generate(spec);
        for (double t : {0.0, 0.1, 0.35, 1.0}) {
            const auto got = attribute(d.calibration, d.matrix, d.calibration.all_neurons(), {2.0, t, 2});
            EXPECT_EQ(got, synth::oracle_attribution(d.matrix, d.calibration, 2.0, t));
        }
    }
}

TEST(Synth, BundleEmbeddingsClusterByLabel) {
    const auto d = synth::generate(small_spec());
    testutil::TempDir dir;
    const auto info = synth::write_bundle(d, dir.path());
    EXPECT_EQ(info.fixtures, 600u * (1 + 5));
    const auto table = read_embeddings(dir.path() / "embeddings.nemb");
    const auto clusters = cluster_descriptors(table.surfaces(), table, {0.75, 4});
    ASSERT_EQ(clusters.size(), 5u);
    std::vector<DescriptorCluster> cs = clusters;
    const auto labeled = assign_representatives(cs, nlohmann::json::parse(read_file_bytes((dir.path() / "label_map.json").string())));
    std::set<std::string> got(labeled.set.descriptors.begin(), labeled.set.descriptors.end());
    EXPECT_EQ(got, std::set<std::string>(d.descriptors.descriptors.begin(), d.descriptors.descriptors.end()));
}
