#pragma once

// Planted-ground-truth fixtures. Every neuron is tied to one descriptor; its
// activation on a sentence is signal_strength when the sentence carries that
// descriptor, plus Gaussian noise. Everything is a pure function of the spec.
//
// Random stream (one SplitMix64 seeded with spec.seed), consumed in order:
//   1. sentence labels, sentence by sentence: one below(n_descriptors) draw in
//      exclusive mode, otherwise one uniform() per descriptor (< density => on)
//   2. calibration activations, row-major [sentence][flat neuron], one
//      gaussian() each
//   3. validation activations, same layout
// The calibration/validation split is split_corpus(corpus, spec.seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuronscope/activation_store.hpp"
#include "neuronscope/attribution.hpp"
#include "neuronscope/binary_matrix.hpp"
#include "neuronscope/corpus.hpp"
#include "neuronscope/descriptor_pipeline.hpp"
#include "neuronscope/embedding.hpp"
#include "neuronscope/error.hpp"
#include "neuronscope/evaluation.hpp"
#include "neuronscope/llm_gateway.hpp"
#include "neuronscope/prng.hpp"
#include "neuronscope/prompt.hpp"

namespace neuronscope::synth {

struct SynthSpec {
    std::size_t n_sentences = 2000;
    std::size_t n_descriptors = 8;
    std::uint32_t layers = 4;
    std::uint32_t neurons_per_layer = 16;
    std::vector<std::size_t> planted;  // descriptor index per flat neuron; empty = ordinal mod n_descriptors
    double signal_strength = 3.0;
    double noise_std = 1.0;
    double descriptor_density = 0.05;
    bool exclusive = false;  // exactly one descriptor per sentence
    std::uint64_t seed = 20240101;
    std::string model_id = "synthkit-encoder";

    std::size_t neurons() const { return std::size_t{layers} * neurons_per_layer; }

    std::size_t planted_for(std::size_t ordinal) const {
        return planted.empty() ? ordinal % n_descriptors : planted[ordinal];
    }

    void validate() const {
        if (n_sentences == 0) throw UsageError("synth: n_sentences must be positive");
        if (n_descriptors == 0) throw UsageError("synth: n_descriptors must be positive");
        if (layers == 0 || neurons_per_layer == 0) throw UsageError("synth: layers and neurons_per_layer must be positive");
        if (!planted.empty() && planted.size() != neurons())
            throw UsageError("synth: planted needs one entry per neuron (" + std::to_string(neurons()) + ")");
        for (auto p : planted)
            if (p >= n_descriptors) throw UsageError("synth: planted descriptor index out of range");
        if (!(noise_std >= 0.0) || !std::isfinite(signal_strength))
            throw UsageError("synth: noise_std must be >= 0 and signal finite");
        if (!(descriptor_density >= 0.0 && descriptor_density <= 1.0))
            throw UsageError("synth: descriptor_density must be in [0, 1]");
    }
};

inline nlohmann::json to_json(const SynthSpec& s) {
    nlohmann::json j = {{"n_sentences", s.n_sentences},
                        {"n_descriptors", s.n_descriptors},
                        {"layers", s.layers},
                        {"neurons_per_layer", s.neurons_per_layer},
                        {"signal_strength", s.signal_strength},
                        {"noise_std", s.noise_std},
                        {"descriptor_density", s.descriptor_density},
                        {"exclusive", s.exclusive},
                        {"seed", s.seed},
                        {"model_id", s.model_id}};
    if (!s.planted.empty()) j["planted"] = s.planted;
    return j;
}

inline SynthSpec spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
        s.n_sentences = j.value("n_sentences", s.n_sentences);
        s.n_descriptors = j.value("n_descriptors", s.n_descriptors);
        s.layers = j.value("layers", s.layers);
        s.neurons_per_layer = j.value("neurons_per_layer", s.neurons_per_layer);
        s.signal_strength = j.value("signal_strength", s.signal_strength);
        s.noise_std = j.value("noise_std", s.noise_std);
        s.descriptor_density = j.value("descriptor_density", s.descriptor_density);
        s.exclusive = j.value("exclusive", s.exclusive);
        s.seed = j.value("seed", s.seed);
        s.model_id = j.value("model_id", s.model_id);
        if (j.contains("planted")) s.planted = j["planted"].get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

// Readable stand-ins for review descriptors; beyond the list, "Aspect <n>".
inline std::vector<std::string> descriptor_labels(std::size_t n) {
    static const std::vector<std::string> base = {
        "Color",         "Price",        "Size / Fit",      "Taste / Flavor",   "Durability",  "Texture",
        "Audio / Sound", "Fabric",       "Beverage",        "Graphics",         "Grip",        "Controls",
        "Gift / Present", "Battery / Charging", "Healthy / Fresh", "Protection / Safety", "Skincare / Haircare",
        "Cleaning / Maintenance", "Design / Looks / Appearance", "Packaging / Shipping / Delivery",
        "Smell / Fragrance / Odor", "Age Appropriate / For Kids", "Negative"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(i < base.size() ? base[i] : "Aspect " + std::to_string(i + 1));
    return out;
}

struct SynthData {
    SynthSpec spec;
    Corpus corpus;  // split assigned
    DescriptorSet descriptors;
    BinaryMatrix matrix;
    ActivationStore calibration;
    ActivationStore validation;
    GroundTruth truth;
};

namespace detail {
inline std::string lower(std::string s) {
    for (auto& c : s) c = text::ascii_lower(c);
    return s;
}
} // namespace detail

inline SynthData generate(const SynthSpec& spec) {
    spec.validate();
    SplitMix64 rng(spec.seed);
    SynthData out;
    out.spec = spec;
    out.descriptors.descriptors = descriptor_labels(spec.n_descriptors);
    const auto& labels = out.descriptors.descriptors;

    std::vector<std::vector<bool>> carries(spec.n_sentences, std::vector<bool>(spec.n_descriptors, false));
    for (std::size_t i = 0; i < spec.n_sentences; ++i) {
        if (spec.exclusive) {
            carries[i][rng.below(spec.n_descriptors)] = true;
        } else {
            for (std::size_t d = 0; d < spec.n_descriptors; ++d) carries[i][d] = rng.uniform() < spec.descriptor_density;
        }
        std::vector<std::string> mentioned;
        for (std::size_t d = 0; d < spec.n_descriptors; ++d)
            if (carries[i][d]) mentioned.push_back(detail::lower(labels[d]));
        const std::string about =
            mentioned.empty() ? "nothing in particular" : neuronscope::detail::join(mentioned, " and ");
        out.corpus.sentences.push_back(Sentence::make(
            "s" + std::to_string(i),
            "Synthetic review number " + std::to_string(i) + " where the customer mostly talks about " + about + "."));
    }
    out.corpus.provenance.source_path = "synthkit";
    out.corpus = split_corpus(out.corpus, spec.seed);

    out.matrix = BinaryMatrix(out.corpus.ids(), labels);
    for (std::size_t i = 0; i < spec.n_sentences; ++i)
        for (std::size_t d = 0; d < spec.n_descriptors; ++d)
            if (carries[i][d]) out.matrix.set(i, d, true);

    const std::size_t width = spec.neurons();
    auto make_store = [&](Split which) {
        std::vector<std::string> ids;
        std::vector<float> values;
        for (std::size_t i = 0; i < spec.n_sentences; ++i) {
            if ((*out.corpus.split_of)[i] != which) continue;
            ids.push_back(out.corpus.sentences[i].id);
            for (std::size_t n = 0; n < width; ++n) {
                const double signal = carries[i][spec.planted_for(n)] ? spec.signal_strength : 0.0;
                values.push_back(static_cast<float>(signal + spec.noise_std * rng.gaussian()));
            }
        }
        return ActivationStore(spec.model_id, spec.layers, spec.neurons_per_layer, std::move(ids), std::move(values));
    };
    out.calibration = make_store(Split::calibration);
    out.validation = make_store(Split::validation);

    for (std::size_t n = 0; n < width; ++n)
        out.truth.labels[out.calibration.neuron_at(n)] = {labels[spec.planted_for(n)]};
    return out;
}

// ---------------------------------------------------------------------------
// Brute-force attribution for tests: full sort of (activation, position)
// pairs, linear id lookup, per-column counting. Shares no code with
// attribution.hpp beyond the result type.

inline std::vector<NeuronDescriptors> oracle_attribution(const BinaryMatrix& matrix, const ActivationStore& store,
                                                         double k_percent, double t) {
    if (store.empty()) throw DataError("oracle: store is empty");
    if (!(k_percent > 0.0 && k_percent <= 100.0)) throw UsageError("oracle: k_percent must be in (0, 100]");
    if (!(t >= 0.0 && t <= 1.0)) throw UsageError("oracle: threshold must be in [0, 1]");
    const std::size_t n = store.size();
    std::size_t m = 0;
    while (static_cast<double>(m) * 100.0 < k_percent * static_cast<double>(n)) ++m;
    m = std::min(std::max<std::size_t>(m, 1), n);

    std::vector<NeuronDescriptors> out;
    for (std::uint32_t layer = 0; layer < store.layers(); ++layer) {
        for (std::uint32_t index = 0; index < store.neurons_per_layer(); ++index) {
            const NeuronId neuron{layer, index};
            std::vector<std::pair<float, std::size_t>> all;
            for (std::size_t s = 0; s < n; ++s) all.emplace_back(store.row(s)[std::size_t{layer} * store.neurons_per_layer() + index], s);
            std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            NeuronDescriptors nd;
            nd.neuron = neuron;
            nd.threshold = t;
            nd.exemplar_size = m;
            for (std::size_t c = 0; c < matrix.cols(); ++c) {
                std::size_t count = 0;
                for (std::size_t e = 0; e < m; ++e) {
                    const auto& id = store.sentence_ids()[all[e].second];
                    std::size_t row = matrix.rows();
                    for (std::size_t r = 0; r < matrix.rows(); ++r)
                        if (matrix.sentence_ids()[r] == id) {
                            row = r;
                            break;
                        }
                    if (row == matrix.rows()) throw DataError("oracle: exemplar '" + id + "' missing from matrix");
                    if (matrix.get(row, c)) ++count;
                }
                nd.ranked.emplace_back(matrix.descriptors()[c], static_cast<double>(count) / static_cast<double>(m));
            }
            std::sort(nd.ranked.begin(), nd.ranked.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            for (const auto& [label, f] : nd.ranked)
                if (f > t) nd.assigned.push_back(label);
            out.push_back(std::move(nd));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// On-disk bundle: the same artifacts the real pipeline produces, plus replay
// fixtures so gen-descriptors and annotate run offline against them.

inline constexpr std::string_view generator_model = "synth-generator";
inline constexpr std::string_view annotator_model = "synth-annotator";
inline constexpr std::uint32_t embedding_dim = 32;
inline constexpr int generator_max_tokens = 64;
inline constexpr int annotator_max_tokens = 4;
inline constexpr std::string_view fixture_timestamp = "1970-01-01T00:00:00Z";

// Surface variants an LLM might produce for a descriptor.
inline std::vector<std::string> surface_variants(const std::string& label) {
    std::string base = detail::lower(label);
    for (auto& c : base)
        if (c == '/') c = ' ';
    base = text::collapse_lower(base);
    return {base, base + " aspect", "mentions " + base, base + " comments"};
}

struct BundleInfo {
    std::filesystem::path dir;
    std::size_t fixtures = 0;
};

inline BundleInfo write_bundle(const SynthData& data, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& spec = data.spec;
    const auto& labels = data.descriptors.descriptors;
    BundleInfo info{dir, 0};

    binio::atomic_write(dir / "spec.json", to_json(spec).dump(2) + "\n");
    Corpus raw = data.corpus;
    raw.split_of.reset();
    write_corpus(raw, dir / "corpus_raw.jsonl");
    write_corpus(data.corpus, dir / "corpus.jsonl");
    binio::atomic_write(dir / "descriptors.json", descriptor_set_to_json(data.descriptors).dump(2) + "\n");
    write_matrix(data.matrix, dir / "matrix.nbin");
    write_store(data.calibration, dir / "cal.nact");
    write_store(data.validation, dir / "val.nact");
    binio::atomic_write(dir / "truth.json", truth_to_json(data.truth).dump(2) + "\n");

    // Prompt templates and the one-shot example.
    PromptTemplate p1{std::string(default_p1_template), std::nullopt};
    const OneShotExample example{"The pink shade is lovely and the price was fair.", {"pink color", "fair price"}};
    p1.example = example;
    const PromptTemplate p2{std::string(default_p2_template), std::nullopt};
    binio::atomic_write(dir / "p1.txt", std::string(default_p1_template));
    binio::atomic_write(dir / "p2.txt", std::string(default_p2_template));
    binio::atomic_write(dir / "example.json",
                        nlohmann::json{{"sentence", example.sentence}, {"descriptors", example.descriptors}}.dump(2) + "\n");

    // Embeddings: one random direction per descriptor, variants perturbed
    // around it. Drawn from a stream independent of the main one.
    SplitMix64 erng(spec.seed ^ 0xA5A5A5A5DEADBEEFULL);
    EmbeddingTable table(embedding_dim);
    nlohmann::json label_map = nlohmann::json::object();
    auto unit = [](std::vector<double> v) {
        double n = 0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        std::vector<float> out;
        for (double x : v) out.push_back(static_cast<float>(x / n));
        return out;
    };
    for (const auto& label : labels) {
        std::vector<double> dirv(embedding_dim);
        for (auto& x : dirv) x = erng.gaussian();
        const auto center = unit(dirv);
        for (const auto& surface : surface_variants(label)) {
            std::vector<double> v(embedding_dim);
            for (std::size_t i = 0; i < embedding_dim; ++i) v[i] = center[i] + 0.04 * erng.gaussian();
            table.add(surface, unit(v));
            label_map[surface] = label;
        }
    }
    write_embeddings(table, dir / "embeddings.nemb");
    binio::atomic_write(dir / "label_map.json", label_map.dump(2) + "\n");

    // Replay fixtures: descriptor lists for p1, Yes/No for every p2 cell.
    const auto fixtures = dir / "fixtures";
    for (std::size_t i = 0; i < data.corpus.size(); ++i) {
        const auto& s = data.corpus.sentences[i];
        std::vector<std::string> surfaces;
        for (std::size_t d = 0; d < labels.size(); ++d)
            if (data.matrix.get(i, d)) {
                const auto variants = surface_variants(labels[d]);
                surfaces.push_back(variants[i % variants.size()]);
            }
        const LlmRequest req{std::string(generator_model), render_p1(p1, s.text), generator_max_tokens, 0.0};
        LlmResponse resp;
        resp.text = quoted_list(surfaces);
        resp.empty = resp.text.empty();
        Gateway::store_entry(fixtures, req, resp, std::string(fixture_timestamp));
        ++info.fixtures;
        for (std::size_t d = 0; d < labels.size(); ++d) {
            const LlmRequest q{std::string(annotator_model), render_p2(p2, labels[d], s.text), annotator_max_tokens, 0.0};
            Gateway::store_entry(fixtures, q, LlmResponse{data.matrix.get(i, d) ? "Yes" : "No", ResponseSource::replay, false},
                                 std::string(fixture_timestamp));
            ++info.fixtures;
        }
    }
    return info;
}

} // namespace neuronscope::synth
