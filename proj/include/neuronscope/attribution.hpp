#pragma once

// Neuron -> descriptor attribution. For a neuron, the exemplar set is the top
// k% of sentences by activation; f(c) is the fraction of exemplar sentences
// annotated with descriptor c; the neuron is assigned {c | f(c) > t}.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuronscope/activation_store.hpp"
#include "neuronscope/binary_matrix.hpp"
#include "neuronscope/error.hpp"
#include "neuronscope/parallel.hpp"

namespace neuronscope {

// ceil(k% of n), computed as ceil(k * n / 100) to keep integral cases exact.
inline std::size_t exemplar_count(std::size_t n, double k_percent) {
    if (!(k_percent > 0.0 && k_percent <= 100.0)) throw UsageError("k_percent must be in (0, 100]");
    if (n == 0) return 0;
    const auto m = static_cast<std::size_t>(std::ceil(k_percent * static_cast<double>(n) / 100.0));
    return std::clamp<std::size_t>(m, 1, n);
}

struct ExemplarSet {
    NeuronId neuron;
    double k_percent = 1.0;
    std::vector<std::size_t> rows;        // store positions, activation-descending
    std::vector<std::string> ranked_ids;  // same order
};

// Ties in activation go to the earlier store position.
inline ExemplarSet exemplar_set(const ActivationStore& store, NeuronId neuron, double k_percent) {
    if (store.empty()) throw DataError("exemplar_set: store is empty");
    store.require(neuron);
    const std::size_t m = exemplar_count(store.size(), k_percent);
    const std::size_t ord = store.ordinal(neuron);
    const std::size_t width = store.width();
    const auto values = store.values();
    std::vector<std::size_t> idx(store.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          const float va = values[a * width + ord], vb = values[b * width + ord];
                          return va > vb || (va == vb && a < b);
                      });
    idx.resize(m);
    ExemplarSet out{neuron, k_percent, std::move(idx), {}};
    out.ranked_ids.reserve(m);
    for (auto r : out.rows) out.ranked_ids.push_back(store.sentence_ids()[r]);
    return out;
}

struct DescriptorFrequencies {
    NeuronId neuron;
    std::size_t exemplar_size = 0;
    std::vector<std::string> labels;   // matrix column order
    std::vector<std::size_t> counts;   // positives among exemplar rows

    double f(std::size_t c) const {
        return exemplar_size == 0 ? 0.0 : static_cast<double>(counts[c]) / static_cast<double>(exemplar_size);
    }

    std::map<std::string, double> entries() const {
        std::map<std::string, double> out;
        for (std::size_t c = 0; c < labels.size(); ++c) out.emplace(labels[c], f(c));
        return out;
    }
};

inline DescriptorFrequencies descriptor_frequencies(const ExemplarSet& ex, const BinaryMatrix& matrix) {
    DescriptorFrequencies out{ex.neuron, ex.ranked_ids.size(), matrix.descriptors(),
                              std::vector<std::size_t>(matrix.cols(), 0)};
    for (const auto& id : ex.ranked_ids) {
        const auto r = matrix.row_of(id);
        if (!r) throw DataError("descriptor_frequencies: exemplar '" + id + "' missing from matrix");
        for (std::size_t c = 0; c < matrix.cols(); ++c) out.counts[c] += matrix.get(*r, c);
    }
    return out;
}

using RankedLabels = std::vector<std::pair<std::string, double>>;

// f descending, label ascending on ties.
inline RankedLabels rank_labels(const DescriptorFrequencies& freqs) {
    RankedLabels out;
    out.reserve(freqs.labels.size());
    for (std::size_t c = 0; c < freqs.labels.size(); ++c) out.emplace_back(freqs.labels[c], freqs.f(c));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.second > b.second || (a.second == b.second && a.first < b.first);
    });
    return out;
}

// Labels with f > t, in ranked order.
inline std::vector<std::string> assigned_at(const RankedLabels& ranked, double t) {
    std::vector<std::string> out;
    for (const auto& [label, f] : ranked)
        if (f > t) out.push_back(label);
    return out;
}

struct NeuronDescriptors {
    NeuronId neuron;
    double threshold = 0.0;
    std::size_t exemplar_size = 0;
    std::vector<std::string> assigned;  // ranked order
    RankedLabels ranked;                // every label, zeros included

    std::set<std::string> assigned_set() const { return {assigned.begin(), assigned.end()}; }

    friend bool operator==(const NeuronDescriptors&, const NeuronDescriptors&) = default;
};

inline NeuronDescriptors assign_descriptors(const DescriptorFrequencies& freqs, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw UsageError("threshold must be in [0, 1]");
    NeuronDescriptors out{freqs.neuron, t, freqs.exemplar_size, {}, rank_labels(freqs)};
    out.assigned = assigned_at(out.ranked, t);
    return out;
}

// First K labels of the ranking that have f > 0.
inline std::vector<std::string> top_k_descriptors(const RankedLabels& ranked, std::size_t k) {
    if (k < 1) throw UsageError("top_k: K must be >= 1");
    std::vector<std::string> out;
    for (const auto& [label, f] : ranked) {
        if (out.size() == k || !(f > 0.0)) break;
        out.push_back(label);
    }
    return out;
}

inline std::vector<std::string> top_k_descriptors(const DescriptorFrequencies& freqs, std::size_t k) {
    return top_k_descriptors(rank_labels(freqs), k);
}

using InverseMap = std::map<std::string, std::set<NeuronId>>;

inline InverseMap invert_mapping(const std::vector<NeuronDescriptors>& all) {
    InverseMap out;
    std::set<NeuronId> seen;
    for (const auto& nd : all) {
        if (!seen.insert(nd.neuron).second) throw DataError("invert_mapping: duplicate neuron " + nd.neuron.str());
        for (const auto& label : nd.assigned) out[label].insert(nd.neuron);
    }
    return out;
}

struct AttributionParams {
    double k_percent = 1.0;
    double threshold = 0.35;
    std::size_t jobs = 1;
};

// Attribution for many neurons; output order follows `neurons`.
inline std::vector<NeuronDescriptors> attribute(const ActivationStore& store, const BinaryMatrix& matrix,
                                                const std::vector<NeuronId>& neurons, const AttributionParams& p) {
    if (!(p.threshold >= 0.0 && p.threshold <= 1.0)) throw UsageError("threshold must be in [0, 1]");
    exemplar_count(1, p.k_percent);  // validates k
    for (const auto& n : neurons) store.require(n);
    std::vector<NeuronDescriptors> out(neurons.size());
    parallel_for(neurons.size(), p.jobs, [&](std::size_t i) {
        const auto ex = exemplar_set(store, neurons[i], p.k_percent);
        out[i] = assign_descriptors(descriptor_frequencies(ex, matrix), p.threshold);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Report I/O: JSON lines
// {layer, index, threshold, exemplar_size, assigned: [...], ranked: [[label, f], ...]}

inline nlohmann::ordered_json to_json(const NeuronDescriptors& nd) {
    nlohmann::ordered_json ranked = nlohmann::ordered_json::array();
    for (const auto& [label, f] : nd.ranked) ranked.push_back({label, f});
    return {{"layer", nd.neuron.layer},        {"index", nd.neuron.index},  {"threshold", nd.threshold},
            {"exemplar_size", nd.exemplar_size}, {"assigned", nd.assigned}, {"ranked", ranked}};
}

inline std::string attribution_to_jsonl(const std::vector<NeuronDescriptors>& all) {
    std::string out;
    for (const auto& nd : all) out += to_json(nd).dump() + "\n";
    return out;
}

inline std::vector<NeuronDescriptors> parse_attribution_jsonl(std::string_view data) {
    std::vector<NeuronDescriptors> out;
    std::size_t lineno = 0, start = 0;
    while (start < data.size()) {
        auto end = data.find('\n', start);
        if (end == std::string_view::npos) end = data.size();
        const auto line = data.substr(start, end - start);
        start = end + 1;
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            NeuronDescriptors nd;
            nd.neuron = {j.at("layer").get<std::uint32_t>(), j.at("index").get<std::uint32_t>()};
            nd.threshold = j.at("threshold").get<double>();
            nd.exemplar_size = j.value("exemplar_size", std::size_t{0});
            nd.assigned = j.at("assigned").get<std::vector<std::string>>();
            for (const auto& e : j.at("ranked")) nd.ranked.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
            out.push_back(std::move(nd));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("attribution report line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// {label: [[layer, index], ...]}
inline nlohmann::json inverse_to_json(const InverseMap& inv) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [label, neurons] : inv) {
        auto arr = nlohmann::json::array();
        for (const auto& n : neurons) arr.push_back({n.layer, n.index});
        j[label] = std::move(arr);
    }
    return j;
}

inline InverseMap inverse_from_json(const nlohmann::json& j) {
    InverseMap out;
    try {
        for (const auto& [label, arr] : j.items()) {
            auto& s = out[label];
            for (const auto& e : arr) s.insert({e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("inverse map: ") + e.what());
    }
    return out;
}

} // namespace neuronscope
