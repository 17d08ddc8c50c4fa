#pragma once

// Per-sentence [CLS] activations for every neuron of an L x N encoder, and the
// NACT file format:
//
//   "NACT"                magic, 4 bytes
//   u32 version           = 1
//   u32 + bytes           model_id (UTF-8)
//   u32 layers, u32 neurons_per_layer
//   u64 sentence_count
//   (u32 + bytes) * count sentence ids
//   f32 * count * L * N   row-major [sentence][layer * N + index]
//
// All integers and floats little-endian.

#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "neuronscope/binio.hpp"
#include "neuronscope/error.hpp"
#include "neuronscope/hash.hpp"

namespace neuronscope {

struct NeuronId {
    std::uint32_t layer = 0;
    std::uint32_t index = 0;

    friend auto operator<=>(const NeuronId&, const NeuronId&) = default;

    std::string str() const { return "(" + std::to_string(layer) + "," + std::to_string(index) + ")"; }
};

class ActivationStore {
public:
    static constexpr std::uint32_t format_version = 1;

    ActivationStore() = default;

    ActivationStore(std::string model_id, std::uint32_t layers, std::uint32_t neurons_per_layer,
                    std::vector<std::string> sentence_ids, std::vector<float> values)
        : model_id_(std::move(model_id)),
          layers_(layers),
          neurons_per_layer_(neurons_per_layer),
          sentence_ids_(std::move(sentence_ids)),
          values_(std::move(values)) {
        validate();
    }

    const std::string& model_id() const { return model_id_; }
    std::uint32_t layers() const { return layers_; }
    std::uint32_t neurons_per_layer() const { return neurons_per_layer_; }
    std::size_t width() const { return std::size_t{layers_} * neurons_per_layer_; }
    std::size_t size() const { return sentence_ids_.size(); }
    bool empty() const { return sentence_ids_.empty(); }
    const std::vector<std::string>& sentence_ids() const { return sentence_ids_; }
    std::span<const float> values() const { return values_; }

    std::span<const float> row(std::size_t sentence) const { return {values_.data() + sentence * width(), width()}; }

    float at(std::size_t sentence, NeuronId n) const { return values_[sentence * width() + ordinal(n)]; }

    bool contains(NeuronId n) const { return n.layer < layers_ && n.index < neurons_per_layer_; }

    void require(NeuronId n) const {
        if (!contains(n))
            throw DataError("neuron " + n.str() + " out of bounds for store with L=" + std::to_string(layers_) +
                            ", N=" + std::to_string(neurons_per_layer_));
    }

    std::size_t ordinal(NeuronId n) const { return std::size_t{n.layer} * neurons_per_layer_ + n.index; }

    NeuronId neuron_at(std::size_t ordinal) const {
        if (ordinal >= width()) throw DataError("flat neuron ordinal " + std::to_string(ordinal) + " out of bounds");
        return {static_cast<std::uint32_t>(ordinal / neurons_per_layer_),
                static_cast<std::uint32_t>(ordinal % neurons_per_layer_)};
    }

    std::vector<NeuronId> all_neurons() const {
        std::vector<NeuronId> out;
        out.reserve(width());
        for (std::size_t i = 0; i < width(); ++i) out.push_back(neuron_at(i));
        return out;
    }

    friend bool operator==(const ActivationStore&, const ActivationStore&) = default;

private:
    void validate() const {
        if (layers_ == 0 || neurons_per_layer_ == 0) throw DataError("store: L and N must be positive");
        if (values_.size() != sentence_ids_.size() * width())
            throw DataError("store: value count " + std::to_string(values_.size()) + " does not match " +
                            std::to_string(sentence_ids_.size()) + " rows x " + std::to_string(width()));
        std::unordered_set<std::string_view> seen;
        for (const auto& id : sentence_ids_)
            if (!seen.insert(id).second) throw DataError("store: duplicate sentence id '" + id + "'");
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!std::isfinite(values_[i]))
                throw DataError("store: non-finite activation at sentence " + std::to_string(i / width()) +
                                ", neuron ordinal " + std::to_string(i % width()));
    }

    std::string model_id_;
    std::uint32_t layers_ = 1;
    std::uint32_t neurons_per_layer_ = 1;
    std::vector<std::string> sentence_ids_;
    std::vector<float> values_;
};

struct Activation {
    std::string_view sentence_id;
    float value;
    friend bool operator==(const Activation&, const Activation&) = default;
};

// One entry per sentence in store order.
inline std::vector<Activation> neuron_column(const ActivationStore& store, NeuronId neuron) {
    store.require(neuron);
    std::vector<Activation> out;
    out.reserve(store.size());
    for (std::size_t s = 0; s < store.size(); ++s) out.push_back({store.sentence_ids()[s], store.at(s, neuron)});
    return out;
}

inline std::string encode_nact(const ActivationStore& store) {
    binio::Writer w;
    w.put_raw("NACT");
    w.put(ActivationStore::format_version);
    w.put_string(store.model_id());
    w.put(store.layers());
    w.put(store.neurons_per_layer());
    w.put(static_cast<std::uint64_t>(store.size()));
    for (const auto& id : store.sentence_ids()) w.put_string(id);
    for (float v : store.values()) {
        if (!std::isfinite(v)) throw DataError("store: refusing to write non-finite activation");
        w.put(v);
    }
    return w.take();
}

inline ActivationStore decode_nact(std::string_view bytes) {
    binio::Reader r(bytes, "nact");
    if (r.remaining() < 4 || r.get_raw(4) != "NACT") throw DataError("nact: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != ActivationStore::format_version) throw DataError("nact: unsupported version " + std::to_string(version));
    auto model_id = r.get_string();
    const auto layers = r.get<std::uint32_t>();
    const auto per_layer = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    if (layers == 0 || per_layer == 0) throw DataError("nact: L and N must be positive");
    std::vector<std::string> ids;
    // Each id costs at least 4 bytes, which bounds a corrupt count.
    if (count > r.remaining() / 4) throw DataError("nact: truncated sentence-id table");
    ids.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) ids.push_back(r.get_string());
    const std::size_t n_values = static_cast<std::size_t>(count) * layers * per_layer;
    if (r.remaining() < n_values * sizeof(float))
        throw DataError("nact: truncated payload (have " + std::to_string(r.remaining()) + " bytes, need " +
                        std::to_string(n_values * sizeof(float)) + ")");
    if (r.remaining() > n_values * sizeof(float)) throw DataError("nact: trailing bytes after payload");
    std::vector<float> values(n_values);
    for (auto& v : values) {
        v = r.get<float>();
        if (!std::isfinite(v)) throw DataError("nact: non-finite value in payload");
    }
    return ActivationStore(std::move(model_id), layers, per_layer, std::move(ids), std::move(values));
}

inline void write_store(const ActivationStore& store, const std::filesystem::path& path) {
    binio::atomic_write(path, encode_nact(store));
}

inline ActivationStore read_store(const std::filesystem::path& path) {
    return decode_nact(read_file_bytes(path.string()));
}

} // namespace neuronscope
