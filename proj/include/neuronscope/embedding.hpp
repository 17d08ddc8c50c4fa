#pragma once

// Unit-normalized string embeddings and the NEMB file format:
//   "NEMB", u32 version = 1, u32 dim, u64 count,
//   (u32 + UTF-8 bytes) * count, f32 * count * dim.  Little-endian.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "neuronscope/binio.hpp"
#include "neuronscope/error.hpp"
#include "neuronscope/hash.hpp"

namespace neuronscope {

class EmbeddingTable {
public:
    static constexpr std::uint32_t format_version = 1;
    static constexpr double norm_tolerance = 1e-4;

    explicit EmbeddingTable(std::uint32_t dim) : dim_(dim) {
        if (dim == 0) throw DataError("embedding: dim must be positive");
    }

    void add(std::string surface, std::span<const float> vec) {
        if (vec.size() != dim_)
            throw DataError("embedding: vector for '" + surface + "' has length " + std::to_string(vec.size()) +
                            ", expected " + std::to_string(dim_));
        double sq = 0;
        for (float v : vec) {
            if (!std::isfinite(v)) throw DataError("embedding: non-finite component for '" + surface + "'");
            sq += double{v} * v;
        }
        if (std::abs(std::sqrt(sq) - 1.0) > norm_tolerance)
            throw DataError("embedding: vector for '" + surface + "' is not unit-normalized (norm " +
                            std::to_string(std::sqrt(sq)) + ")");
        if (!index_.emplace(surface, surfaces_.size()).second)
            throw DataError("embedding: duplicate surface '" + surface + "'");
        surfaces_.push_back(std::move(surface));
        data_.insert(data_.end(), vec.begin(), vec.end());
    }

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return surfaces_.size(); }
    const std::vector<std::string>& surfaces() const { return surfaces_; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

    bool contains(std::string_view s) const { return index_.contains(std::string(s)); }

    std::span<const float> at(std::string_view s) const {
        auto it = index_.find(std::string(s));
        if (it == index_.end()) throw DataError("embedding: no row for surface '" + std::string(s) + "'");
        return row(it->second);
    }

    friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
        return a.dim_ == b.dim_ && a.surfaces_ == b.surfaces_ && a.data_ == b.data_;
    }

private:
    std::uint32_t dim_;
    std::vector<std::string> surfaces_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline double dot(std::span<const float> a, std::span<const float> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += double{a[i]} * b[i];
    return s;
}

inline std::string encode_nemb(const EmbeddingTable& t) {
    binio::Writer w;
    w.put_raw("NEMB");
    w.put(EmbeddingTable::format_version);
    w.put(t.dim());
    w.put(static_cast<std::uint64_t>(t.size()));
    for (const auto& s : t.surfaces()) w.put_string(s);
    for (std::size_t i = 0; i < t.size(); ++i)
        for (float v : t.row(i)) w.put(v);
    return w.take();
}

inline EmbeddingTable decode_nemb(std::string_view bytes) {
    binio::Reader r(bytes, "nemb");
    if (r.remaining() < 4 || r.get_raw(4) != "NEMB") throw DataError("nemb: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != EmbeddingTable::format_version) throw DataError("nemb: unsupported version " + std::to_string(version));
    const auto dim = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    if (count > r.remaining() / 4) throw DataError("nemb: truncated string table");
    std::vector<std::string> surfaces;
    surfaces.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) surfaces.push_back(r.get_string());
    if (r.remaining() != count * dim * sizeof(float))
        throw DataError("nemb: payload size " + std::to_string(r.remaining()) + " does not match " +
                        std::to_string(count) + " x " + std::to_string(dim) + " floats");
    EmbeddingTable t(dim);
    std::vector<float> vec(dim);
    for (auto& s : surfaces) {
        for (auto& v : vec) v = r.get<float>();
        t.add(std::move(s), vec);
    }
    return t;
}

inline void write_embeddings(const EmbeddingTable& t, const std::filesystem::path& path) {
    binio::atomic_write(path, encode_nemb(t));
}

inline EmbeddingTable read_embeddings(const std::filesystem::path& path) {
    return decode_nemb(read_file_bytes(path.string()));
}

} // namespace neuronscope
