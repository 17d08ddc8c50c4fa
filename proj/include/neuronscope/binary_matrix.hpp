#pragma once

// The sentence x descriptor yes/no matrix and its on-disk form (.nbin):
// a single JSON header line followed by row-major packed bits, 8 cells per
// byte, least-significant bit first, each row zero-padded to a whole byte.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuronscope/binio.hpp"
#include "neuronscope/error.hpp"
#include "neuronscope/hash.hpp"

namespace neuronscope {

class BinaryMatrix {
public:
    using CellIndex = std::pair<std::size_t, std::size_t>;  // (row, column)

    BinaryMatrix() = default;

    BinaryMatrix(std::vector<std::string> sentence_ids, std::vector<std::string> descriptors)
        : sentence_ids_(std::move(sentence_ids)),
          descriptors_(std::move(descriptors)),
          bits_(sentence_ids_.size() * descriptors_.size(), 0) {
        for (std::size_t r = 0; r < sentence_ids_.size(); ++r)
            if (!row_of_.emplace(sentence_ids_[r], r).second)
                throw DataError("matrix: duplicate sentence id '" + sentence_ids_[r] + "'");
        std::set<std::string_view> seen;
        for (const auto& d : descriptors_)
            if (!seen.insert(d).second) throw DataError("matrix: duplicate descriptor '" + d + "'");
    }

    std::size_t rows() const { return sentence_ids_.size(); }
    std::size_t cols() const { return descriptors_.size(); }
    const std::vector<std::string>& sentence_ids() const { return sentence_ids_; }
    const std::vector<std::string>& descriptors() const { return descriptors_; }
    const std::set<CellIndex>& unresolved() const { return unresolved_; }

    bool get(std::size_t r, std::size_t c) const { return bits_[r * cols() + c] != 0; }

    void set(std::size_t r, std::size_t c, bool v) {
        bits_[r * cols() + c] = v ? 1 : 0;
        if (v) unresolved_.erase({r, c});
    }

    // Unresolved cells always carry a zero bit.
    void mark_unresolved(std::size_t r, std::size_t c) {
        bits_[r * cols() + c] = 0;
        unresolved_.insert({r, c});
    }

    std::optional<std::size_t> row_of(std::string_view id) const {
        auto it = row_of_.find(std::string(id));
        if (it == row_of_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t require_row(std::string_view id) const {
        auto r = row_of(id);
        if (!r) throw DataError("matrix: sentence id '" + std::string(id) + "' not present");
        return *r;
    }

    std::optional<std::size_t> column_of(std::string_view label) const {
        auto it = std::find(descriptors_.begin(), descriptors_.end(), label);
        if (it == descriptors_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - descriptors_.begin());
    }

    std::size_t column_count(std::size_t c) const {
        std::size_t n = 0;
        for (std::size_t r = 0; r < rows(); ++r) n += get(r, c);
        return n;
    }

    friend bool operator==(const BinaryMatrix& a, const BinaryMatrix& b) {
        return a.sentence_ids_ == b.sentence_ids_ && a.descriptors_ == b.descriptors_ && a.bits_ == b.bits_ &&
               a.unresolved_ == b.unresolved_;
    }

private:
    std::vector<std::string> sentence_ids_;
    std::vector<std::string> descriptors_;
    std::vector<std::uint8_t> bits_;
    std::set<CellIndex> unresolved_;
    std::unordered_map<std::string, std::size_t> row_of_;
};

inline std::string encode_nbin(const BinaryMatrix& m) {
    nlohmann::json unresolved = nlohmann::json::array();
    for (auto [r, c] : m.unresolved()) unresolved.push_back({m.sentence_ids()[r], m.descriptors()[c]});
    const nlohmann::json header = {
        {"format", "nbin"},      {"version", 1},
        {"rows", m.rows()},      {"cols", m.cols()},
        {"sentence_ids", m.sentence_ids()}, {"descriptors", m.descriptors()},
        {"unresolved", unresolved},
    };
    std::string out = header.dump();
    out.push_back('\n');
    const std::size_t row_bytes = (m.cols() + 7) / 8;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::string row(row_bytes, '\0');
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (m.get(r, c)) row[c / 8] = static_cast<char>(static_cast<unsigned char>(row[c / 8]) | (1u << (c % 8)));
        out += row;
    }
    return out;
}

inline BinaryMatrix decode_nbin(std::string_view bytes) {
    const auto nl = bytes.find('\n');
    if (nl == std::string_view::npos) throw DataError("nbin: missing header line");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("nbin: corrupted header: ") + e.what());
    }
    std::vector<std::string> ids, descriptors;
    std::size_t rows = 0, cols = 0;
    try {
        if (header.at("format") != "nbin") throw DataError("nbin: wrong format tag");
        if (header.at("version") != 1) throw DataError("nbin: unsupported version");
        ids = header.at("sentence_ids").get<std::vector<std::string>>();
        descriptors = header.at("descriptors").get<std::vector<std::string>>();
        rows = header.at("rows").get<std::size_t>();
        cols = header.at("cols").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("nbin: corrupted header: ") + e.what());
    }
    if (rows != ids.size() || cols != descriptors.size())
        throw DataError("nbin: dimension mismatch between header counts and id/descriptor lists");
    const std::size_t row_bytes = (cols + 7) / 8;
    const auto payload = bytes.substr(nl + 1);
    if (payload.size() != rows * row_bytes)
        throw DataError("nbin: dimension mismatch, payload has " + std::to_string(payload.size()) + " bytes, expected " +
                        std::to_string(rows * row_bytes));

    BinaryMatrix m(std::move(ids), std::move(descriptors));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t b = 0; b < row_bytes; ++b) {
            const auto byte = static_cast<unsigned char>(payload[r * row_bytes + b]);
            for (unsigned bit = 0; bit < 8; ++bit) {
                const std::size_t c = b * 8 + bit;
                const bool on = (byte >> bit) & 1u;
                if (c >= cols) {
                    if (on) throw DataError("nbin: nonzero padding bit in row " + std::to_string(r));
                    continue;
                }
                if (on) m.set(r, c, true);
            }
        }
    }
    std::vector<std::pair<std::string, std::string>> cells;
    try {
        cells = header.at("unresolved").get<std::vector<std::pair<std::string, std::string>>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("nbin: corrupted unresolved list: ") + e.what());
    }
    for (const auto& [sid, label] : cells) {
        const auto r = m.row_of(sid);
        const auto c = m.column_of(label);
        if (!r || !c) throw DataError("nbin: unresolved cell (" + sid + ", " + label + ") outside matrix");
        if (m.get(*r, *c)) throw DataError("nbin: unresolved cell (" + sid + ", " + label + ") has bit 1");
        m.mark_unresolved(*r, *c);
    }
    return m;
}

inline void write_matrix(const BinaryMatrix& m, const std::filesystem::path& path) {
    binio::atomic_write(path, encode_nbin(m));
}

inline BinaryMatrix read_matrix(const std::filesystem::path& path) { return decode_nbin(read_file_bytes(path.string())); }

namespace detail {
inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}
} // namespace detail

// Inspection export: header row "sentence_id,<descriptors...>", then 0/1 rows.
inline std::string matrix_to_csv(const BinaryMatrix& m) {
    std::string out = "sentence_id";
    for (const auto& d : m.descriptors()) out += "," + detail::csv_field(d);
    out += "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out += detail::csv_field(m.sentence_ids()[r]);
        for (std::size_t c = 0; c < m.cols(); ++c) out += m.get(r, c) ? ",1" : ",0";
        out += "\n";
    }
    return out;
}

} // namespace neuronscope
