#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuronscope/binary_matrix.hpp"
#include "neuronscope/binio.hpp"
#include "neuronscope/error.hpp"
#include "neuronscope/prng.hpp"
#include "neuronscope/text.hpp"

namespace neuronscope {

enum class Split : std::uint8_t { calibration, validation };

inline std::string_view to_string(Split s) { return s == Split::calibration ? "calibration" : "validation"; }

inline Split parse_split(std::string_view s) {
    if (s == "calibration") return Split::calibration;
    if (s == "validation") return Split::validation;
    throw DataError("unknown split '" + std::string(s) + "'");
}

struct Sentence {
    std::string id;
    std::string text;
    std::optional<std::string> category;
    std::size_t word_count = 0;

    static Sentence make(std::string id, std::string text, std::optional<std::string> category = std::nullopt) {
        Sentence s{std::move(id), std::move(text), std::move(category), 0};
        s.word_count = text::word_count(s.text);
        return s;
    }

    friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct FilterParams {
    std::size_t min_words = 10;
    std::size_t max_words = 200;
    bool english_only = false;
    // A sentence passes the English heuristic when at least this share of its
    // alphabetic characters are ASCII letters.
    double min_ascii_letter_ratio = 0.9;
};

struct Provenance {
    std::string source_path;
    std::optional<FilterParams> filter;
    std::optional<std::uint64_t> split_seed;
};

struct Corpus {
    std::vector<Sentence> sentences;
    // Aligned with sentences when present.
    std::optional<std::vector<Split>> split_of;
    Provenance provenance;

    std::size_t size() const { return sentences.size(); }

    // Sub-corpus of one split, in corpus order; requires split_of.
    Corpus subset(Split which) const {
        if (!split_of) throw DataError("corpus has no split assignment");
        Corpus out;
        out.provenance = provenance;
        for (std::size_t i = 0; i < sentences.size(); ++i)
            if ((*split_of)[i] == which) out.sentences.push_back(sentences[i]);
        return out;
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(sentences.size());
        for (const auto& s : sentences) out.push_back(s.id);
        return out;
    }
};

inline Corpus parse_corpus_jsonl(std::istream& in, std::string source = "<stream>") {
    Corpus corpus;
    corpus.provenance.source_path = std::move(source);
    std::unordered_set<std::string> seen;
    std::vector<Split> splits;
    std::size_t with_split = 0;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (text::trim(line).empty()) continue;
        const auto where = corpus.provenance.source_path + ":" + std::to_string(lineno);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw DataError(where + ": malformed JSON record");
        }
        if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() || !rec.contains("text") ||
            !rec["text"].is_string())
            throw DataError(where + ": record needs string fields \"id\" and \"text\"");
        std::optional<std::string> category;
        if (rec.contains("category")) {
            if (!rec["category"].is_string()) throw DataError(where + ": \"category\" must be a string");
            category = rec["category"].get<std::string>();
        }
        auto s = Sentence::make(rec["id"].get<std::string>(), rec["text"].get<std::string>(), std::move(category));
        if (!seen.insert(s.id).second) throw DataError(where + ": duplicate id '" + s.id + "'");
        if (rec.contains("split")) {
            if (!rec["split"].is_string()) throw DataError(where + ": \"split\" must be a string");
            splits.push_back(parse_split(rec["split"].get<std::string>()));
            ++with_split;
        }
        corpus.sentences.push_back(std::move(s));
    }
    if (with_split != 0) {
        if (with_split != corpus.sentences.size())
            throw DataError(corpus.provenance.source_path + ": \"split\" present on some records but not all");
        corpus.split_of = std::move(splits);
    }
    return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus: " + path.string());
    return parse_corpus_jsonl(in, path.string());
}

inline std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
        const auto& s = corpus.sentences[i];
        nlohmann::ordered_json rec = {{"id", s.id}, {"text", s.text}};
        if (s.category) rec["category"] = *s.category;
        if (corpus.split_of) rec["split"] = to_string((*corpus.split_of)[i]);
        out += rec.dump();
        out += '\n';
    }
    return out;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    binio::atomic_write(path, corpus_to_jsonl(corpus));
}

inline bool passes_filter(const Sentence& s, const FilterParams& p) {
    if (s.word_count < p.min_words || s.word_count > p.max_words) return false;
    if (p.english_only && text::ascii_letter_ratio(s.text) < p.min_ascii_letter_ratio) return false;
    return true;
}

inline Corpus filter_corpus(const Corpus& corpus, const FilterParams& params = {}) {
    if (params.min_words > params.max_words) throw UsageError("filter: min_words exceeds max_words");
    Corpus out;
    out.provenance = corpus.provenance;
    out.provenance.filter = params;
    if (corpus.split_of) out.split_of.emplace();
    for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
        if (!passes_filter(corpus.sentences[i], params)) continue;
        out.sentences.push_back(corpus.sentences[i]);
        if (corpus.split_of) out.split_of->push_back((*corpus.split_of)[i]);
    }
    return out;
}

// Seeded uniform shuffle of positions; the first ceil(n/2) shuffled positions
// go to calibration.
inline Corpus split_corpus(const Corpus& corpus, std::uint64_t seed) {
    if (corpus.sentences.empty()) throw DataError("split: corpus is empty");
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(seed);
    shuffle(std::span<std::size_t>(order), rng);
    const std::size_t n_cal = (corpus.size() + 1) / 2;
    std::vector<Split> split(corpus.size(), Split::validation);
    for (std::size_t i = 0; i < n_cal; ++i) split[order[i]] = Split::calibration;
    Corpus out = corpus;
    out.split_of = std::move(split);
    out.provenance.split_seed = seed;
    return out;
}

struct SplitCounts {
    std::string descriptor;
    std::size_t calibration = 0;
    std::size_t validation = 0;
    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

// Positive-sentence counts per descriptor in each split, in matrix column order.
inline std::vector<SplitCounts> split_distribution(const Corpus& corpus, const BinaryMatrix& matrix) {
    if (!corpus.split_of) throw DataError("split_distribution: corpus has no split assignment");
    std::vector<SplitCounts> out;
    for (const auto& d : matrix.descriptors()) out.push_back({d, 0, 0});
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& id = corpus.sentences[i].id;
        const auto r = matrix.row_of(id);
        if (!r) throw DataError("split_distribution: sentence id '" + id + "' missing from matrix");
        const bool cal = (*corpus.split_of)[i] == Split::calibration;
        for (std::size_t c = 0; c < matrix.cols(); ++c) {
            if (!matrix.get(*r, c)) continue;
            (cal ? out[c].calibration : out[c].validation) += 1;
        }
    }
    return out;
}

} // namespace neuronscope
