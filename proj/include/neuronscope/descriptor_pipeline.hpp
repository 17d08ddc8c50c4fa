#pragma once

// From raw sentences to the final descriptor inventory:
// prompt LLMs for candidate phrases, cluster the phrases by embedding
// similarity, attach human-chosen labels, drop blacklisted labels.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuronscope/binio.hpp"
#include "neuronscope/corpus.hpp"
#include "neuronscope/embedding.hpp"
#include "neuronscope/error.hpp"
#include "neuronscope/llm_gateway.hpp"
#include "neuronscope/prompt.hpp"
#include "neuronscope/text.hpp"

namespace neuronscope {

// Lowercase, trim, collapse whitespace, strip surrounding quotes.
inline std::string normalize_surface(std::string_view raw) {
    std::string s = text::collapse_lower(raw);
    while (s.size() >= 2 && ((s.front() == '\'' && s.back() == '\'') || (s.front() == '"' && s.back() == '"')))
        s = text::collapse_lower(std::string_view(s).substr(1, s.size() - 2));
    if (s.size() == 1 && (s == "'" || s == "\"")) s.clear();
    return s;
}

struct ParsedDescriptors {
    std::vector<std::string> items;
    bool warning = false;  // unbalanced quotes or nothing recoverable from nonblank input
};

// Parses "'user experience', 'color', ..." style model output. Commas inside
// quoted items do not split; an optional surrounding [...] is ignored.
inline ParsedDescriptors parse_descriptor_list(std::string_view raw) {
    ParsedDescriptors out;
    std::string_view s = text::trim(raw);
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = text::trim(s.substr(1, s.size() - 2));
    std::set<std::string> seen;
    auto emit = [&](std::string_view piece) {
        auto norm = normalize_surface(piece);
        if (norm.empty()) return;
        if (seen.insert(norm).second) out.items.push_back(std::move(norm));
    };

    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && text::is_space(s[i])) ++i;
        if (i >= s.size()) break;
        const char q = s[i];
        if (q == '\'' || q == '"') {
            // A closing quote is one followed by optional spaces and then a comma
            // or the end, so apostrophes inside the item survive.
            std::size_t close = std::string_view::npos;
            for (std::size_t j = i + 1; j < s.size(); ++j) {
                if (s[j] != q) continue;
                std::size_t k = j + 1;
                while (k < s.size() && text::is_space(s[k])) ++k;
                if (k == s.size() || s[k] == ',') {
                    close = j;
                    break;
                }
            }
            if (close == std::string_view::npos) {
                out.warning = true;
                emit(s.substr(i + 1));
                break;
            }
            emit(s.substr(i + 1, close - i - 1));
            i = close + 1;
            while (i < s.size() && s[i] != ',') ++i;
            ++i;
        } else {
            const auto comma = s.find(',', i);
            const auto end = comma == std::string_view::npos ? s.size() : comma;
            emit(s.substr(i, end - i));
            i = end + 1;
        }
    }
    if (out.items.empty() && !s.empty()) {
        bool only_separators = std::all_of(s.begin(), s.end(), [](char c) {
            return c == ',' || c == '\'' || c == '"' || text::is_space(c);
        });
        if (!only_separators) out.warning = true;
    }
    return out;
}

struct DescriptorCandidate {
    std::string surface;
    std::string source_model;
    std::string source_sentence_id;
    friend auto operator<=>(const DescriptorCandidate&, const DescriptorCandidate&) = default;
};

struct ModelTemplate {
    std::string model_id;
    PromptTemplate prompt;
};

struct CandidateRun {
    std::vector<DescriptorCandidate> candidates;  // sentence order, then model order, then answer order
    std::size_t requests = 0;
    std::vector<std::string> errors;              // "<sentence id> <model>: <message>"
    std::vector<std::string> warnings;
};

// One request per (sentence, model). The union over models keeps one record per
// (surface, model, sentence) so provenance survives.
inline CandidateRun generate_candidates(const Gateway& gateway, const Corpus& corpus,
                                        const std::vector<ModelTemplate>& models, std::size_t max_in_flight = 1,
                                        int max_output_tokens = 64) {
    if (corpus.sentences.empty()) throw DataError("generate_candidates: corpus is empty");
    std::vector<LlmRequest> reqs;
    reqs.reserve(corpus.size() * models.size());
    for (const auto& s : corpus.sentences)
        for (const auto& m : models) reqs.push_back({m.model_id, render_p1(m.prompt, s.text), max_output_tokens, 0.0});

    const auto results = gateway.request_batch(reqs, max_in_flight);
    CandidateRun run;
    run.requests = reqs.size();
    std::size_t k = 0;
    for (const auto& s : corpus.sentences) {
        for (const auto& m : models) {
            const auto& r = results[k++];
            if (!r.ok()) {
                run.errors.push_back(s.id + " " + m.model_id + ": " + r.error);
                continue;
            }
            auto parsed = parse_descriptor_list(r.response->text);
            if (parsed.warning) run.warnings.push_back(s.id + " " + m.model_id + ": unparseable descriptor list");
            for (auto& surface : parsed.items) run.candidates.push_back({std::move(surface), m.model_id, s.id});
        }
    }
    return run;
}

inline std::vector<std::string> unique_surfaces(const std::vector<DescriptorCandidate>& cands) {
    std::set<std::string> s;
    for (const auto& c : cands) s.insert(c.surface);
    return {s.begin(), s.end()};
}

inline std::string candidates_to_jsonl(const std::vector<DescriptorCandidate>& cands) {
    std::string out;
    for (const auto& c : cands) {
        nlohmann::ordered_json j = {
            {"surface", c.surface}, {"source_model", c.source_model}, {"source_sentence_id", c.source_sentence_id}};
        out += j.dump() + "\n";
    }
    return out;
}

inline std::vector<DescriptorCandidate> parse_candidates_jsonl(std::string_view data) {
    std::vector<DescriptorCandidate> out;
    std::size_t lineno = 0, start = 0;
    while (start < data.size()) {
        auto end = data.find('\n', start);
        if (end == std::string_view::npos) end = data.size();
        const auto line = data.substr(start, end - start);
        start = end + 1;
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            out.push_back({j.at("surface").get<std::string>(), j.at("source_model").get<std::string>(),
                           j.at("source_sentence_id").get<std::string>()});
        } catch (const nlohmann::json::exception&) {
            throw DataError("candidates line " + std::to_string(lineno) + ": malformed record");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Clustering

struct ClusterParams {
    double threshold = 0.75;
    std::size_t min_community_size = 10;
};

struct DescriptorCluster {
    std::vector<std::string> members;  // sorted
    std::optional<std::string> seed;   // absent for residual singletons
    bool residual = false;
    std::optional<std::string> representative;
    friend bool operator==(const DescriptorCluster&, const DescriptorCluster&) = default;
};

// Greedy community detection over cosine similarity (the rule used by
// sentence-transformers' community_detection):
//   neighborhood(s) = {u : cos(s, u) >= threshold}, always including s
//   seeds are surfaces whose neighborhood has >= min_community_size members,
//   visited by neighborhood size descending, then surface ascending
//   a seed claims its not-yet-claimed neighbors if at least
//   min_community_size of them remain
// Whatever is left unclaimed comes back as residual singletons, sorted.
inline std::vector<DescriptorCluster> cluster_descriptors(std::vector<std::string> surfaces,
                                                          const EmbeddingTable& embeddings,
                                                          const ClusterParams& params = {}) {
    if (!(params.threshold > 0.0 && params.threshold <= 1.0))
        throw UsageError("cluster: threshold must be in (0, 1]");
    if (params.min_community_size < 1) throw UsageError("cluster: min_community_size must be >= 1");
    std::sort(surfaces.begin(), surfaces.end());
    surfaces.erase(std::unique(surfaces.begin(), surfaces.end()), surfaces.end());
    const std::size_t n = surfaces.size();
    std::vector<std::span<const float>> vecs;
    vecs.reserve(n);
    for (const auto& s : surfaces) {
        if (!embeddings.contains(s)) throw DataError("cluster: missing embedding for surface '" + s + "'");
        vecs.push_back(embeddings.at(s));
    }

    std::vector<std::vector<std::size_t>> neighborhood(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i == j || dot(vecs[i], vecs[j]) >= params.threshold) neighborhood[i].push_back(j);

    std::vector<std::size_t> seeds;
    for (std::size_t i = 0; i < n; ++i)
        if (neighborhood[i].size() >= params.min_community_size) seeds.push_back(i);
    std::stable_sort(seeds.begin(), seeds.end(), [&](std::size_t a, std::size_t b) {
        return neighborhood[a].size() > neighborhood[b].size();
    });

    std::vector<bool> claimed(n, false);
    std::vector<DescriptorCluster> out;
    for (auto seed : seeds) {
        std::vector<std::size_t> fresh;
        for (auto j : neighborhood[seed])
            if (!claimed[j]) fresh.push_back(j);
        if (fresh.size() < params.min_community_size) continue;
        DescriptorCluster c;
        c.seed = surfaces[seed];
        for (auto j : fresh) {
            claimed[j] = true;
            c.members.push_back(surfaces[j]);
        }
        out.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!claimed[i]) out.push_back({{surfaces[i]}, std::nullopt, true, std::nullopt});
    return out;
}

inline nlohmann::json clusters_to_json(const std::vector<DescriptorCluster>& clusters) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const auto& c = clusters[i];
        nlohmann::json j = {{"index", i}, {"members", c.members}, {"residual", c.residual}};
        j["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
        if (c.representative) j["representative"] = *c.representative;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline std::vector<DescriptorCluster> clusters_from_json(const nlohmann::json& arr) {
    std::vector<DescriptorCluster> out;
    try {
        for (const auto& j : arr) {
            DescriptorCluster c;
            c.members = j.at("members").get<std::vector<std::string>>();
            if (c.members.empty()) throw DataError("clusters: empty cluster");
            c.residual = j.at("residual").get<bool>();
            if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::string>();
            if (j.contains("representative")) c.representative = j["representative"].get<std::string>();
            out.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("clusters: malformed file: ") + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Labels and blacklist

struct DescriptorSet {
    std::vector<std::string> descriptors;
    std::vector<std::string> blacklist_applied;
    std::map<std::string, std::vector<std::string>> members;  // label -> surfaces

    friend bool operator==(const DescriptorSet&, const DescriptorSet&) = default;
};

struct LabelResult {
    DescriptorSet set;
    std::vector<std::string> report;
};

namespace detail {
inline std::string join(const std::vector<std::string>& v, std::string_view sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}
} // namespace detail

// label_map keys are either a cluster's position in `clusters` (decimal) or
// any member surface. Clusters given the same label merge into one
// descriptor; label order follows first appearance.
inline LabelResult assign_representatives(std::vector<DescriptorCluster>& clusters, const nlohmann::json& label_map) {
    if (!label_map.is_object()) throw DataError("label map must be a JSON object");
    std::map<std::string, std::string> by_key;
    for (const auto& [k, v] : label_map.items()) {
        if (!v.is_string()) throw DataError("label map: value for '" + k + "' is not a string");
        auto label = std::string(text::trim(v.get<std::string>()));
        if (label.empty()) throw DataError("label map: empty label for '" + k + "'");
        by_key.emplace(k, std::move(label));
    }

    LabelResult out;
    std::vector<std::string> unlabeled;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        auto& c = clusters[i];
        std::optional<std::string> label;
        if (auto it = by_key.find(std::to_string(i)); it != by_key.end()) {
            label = it->second;
        } else {
            std::set<std::string> found;
            for (const auto& m : c.members)
                if (auto jt = by_key.find(m); jt != by_key.end()) found.insert(jt->second);
            if (found.size() > 1)
                throw DataError("label map: cluster " + std::to_string(i) + " members carry conflicting labels: " +
                                detail::join({found.begin(), found.end()}));
            if (found.size() == 1) label = *found.begin();
        }
        if (!label) {
            if (c.residual) {
                out.report.push_back("dropped unlabeled residual '" + c.members.front() + "'");
            } else {
                unlabeled.push_back("cluster " + std::to_string(i) + " {" + detail::join(c.members) + "}");
            }
            continue;
        }
        c.representative = *label;
        auto& members = out.set.members[*label];
        if (members.empty()) out.set.descriptors.push_back(*label);
        members.insert(members.end(), c.members.begin(), c.members.end());
        std::sort(members.begin(), members.end());
    }
    if (!unlabeled.empty())
        throw DataError("label map leaves " + std::to_string(unlabeled.size()) +
                        " non-residual cluster(s) unlabeled: " + detail::join(unlabeled, "; "));
    return out;
}

struct BlacklistResult {
    DescriptorSet set;
    std::vector<std::string> warnings;
};

inline BlacklistResult apply_blacklist(DescriptorSet set, const std::vector<std::string>& blacklist) {
    BlacklistResult out;
    for (const auto& label : blacklist) {
        auto it = std::find(set.descriptors.begin(), set.descriptors.end(), label);
        if (it == set.descriptors.end()) {
            out.warnings.push_back("blacklist entry '" + label + "' not in descriptor set");
            continue;
        }
        set.descriptors.erase(it);
        set.members.erase(label);
        set.blacklist_applied.push_back(label);
    }
    out.set = std::move(set);
    return out;
}

inline nlohmann::json descriptor_set_to_json(const DescriptorSet& s) {
    return {{"descriptors", s.descriptors}, {"blacklist_applied", s.blacklist_applied}, {"members", s.members}};
}

inline DescriptorSet descriptor_set_from_json(const nlohmann::json& j) {
    DescriptorSet s;
    try {
        s.descriptors = j.at("descriptors").get<std::vector<std::string>>();
        if (j.contains("blacklist_applied")) s.blacklist_applied = j["blacklist_applied"].get<std::vector<std::string>>();
        if (j.contains("members")) s.members = j["members"].get<std::map<std::string, std::vector<std::string>>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("descriptor set: malformed: ") + e.what());
    }
    std::set<std::string> seen;
    for (const auto& d : s.descriptors)
        if (!seen.insert(d).second) throw DataError("descriptor set: duplicate label '" + d + "'");
    for (const auto& b : s.blacklist_applied)
        if (seen.contains(b)) throw DataError("descriptor set: blacklisted label '" + b + "' still present");
    return s;
}

inline DescriptorSet load_descriptor_set(const std::filesystem::path& path) {
    try {
        return descriptor_set_from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("descriptor set " + path.string() + ": " + e.what());
    }
}

} // namespace neuronscope
