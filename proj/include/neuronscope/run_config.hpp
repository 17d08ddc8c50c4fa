#pragma once

// Every path and parameter the CLI accepts, in one flat JSON-serializable
// struct. A config file supplies defaults; command-line flags override it;
// NEURONSCOPE_* environment variables fill gateway settings last.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuronscope/error.hpp"
#include "neuronscope/prompt.hpp"

namespace neuronscope {

struct RunConfig {
    // paths
    std::string input;
    std::string corpus;
    std::string out;
    std::string out_dir;
    std::string store;
    std::string matrix;
    std::string descriptors;
    std::string candidates;
    std::string embeddings;
    std::string label_map;
    std::string clusters_out;
    std::string surfaces_out;
    std::string csv_out;
    std::string inverse_out;
    std::vector<std::string> templates;
    std::string example;
    std::string attr;
    std::string attr_cal;
    std::string attr_val;
    std::string truth;
    std::string annotator_a;
    std::string annotator_b;
    std::string reference_matrix;
    std::string correlation_csv;
    std::string eval;
    std::string spec;
    std::string cache_dir;
    std::string fixtures_dir;

    // corpus
    std::size_t min_words = 10;
    std::size_t max_words = 200;
    bool english_only = false;
    std::uint64_t seed = 0;

    // descriptors
    double cluster_threshold = 0.75;
    std::size_t min_community_size = 10;
    std::vector<std::string> blacklist;

    // attribution / evaluation
    double k_percent = 1.0;
    double threshold = 0.35;
    std::vector<std::size_t> ks = {1, 2, 3, 4, 5};
    double t_step = 0.05;
    std::size_t truth_top = 3;

    // llm gateway
    std::string mode = "replay";
    std::string endpoint;
    std::string api_key;
    std::string api_style = "simple";
    std::vector<std::string> models;
    std::size_t max_in_flight = 4;
    int max_tokens = 0;  // 0 = per-stage default

    std::size_t jobs = 0;  // 0 = available processors

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    RunConfig, input, corpus, out, out_dir, store, matrix, descriptors, candidates, embeddings, label_map,
    clusters_out, surfaces_out, csv_out, inverse_out, templates, example, attr, attr_cal, attr_val, truth,
    annotator_a, annotator_b, reference_matrix, correlation_csv, eval, spec, cache_dir, fixtures_dir, min_words,
    max_words, english_only, seed, cluster_threshold, min_community_size, blacklist, k_percent, threshold, ks, t_step,
    truth_top, mode, endpoint, api_key, api_style, models, max_in_flight, max_tokens, jobs)

// Unknown keys are rejected so that typos do not silently fall back to defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("config: top level must be a JSON object");
    const nlohmann::json known = RunConfig{};
    for (const auto& [k, v] : j.items())
        if (!known.contains(k)) throw UsageError("config: unknown key '" + k + "'");
    try {
        return j.get<RunConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("config " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

} // namespace neuronscope
