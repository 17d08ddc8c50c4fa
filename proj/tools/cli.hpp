#pragma once

// The neuronscope command-line front end. Kept in a header so the test
// suites can drive subcommands in-process.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "neuronscope/http_transport.hpp"
#include "neuronscope/neuronscope.hpp"
#include "neuronscope/parallel.hpp"
#include "neuronscope/run_config.hpp"

namespace neuronscope::cli {

namespace fs = std::filesystem;

// Provenance written next to each primary output as <out>.manifest.json.
// Contains no timestamps so that identical runs produce identical manifests.
class Manifest {
public:
    explicit Manifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

    void input(const std::string& role, const std::string& path) {
        if (!path.empty()) inputs_[role] = {{"path", path}, {"sha256", digest(path)}};
    }
    void output(const std::string& role, const std::string& path) {
        if (!path.empty()) outputs_[role] = {{"path", path}, {"sha256", digest(path)}};
    }
    void param(const std::string& key, nlohmann::json value) { params_[key] = std::move(value); }

    void write(const fs::path& primary_output) const {
        const nlohmann::json j = {{"tool", "neuronscope"},
                                  {"version", std::string(neuronscope::version)},
                                  {"subcommand", subcommand_},
                                  {"parameters", params_},
                                  {"inputs", inputs_},
                                  {"outputs", outputs_}};
        auto path = primary_output;
        path += ".manifest.json";
        binio::atomic_write(path, j.dump(2) + "\n");
    }

private:
    // Directories hash as the sorted list of (name, file hash) pairs.
    static std::string digest(const std::string& path) {
        if (!fs::is_directory(path)) return sha256_file(path);
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file()) names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        std::string acc;
        for (const auto& n : names) acc += n + ":" + sha256_file((fs::path(path) / n).string()) + "\n";
        return sha256_hex(acc);
    }

    std::string subcommand_;
    nlohmann::json params_ = nlohmann::json::object();
    nlohmann::json inputs_ = nlohmann::json::object();
    nlohmann::json outputs_ = nlohmann::json::object();
};

namespace detail {

inline void require_path(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
}

inline void require_file(const std::string& value, const char* flag) {
    require_path(value, flag);
    if (!fs::exists(value)) throw DataError(std::string(flag) + ": no such file: " + value);
}

inline void write_text(const std::string& path, const std::string& content) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    binio::atomic_write(path, content);
}

inline nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline std::size_t jobs_of(const RunConfig& c) { return c.jobs == 0 ? default_jobs() : c.jobs; }

inline GatewayConfig gateway_config(const RunConfig& c) {
    GatewayConfig g;
    g.mode = parse_gateway_mode(c.mode);
    g.endpoint = c.endpoint;
    g.api_key = c.api_key;
    g.api_style = parse_api_style(c.api_style);
    g.cache_dir = c.cache_dir;
    g.fixtures_dir = c.fixtures_dir;
    g.apply_env();
    return g;
}

inline std::unique_ptr<Gateway> make_gateway(const RunConfig& c) {
    auto g = gateway_config(c);
    std::shared_ptr<Transport> transport;
    if (g.mode != GatewayMode::replay && !g.endpoint.empty()) transport = std::make_shared<HttpTransport>();
    return std::make_unique<Gateway>(std::move(g), std::move(transport));
}

inline void gateway_params(Manifest& m, const RunConfig& c) {
    m.param("mode", c.mode);
    m.param("api_style", c.api_style);
    m.param("max_in_flight", c.max_in_flight);
    if (c.mode == "replay") m.input("fixtures", c.fixtures_dir);
}

// Scans for --config before the real parse so the file can seed defaults.
inline std::optional<std::string> find_config_flag(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return std::nullopt;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Subcommand bodies. Each returns the one-line summary.

inline std::string cmd_ingest(const RunConfig& c) {
    detail::require_file(c.input, "--input");
    detail::require_path(c.out, "--out");
    const auto raw = load_corpus(c.input);
    const FilterParams fp{c.min_words, c.max_words, c.english_only, 0.9};
    const auto kept = filter_corpus(raw, fp);
    detail::write_text(c.out, corpus_to_jsonl(kept));
    Manifest m("ingest");
    m.input("input", c.input);
    m.param("min_words", c.min_words);
    m.param("max_words", c.max_words);
    m.param("english_only", c.english_only);
    m.output("out", c.out);
    m.write(c.out);
    return "ingest: kept " + std::to_string(kept.size()) + " of " + std::to_string(raw.size()) + " sentences -> " + c.out;
}

inline std::string cmd_split(const RunConfig& c) {
    detail::require_file(c.corpus, "--corpus");
    detail::require_path(c.out, "--out");
    const auto split = split_corpus(load_corpus(c.corpus), c.seed);
    detail::write_text(c.out, corpus_to_jsonl(split));
    Manifest m("split");
    m.input("corpus", c.corpus);
    m.param("seed", c.seed);
    m.output("out", c.out);
    m.write(c.out);
    const auto n_cal = split.subset(Split::calibration).size();
    return "split: " + std::to_string(n_cal) + " calibration / " + std::to_string(split.size() - n_cal) +
           " validation -> " + c.out;
}

inline std::string cmd_gen_descriptors(const RunConfig& c, std::ostream& err) {
    detail::require_file(c.corpus, "--corpus");
    detail::require_path(c.out, "--out");
    if (c.models.empty()) throw UsageError("gen-descriptors: at least one --model is required");
    if (c.templates.size() != 1 && c.templates.size() != c.models.size())
        throw UsageError("gen-descriptors: give one --template, or one per --model");
    std::optional<fs::path> example;
    if (!c.example.empty()) example = c.example;
    std::vector<ModelTemplate> models;
    for (std::size_t i = 0; i < c.models.size(); ++i) {
        const auto& tpath = c.templates.size() == 1 ? c.templates[0] : c.templates[i];
        detail::require_file(tpath, "--template");
        models.push_back({c.models[i], load_template(tpath, example)});
    }
    const auto corpus = load_corpus(c.corpus);
    const auto gateway = detail::make_gateway(c);
    const auto run = generate_candidates(*gateway, corpus, models, c.max_in_flight, c.max_tokens > 0 ? c.max_tokens : 64);
    for (const auto& e : run.errors) err << "warning: " << e << "\n";
    for (const auto& w : run.warnings) err << "warning: " << w << "\n";
    detail::write_text(c.out, candidates_to_jsonl(run.candidates));
    const auto surfaces = unique_surfaces(run.candidates);
    if (!c.surfaces_out.empty()) {
        std::string txt;
        for (const auto& s : surfaces) txt += s + "\n";
        detail::write_text(c.surfaces_out, txt);
    }
    Manifest m("gen-descriptors");
    m.input("corpus", c.corpus);
    for (std::size_t i = 0; i < c.templates.size(); ++i) m.input("template" + std::to_string(i), c.templates[i]);
    m.input("example", c.example);
    m.param("models", c.models);
    detail::gateway_params(m, c);
    m.output("out", c.out);
    m.output("surfaces", c.surfaces_out);
    m.write(c.out);
    return "gen-descriptors: " + std::to_string(run.requests) + " requests, " + std::to_string(run.candidates.size()) +
           " candidates, " + std::to_string(surfaces.size()) + " unique surfaces, " + std::to_string(run.errors.size()) +
           " errors -> " + c.out;
}

inline std::string cmd_cluster(const RunConfig& c, std::ostream& err) {
    detail::require_file(c.candidates, "--candidates");
    detail::require_file(c.embeddings, "--embeddings");
    if (c.out.empty() && c.clusters_out.empty()) throw UsageError("cluster: give --out and/or --clusters-out");
    const auto cands = parse_candidates_jsonl(read_text_file(c.candidates));
    const auto table = read_embeddings(c.embeddings);
    auto clusters = cluster_descriptors(unique_surfaces(cands), table, {c.cluster_threshold, c.min_community_size});
    const auto n_residual = std::count_if(clusters.begin(), clusters.end(), [](const auto& x) { return x.residual; });

    Manifest m("cluster");
    m.input("candidates", c.candidates);
    m.input("embeddings", c.embeddings);
    m.param("cluster_threshold", c.cluster_threshold);
    m.param("min_community_size", c.min_community_size);

    std::string summary = "cluster: " + std::to_string(clusters.size() - static_cast<std::size_t>(n_residual)) +
                          " communities, " + std::to_string(n_residual) + " residual surfaces";
    if (!c.out.empty()) {
        detail::require_file(c.label_map, "--label-map");
        auto labeled = assign_representatives(clusters, detail::read_json(c.label_map));
        for (const auto& r : labeled.report) err << "note: " << r << "\n";
        auto filtered = apply_blacklist(std::move(labeled.set), c.blacklist);
        for (const auto& w : filtered.warnings) err << "warning: " << w << "\n";
        detail::write_text(c.out, descriptor_set_to_json(filtered.set).dump(2) + "\n");
        m.input("label_map", c.label_map);
        m.param("blacklist", c.blacklist);
        m.output("out", c.out);
        summary += ", " + std::to_string(filtered.set.descriptors.size()) + " descriptors -> " + c.out;
    }
    if (!c.clusters_out.empty()) {
        detail::write_text(c.clusters_out, clusters_to_json(clusters).dump(2) + "\n");
        m.output("clusters", c.clusters_out);
        summary += c.out.empty() ? " -> " + c.clusters_out + " (write a --label-map to finish)" : "";
    }
    m.write(c.out.empty() ? c.clusters_out : c.out);
    return summary;
}

inline std::string cmd_annotate(const RunConfig& c, std::ostream& err) {
    detail::require_file(c.corpus, "--corpus");
    detail::require_file(c.descriptors, "--descriptors");
    detail::require_path(c.out, "--out");
    if (c.templates.size() != 1) throw UsageError("annotate: exactly one --template is required");
    detail::require_file(c.templates[0], "--template");
    if (c.models.size() != 1) throw UsageError("annotate: exactly one --model is required");
    const auto corpus = load_corpus(c.corpus);
    const auto set = load_descriptor_set(c.descriptors);
    const auto tmpl = load_template(c.templates[0]);
    const auto gateway = detail::make_gateway(c);
    const auto run = annotate(*gateway, corpus, set, tmpl,
                              {c.models[0], c.max_in_flight, c.max_tokens > 0 ? c.max_tokens : 4});
    for (const auto& e : run.errors) err << "warning: " << e << "\n";
    write_matrix(run.matrix, c.out);
    if (!c.csv_out.empty()) detail::write_text(c.csv_out, matrix_to_csv(run.matrix));
    Manifest m("annotate");
    m.input("corpus", c.corpus);
    m.input("descriptors", c.descriptors);
    m.input("template", c.templates[0]);
    m.param("model", c.models[0]);
    detail::gateway_params(m, c);
    m.output("out", c.out);
    m.output("csv", c.csv_out);
    m.write(c.out);
    std::size_t ones = 0;
    for (std::size_t col = 0; col < run.matrix.cols(); ++col) ones += run.matrix.column_count(col);
    return "annotate: " + std::to_string(run.matrix.rows()) + " x " + std::to_string(run.matrix.cols()) + " matrix, " +
           std::to_string(ones) + " positive, " + std::to_string(run.matrix.unresolved().size()) + " unresolved -> " +
           c.out;
}

inline std::string cmd_attribute(const RunConfig& c) {
    detail::require_file(c.store, "--store");
    detail::require_file(c.matrix, "--matrix");
    detail::require_path(c.out, "--out");
    const auto store = read_store(c.store);
    const auto matrix = read_matrix(c.matrix);
    const auto result = attribute(store, matrix, store.all_neurons(), {c.k_percent, c.threshold, detail::jobs_of(c)});
    detail::write_text(c.out, attribution_to_jsonl(result));
    if (!c.inverse_out.empty()) detail::write_text(c.inverse_out, inverse_to_json(invert_mapping(result)).dump(2) + "\n");
    Manifest m("attribute");
    m.input("store", c.store);
    m.input("matrix", c.matrix);
    m.param("k_percent", c.k_percent);
    m.param("threshold", c.threshold);
    m.output("out", c.out);
    m.output("inverse", c.inverse_out);
    m.write(c.out);
    const auto tagged = std::count_if(result.begin(), result.end(), [](const auto& nd) { return !nd.assigned.empty(); });
    return "attribute: " + std::to_string(result.size()) + " neurons, exemplar size " +
           std::to_string(exemplar_count(store.size(), c.k_percent)) + ", " + std::to_string(tagged) +
           " with descriptors at t=" + nlohmann::json(c.threshold).dump() + " -> " + c.out;
}

inline std::string cmd_evaluate(const RunConfig& c) {
    detail::require_path(c.out, "--out");
    std::optional<std::vector<NeuronDescriptors>> cal, val;
    std::optional<GroundTruth> truth;
    std::optional<BinaryMatrix> matrix, ann_a, ann_b, reference;
    if (!c.attr_cal.empty()) {
        detail::require_file(c.attr_cal, "--attr-cal");
        cal = parse_attribution_jsonl(read_text_file(c.attr_cal));
    }
    if (!c.attr_val.empty()) {
        detail::require_file(c.attr_val, "--attr-val");
        val = parse_attribution_jsonl(read_text_file(c.attr_val));
    }
    if (!c.truth.empty()) {
        detail::require_file(c.truth, "--truth");
        truth = truth_from_json(detail::read_json(c.truth));
    }
    auto load_m = [](const std::string& p, const char* flag, std::optional<BinaryMatrix>& slot) {
        if (p.empty()) return;
        detail::require_file(p, flag);
        slot = read_matrix(p);
    };
    load_m(c.matrix, "--matrix", matrix);
    load_m(c.annotator_a, "--annotator-a", ann_a);
    load_m(c.annotator_b, "--annotator-b", ann_b);
    load_m(c.reference_matrix, "--reference-matrix", reference);
    if (ann_a.has_value() != ann_b.has_value()) throw UsageError("evaluate: --annotator-a and --annotator-b go together");
    if (!cal && !matrix && !ann_a) throw UsageError("evaluate: nothing to evaluate");

    EvalInputs in;
    in.cal = cal ? &*cal : nullptr;
    in.val = val ? &*val : nullptr;
    in.truth = truth ? &*truth : nullptr;
    in.matrix = matrix ? &*matrix : nullptr;
    in.annotator_a = ann_a ? &*ann_a : nullptr;
    in.annotator_b = ann_b ? &*ann_b : nullptr;
    in.reference = reference ? &*reference : nullptr;
    in.t_grid = threshold_grid(c.t_step);
    in.ks = c.ks;
    in.truth_top = c.truth_top;
    const auto report = evaluation_report(in);
    detail::write_text(c.out, report.dump(2) + "\n");
    if (!c.correlation_csv.empty()) {
        if (!matrix) throw UsageError("evaluate: --correlation-csv needs --matrix");
        detail::write_text(c.correlation_csv, correlation_to_csv(phi_correlation(*matrix)));
    }
    Manifest m("evaluate");
    m.input("attr_cal", c.attr_cal);
    m.input("attr_val", c.attr_val);
    m.input("truth", c.truth);
    m.input("matrix", c.matrix);
    m.input("annotator_a", c.annotator_a);
    m.input("annotator_b", c.annotator_b);
    m.input("reference_matrix", c.reference_matrix);
    m.param("t_step", c.t_step);
    m.param("ks", c.ks);
    m.param("truth_top", c.truth_top);
    m.output("out", c.out);
    m.output("correlation_csv", c.correlation_csv);
    m.write(c.out);

    std::string summary = "evaluate:";
    if (report["pr_at_k"].is_array())
        for (const auto& p : report["pr_at_k"])
            if (p["k"] == 1 || p["k"] == 2)
                summary += " P@" + p["k"].dump() + "=" + p["precision"]["mean"].dump() + " R@" + p["k"].dump() + "=" +
                           p["recall"]["mean"].dump();
    if (report["neuron_jaccard"].is_array())
        for (const auto& p : report["neuron_jaccard"])
            if (std::abs(p["t"].get<double>() - c.threshold) < 1e-9)
                summary += " J(t=" + p["t"].dump() + ")=" + p["jaccard"]["mean"].dump();
    if (!report["kappa"].is_null()) summary += " kappa=" + report["kappa"].dump();
    return summary + " -> " + c.out;
}

inline std::string cmd_synth(const RunConfig& c) {
    detail::require_path(c.out_dir, "--out-dir");
    synth::SynthSpec spec;
    if (!c.spec.empty()) {
        detail::require_file(c.spec, "--spec");
        spec = synth::spec_from_json(detail::read_json(c.spec));
    }
    const auto data = synth::generate(spec);
    const auto info = synth::write_bundle(data, c.out_dir);
    Manifest m("synth");
    m.input("spec", c.spec);
    m.param("spec", synth::to_json(spec));
    for (const char* f : {"corpus_raw.jsonl", "corpus.jsonl", "descriptors.json", "matrix.nbin", "cal.nact", "val.nact",
                          "truth.json", "embeddings.nemb", "label_map.json"})
        m.output(f, (fs::path(c.out_dir) / f).string());
    m.output("fixtures", (fs::path(c.out_dir) / "fixtures").string());
    m.write(fs::path(c.out_dir) / "synth");
    return "synth: " + std::to_string(spec.n_sentences) + " sentences, " + std::to_string(spec.n_descriptors) +
           " descriptors, " + std::to_string(spec.neurons()) + " neurons, " + std::to_string(info.fixtures) +
           " replay fixtures -> " + c.out_dir;
}

// Human-readable digest of whatever artifacts are given.
inline std::string cmd_report(const RunConfig& c, std::ostream& out) {
    std::ostringstream text;
    if (!c.eval.empty()) {
        detail::require_file(c.eval, "--eval");
        const auto r = detail::read_json(c.eval);
        if (r.contains("pr_at_k") && r["pr_at_k"].is_array()) {
            text << "K  P@K(mean)  P@K(std)  R@K(mean)  R@K(std)\n";
            for (const auto& p : r["pr_at_k"])
                text << p["k"] << "  " << p["precision"]["mean"] << "  " << p["precision"]["std"] << "  "
                     << p["recall"]["mean"] << "  " << p["recall"]["std"] << "\n";
        }
        if (r.contains("neuron_jaccard") && r["neuron_jaccard"].is_array()) {
            text << "t  J(mean)  J(std)\n";
            for (const auto& p : r["neuron_jaccard"])
                text << p["t"] << "  " << p["jaccard"]["mean"] << "  " << p["jaccard"]["std"] << "\n";
        }
        if (r.contains("kappa") && !r["kappa"].is_null()) text << "kappa " << r["kappa"] << "\n";
    }
    if (!c.attr.empty()) {
        detail::require_file(c.attr, "--attr");
        const auto all = parse_attribution_jsonl(read_text_file(c.attr));
        const auto inv = invert_mapping(all);
        text << "descriptor  neurons\n";
        for (const auto& [label, ns] : inv) text << label << "  " << ns.size() << "\n";
        if (!c.inverse_out.empty()) detail::write_text(c.inverse_out, inverse_to_json(inv).dump(2) + "\n");
    }
    if (!c.corpus.empty() && !c.matrix.empty()) {
        detail::require_file(c.corpus, "--corpus");
        detail::require_file(c.matrix, "--matrix");
        const auto dist = split_distribution(load_corpus(c.corpus), read_matrix(c.matrix));
        text << "descriptor,calibration,validation\n";
        for (const auto& d : dist)
            text << neuronscope::detail::csv_field(d.descriptor) << "," << d.calibration << "," << d.validation << "\n";
    }
    if (text.str().empty()) throw UsageError("report: give --eval, --attr, or --corpus with --matrix");
    if (!c.out.empty()) detail::write_text(c.out, text.str());
    else out << text.str();
    return c.out.empty() ? "report: done" : "report: -> " + c.out;
}

// ---------------------------------------------------------------------------

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig cfg;
    try {
        if (auto path = detail::find_config_flag(args)) cfg = load_run_config(*path);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    CLI::App app{"neuronscope: describe text-encoder neurons with natural-language descriptors", "neuronscope"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(neuronscope::version));
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration; flags override it");
    app.fallthrough();

    auto jobs = [&](CLI::App* sub) {
        sub->add_option("--jobs", cfg.jobs, "Worker threads (0 = available processors)")->capture_default_str();
    };
    auto gateway = [&](CLI::App* sub, const char* max_tokens_help) {
        sub->add_option("--model", cfg.models, "Generator model id (repeatable)");
        sub->add_option("--mode", cfg.mode, "LLM gateway mode")->check(CLI::IsMember({"live", "cache", "replay"}))->capture_default_str();
        sub->add_option("--endpoint", cfg.endpoint, "LLM endpoint URL (default: $NEURONSCOPE_LLM_ENDPOINT)");
        sub->add_option("--api-style", cfg.api_style, "Wire protocol")->check(CLI::IsMember({"simple", "chat"}))->capture_default_str();
        sub->add_option("--cache-dir", cfg.cache_dir, "Response cache directory");
        sub->add_option("--fixtures-dir", cfg.fixtures_dir, "Replay fixture directory");
        sub->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent LLM requests")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_option("--max-tokens", cfg.max_tokens, max_tokens_help)->capture_default_str();
    };

    auto* ingest = app.add_subcommand("ingest", "Load a JSONL corpus and filter it by length/language");
    ingest->add_option("--input", cfg.input, "Raw corpus (JSONL: id, text, category)");
    ingest->add_option("--out", cfg.out, "Filtered corpus (JSONL)");
    ingest->add_option("--min-words", cfg.min_words, "Drop sentences with fewer words")->capture_default_str();
    ingest->add_option("--max-words", cfg.max_words, "Drop sentences with more words")->capture_default_str();
    ingest->add_flag("--english-only,!--no-english-only", cfg.english_only, "Keep sentences whose letters are >= 90% ASCII")->capture_default_str();

    auto* split = app.add_subcommand("split", "Assign calibration/validation halves");
    split->add_option("--corpus", cfg.corpus, "Corpus (JSONL)");
    split->add_option("--seed", cfg.seed, "Shuffle seed")->capture_default_str();
    split->add_option("--out", cfg.out, "Corpus with \"split\" field (JSONL)");

    auto* gen = app.add_subcommand("gen-descriptors", "Ask LLMs for candidate descriptors of every sentence");
    gen->add_option("--corpus", cfg.corpus, "Corpus (JSONL)");
    gen->add_option("--template", cfg.templates, "Prompt template with {EXAMPLE} and {INPUT} (one, or one per --model)");
    gen->add_option("--example", cfg.example, "One-shot example JSON {sentence, descriptors}");
    gen->add_option("--out", cfg.out, "Candidates (JSONL)");
    gen->add_option("--surfaces-out", cfg.surfaces_out, "Unique surfaces, one per line (input for the embedder)");
    gateway(gen, "Max output tokens per request (0 = 64)");

    auto* cluster = app.add_subcommand("cluster", "Cluster candidate surfaces and apply labels and blacklist");
    cluster->add_option("--candidates", cfg.candidates, "Candidates (JSONL)");
    cluster->add_option("--embeddings", cfg.embeddings, "Surface embeddings (NEMB)");
    cluster->add_option("--threshold", cfg.cluster_threshold, "Cosine similarity threshold")->capture_default_str();
    cluster->add_option("--min-community-size", cfg.min_community_size, "Smallest community kept")->capture_default_str();
    cluster->add_option("--label-map", cfg.label_map, "JSON {cluster index or surface: label}");
    cluster->add_option("--blacklist", cfg.blacklist, "Labels to drop (repeatable or comma-separated)")->delimiter(',');
    cluster->add_option("--clusters-out", cfg.clusters_out, "Clusters before labeling (JSON)");
    cluster->add_option("--out", cfg.out, "Descriptor set (JSON)");

    auto* ann = app.add_subcommand("annotate", "Build the sentence x descriptor yes/no matrix");
    ann->add_option("--corpus", cfg.corpus, "Corpus (JSONL)");
    ann->add_option("--descriptors", cfg.descriptors, "Descriptor set (JSON)");
    ann->add_option("--template", cfg.templates, "Prompt template with {DESCRIPTOR} and {INPUT}");
    ann->add_option("--out", cfg.out, "Matrix (.nbin)");
    ann->add_option("--csv-out", cfg.csv_out, "Matrix as CSV");
    gateway(ann, "Max output tokens per request (0 = 4)");

    auto* attr = app.add_subcommand("attribute", "Assign descriptors to every neuron of an activation store");
    attr->add_option("--store", cfg.store, "Activations (NACT)");
    attr->add_option("--matrix", cfg.matrix, "Annotations (.nbin)");
    attr->add_option("--k-percent", cfg.k_percent, "Exemplar set size, percent of sentences")->capture_default_str();
    attr->add_option("--threshold", cfg.threshold, "Composition threshold t (assign when f > t)")->capture_default_str();
    attr->add_option("--out", cfg.out, "Attribution report (JSONL)");
    attr->add_option("--inverse-out", cfg.inverse_out, "Descriptor -> neurons map (JSON)");
    jobs(attr);

    auto* eval = app.add_subcommand("evaluate", "Compute precision/recall, consistency, correlation and agreement");
    eval->add_option("--attr-cal", cfg.attr_cal, "Calibration attribution report (JSONL)");
    eval->add_option("--attr-val", cfg.attr_val, "Validation attribution report (JSONL)");
    eval->add_option("--truth", cfg.truth, "Ground truth (JSON)");
    eval->add_option("--matrix", cfg.matrix, "Annotations for descriptor correlation (.nbin)");
    eval->add_option("--annotator-a", cfg.annotator_a, "First annotation for Cohen's kappa (.nbin)");
    eval->add_option("--annotator-b", cfg.annotator_b, "Second annotation for Cohen's kappa (.nbin)");
    eval->add_option("--reference-matrix", cfg.reference_matrix, "Reference annotation scored against --matrix (.nbin)");
    eval->add_option("--t-step", cfg.t_step, "Threshold grid step")->capture_default_str();
    eval->add_option("--threshold", cfg.threshold, "Threshold echoed in the summary line")->capture_default_str();
    eval->add_option("--k", cfg.ks, "K values for P@K/R@K")->delimiter(',')->capture_default_str();
    eval->add_option("--truth-top", cfg.truth_top, "Ground-truth labels kept per neuron")->capture_default_str();
    eval->add_option("--out", cfg.out, "Report (JSON)");
    eval->add_option("--correlation-csv", cfg.correlation_csv, "Correlation matrix as CSV");

    auto* syn = app.add_subcommand("synth", "Write a planted-ground-truth bundle with replay fixtures");
    syn->add_option("--spec", cfg.spec, "Synth spec (JSON); defaults if omitted");
    syn->add_option("--out-dir", cfg.out_dir, "Output directory");

    auto* rep = app.add_subcommand("report", "Print a readable digest of pipeline artifacts");
    rep->add_option("--eval", cfg.eval, "Evaluation report (JSON)");
    rep->add_option("--attr", cfg.attr, "Attribution report (JSONL)");
    rep->add_option("--inverse-out", cfg.inverse_out, "Write the inverse map here");
    rep->add_option("--corpus", cfg.corpus, "Split corpus, for the per-split descriptor distribution");
    rep->add_option("--matrix", cfg.matrix, "Annotations, for the per-split descriptor distribution");
    rep->add_option("--out", cfg.out, "Write the digest here instead of stdout");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << neuronscope::version << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        app.exit(e, o, er);
        err << er.str() << o.str();
        return 1;
    }

    try {
        std::string summary;
        if (*ingest) summary = cmd_ingest(cfg);
        else if (*split) summary = cmd_split(cfg);
        else if (*gen) summary = cmd_gen_descriptors(cfg, err);
        else if (*cluster) summary = cmd_cluster(cfg, err);
        else if (*ann) summary = cmd_annotate(cfg, err);
        else if (*attr) summary = cmd_attribute(cfg);
        else if (*eval) summary = cmd_evaluate(cfg);
        else if (*syn) summary = cmd_synth(cfg);
        else if (*rep) summary = cmd_report(cfg, out);
        out << summary << "\n";
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace neuronscope::cli
