#pragma once

// Drives the whole command-line pipeline in-process over a synth bundle:
// synth, ingest, split, gen-descriptors, cluster, annotate, attribute (both
// halves), evaluate, report. Replay mode only.

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace testutil {

struct PipelineRun {
    int failed_step = -1;  // index into steps, -1 when all succeeded
    std::string log;
    std::map<std::string, std::string> file_hashes;  // relative path -> sha256, fixtures excluded
};

inline std::vector<std::vector<std::string>> pipeline_steps(const std::filesystem::path& root,
                                                            const std::string& spec_path = {}) {
    const auto b = (root / "bundle").string();
    const auto r = (root / "run").string();
    auto in = [&](const char* f) { return b + "/" + f; };
    auto out = [&](const char* f) { return r + "/" + f; };
    std::vector<std::string> synth = {"synth", "--out-dir", b};
    if (!spec_path.empty()) synth.insert(synth.end(), {"--spec", spec_path});
    return {
        synth,
        {"ingest", "--input", in("corpus_raw.jsonl"), "--out", out("corpus.jsonl")},
        {"split", "--corpus", out("corpus.jsonl"), "--seed", "20240101", "--out", out("corpus_split.jsonl")},
        {"gen-descriptors", "--corpus", out("corpus_split.jsonl"), "--template", in("p1.txt"), "--example",
         in("example.json"), "--model", "synth-generator", "--mode", "replay", "--fixtures-dir", in("fixtures"),
         "--out", out("candidates.jsonl"), "--surfaces-out", out("surfaces.txt")},
        {"cluster", "--candidates", out("candidates.jsonl"), "--embeddings", in("embeddings.nemb"),
         "--min-community-size", "3", "--label-map", in("label_map.json"), "--clusters-out", out("clusters.json"),
         "--out", out("descriptors.json")},
        {"annotate", "--corpus", out("corpus_split.jsonl"), "--descriptors", out("descriptors.json"), "--template",
         in("p2.txt"), "--model", "synth-annotator", "--mode", "replay", "--fixtures-dir", in("fixtures"),
         "--max-in-flight", "8", "--out", out("matrix.nbin"), "--csv-out", out("matrix.csv")},
        {"attribute", "--store", in("cal.nact"), "--matrix", out("matrix.nbin"), "--out", out("attr_cal.jsonl"),
         "--inverse-out", out("inverse_cal.json"), "--jobs", "4"},
        {"attribute", "--store", in("val.nact"), "--matrix", out("matrix.nbin"), "--out", out("attr_val.jsonl"),
         "--inverse-out", out("inverse_val.json"), "--jobs", "4"},
        {"evaluate", "--attr-cal", out("attr_cal.jsonl"), "--attr-val", out("attr_val.jsonl"), "--truth",
         in("truth.json"), "--matrix", out("matrix.nbin"), "--annotator-a", out("matrix.nbin"), "--annotator-b",
         in("matrix.nbin"), "--out", out("eval.json"), "--correlation-csv", out("correlation.csv")},
        {"report", "--eval", out("eval.json"), "--attr", out("attr_cal.jsonl"), "--corpus", out("corpus_split.jsonl"),
         "--matrix", out("matrix.nbin"), "--out", out("digest.txt")},
    };
}

inline PipelineRun run_pipeline(const std::filesystem::path& root, const std::string& spec_path = {}) {
    namespace fs = std::filesystem;
    PipelineRun result;
    const auto steps = pipeline_steps(root, spec_path);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        std::ostringstream out, err;
        const int code = neuronscope::cli::run(steps[i], out, err);
        result.log += "$ " + steps[i][0] + "\n" + out.str() + err.str();
        if (code != 0) {
            result.failed_step = static_cast<int>(i);
            return result;
        }
    }
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), root).string();
        if (rel.find("fixtures") != std::string::npos) continue;
        result.file_hashes[rel] = neuronscope::sha256_file(e.path().string());
    }
    return result;
}

} // namespace testutil
