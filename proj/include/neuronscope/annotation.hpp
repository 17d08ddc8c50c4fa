#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neuronscope/binary_matrix.hpp"
#include "neuronscope/corpus.hpp"
#include "neuronscope/descriptor_pipeline.hpp"
#include "neuronscope/llm_gateway.hpp"
#include "neuronscope/prompt.hpp"
#include "neuronscope/text.hpp"

namespace neuronscope {

enum class YesNo { no = 0, yes = 1, unresolved = 2 };

// Case-insensitive; leading/trailing whitespace and punctuation are ignored and
// the answer may continue after the first word ("Yes, it does").
inline YesNo parse_yes_no(std::string_view raw) {
    std::size_t i = 0;
    while (i < raw.size() && !text::is_ascii_letter(raw[i])) {
        const auto c = static_cast<unsigned char>(raw[i]);
        if (!(text::is_space(raw[i]) || std::ispunct(c))) return YesNo::unresolved;
        ++i;
    }
    std::string word;
    while (i < raw.size() && text::is_ascii_letter(raw[i])) word.push_back(text::ascii_lower(raw[i++]));
    // "yesterday" is not an answer
    if (word == "yes") return YesNo::yes;
    if (word == "no") return YesNo::no;
    return YesNo::unresolved;
}

struct AnnotateOptions {
    std::string model_id;
    std::size_t max_in_flight = 1;
    int max_output_tokens = 4;
};

struct AnnotateRun {
    BinaryMatrix matrix;
    std::size_t requests = 0;
    std::vector<std::string> errors;  // gateway failures; those cells are unresolved
};

// One request per (sentence, descriptor) cell, rows in corpus order, columns
// in descriptor-set order.
inline AnnotateRun annotate(const Gateway& gateway, const Corpus& corpus, const DescriptorSet& set,
                            const PromptTemplate& tmpl, const AnnotateOptions& opts) {
    if (corpus.sentences.empty()) throw DataError("annotate: corpus is empty");
    if (set.descriptors.empty()) throw DataError("annotate: descriptor set is empty");
    std::vector<LlmRequest> reqs;
    reqs.reserve(corpus.size() * set.descriptors.size());
    for (const auto& s : corpus.sentences)
        for (const auto& d : set.descriptors)
            reqs.push_back({opts.model_id, render_p2(tmpl, d, s.text), opts.max_output_tokens, 0.0});

    const auto results = gateway.request_batch(reqs, opts.max_in_flight);
    AnnotateRun run{BinaryMatrix(corpus.ids(), set.descriptors), reqs.size(), {}};
    const std::size_t cols = set.descriptors.size();
    for (std::size_t k = 0; k < results.size(); ++k) {
        const std::size_t r = k / cols, c = k % cols;
        const auto& res = results[k];
        if (!res.ok()) {
            run.errors.push_back(corpus.sentences[r].id + " / " + set.descriptors[c] + ": " + res.error);
            run.matrix.mark_unresolved(r, c);
            continue;
        }
        switch (parse_yes_no(res.response->text)) {
            case YesNo::yes: run.matrix.set(r, c, true); break;
            case YesNo::no: break;
            case YesNo::unresolved: run.matrix.mark_unresolved(r, c); break;
        }
    }
    return run;
}

} // namespace neuronscope
