#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuronscope/error.hpp"
#include "neuronscope/text.hpp"

namespace neuronscope {

struct OneShotExample {
    std::string sentence;
    std::vector<std::string> descriptors;
};

// A prompt scaffold with slot markers. The same template (and the same
// one-shot example) is rendered for every sentence.
struct PromptTemplate {
    std::string task_text;
    std::optional<OneShotExample> example;
    std::string input_marker = "{INPUT}";
    std::string example_marker = "{EXAMPLE}";
    std::string descriptor_marker = "{DESCRIPTOR}";
};

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Example file: {"sentence": "...", "descriptors": ["...", ...]}
inline OneShotExample load_example(const std::filesystem::path& path) {
    try {
        const auto j = nlohmann::json::parse(read_text_file(path));
        return {j.at("sentence").get<std::string>(), j.at("descriptors").get<std::vector<std::string>>()};
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad one-shot example file " + path.string() + ": " + e.what());
    }
}

inline PromptTemplate load_template(const std::filesystem::path& path,
                                    std::optional<std::filesystem::path> example_path = std::nullopt) {
    PromptTemplate t;
    t.task_text = read_text_file(path);
    if (example_path) t.example = load_example(*example_path);
    return t;
}

namespace detail {
// True when q inside item would read as a closing quote (q, optional spaces,
// then a comma or the end).
inline bool closes_early(std::string_view item, char q) {
    for (std::size_t j = 0; j < item.size(); ++j) {
        if (item[j] != q) continue;
        std::size_t k = j + 1;
        while (k < item.size() && text::is_space(item[k])) ++k;
        if (k < item.size() && item[k] == ',') return true;
    }
    return false;
}
} // namespace detail

// 'a', 'b', 'c'
inline std::string quoted_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        const char q = detail::closes_early(items[i], '\'') ? '"' : '\'';
        out += q;
        out += items[i];
        out += q;
    }
    return out;
}

inline std::string render_example(const OneShotExample& e) {
    return "Sentence: " + e.sentence + "\nDescriptors: " + quoted_list(e.descriptors);
}

namespace detail {

// Single left-to-right pass; substituted text is never rescanned.
inline std::string fill_slots(std::string_view scaffold, const std::vector<std::pair<std::string, std::string>>& slots) {
    std::string out;
    std::size_t i = 0;
    while (i < scaffold.size()) {
        bool matched = false;
        for (const auto& [marker, value] : slots) {
            if (!marker.empty() && scaffold.substr(i, marker.size()) == marker) {
                out += value;
                i += marker.size();
                matched = true;
                break;
            }
        }
        if (!matched) out.push_back(scaffold[i++]);
    }
    return out;
}

inline void require_once(const std::string& scaffold, const std::string& marker, const char* what) {
    const auto n = text::count_occurrences(scaffold, marker);
    if (n == 0) throw UsageError(std::string(what) + ": template lacks the " + marker + " marker");
    if (n > 1) throw UsageError(std::string(what) + ": template has " + std::to_string(n) + " " + marker + " markers");
}

} // namespace detail

// Descriptor-discovery prompt: task text, then the one-shot example (if any),
// then the input sentence.
inline std::string render_p1(const PromptTemplate& t, std::string_view sentence) {
    detail::require_once(t.task_text, t.input_marker, "render_p1");
    const auto n_example = text::count_occurrences(t.task_text, t.example_marker);
    if (n_example > 1) throw UsageError("render_p1: more than one " + t.example_marker + " marker");
    if (n_example == 1 && t.task_text.find(t.example_marker) > t.task_text.find(t.input_marker))
        throw UsageError("render_p1: " + t.example_marker + " must precede " + t.input_marker);
    if (t.example && n_example == 0)
        throw UsageError("render_p1: a one-shot example is configured but the template has no " + t.example_marker);
    const std::string example = t.example ? render_example(*t.example) : std::string();
    return detail::fill_slots(t.task_text, {{t.example_marker, example}, {t.input_marker, std::string(sentence)}});
}

// Yes/No applicability prompt for one (descriptor, sentence) pair.
inline std::string render_p2(const PromptTemplate& t, std::string_view descriptor, std::string_view sentence) {
    detail::require_once(t.task_text, t.input_marker, "render_p2");
    detail::require_once(t.task_text, t.descriptor_marker, "render_p2");
    return detail::fill_slots(t.task_text,
                              {{t.descriptor_marker, std::string(descriptor)}, {t.input_marker, std::string(sentence)}});
}

inline constexpr std::string_view default_p1_template =
    "Identify the descriptors of the product review below: short phrases naming the aspects, properties, or "
    "sentiment it talks about. Answer with a comma-separated list of quoted phrases.\n"
    "\n"
    "{EXAMPLE}\n"
    "\n"
    "Sentence: {INPUT}\n"
    "Descriptors:";

inline constexpr std::string_view default_p2_template =
    "Is the descriptor \"{DESCRIPTOR}\" applicable to the following product review? Answer with Yes or No only.\n"
    "\n"
    "Review: {INPUT}\n"
    "Answer:";

} // namespace neuronscope
