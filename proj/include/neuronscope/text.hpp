#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace neuronscope::text {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

inline bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

inline std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Trims, collapses internal whitespace runs to one space, lowercases ASCII.
inline std::string collapse_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : trim(s)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(ascii_lower(c));
    }
    return out;
}

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
    return n;
}

inline std::string replace_all(std::string_view s, std::string_view from, std::string_view to) {
    std::string out;
    std::size_t start = 0;
    for (auto pos = s.find(from); pos != std::string_view::npos; pos = s.find(from, start)) {
        out.append(s.substr(start, pos - start));
        out.append(to);
        start = pos + from.size();
    }
    out.append(s.substr(start));
    return out;
}

namespace detail {

// Decodes one UTF-8 code point starting at s[i]; malformed bytes decode as
// U+FFFD and advance by one.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = (b0 & 0xE0) == 0xC0 ? 2 : (b0 & 0xF0) == 0xE0 ? 3 : (b0 & 0xF8) == 0xF0 ? 4 : 0;
    if (len == 0) {
        ++i;
        return 0xFFFD;
    }
    char32_t cp = b0 & (0x7F >> len);
    for (int k = 1; k < len; ++k) {
        const int c = cont(static_cast<std::size_t>(k));
        if (c < 0) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | static_cast<char32_t>(c);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

// Rough letter test for non-ASCII code points: everything outside the common
// punctuation, symbol, and emoji blocks counts as a letter.
inline bool non_ascii_is_letter(char32_t cp) {
    if (cp == 0xFFFD) return false;
    if (cp >= 0x80 && cp <= 0xBF) return false;  // Latin-1 controls and symbols
    if (cp == 0xD7 || cp == 0xF7) return false;
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, arrows, math, box drawing
    if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
    if (cp >= 0xFE00 && cp <= 0xFE6F) return false;  // variation selectors, small forms
    if (cp >= 0x1F000) return false;                 // emoji and pictographs
    return true;
}

} // namespace detail

// Fraction of alphabetic code points that are ASCII letters; 0 when the text
// has no letters at all.
inline double ascii_letter_ratio(std::string_view s) {
    std::size_t ascii = 0, letters = 0;
    for (std::size_t i = 0; i < s.size();) {
        const char32_t cp = detail::next_code_point(s, i);
        if (cp < 0x80) {
            if (is_ascii_letter(static_cast<char>(cp))) {
                ++ascii;
                ++letters;
            }
        } else if (detail::non_ascii_is_letter(cp)) {
            ++letters;
        }
    }
    return letters == 0 ? 0.0 : static_cast<double>(ascii) / static_cast<double>(letters);
}

} // namespace neuronscope::text
