#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "spans.hpp"
#include "tokens.hpp"
#include "utf8.hpp"

namespace toxspan {

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kUrlToken = "<url>";

inline bool is_space(char32_t c)
{
    switch (c) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case U'\u0085': case U'\u00A0': case U'\u1680': case U'\u2028': case U'\u2029':
    case U'\u202F': case U'\u205F': case U'\u3000':
        return true;
    default:
        return c >= U'\u2000' && c <= U'\u200A';
    }
}

inline bool is_punct(char32_t c)
{
    if (c < 0x80) {
        return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
    }
    // General punctuation block, guillemets and inverted marks.
    return (c >= U'\u2010' && c <= U'\u2027') || c == U'\u00AB' || c == U'\u00BB' || c == U'\u00BF' ||
           c == U'\u00A1';
}

inline bool is_sentence_final(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

inline bool looks_like_url(std::string_view s)
{
    const auto lower = detail::lower_ascii(s);
    if (lower.starts_with("www.") && lower.size() > 4) return true;
    const auto sep = lower.find("://");
    if (sep == std::string::npos || sep == 0 || sep + 3 >= lower.size()) return false;
    for (std::size_t i = 0; i < sep; ++i) {
        const char c = lower[i];
        const bool ok = (c >= 'a' && c <= 'z') || (i > 0 && ((c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.'));
        if (!ok) return false;
    }
    return true;
}

// Vocabulary lookup key. Never used to rewrite text or offsets.
inline std::string normalize_token(std::string_view surface)
{
    if (looks_like_url(surface)) return std::string(kUrlToken);
    return detail::lower_ascii(surface);
}

// Whitespace split, then leading and trailing punctuation peeled into
// single-character tokens. Offsets are code-point positions.
inline std::vector<Token> tokenize(std::u32string_view chars)
{
    std::vector<Token> tokens;
    auto emit = [&](std::size_t b, std::size_t e) {
        tokens.push_back({utf8::encode(chars.substr(b, e - b)), b, e, 0});
    };
    std::size_t i = 0;
    const auto n = chars.size();
    while (i < n) {
        while (i < n && is_space(chars[i])) ++i;
        if (i >= n) break;
        auto j = i;
        while (j < n && !is_space(chars[j])) ++j;
        auto b = i;
        auto e = j;
        while (b < e && is_punct(chars[b])) {
            emit(b, b + 1);
            ++b;
        }
        auto core_end = e;
        while (core_end > b && is_punct(chars[core_end - 1])) --core_end;
        if (core_end > b) emit(b, core_end);
        for (auto k = core_end; k < e; ++k) emit(k, k + 1);
        i = j;
    }
    return tokens;
}

inline std::vector<Token> tokenize(std::string_view text) { return tokenize(utf8::decode(text)); }

inline constexpr std::size_t kMinSentenceTokens = 3;

// Candidate boundaries follow a run of . ! ? tokens or sit on a newline; a
// boundary is dropped when gold crosses it. Fragments under three tokens
// merge forward (the last one backward).
inline std::vector<TokenizedSentence> split_sentences(const RawRecord& record)
{
    const auto chars = utf8::decode(record.text);
    auto tokens = tokenize(std::u32string_view(chars));
    std::vector<TokenizedSentence> out;
    if (tokens.empty()) return out;

    auto is_final_token = [&](const Token& t) { return t.end - t.start == 1 && is_sentence_final(chars[t.start]); };

    std::vector<std::size_t> cuts; // token index where a new fragment starts
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        const auto left = tokens[i].end;
        const auto right = tokens[i + 1].start;
        bool candidate = is_final_token(tokens[i]) && !is_final_token(tokens[i + 1]);
        for (auto k = left; !candidate && k < right; ++k) candidate = chars[k] == U'\n' || chars[k] == U'\r';
        if (!candidate) continue;
        // A gold run crosses the cut iff it covers a gap character, or the
        // gap is empty and the run joins both neighbours.
        const bool crossed = record.gold.intersects(left, right) ||
                             (left == right && record.gold.contains(left - 1) && record.gold.contains(left));
        if (!crossed) cuts.push_back(i + 1);
    }

    std::vector<std::pair<std::size_t, std::size_t>> fragments;
    std::size_t begin = 0;
    for (auto cut : cuts) {
        fragments.emplace_back(begin, cut);
        begin = cut;
    }
    fragments.emplace_back(begin, tokens.size());

    std::vector<std::pair<std::size_t, std::size_t>> merged;
    std::optional<std::pair<std::size_t, std::size_t>> pending;
    for (const auto& frag : fragments) {
        auto cur = pending ? std::make_pair(pending->first, frag.second) : frag;
        if (cur.second - cur.first < kMinSentenceTokens) {
            pending = cur;
        } else {
            merged.push_back(cur);
            pending.reset();
        }
    }
    if (pending) {
        if (merged.empty()) merged.push_back(*pending);
        else merged.back().second = pending->second;
    }

    for (const auto& [b, e] : merged) {
        TokenizedSentence s;
        s.record_id = record.id;
        s.tokens.assign(std::make_move_iterator(tokens.begin() + static_cast<std::ptrdiff_t>(b)),
                        std::make_move_iterator(tokens.begin() + static_cast<std::ptrdiff_t>(e)));
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace toxspan
