#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "text.hpp"
#include "tokens.hpp"

namespace toxspan {

class Vocabulary {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;
    static constexpr std::size_t kUrl = 2;

    Vocabulary()
    {
        add(std::string(kPadToken));
        add(std::string(kUnkToken));
        add(std::string(kUrlToken));
    }

    // Rebuilds from an index-ordered token list (checkpoint restore).
    static Vocabulary from_tokens(const std::vector<std::string>& tokens)
    {
        if (tokens.size() < 3 || tokens[kPad] != kPadToken || tokens[kUnk] != kUnkToken || tokens[kUrl] != kUrlToken) {
            throw std::invalid_argument("vocabulary must start with <pad>, <unk>, <url>");
        }
        Vocabulary v;
        for (std::size_t i = 3; i < tokens.size(); ++i) {
            if (v.index_.contains(tokens[i])) throw std::invalid_argument("duplicate vocabulary entry '" + tokens[i] + "'");
            v.add(tokens[i]);
        }
        return v;
    }

    [[nodiscard]] std::size_t size() const noexcept { return tokens_.size(); }
    [[nodiscard]] const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    [[nodiscard]] bool contains(const std::string& key) const { return index_.contains(key); }

    // Index of an already-normalized key.
    [[nodiscard]] std::size_t index_of(const std::string& key) const
    {
        auto it = index_.find(key);
        return it == index_.end() ? kUnk : it->second;
    }

    [[nodiscard]] std::size_t lookup(std::string_view surface) const { return index_of(normalize_token(surface)); }

    void assign_ids(TokenizedSentence& sentence) const
    {
        for (auto& token : sentence.tokens) token.norm_id = lookup(token.surface);
    }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    void add(std::string key)
    {
        index_.emplace(key, tokens_.size());
        tokens_.push_back(std::move(key));
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;

    friend Vocabulary build_vocab(const std::vector<TokenizedSentence>&, std::size_t);
};

// Keys with frequency >= min_freq, ordered by descending frequency then key.
inline Vocabulary build_vocab(const std::vector<TokenizedSentence>& sentences, std::size_t min_freq)
{
    if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& s : sentences) {
        for (const auto& t : s.tokens) ++counts[normalize_token(t.surface)];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [key, n] : counts) {
        if (n >= min_freq) kept.emplace_back(key, n);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary v;
    for (auto& [key, n] : kept) {
        if (!v.contains(key)) v.add(key);
    }
    return v;
}

} // namespace toxspan
