#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"

namespace toxspan {

// Template-sentence corpus with toxic words planted from a fixed lexicon.
struct SynthConfig {
    std::size_t records{2000};
    std::uint64_t seed{1};
    double toxic_rate{0.8};     // share of records containing a toxic span
    double obfuscation{0.0};    // per toxic word: swap a letter for a look-alike
    double label_dropout{0.0};  // per toxic span: omit it from the gold set
    double case_noise{0.0};     // per word: upper-case or capitalise
    std::string id_prefix{"syn"};
};

inline const std::vector<std::string>& toxic_lexicon()
{
    static const std::vector<std::string> words{
        "idiot", "moron",   "stupid",   "fool",     "loser",   "jerk",    "dumb",   "pathetic",
        "clown", "scum",    "trash",    "liar",     "coward",  "imbecile", "hypocrite", "buffoon",
        "dimwit", "lunatic", "creep",   "bigot",    "parasite", "slob",    "dunce",  "weasel",
        "rat",   "garbage", "ignorant", "nitwit",   "numbskull", "halfwit"};
    return words;
}

namespace synth {

// Template slots: T toxic word, Q toxic two-word phrase, N benign noun,
// A benign adjective, P name, D day; anything else is literal.
inline const std::vector<std::vector<std::string>>& toxic_templates()
{
    static const std::vector<std::vector<std::string>> t{
        {"you", "are", "such", "a", "T", "."},
        {"what", "a", "T", ",", "honestly", "."},
        {"P", "is", "a", "complete", "T", "."},
        {"only", "a", "T", "would", "write", "this", "."},
        {"stop", "talking", ",", "you", "T", "!"},
        {"this", "T", "has", "no", "idea", "what", "they", "are", "saying", "."},
        {"P", ",", "you", "are", "a", "Q", "."},
        {"get", "lost", ",", "T", "."},
        {"the", "article", "was", "written", "by", "a", "T", "."},
        {"nobody", "listens", "to", "that", "T", "anymore", "."},
        {"T", "!", "that", "is", "what", "you", "are", "."},
        {"P", "and", "P", "are", "both", "T", "."},
        {"what", "a", "Q", ",", "go", "away", "."},
        {"you", "T", ",", "you", "absolute", "T", "!"},
        {"i", "met", "P", "on", "D", "and", "P", "is", "a", "T", "."},
        {"keep", "your", "A", "opinions", "to", "yourself", ",", "T", "."},
    };
    return t;
}

inline const std::vector<std::vector<std::string>>& benign_templates()
{
    static const std::vector<std::vector<std::string>> t{
        {"you", "are", "such", "a", "N", "."},
        {"P", "is", "a", "complete", "N", "."},
        {"the", "meeting", "was", "moved", "to", "D", "."},
        {"thanks", "for", "sharing", "this", "A", "article", "."},
        {"i", "agree", "with", "P", "on", "this", "point", "."},
        {"the", "article", "was", "written", "by", "a", "N", "."},
        {"what", "a", "A", "N", ",", "honestly", "."},
        {"nobody", "listens", "to", "that", "N", "anymore", "."},
        {"i", "met", "P", "on", "D", "and", "P", "is", "a", "N", "."},
        {"stop", "talking", ",", "you", "A", "N", "!"},
    };
    return t;
}

inline const std::vector<std::string>& nouns()
{
    static const std::vector<std::string> w{"friend", "genius", "hero",    "teacher", "neighbor", "legend",
                                            "champ",  "writer", "student", "doctor",  "reader",   "expert"};
    return w;
}

inline const std::vector<std::string>& adjectives()
{
    static const std::vector<std::string> w{"great", "thoughtful", "kind", "honest", "clever", "brave",
                                            "careful", "helpful", "local", "quiet", "funny", "new"};
    return w;
}

inline const std::vector<std::string>& names()
{
    static const std::vector<std::string> w{"alex", "sam", "jordan", "taylor", "casey", "morgan",
                                            "riley", "jamie", "robin", "quinn", "drew", "kim"};
    return w;
}

inline const std::vector<std::string>& days()
{
    static const std::vector<std::string> w{"monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
                                            "sunday"};
    return w;
}

inline const std::vector<std::string>& toxic_adjectives()
{
    static const std::vector<std::string> w{"stupid", "dumb", "pathetic", "ignorant"};
    return w;
}

inline bool is_punctuation(const std::string& w) { return w == "." || w == "," || w == "!" || w == "?"; }

template <typename Rng>
const std::string& pick(const std::vector<std::string>& v, Rng& rng)
{
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

template <typename Rng>
std::string obfuscate(std::string w, Rng& rng)
{
    static const std::vector<std::pair<char, char>> swaps{{'i', '1'}, {'o', '0'}, {'a', '@'}, {'e', '3'}, {'u', '*'}};
    std::vector<std::size_t> spots;
    for (std::size_t i = 0; i < w.size(); ++i)
        for (const auto& [from, to] : swaps)
            if (w[i] == from) spots.push_back(i);
    if (spots.empty()) return w;
    const auto at = spots[std::uniform_int_distribution<std::size_t>(0, spots.size() - 1)(rng)];
    for (const auto& [from, to] : swaps)
        if (w[at] == from) {
            w[at] = to;
            break;
        }
    return w;
}

} // namespace synth

inline std::vector<RawRecord> synthesize(const SynthConfig& cfg)
{
    std::mt19937_64 rng(cfg.seed);
    std::bernoulli_distribution toxic(cfg.toxic_rate), obf(cfg.obfuscation), drop(cfg.label_dropout),
        noisy_case(cfg.case_noise), upper(0.5);
    std::vector<RawRecord> out;
    out.reserve(cfg.records);
    for (std::size_t r = 0; r < cfg.records; ++r) {
        const bool is_toxic = toxic(rng);
        const auto& templates = is_toxic ? synth::toxic_templates() : synth::benign_templates();
        const auto& tpl = templates[std::uniform_int_distribution<std::size_t>(0, templates.size() - 1)(rng)];

        std::string text;
        CharSpanSet gold;
        auto emit = [&](std::string word, bool toxic_word) {
            if (toxic_word && obf(rng)) word = synth::obfuscate(std::move(word), rng);
            if (noisy_case(rng)) {
                if (upper(rng)) {
                    for (auto& c : word) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                } else {
                    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
                }
            }
            if (!text.empty() && !synth::is_punctuation(word)) text += ' ';
            const auto start = text.size();
            text += word;
            return std::pair{start, text.size()};
        };
        for (const auto& slot : tpl) {
            if (slot == "T") {
                auto [b, e] = emit(synth::pick(toxic_lexicon(), rng), true);
                if (!drop(rng)) gold.insert_range(b, e);
            } else if (slot == "Q") {
                auto [b, m] = emit(synth::pick(synth::toxic_adjectives(), rng), true);
                auto [m2, e] = emit(synth::pick(toxic_lexicon(), rng), true);
                (void)m;
                (void)m2;
                if (!drop(rng)) gold.insert_range(b, e);
            } else if (slot == "N") {
                emit(synth::pick(synth::nouns(), rng), false);
            } else if (slot == "A") {
                emit(synth::pick(synth::adjectives(), rng), false);
            } else if (slot == "P") {
                emit(synth::pick(synth::names(), rng), false);
            } else if (slot == "D") {
                emit(synth::pick(synth::days(), rng), false);
            } else {
                emit(slot, false);
            }
        }
        out.push_back(RawRecord{cfg.id_prefix + std::to_string(r), std::move(text), std::move(gold), std::nullopt});
    }
    return out;
}

// Keeps gold labels on a `keep_fraction` share of records (chosen by seed);
// the rest become an unlabeled pool.
inline std::pair<std::vector<RawRecord>, std::vector<RawRecord>>
hold_out_labels(const std::vector<RawRecord>& records, double keep_fraction, std::uint64_t seed)
{
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto keep = static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(records.size())));
    std::vector<bool> labeled(records.size(), false);
    for (std::size_t i = 0; i < keep && i < order.size(); ++i) labeled[order[i]] = true;
    std::pair<std::vector<RawRecord>, std::vector<RawRecord>> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (labeled[i]) {
            out.first.push_back(records[i]);
        } else {
            RawRecord u = records[i];
            u.gold = {};
            out.second.push_back(std::move(u));
        }
    }
    return out;
}

} // namespace toxspan
