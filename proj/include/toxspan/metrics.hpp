#pragma once

#include <span>
#include <stdexcept>
#include <utility>

#include "spans.hpp"

namespace toxspan {

struct ScoreTriple {
    double f1{0.0};
    double precision{0.0};
    double recall{0.0};

    friend bool operator==(const ScoreTriple&, const ScoreTriple&) = default;
};

// Character-overlap F1. Both empty scores 1; exactly one empty scores 0.
inline ScoreTriple score_document(const CharSpanSet& pred, const CharSpanSet& gold)
{
    if (pred.empty() && gold.empty()) return {1.0, 1.0, 1.0};
    if (pred.empty() || gold.empty()) return {0.0, 0.0, 0.0};
    const auto overlap = static_cast<double>(pred.intersection_size(gold));
    const auto np = static_cast<double>(pred.size());
    const auto ng = static_cast<double>(gold.size());
    return {2.0 * overlap / (np + ng), overlap / np, overlap / ng};
}

using ScoredPair = std::pair<CharSpanSet, CharSpanSet>; // (pred, gold)

// Unweighted mean of per-document scores.
inline ScoreTriple score_corpus(std::span<const ScoredPair> docs)
{
    if (docs.empty()) throw std::invalid_argument("score_corpus: empty corpus");
    ScoreTriple total;
    for (const auto& [pred, gold] : docs) {
        const auto s = score_document(pred, gold);
        total.f1 += s.f1;
        total.precision += s.precision;
        total.recall += s.recall;
    }
    const auto n = static_cast<double>(docs.size());
    return {total.f1 / n, total.precision / n, total.recall / n};
}

} // namespace toxspan
