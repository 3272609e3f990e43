#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "spans.hpp"
#include "tokens.hpp"

namespace toxspan {

// A token is toxic when any of its characters is gold.
inline std::vector<BioTag> bio_encode(const TokenizedSentence& sentence, const CharSpanSet& gold)
{
    std::vector<BioTag> tags;
    tags.reserve(sentence.tokens.size());
    bool previous_toxic = false;
    for (const auto& token : sentence.tokens) {
        const bool toxic = gold.intersects(token.start, token.end);
        if (!toxic) {
            tags.push_back(BioTag::O);
        } else {
            tags.push_back(previous_toxic ? BioTag::I : BioTag::B);
        }
        previous_toxic = toxic;
    }
    return tags;
}

// Lenient: an I that does not continue a run opens one. Gaps between
// consecutive tokens of the same run are included.
inline CharSpanSet bio_decode(const std::vector<BioTag>& tags, const TokenizedSentence& sentence)
{
    if (tags.size() != sentence.tokens.size()) {
        throw std::invalid_argument("bio_decode: " + std::to_string(tags.size()) + " tags for " +
                                    std::to_string(sentence.tokens.size()) + " tokens");
    }
    CharSpanSet out;
    bool in_run = false;
    std::size_t run_end = 0;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const auto& token = sentence.tokens[i];
        if (tags[i] == BioTag::O) {
            in_run = false;
            continue;
        }
        const bool continues = in_run && tags[i] == BioTag::I;
        out.insert_range(continues ? run_end : token.start, token.end);
        in_run = true;
        run_end = token.end;
    }
    return out;
}

} // namespace toxspan
