#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace toxspan {

enum class BioTag : std::uint8_t { O = 0, B = 1, I = 2 };

inline constexpr std::size_t kNumTags = 3;

inline char tag_char(BioTag tag)
{
    switch (tag) {
    case BioTag::O: return 'O';
    case BioTag::B: return 'B';
    case BioTag::I: return 'I';
    }
    return '?';
}

struct Token {
    std::string surface; // UTF-8
    std::size_t start{0}; // character offsets into the original text
    std::size_t end{0};
    std::size_t norm_id{0};

    friend bool operator==(const Token&, const Token&) = default;
};

struct TokenizedSentence {
    std::string record_id;
    std::vector<Token> tokens;
    std::optional<std::vector<BioTag>> tags;
};

} // namespace toxspan
