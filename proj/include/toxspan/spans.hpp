#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace toxspan {

// Half-open [start, end) range of character offsets into the original text.
struct CharSpan {
    std::size_t start{0};
    std::size_t end{0};

    [[nodiscard]] std::size_t length() const noexcept { return end - start; }
    friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

// Set of character offsets, stored sorted and unique.
class CharSpanSet {
public:
    CharSpanSet() = default;
    CharSpanSet(std::initializer_list<std::size_t> offsets) : offsets_(offsets) { canonicalize(); }
    explicit CharSpanSet(std::vector<std::size_t> offsets) : offsets_(std::move(offsets)) { canonicalize(); }

    static CharSpanSet range(std::size_t begin, std::size_t end)
    {
        CharSpanSet s;
        for (auto i = begin; i < end; ++i) s.offsets_.push_back(i);
        return s;
    }

    [[nodiscard]] bool empty() const noexcept { return offsets_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return offsets_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
    [[nodiscard]] auto begin() const noexcept { return offsets_.begin(); }
    [[nodiscard]] auto end() const noexcept { return offsets_.end(); }

    [[nodiscard]] bool contains(std::size_t offset) const
    {
        return std::binary_search(offsets_.begin(), offsets_.end(), offset);
    }

    // True if any offset lies in [begin, end).
    [[nodiscard]] bool intersects(std::size_t begin, std::size_t end) const
    {
        auto it = std::lower_bound(offsets_.begin(), offsets_.end(), begin);
        return it != offsets_.end() && *it < end;
    }

    [[nodiscard]] std::size_t intersection_size(const CharSpanSet& other) const
    {
        std::size_t count = 0;
        auto a = offsets_.begin();
        auto b = other.offsets_.begin();
        while (a != offsets_.end() && b != other.offsets_.end()) {
            if (*a < *b) {
                ++a;
            } else if (*b < *a) {
                ++b;
            } else {
                ++count;
                ++a;
                ++b;
            }
        }
        return count;
    }

    void insert_range(std::size_t begin, std::size_t end)
    {
        std::vector<std::size_t> merged;
        merged.reserve(offsets_.size() + (end > begin ? end - begin : 0));
        auto it = offsets_.begin();
        for (auto i = begin; i < end; ++i) {
            while (it != offsets_.end() && *it < i) merged.push_back(*it++);
            if (it != offsets_.end() && *it == i) ++it;
            merged.push_back(i);
        }
        merged.insert(merged.end(), it, offsets_.end());
        offsets_ = std::move(merged);
    }

    void merge(const CharSpanSet& other)
    {
        std::vector<std::size_t> merged;
        merged.reserve(offsets_.size() + other.offsets_.size());
        std::set_union(offsets_.begin(), offsets_.end(), other.offsets_.begin(), other.offsets_.end(),
                       std::back_inserter(merged));
        offsets_ = std::move(merged);
    }

    friend bool operator==(const CharSpanSet&, const CharSpanSet&) = default;

private:
    void canonicalize()
    {
        std::sort(offsets_.begin(), offsets_.end());
        offsets_.erase(std::unique(offsets_.begin(), offsets_.end()), offsets_.end());
    }

    std::vector<std::size_t> offsets_;
};

// Maximal contiguous runs, sorted by start.
inline std::vector<CharSpan> spans_from_offsets(const CharSpanSet& offsets)
{
    std::vector<CharSpan> spans;
    for (auto offset : offsets) {
        if (!spans.empty() && spans.back().end == offset) {
            spans.back().end = offset + 1;
        } else {
            spans.push_back({offset, offset + 1});
        }
    }
    return spans;
}

inline CharSpanSet offsets_from_spans(const std::vector<CharSpan>& spans)
{
    std::vector<std::size_t> offsets;
    for (const auto& span : spans) {
        if (span.end <= span.start) {
            throw std::invalid_argument("invalid span [" + std::to_string(span.start) + ", " +
                                        std::to_string(span.end) + ")");
        }
        for (auto i = span.start; i < span.end; ++i) offsets.push_back(i);
    }
    return CharSpanSet(std::move(offsets));
}

// "[3, 4, 5]" form used by span columns and prediction files.
inline std::string format_offsets(const CharSpanSet& offsets)
{
    std::string out = "[";
    bool first = true;
    for (auto offset : offsets) {
        if (!first) out += ", ";
        out += std::to_string(offset);
        first = false;
    }
    out += "]";
    return out;
}

} // namespace toxspan
