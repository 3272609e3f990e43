#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "csv.hpp"
#include "spans.hpp"
#include "utf8.hpp"

namespace toxspan {

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RawRecord {
    std::string id;
    std::string text; // UTF-8; gold offsets count code points
    CharSpanSet gold;
    std::optional<double> toxicity;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::string lower_ascii(std::string_view s)
{
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

} // namespace detail

// Parses "[3, 4, 5]"; returns nullopt on malformed input.
inline std::optional<CharSpanSet> parse_span_literal(std::string_view literal)
{
    auto s = detail::trim(literal);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') return std::nullopt;
    s = detail::trim(s.substr(1, s.size() - 2));
    std::vector<std::size_t> offsets;
    while (!s.empty()) {
        const auto comma = s.find(',');
        const auto item = detail::trim(s.substr(0, comma));
        std::size_t value = 0;
        const auto* first = item.data();
        const auto* last = item.data() + item.size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (item.empty() || ec != std::errc{} || ptr != last) return std::nullopt;
        offsets.push_back(value);
        if (comma == std::string_view::npos) break;
        s = detail::trim(s.substr(comma + 1));
        if (s.empty()) return std::nullopt; // trailing comma
    }
    return CharSpanSet(std::move(offsets));
}

// Reads a CSV with a header row. Labeled files need `spans` and `text`;
// unlabeled files only `text`. `id` and `toxicity` are used when present.
inline std::vector<RawRecord> parse_corpus(std::istream& in, bool has_labels, const std::string& source = "<stream>")
{
    std::vector<csv::Row> rows;
    try {
        rows = csv::read(in);
    } catch (const csv::ParseError& e) {
        throw CorpusError(source + ": " + e.what());
    }
    if (rows.empty()) throw CorpusError(source + ": missing header row");

    std::optional<std::size_t> col_text, col_spans, col_id, col_tox;
    const auto& header = rows.front().fields;
    for (std::size_t i = 0; i < header.size(); ++i) {
        auto name = detail::lower_ascii(detail::trim(header[i]));
        if (i == 0 && name.starts_with("\xEF\xBB\xBF")) name = name.substr(3);
        if (name == "text") col_text = i;
        else if (name == "spans") col_spans = i;
        else if (name == "id") col_id = i;
        else if (name == "toxicity") col_tox = i;
    }
    if (!col_text) throw CorpusError(source + ": no 'text' column");
    if (has_labels && !col_spans) throw CorpusError(source + ": no 'spans' column in labeled file");

    std::vector<RawRecord> records;
    records.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& fields = rows[r].fields;
        const auto where = source + ": row " + std::to_string(r) + " (line " + std::to_string(rows[r].line) + ")";
        auto field = [&](std::size_t col) -> const std::string& {
            if (col >= fields.size()) throw CorpusError(where + ": expected at least " + std::to_string(col + 1) + " fields");
            return fields[col];
        };
        RawRecord rec;
        rec.text = field(*col_text);
        rec.id = col_id ? std::string(detail::trim(field(*col_id))) : std::to_string(r - 1);
        if (has_labels) {
            auto gold = parse_span_literal(field(*col_spans));
            if (!gold) throw CorpusError(where + ": malformed span literal '" + field(*col_spans) + "'");
            const auto length = utf8::length(rec.text);
            if (!gold->empty() && gold->offsets().back() >= length) {
                throw CorpusError(where + ": span offset " + std::to_string(gold->offsets().back()) +
                                  " outside text of length " + std::to_string(length));
            }
            rec.gold = std::move(*gold);
        }
        if (col_tox) {
            const auto cell = detail::trim(field(*col_tox));
            if (!cell.empty()) {
                try {
                    std::size_t used = 0;
                    const std::string owned(cell);
                    rec.toxicity = std::stod(owned, &used);
                    if (used != owned.size()) throw std::invalid_argument("trailing characters");
                } catch (const std::exception&) {
                    throw CorpusError(where + ": malformed toxicity '" + std::string(cell) + "'");
                }
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<RawRecord> parse_corpus(const std::filesystem::path& path, bool has_labels)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open " + path.string());
    return parse_corpus(in, has_labels, path.string());
}

inline void write_corpus(std::ostream& out, const std::vector<RawRecord>& records, bool with_labels)
{
    const bool with_tox = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.toxicity.has_value(); });
    out << "id";
    if (with_labels) out << ",spans";
    if (with_tox) out << ",toxicity";
    out << ",text\n";
    for (const auto& r : records) {
        out << csv::quote(r.id);
        if (with_labels) out << ',' << csv::quote(format_offsets(r.gold));
        if (with_tox) out << ',' << (r.toxicity ? std::to_string(*r.toxicity) : std::string());
        out << ',' << csv::quote(r.text) << '\n';
    }
}

struct Prediction {
    std::string id;
    CharSpanSet offsets;
};

// One line per record: "<id>\t[o1, o2, ...]".
inline void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions)
{
    for (const auto& p : predictions) out << p.id << '\t' << format_offsets(p.offsets) << '\n';
}

inline std::vector<Prediction> read_predictions(std::istream& in, const std::string& source = "<stream>")
{
    std::vector<Prediction> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw CorpusError(source + ": line " + std::to_string(lineno) + ": missing tab");
        auto offsets = parse_span_literal(std::string_view(line).substr(tab + 1));
        if (!offsets) throw CorpusError(source + ": line " + std::to_string(lineno) + ": malformed span literal");
        out.push_back({line.substr(0, tab), std::move(*offsets)});
    }
    return out;
}

} // namespace toxspan
