#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ad/ops.hpp"
#include "bio.hpp"
#include "corpus.hpp"
#include "crf.hpp"
#include "crf_ops.hpp"
#include "text.hpp"
#include "vocab.hpp"

namespace toxspan {

// Characters map to 0 = pad, 1 = anything outside ASCII, 2 + code for ASCII.
inline constexpr std::size_t kCharAlphabetSize = 130;
inline constexpr std::size_t kCharPad = 0;

inline std::size_t char_id(char32_t c) { return c < 128 ? static_cast<std::size_t>(c) + 2 : 1; }

struct ModelConfig {
    std::size_t vocab_size{3};
    std::size_t embed_dim{50};
    std::size_t hidden_dim{64};
    std::size_t num_tags{kNumTags};
    std::size_t max_seq_len{96};
    bool use_chars{false};
    std::size_t char_alphabet_size{kCharAlphabetSize};
    std::size_t char_embed_dim{16};
    std::size_t char_window{3};
    std::size_t char_feature_dim{32};
    std::size_t max_word_chars{24};
    std::uint64_t seed{13};

    void validate() const
    {
        auto positive = [](std::size_t v, const char* name) {
            if (v < 1) throw std::invalid_argument(std::string("model config: ") + name + " must be >= 1");
        };
        positive(vocab_size, "vocab_size");
        positive(embed_dim, "embed_dim");
        positive(hidden_dim, "hidden_dim");
        positive(num_tags, "num_tags");
        if (max_seq_len < 3) throw std::invalid_argument("model config: max_seq_len must be >= 3");
        if (use_chars) {
            positive(char_alphabet_size, "char_alphabet_size");
            positive(char_embed_dim, "char_embed_dim");
            positive(char_feature_dim, "char_feature_dim");
            positive(max_word_chars, "max_word_chars");
            if (char_window % 2 == 0) throw std::invalid_argument("model config: char_window must be odd");
        }
    }

    // Width of the embedding sequence e.
    [[nodiscard]] std::size_t input_dim() const { return embed_dim + (use_chars ? char_feature_dim : 0); }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Model-ready view of a sentence, already truncated to max_seq_len.
struct EncodedSentence {
    std::vector<std::size_t> word_ids;
    std::vector<std::vector<std::size_t>> char_ids;
    std::vector<std::size_t> tags; // empty when unlabeled

    [[nodiscard]] std::size_t length() const noexcept { return word_ids.size(); }
    [[nodiscard]] bool labeled() const noexcept { return !tags.empty(); }
};

inline TokenizedSentence truncate(TokenizedSentence s, std::size_t max_len)
{
    if (s.tokens.size() > max_len) {
        s.tokens.resize(max_len);
        if (s.tags) s.tags->resize(max_len);
    }
    return s;
}

inline EncodedSentence encode_sentence(const TokenizedSentence& sentence, const Vocabulary& vocab,
                                       const ModelConfig& cfg)
{
    EncodedSentence out;
    const auto n = std::min(sentence.tokens.size(), cfg.max_seq_len);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& tok = sentence.tokens[i];
        out.word_ids.push_back(vocab.lookup(tok.surface));
        if (cfg.use_chars) {
            std::vector<std::size_t> ids;
            for (char32_t c : utf8::decode(tok.surface)) {
                if (ids.size() == cfg.max_word_chars) break;
                ids.push_back(char_id(c));
            }
            if (ids.empty()) ids.push_back(kCharPad);
            out.char_ids.push_back(std::move(ids));
        }
        if (sentence.tags) out.tags.push_back(static_cast<std::size_t>((*sentence.tags)[i]));
    }
    return out;
}

struct GruParams {
    ad::Tensor wx; // in x 3H, gate order (update, reset, candidate)
    ad::Tensor wh; // H x 3H
    ad::Tensor b;  // 1 x 3H
};

// Word embeddings (+ char CNN features) -> BiGRU -> linear emissions -> CRF.
struct SequenceModel {
    ModelConfig config;
    ad::Tensor embedding;
    ad::Tensor char_embedding;
    ad::Tensor char_filters;
    ad::Tensor char_bias;
    GruParams forward_gru;
    GruParams backward_gru;
    ad::Tensor emit_w;
    ad::Tensor emit_b;
    ad::Tensor transitions;
    ad::Tensor start;
    ad::Tensor stop;

    SequenceModel() = default;

    explicit SequenceModel(ModelConfig cfg) : config(std::move(cfg))
    {
        config.validate();
        const auto D = config.input_dim();
        const auto H = config.hidden_dim;
        const auto K = config.num_tags;
        embedding = ad::Tensor(config.vocab_size, config.embed_dim);
        if (config.use_chars) {
            char_embedding = ad::Tensor(config.char_alphabet_size, config.char_embed_dim);
            char_filters = ad::Tensor(config.char_window * config.char_embed_dim, config.char_feature_dim);
            char_bias = ad::Tensor(1, config.char_feature_dim);
        }
        for (auto* g : {&forward_gru, &backward_gru}) *g = {ad::Tensor(D, 3 * H), ad::Tensor(H, 3 * H), ad::Tensor(1, 3 * H)};
        emit_w = ad::Tensor(2 * H, K);
        emit_b = ad::Tensor(1, K);
        transitions = ad::Tensor(K, K);
        start = ad::Tensor(1, K);
        stop = ad::Tensor(1, K);

        std::mt19937_64 rng(config.seed);
        std::uniform_real_distribution<double> init(-0.1, 0.1);
        for (auto& [name, t] : parameters()) {
            if (name.starts_with("crf.")) continue; // CRF scores start at zero
            for (auto& v : t->data()) v = init(rng);
        }
    }

    // Stable, ordered list of trainable tensors.
    std::vector<std::pair<std::string, ad::Tensor*>> parameters()
    {
        std::vector<std::pair<std::string, ad::Tensor*>> out{{"embedding", &embedding}};
        if (config.use_chars) {
            out.emplace_back("char.embedding", &char_embedding);
            out.emplace_back("char.filters", &char_filters);
            out.emplace_back("char.bias", &char_bias);
        }
        out.emplace_back("gru.fwd.wx", &forward_gru.wx);
        out.emplace_back("gru.fwd.wh", &forward_gru.wh);
        out.emplace_back("gru.fwd.b", &forward_gru.b);
        out.emplace_back("gru.bwd.wx", &backward_gru.wx);
        out.emplace_back("gru.bwd.wh", &backward_gru.wh);
        out.emplace_back("gru.bwd.b", &backward_gru.b);
        out.emplace_back("emit.w", &emit_w);
        out.emplace_back("emit.b", &emit_b);
        out.emplace_back("crf.transitions", &transitions);
        out.emplace_back("crf.start", &start);
        out.emplace_back("crf.stop", &stop);
        return out;
    }

    std::vector<std::pair<std::string, const ad::Tensor*>> parameters() const
    {
        auto list = const_cast<SequenceModel*>(this)->parameters();
        std::vector<std::pair<std::string, const ad::Tensor*>> out;
        out.reserve(list.size());
        for (auto& [n, t] : list) out.emplace_back(std::move(n), t);
        return out;
    }

    [[nodiscard]] crf::CrfParams crf_params() const { return {transitions, start, stop}; }
};

struct GruVars {
    ad::Var wx, wh, b;
};

// Model parameters as leaves on one tape, read in place.
struct BoundModel {
    const SequenceModel* model{nullptr};
    ad::Var embedding;
    ad::Var char_embedding;
    ad::Var char_filters;
    ad::Var char_bias;
    GruVars forward_gru;
    GruVars backward_gru;
    ad::Var emit_w;
    ad::Var emit_b;
    crf::CrfVars crf;
    std::vector<ad::Var> ordered; // same order as SequenceModel::parameters()
};

inline BoundModel bind(ad::Tape& tape, const SequenceModel& m, bool requires_grad)
{
    BoundModel b;
    b.model = &m;
    auto leaf = [&](const ad::Tensor& t) {
        auto v = tape.external(t, requires_grad);
        b.ordered.push_back(v);
        return v;
    };
    b.embedding = leaf(m.embedding);
    if (m.config.use_chars) {
        b.char_embedding = leaf(m.char_embedding);
        b.char_filters = leaf(m.char_filters);
        b.char_bias = leaf(m.char_bias);
    }
    b.forward_gru = {leaf(m.forward_gru.wx), leaf(m.forward_gru.wh), leaf(m.forward_gru.b)};
    b.backward_gru = {leaf(m.backward_gru.wx), leaf(m.backward_gru.wh), leaf(m.backward_gru.b)};
    b.emit_w = leaf(m.emit_w);
    b.emit_b = leaf(m.emit_b);
    b.crf.transitions = leaf(m.transitions);
    b.crf.start = leaf(m.start);
    b.crf.stop = leaf(m.stop);
    return b;
}

namespace detail {

// Char CNN: one window per character, tanh, max-pool over the word.
inline ad::Var char_features(const BoundModel& b, const EncodedSentence& s)
{
    using namespace ad;
    const auto& cfg = b.model->config;
    const auto w = cfg.char_window;
    const auto half = w / 2;
    std::vector<std::size_t> unfolded;
    std::vector<std::size_t> word_rows;
    for (const auto& ids : s.char_ids) {
        for (std::size_t c : ids) {
            if (c >= cfg.char_alphabet_size) throw std::out_of_range("char id " + std::to_string(c) + " out of range");
        }
        for (std::size_t j = 0; j < ids.size(); ++j) {
            for (std::size_t k = 0; k < w; ++k) {
                const auto pos = j + k; // position in the padded word
                unfolded.push_back(pos < half || pos - half >= ids.size() ? kCharPad : ids[pos - half]);
            }
        }
        word_rows.push_back(ids.size());
    }
    auto chars = gather_rows(b.char_embedding, unfolded);
    const auto windows = unfolded.size() / w;
    auto conv = tanh(add(matmul(reshape(chars, windows, w * cfg.char_embed_dim), b.char_filters), b.char_bias));
    std::vector<Var> pooled;
    std::size_t row = 0;
    for (auto n : word_rows) {
        pooled.push_back(max(slice(conv, Axis::Rows, row, row + n), Axis::Rows));
        row += n;
    }
    return concat(pooled, Axis::Rows);
}

// Returns the T x H hidden states; `reverse` runs right to left.
inline ad::Var gru_pass(const GruVars& g, const ad::Var& x, std::size_t hidden, bool reverse)
{
    using namespace ad;
    const auto T = x.shape().rows;
    const auto H = hidden;
    auto xw = add(matmul(x, g.wx), g.b);
    std::vector<Var> states(T);
    Var h = x.tape().constant(Tensor(1, H));
    for (std::size_t step = 0; step < T; ++step) {
        const auto t = reverse ? T - 1 - step : step;
        auto xt = slice(xw, Axis::Rows, t, t + 1);
        auto hu = matmul(h, g.wh);
        auto zr = sigmoid(add(slice(xt, Axis::Cols, 0, 2 * H), slice(hu, Axis::Cols, 0, 2 * H)));
        auto z = slice(zr, Axis::Cols, 0, H);
        auto r = slice(zr, Axis::Cols, H, 2 * H);
        auto n = tanh(add(slice(xt, Axis::Cols, 2 * H, 3 * H), mul(r, slice(hu, Axis::Cols, 2 * H, 3 * H))));
        h = add(n, mul(z, sub(h, n)));
        states[t] = h;
    }
    return concat(states, Axis::Rows);
}

} // namespace detail

// Embedding sequence e (T x input_dim); the VAT perturbation site.
inline ad::Var embed(const BoundModel& b, const EncodedSentence& s)
{
    using namespace ad;
    const auto& cfg = b.model->config;
    if (s.word_ids.empty()) throw std::invalid_argument("embed: empty sentence");
    if (s.word_ids.size() > cfg.max_seq_len) throw std::invalid_argument("embed: sentence longer than max_seq_len");
    for (auto id : s.word_ids) {
        if (id >= cfg.vocab_size) throw std::out_of_range("embed: token id " + std::to_string(id) + " out of range");
    }
    auto words = gather_rows(b.embedding, s.word_ids);
    if (!cfg.use_chars) return words;
    if (s.char_ids.size() != s.word_ids.size()) throw std::invalid_argument("embed: missing char ids");
    return concat({words, toxspan::detail::char_features(b, s)}, Axis::Cols);
}

// T x K emission scores from an embedding sequence.
inline ad::Var encode_emissions(const BoundModel& b, const ad::Var& e)
{
    using namespace ad;
    if (e.shape().rows == 0) throw std::invalid_argument("encode_emissions: empty input");
    const auto H = b.model->config.hidden_dim;
    auto fwd = toxspan::detail::gru_pass(b.forward_gru, e, H, false);
    auto bwd = toxspan::detail::gru_pass(b.backward_gru, e, H, true);
    return add(matmul(concat({fwd, bwd}, Axis::Cols), b.emit_w), b.emit_b);
}

inline ad::Tensor emissions(const SequenceModel& m, const EncodedSentence& s)
{
    ad::Tape tape;
    auto b = bind(tape, m, false);
    return encode_emissions(b, embed(b, s)).value();
}

// Sentence split -> truncate -> emissions -> Viterbi -> decode, unioned over
// sentences. `emit` maps a truncated sentence to its T x K emission matrix.
template <typename EmissionFn>
CharSpanSet predict_spans_with(const RawRecord& record, std::size_t max_seq_len, const crf::CrfParams& crf_params,
                               EmissionFn&& emit)
{
    RawRecord unlabeled{record.id, record.text, {}, std::nullopt};
    CharSpanSet out;
    for (auto& sentence : split_sentences(unlabeled)) {
        auto cut = truncate(std::move(sentence), max_seq_len);
        const ad::Tensor em = emit(static_cast<const TokenizedSentence&>(cut));
        const auto path = crf::viterbi(em, crf_params);
        out.merge(bio_decode(crf::to_bio(path), cut));
    }
    return out;
}

inline CharSpanSet predict_spans(const SequenceModel& m, const Vocabulary& vocab, const RawRecord& record)
{
    return predict_spans_with(record, m.config.max_seq_len, m.crf_params(), [&](const TokenizedSentence& s) {
        return emissions(m, encode_sentence(s, vocab, m.config));
    });
}

} // namespace toxspan
