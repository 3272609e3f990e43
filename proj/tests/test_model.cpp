#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "support/gradcheck.hpp"
#include "toxspan/checkpoint.hpp"
#include "toxspan/model.hpp"

using namespace toxspan;
using namespace toxspan::ad;

namespace {

ModelConfig small_config(bool chars = false)
{
    ModelConfig c;
    c.vocab_size = 12;
    c.embed_dim = 4;
    c.hidden_dim = 3;
    c.use_chars = chars;
    c.char_embed_dim = 2;
    c.char_feature_dim = 3;
    c.seed = 5;
    return c;
}

EncodedSentence sample(bool chars)
{
    EncodedSentence s;
    s.word_ids = {3, 0, 7, 11};
    if (chars) s.char_ids = {{5, 6}, {0}, {70, 71, 72}, {100}};
    return s;
}

} // namespace

TEST(Model, ConfigValidation)
{
    auto c = small_config();
    c.max_seq_len = 2;
    EXPECT_THROW(SequenceModel{c}, std::invalid_argument);
    c = small_config();
    c.hidden_dim = 0;
    EXPECT_THROW(SequenceModel{c}, std::invalid_argument);
}

TEST(Model, InitIsSeededAndCrfStartsAtZero)
{
    SequenceModel a(small_config()), b(small_config());
    EXPECT_EQ(a.embedding, b.embedding);
    EXPECT_EQ(a.transitions, Tensor(3, 3));
    EXPECT_EQ(a.start, Tensor(1, 3));
    for (double v : a.emit_w.data()) {
        EXPECT_GE(v, -0.1);
        EXPECT_LE(v, 0.1);
    }
    auto c = small_config();
    c.seed = 6;
    EXPECT_NE(SequenceModel(c).embedding, a.embedding);
}

TEST(Model, EmbedLooksUpRowsAndHasExpectedWidth)
{
    SequenceModel m(small_config());
    Tape tape;
    auto b = bind(tape, m, false);
    auto e = embed(b, sample(false)).value();
    EXPECT_EQ(e.shape(), (Shape{4, 4}));
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(e(1, c), m.embedding(Vocabulary::kPad, c));

    SequenceModel mc(small_config(true));
    Tape t2;
    auto bc = bind(t2, mc, false);
    EXPECT_EQ(embed(bc, sample(true)).shape(), (Shape{4, 4 + 3}));
}

TEST(Model, EmbedRejectsBadIds)
{
    SequenceModel m(small_config());
    Tape tape;
    auto b = bind(tape, m, false);
    auto s = sample(false);
    s.word_ids[2] = 12;
    EXPECT_THROW(embed(b, s), std::out_of_range);
    EXPECT_THROW(embed(b, EncodedSentence{}), std::invalid_argument);
}

TEST(Model, EmissionShapeAndDirectionality)
{
    SequenceModel m(small_config());
    auto s = sample(false);
    auto em = emissions(m, s);
    EXPECT_EQ(em.shape(), (Shape{4, 3}));
    auto rev = s;
    std::reverse(rev.word_ids.begin(), rev.word_ids.end());
    auto em_rev = emissions(m, rev);
    bool differs = false;
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t k = 0; k < 3; ++k) differs = differs || std::abs(em(t, k) - em_rev(3 - t, k)) > 1e-9;
    EXPECT_TRUE(differs);
}

TEST(Model, ZeroWeightsGiveBias)
{
    SequenceModel m(small_config());
    m.emit_w.fill(0.0);
    m.emit_b = Tensor::row({0.5, -1.0, 2.0});
    auto em = emissions(m, sample(false));
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(em(t, k), m.emit_b[k]);
}

TEST(Model, FullForwardGradientsMatchFiniteDifferences)
{
    for (bool chars : {false, true}) {
        SequenceModel m(small_config(chars));
        auto s = sample(chars);
        s.tags = {1, 2, 0, 1};
        std::mt19937_64 rng(3);
        for (auto& [name, t] : m.parameters()) {
            *t = toxspan::testing::random_tensor(rng, t->rows(), t->cols());
        }
        std::vector<Tensor> inputs;
        for (auto& [name, t] : m.parameters()) inputs.push_back(*t);
        auto fn = [&](Tape& tape, const std::vector<Var>& v) {
            SequenceModel probe = m;
            auto params = probe.parameters();
            for (std::size_t i = 0; i < params.size(); ++i) *params[i].second = v[i].value();
            // rebind onto the given leaves so gradients land on them
            BoundModel b;
            b.model = &m;
            std::size_t i = 0;
            b.embedding = v[i++];
            if (chars) {
                b.char_embedding = v[i++];
                b.char_filters = v[i++];
                b.char_bias = v[i++];
            }
            b.forward_gru = {v[i], v[i + 1], v[i + 2]};
            i += 3;
            b.backward_gru = {v[i], v[i + 1], v[i + 2]};
            i += 3;
            b.emit_w = v[i++];
            b.emit_b = v[i++];
            b.crf = {v[i], v[i + 1], v[i + 2]};
            (void)tape;
            return crf::nll(encode_emissions(b, embed(b, s)), b.crf, s.tags);
        };
        auto r = toxspan::testing::grad_check(fn, inputs);
        EXPECT_LE(r.max_rel_error, 1e-4) << "chars=" << chars;
    }
}

TEST(Model, PredictEmptyText)
{
    SequenceModel m(small_config());
    Vocabulary v;
    EXPECT_TRUE(predict_spans(m, v, RawRecord{"x", "", {}, std::nullopt}).empty());
    EXPECT_TRUE(predict_spans(m, v, RawRecord{"x", "   \n ", {}, std::nullopt}).empty());
}

TEST(Model, PlantedEmissionsSelectExactTokens)
{
    const RawRecord rec{"1", "You fool. Such a fool, honestly!", {}, std::nullopt};
    auto planted = [](const TokenizedSentence& s) {
        Tensor em(s.tokens.size(), 3, 0.0);
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            if (s.tokens[i].surface == "fool") em(i, static_cast<std::size_t>(BioTag::B)) = 10.0;
            else em(i, static_cast<std::size_t>(BioTag::O)) = 10.0;
        }
        return em;
    };
    auto got = predict_spans_with(rec, 96, crf::CrfParams::zeros(3), planted);
    CharSpanSet expected = CharSpanSet::range(4, 8);
    expected.merge(CharSpanSet::range(17, 21));
    EXPECT_EQ(got, expected);
}

TEST(Model, TruncationNeverPredictsBeyondLimit)
{
    std::string text;
    for (int i = 0; i < 10; ++i) text += "fool ";
    const RawRecord rec{"1", text, {}, std::nullopt};
    auto all_toxic = [](const TokenizedSentence& s) {
        Tensor em(s.tokens.size(), 3, 0.0);
        for (std::size_t i = 0; i < s.tokens.size(); ++i) em(i, 1) = 10.0;
        return em;
    };
    auto got = predict_spans_with(rec, 4, crf::CrfParams::zeros(3), all_toxic);
    ASSERT_FALSE(got.empty());
    EXPECT_LT(got.offsets().back(), 20u); // 4th token ends at offset 19
    EXPECT_EQ(got.offsets().back(), 18u);
}

TEST(Checkpoint, RoundTripAndMismatches)
{
    auto cfg = small_config(true);
    Vocabulary vocab;
    std::vector<std::string> toks = vocab.tokens();
    for (int i = 0; i < 9; ++i) toks.push_back("w" + std::to_string(i));
    vocab = Vocabulary::from_tokens(toks);
    SequenceModel m(cfg);
    m.transitions(0, 2) = 1.25;
    const auto path = std::filesystem::temp_directory_path() / "toxspan_ck_test.json";
    save_checkpoint(path, m, vocab);
    auto back = load_checkpoint(path);
    EXPECT_EQ(back.vocab, vocab);
    EXPECT_EQ(back.model.config, cfg);
    auto a = m.parameters();
    auto b = back.model.parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].second, *b[i].second) << a[i].first;

    auto j = checkpoint_to_json(m, vocab);
    j["version"] = 99;
    EXPECT_THROW(checkpoint_from_json(j), CheckpointError);
    j = checkpoint_to_json(m, vocab);
    j["parameters"][2]["shape"] = {1, 1};
    try {
        checkpoint_from_json(j);
        FAIL();
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("char.filters"), std::string::npos) << e.what();
    }
    j = checkpoint_to_json(m, vocab);
    j["config"]["vocab_size"] = 50;
    EXPECT_THROW(checkpoint_from_json(j), CheckpointError);
    std::filesystem::remove(path);
}
