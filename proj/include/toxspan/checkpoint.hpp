#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "model.hpp"
#include "vocab.hpp"

namespace toxspan {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kCheckpointFormat = "toxspan-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    SequenceModel model;
    Vocabulary vocab;
};

inline nlohmann::json config_to_json(const ModelConfig& c)
{
    return {{"vocab_size", c.vocab_size},
            {"embed_dim", c.embed_dim},
            {"hidden_dim", c.hidden_dim},
            {"num_tags", c.num_tags},
            {"max_seq_len", c.max_seq_len},
            {"use_chars", c.use_chars},
            {"char_alphabet_size", c.char_alphabet_size},
            {"char_embed_dim", c.char_embed_dim},
            {"char_window", c.char_window},
            {"char_feature_dim", c.char_feature_dim},
            {"max_word_chars", c.max_word_chars},
            {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j)
{
    ModelConfig c;
    auto get = [&](const char* key, auto& field) {
        if (!j.contains(key)) throw CheckpointError(std::string("checkpoint config missing '") + key + "'");
        j.at(key).get_to(field);
    };
    get("vocab_size", c.vocab_size);
    get("embed_dim", c.embed_dim);
    get("hidden_dim", c.hidden_dim);
    get("num_tags", c.num_tags);
    get("max_seq_len", c.max_seq_len);
    get("use_chars", c.use_chars);
    get("char_alphabet_size", c.char_alphabet_size);
    get("char_embed_dim", c.char_embed_dim);
    get("char_window", c.char_window);
    get("char_feature_dim", c.char_feature_dim);
    get("max_word_chars", c.max_word_chars);
    get("seed", c.seed);
    return c;
}

inline nlohmann::json checkpoint_to_json(const SequenceModel& model, const Vocabulary& vocab)
{
    nlohmann::json params = nlohmann::json::array();
    for (const auto& [name, t] : model.parameters()) {
        params.push_back({{"name", name}, {"shape", {t->rows(), t->cols()}}, {"data", t->values()}});
    }
    return {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"config", config_to_json(model.config)},
            {"vocabulary", vocab.tokens()},
            {"parameters", std::move(params)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j)
{
    try {
        if (j.value("format", std::string()) != kCheckpointFormat) throw CheckpointError("not a toxspan checkpoint");
        const int version = j.value("version", -1);
        if (version != kCheckpointVersion) {
            throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
        }
        const auto config = config_from_json(j.at("config"));
        auto vocab = Vocabulary::from_tokens(j.at("vocabulary").get<std::vector<std::string>>());
        if (vocab.size() != config.vocab_size) {
            throw CheckpointError("vocabulary has " + std::to_string(vocab.size()) + " entries but config says " +
                                  std::to_string(config.vocab_size));
        }
        Checkpoint ck{SequenceModel(config), std::move(vocab)};
        const auto& stored = j.at("parameters");
        auto expected = ck.model.parameters();
        if (stored.size() != expected.size()) {
            throw CheckpointError("checkpoint holds " + std::to_string(stored.size()) + " parameters, model expects " +
                                  std::to_string(expected.size()));
        }
        for (std::size_t i = 0; i < expected.size(); ++i) {
            auto& [name, tensor] = expected[i];
            const auto& p = stored[i];
            if (p.at("name").get<std::string>() != name) {
                throw CheckpointError("parameter " + std::to_string(i) + " is '" + p.at("name").get<std::string>() +
                                      "', expected '" + name + "'");
            }
            const auto shape = p.at("shape").get<std::vector<std::size_t>>();
            if (shape.size() != 2 || shape[0] != tensor->rows() || shape[1] != tensor->cols()) {
                throw CheckpointError("parameter '" + name + "' has shape " + p.at("shape").dump() + ", expected " +
                                      tensor->shape().str());
            }
            auto data = p.at("data").get<std::vector<double>>();
            if (data.size() != tensor->size()) throw CheckpointError("parameter '" + name + "' has wrong data length");
            *tensor = ad::Tensor(shape[0], shape[1], std::move(data));
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const std::filesystem::path& path, const SequenceModel& model, const Vocabulary& vocab)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out << checkpoint_to_json(model, vocab).dump() << '\n';
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

} // namespace toxspan
