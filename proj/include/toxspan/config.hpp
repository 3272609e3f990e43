#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "vat.hpp"

namespace toxspan {

struct TrainConfig {
    ModelConfig model;
    VatConfig vat;
    AdamConfig optim;
    std::size_t epochs{3};
    std::size_t batch_size{32};
    double clip_norm{5.0};
    std::uint64_t seed{13};
    double val_fraction{0.15};
    std::size_t min_freq{1};
    std::string train_path;
    std::string unlabeled_path;
    std::string val_path;
    std::string test_path;
    std::string checkpoint_path{"model.ckpt.json"};
    std::string report_path{"report.tsv"};

    void validate() const
    {
        vat.validate();
        optim.validate();
        if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
        if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be > 0");
        if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("data.val_fraction must lie in (0, 1)");
        if (min_freq < 1) throw ConfigError("data.min_freq must be >= 1");
    }

    // One seed drives batching, initialisation and perturbation noise.
    void set_seed(std::uint64_t s)
    {
        seed = s;
        model.seed = s;
        vat.noise_seed = s;
    }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
    T out{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) throw ConfigError("invalid value '" + text + "' for " + key);
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& text)
{
    const auto t = toxspan::detail::lower_ascii(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("invalid boolean '" + text + "' for " + key);
}

inline std::string format_double(double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace detail

struct ConfigKey {
    std::string name;
    std::string help;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

// Every settable key; names double as CLI override flags.
inline const std::vector<ConfigKey>& config_keys()
{
    using detail::format_double;
    using detail::parse_bool;
    using detail::parse_number;
    auto size_key = [](std::string name, std::string help, auto member) {
        return ConfigKey{name, std::move(help),
                         [name, member](TrainConfig& c, const std::string& v) {
                             member(c) = parse_number<std::size_t>(name, v);
                         },
                         [member](const TrainConfig& c) { return std::to_string(member(const_cast<TrainConfig&>(c))); }};
    };
    auto u64_key = [](std::string name, std::string help, auto member) {
        return ConfigKey{name, std::move(help),
                         [name, member](TrainConfig& c, const std::string& v) {
                             member(c) = parse_number<std::uint64_t>(name, v);
                         },
                         [member](const TrainConfig& c) { return std::to_string(member(const_cast<TrainConfig&>(c))); }};
    };
    auto real_key = [](std::string name, std::string help, auto member) {
        return ConfigKey{name, std::move(help),
                         [name, member](TrainConfig& c, const std::string& v) {
                             member(c) = parse_number<double>(name, v);
                         },
                         [member](const TrainConfig& c) { return format_double(member(const_cast<TrainConfig&>(c))); }};
    };
    auto bool_key = [](std::string name, std::string help, auto member) {
        return ConfigKey{name, std::move(help),
                         [name, member](TrainConfig& c, const std::string& v) { member(c) = parse_bool(name, v); },
                         [member](const TrainConfig& c) {
                             return std::string(member(const_cast<TrainConfig&>(c)) ? "true" : "false");
                         }};
    };
    auto path_key = [](std::string name, std::string help, auto member) {
        return ConfigKey{name, std::move(help), [member](TrainConfig& c, const std::string& v) { member(c) = v; },
                         [member](const TrainConfig& c) { return member(const_cast<TrainConfig&>(c)); }};
    };

    static const std::vector<ConfigKey> keys{
        size_key("model.embed_dim", "word embedding width", [](TrainConfig& c) -> auto& { return c.model.embed_dim; }),
        size_key("model.hidden_dim", "GRU state width per direction",
                 [](TrainConfig& c) -> auto& { return c.model.hidden_dim; }),
        size_key("model.max_seq_len", "tokens kept per sentence",
                 [](TrainConfig& c) -> auto& { return c.model.max_seq_len; }),
        bool_key("model.use_chars", "add character-window word features",
                 [](TrainConfig& c) -> auto& { return c.model.use_chars; }),
        size_key("model.char_embed_dim", "character embedding width",
                 [](TrainConfig& c) -> auto& { return c.model.char_embed_dim; }),
        size_key("model.char_window", "character filter width",
                 [](TrainConfig& c) -> auto& { return c.model.char_window; }),
        size_key("model.char_feature_dim", "character feature width",
                 [](TrainConfig& c) -> auto& { return c.model.char_feature_dim; }),
        size_key("model.max_word_chars", "characters kept per word",
                 [](TrainConfig& c) -> auto& { return c.model.max_word_chars; }),
        u64_key("model.seed", "parameter initialisation seed", [](TrainConfig& c) -> auto& { return c.model.seed; }),
        real_key("vat.epsilon", "perturbation norm (0 disables)", [](TrainConfig& c) -> auto& { return c.vat.epsilon; }),
        real_key("vat.eta", "power-iteration step norm", [](TrainConfig& c) -> auto& { return c.vat.eta; }),
        size_key("vat.power_iterations", "gradient evaluations per perturbation",
                 [](TrainConfig& c) -> auto& { return c.vat.power_iterations; }),
        real_key("vat.gamma", "weight of the supervised loss", [](TrainConfig& c) -> auto& { return c.vat.gamma; }),
        ConfigKey{"vat.kl_mode", "emission-softmax or crf-marginals",
                  [](TrainConfig& c, const std::string& v) { c.vat.kl_mode = parse_kl_mode(v); },
                  [](const TrainConfig& c) { return to_string(c.vat.kl_mode); }},
        u64_key("vat.noise_seed", "perturbation noise seed", [](TrainConfig& c) -> auto& { return c.vat.noise_seed; }),
        real_key("train.learning_rate", "Adam step size",
                 [](TrainConfig& c) -> auto& { return c.optim.learning_rate; }),
        real_key("train.beta1", "Adam first-moment decay", [](TrainConfig& c) -> auto& { return c.optim.beta1; }),
        real_key("train.beta2", "Adam second-moment decay", [](TrainConfig& c) -> auto& { return c.optim.beta2; }),
        real_key("train.adam_epsilon", "Adam stabiliser", [](TrainConfig& c) -> auto& { return c.optim.epsilon; }),
        size_key("train.epochs", "passes over the labeled data", [](TrainConfig& c) -> auto& { return c.epochs; }),
        size_key("train.batch_size", "labeled sentences per step", [](TrainConfig& c) -> auto& { return c.batch_size; }),
        real_key("train.clip_norm", "global gradient norm limit", [](TrainConfig& c) -> auto& { return c.clip_norm; }),
        u64_key("train.seed", "batching and split seed", [](TrainConfig& c) -> auto& { return c.seed; }),
        real_key("data.val_fraction", "held-out share when no validation file is given",
                 [](TrainConfig& c) -> auto& { return c.val_fraction; }),
        size_key("data.min_freq", "minimum token count for the vocabulary",
                 [](TrainConfig& c) -> auto& { return c.min_freq; }),
        path_key("data.train", "labeled training CSV", [](TrainConfig& c) -> auto& { return c.train_path; }),
        path_key("data.unlabeled", "unlabeled text CSV", [](TrainConfig& c) -> auto& { return c.unlabeled_path; }),
        path_key("data.val", "labeled validation CSV", [](TrainConfig& c) -> auto& { return c.val_path; }),
        path_key("data.test", "labeled test CSV", [](TrainConfig& c) -> auto& { return c.test_path; }),
        path_key("train.checkpoint", "checkpoint output path",
                 [](TrainConfig& c) -> auto& { return c.checkpoint_path; }),
        path_key("train.report", "report TSV output path", [](TrainConfig& c) -> auto& { return c.report_path; }),
    };
    return keys;
}

inline const ConfigKey* find_config_key(const std::string& name)
{
    for (const auto& k : config_keys())
        if (k.name == name) return &k;
    return nullptr;
}

inline void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value)
{
    const auto* k = find_config_key(key);
    if (!k) throw ConfigError("unknown config key '" + key + "'");
    k->set(cfg, value);
}

// key=value lines; '#' starts a comment.
inline void apply_config_text(TrainConfig& cfg, std::istream& in, const std::string& source = "<config>")
{
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = std::string(detail::trim(line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(n) + ": expected key = value");
        try {
            apply_setting(cfg, std::string(detail::trim(line.substr(0, eq))),
                          std::string(detail::trim(line.substr(eq + 1))));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

inline TrainConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    TrainConfig cfg;
    apply_config_text(cfg, in, path.string());
    return cfg;
}

inline std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : config_keys()) out.emplace_back(k.name, k.get(cfg));
    return out;
}

inline std::string config_text(const TrainConfig& cfg)
{
    std::string out;
    for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
    return out;
}

} // namespace toxspan
