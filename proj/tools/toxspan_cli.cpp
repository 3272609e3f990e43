#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "toxspan/checkpoint.hpp"
#include "toxspan/synthetic.hpp"
#include "toxspan/trainer.hpp"

using namespace toxspan;

namespace {

// --config, --seed and one --<key> flag per config key.
struct ConfigFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App& app)
    {
        app.add_option("--config", config_path, "key = value config file");
        app.add_option("--seed", seed, "seed for batching, initialisation and noise");
        for (const auto& k : config_keys()) options[k.name] = app.add_option("--" + k.name, values[k.name], k.help);
    }

    TrainConfig resolve() const
    {
        TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
        if (seed) cfg.set_seed(*seed);
        for (const auto& k : config_keys()) {
            if (options.at(k.name)->count() > 0) apply_setting(cfg, k.name, values.at(k.name));
        }
        cfg.validate();
        return cfg;
    }
};

std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

void print_score(std::ostream& out, const ScoreTriple& s)
{
    char line[128];
    std::snprintf(line, sizeof line, "f1\t%.6f\nprecision\t%.6f\nrecall\t%.6f\n", s.f1, s.precision, s.recall);
    out << line;
}

std::vector<double> parse_epsilons(const std::string& list)
{
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = std::string(toxspan::detail::trim(item));
        out.push_back(toxspan::detail::parse_number<double>("--epsilons", item));
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Toxic span detection with a BiGRU-CRF tagger and virtual adversarial training"};
    app.require_subcommand(1);

    ConfigFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "train a model and write its checkpoint and report");
    train_flags.attach(*train_cmd);

    std::string eval_ckpt, eval_data;
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a labeled CSV");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data", eval_data, "labeled CSV")->required();

    std::string pred_ckpt, pred_input, pred_output;
    auto* predict_cmd = app.add_subcommand("predict", "write predicted offsets for each record");
    predict_cmd->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
    predict_cmd->add_option("--input", pred_input, "CSV with id and text columns")->required();
    predict_cmd->add_option("--output", pred_output, "predictions file (default: stdout)");

    ConfigFlags sweep_flags;
    std::string sweep_eps = "0,0.5,1,2,4", sweep_output;
    auto* sweep_cmd = app.add_subcommand("sweep", "train once per perturbation norm and tabulate F1");
    sweep_flags.attach(*sweep_cmd);
    sweep_cmd->add_option("--epsilons", sweep_eps, "comma-separated epsilon values")->capture_default_str();
    sweep_cmd->add_option("--output", sweep_output, "sweep TSV (default: stdout)");

    std::string stats_data, stats_kde;
    double stats_bandwidth = 0.0;
    std::size_t stats_grid = 101;
    auto* stats_cmd = app.add_subcommand("stats", "corpus statistics and toxicity density");
    stats_cmd->add_option("--data", stats_data, "labeled CSV")->required();
    stats_cmd->add_option("--bandwidth", stats_bandwidth, "KDE bandwidth (0 = Scott's rule)")->capture_default_str();
    stats_cmd->add_option("--grid", stats_grid, "KDE grid points on [0, 1]")->capture_default_str();
    stats_cmd->add_option("--kde-output", stats_kde, "density TSV path (default: after the summary on stdout)");

    SynthConfig synth_cfg;
    std::string synth_output;
    bool synth_unlabeled = false;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    synth_cmd->add_option("--output", synth_output, "CSV path")->required();
    synth_cmd->add_option("--records", synth_cfg.records, "record count")->capture_default_str();
    synth_cmd->add_option("--seed", synth_cfg.seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--toxic-rate", synth_cfg.toxic_rate, "share of toxic records")->capture_default_str();
    synth_cmd->add_option("--obfuscation", synth_cfg.obfuscation, "per toxic word")->capture_default_str();
    synth_cmd->add_option("--label-dropout", synth_cfg.label_dropout, "per gold span")->capture_default_str();
    synth_cmd->add_option("--case-noise", synth_cfg.case_noise, "per word")->capture_default_str();
    synth_cmd->add_option("--id-prefix", synth_cfg.id_prefix, "record id prefix")->capture_default_str();
    synth_cmd->add_flag("--unlabeled", synth_unlabeled, "omit the spans column");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            const auto cfg = train_flags.resolve();
            const auto data = load_datasets(cfg);
            auto result = train(cfg, data, &std::cerr);
            save_checkpoint(cfg.checkpoint_path, result.model, result.vocab);
            {
                auto out = open_output(cfg.report_path);
                write_report_tsv(out, result.report);
            }
            {
                auto out = open_output(cfg.report_path + ".log");
                write_report_log(out, result.report);
            }
            write_report_log(std::cout, result.report);
        } else if (eval_cmd->parsed()) {
            const auto ck = load_checkpoint(eval_ckpt);
            print_score(std::cout, evaluate(ck.model, ck.vocab, parse_corpus(std::filesystem::path(eval_data), true)).score);
        } else if (predict_cmd->parsed()) {
            const auto ck = load_checkpoint(pred_ckpt);
            const auto preds = predict_records(ck.model, ck.vocab, parse_corpus(std::filesystem::path(pred_input), false));
            if (pred_output.empty()) {
                write_predictions(std::cout, preds);
            } else {
                auto out = open_output(pred_output);
                write_predictions(out, preds);
            }
        } else if (sweep_cmd->parsed()) {
            const auto cfg = sweep_flags.resolve();
            const auto data = load_datasets(cfg);
            const auto eps = parse_epsilons(sweep_eps);
            if (sweep_output.empty()) {
                sweep_epsilon(cfg, data, eps, std::cout, &std::cerr);
            } else {
                auto out = open_output(sweep_output);
                sweep_epsilon(cfg, data, eps, out, &std::cerr);
            }
        } else if (stats_cmd->parsed()) {
            const auto s = corpus_stats(parse_corpus(std::filesystem::path(stats_data), true), stats_bandwidth,
                                        stats_grid, &std::cerr);
            write_stats_summary(std::cout, s);
            if (s.mean_toxicity) {
                if (stats_kde.empty()) {
                    std::cout << '\n';
                    write_kde_tsv(std::cout, s);
                } else {
                    auto out = open_output(stats_kde);
                    write_kde_tsv(out, s);
                }
            }
        } else if (synth_cmd->parsed()) {
            auto out = open_output(synth_output);
            write_corpus(out, synthesize(synth_cfg), !synth_unlabeled);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
