#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "batching.hpp"
#include "bio.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "kde.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "text.hpp"
#include "vat.hpp"
#include "vocab.hpp"

namespace toxspan {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepLog {
    std::size_t epoch{0};
    std::size_t step{0};
    double l_sup{0.0};
    double l_adv{0.0};
    double l_total{0.0};
    double grad_norm{0.0};
};

struct EpochLog {
    std::size_t epoch{0};
    double l_sup{0.0};
    double l_adv{0.0};
    double l_total{0.0};
    ScoreTriple val;
    std::size_t degenerate{0};
    double seconds{0.0}; // human log only
};

struct RunReport {
    std::vector<std::pair<std::string, std::string>> config;
    std::size_t train_sentences{0};
    std::size_t unlabeled_sentences{0};
    std::size_t vocab_size{0};
    std::vector<StepLog> steps;
    std::vector<EpochLog> epochs;
    std::size_t best_epoch{0};
    std::optional<ScoreTriple> test;
};

struct Datasets {
    std::vector<RawRecord> train;
    std::vector<RawRecord> val;
    std::vector<RawRecord> test; // optional, labeled
    std::vector<RawRecord> unlabeled;
};

inline Datasets load_datasets(const TrainConfig& cfg)
{
    if (cfg.train_path.empty()) throw ConfigError("data.train is required");
    Datasets d;
    auto train = parse_corpus(std::filesystem::path(cfg.train_path), true);
    if (cfg.val_path.empty()) {
        auto [tr, va] = train_val_split(train, cfg.val_fraction, cfg.seed);
        d.train = std::move(tr);
        d.val = std::move(va);
    } else {
        d.train = std::move(train);
        d.val = parse_corpus(std::filesystem::path(cfg.val_path), true);
    }
    if (!cfg.test_path.empty()) d.test = parse_corpus(std::filesystem::path(cfg.test_path), true);
    if (!cfg.unlabeled_path.empty()) d.unlabeled = parse_corpus(std::filesystem::path(cfg.unlabeled_path), false);
    return d;
}

// Sentences of each record, truncated, with BIO tags when `labeled`.
inline std::vector<TokenizedSentence> sentences_of(const std::vector<RawRecord>& records, std::size_t max_len,
                                                   bool labeled)
{
    std::vector<TokenizedSentence> out;
    for (const auto& r : records) {
        RawRecord source = r;
        if (!labeled) source.gold = {};
        for (auto& s : split_sentences(source)) {
            if (labeled) s.tags = bio_encode(s, r.gold);
            out.push_back(truncate(std::move(s), max_len));
        }
    }
    return out;
}

struct Evaluation {
    ScoreTriple score;
    std::vector<Prediction> predictions;
};

inline Evaluation evaluate(const SequenceModel& model, const Vocabulary& vocab, const std::vector<RawRecord>& records)
{
    if (records.empty()) throw std::invalid_argument("evaluate: no records");
    Evaluation ev;
    std::vector<ScoredPair> pairs;
    pairs.reserve(records.size());
    for (const auto& r : records) {
        auto pred = predict_spans(model, vocab, r);
        ev.predictions.push_back({r.id, pred});
        pairs.emplace_back(std::move(pred), r.gold);
    }
    ev.score = score_corpus(pairs);
    return ev;
}

inline std::vector<Prediction> predict_records(const SequenceModel& model, const Vocabulary& vocab,
                                               const std::vector<RawRecord>& records)
{
    std::vector<Prediction> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.id, predict_spans(model, vocab, r)});
    return out;
}

struct TrainResult {
    SequenceModel model; // best by validation F1
    Vocabulary vocab;
    RunReport report;
};

inline TrainResult train(const TrainConfig& cfg, const Datasets& data, std::ostream* log = nullptr)
{
    cfg.validate();
    if (data.train.empty()) throw TrainingError("no training records");
    if (data.val.empty()) throw TrainingError("no validation records");

    const auto max_len = cfg.model.max_seq_len;
    const auto labeled_sentences = sentences_of(data.train, max_len, true);
    if (labeled_sentences.empty()) throw TrainingError("training records contain no tokens");
    auto vocab = build_vocab(labeled_sentences, cfg.min_freq);

    ModelConfig mcfg = cfg.model;
    mcfg.vocab_size = vocab.size();
    SequenceModel model(mcfg);

    std::vector<EncodedSentence> labeled;
    for (const auto& s : labeled_sentences) labeled.push_back(encode_sentence(s, vocab, mcfg));
    std::vector<EncodedSentence> unlabeled;
    for (const auto& s : sentences_of(data.unlabeled, max_len, false)) {
        unlabeled.push_back(encode_sentence(s, vocab, mcfg));
    }

    RunReport report;
    report.config = config_entries(cfg);
    report.train_sentences = labeled.size();
    report.unlabeled_sentences = unlabeled.size();
    report.vocab_size = vocab.size();

    std::vector<ad::Tensor*> params;
    for (auto& [name, t] : model.parameters()) params.push_back(t);
    Adam adam(cfg.optim, params);
    BatchStream stream(labeled.size(), unlabeled.size(), cfg.batch_size, cfg.seed);
    std::mt19937_64 noise(cfg.vat.noise_seed);
    const bool adversarial = cfg.vat.adversarial_enabled();

    SequenceModel best = model;
    double best_f1 = -1.0;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochLog el;
        el.epoch = epoch;
        const auto pairs = stream.next_epoch();
        for (const auto& pair : pairs) {
            ++step;
            ad::Tape tape;
            auto b = bind(tape, model, true);
            std::vector<ad::Var> embeddings;
            std::vector<ad::Var> nlls;
            for (auto i : pair.labeled) {
                const auto& s = labeled[i];
                auto e = embed(b, s);
                embeddings.push_back(e);
                nlls.push_back(crf::nll(encode_emissions(b, e), b.crf, s.tags));
            }
            auto l_sup = ad::scale(ad::sum(ad::concat(nlls, ad::Axis::Rows)), 1.0 / static_cast<double>(nlls.size()));
            ad::Var total = l_sup;
            double l_adv_value = 0.0;
            if (adversarial) {
                for (auto i : pair.unlabeled) embeddings.push_back(embed(b, unlabeled[i]));
                AdversarialStats stats;
                auto l_adv = adversarial_loss(b, embeddings, cfg.vat, noise, &stats);
                el.degenerate += stats.degenerate;
                l_adv_value = l_adv.value().item();
                total = total_loss(l_sup, l_adv, cfg.vat.gamma);
            }
            StepLog sl{epoch, step, l_sup.value().item(), l_adv_value, total.value().item(), 0.0};
            if (!std::isfinite(sl.l_sup) || !std::isfinite(sl.l_adv) || !std::isfinite(sl.l_total)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step) + ": L_sup=" + std::to_string(sl.l_sup) +
                                    " L_adv=" + std::to_string(sl.l_adv) + " L_total=" + std::to_string(sl.l_total));
            }
            tape.backward(total);
            std::vector<ad::Tensor> grads;
            grads.reserve(b.ordered.size());
            for (const auto& v : b.ordered) grads.push_back(v.grad());
            sl.grad_norm = clip_global_norm(grads, cfg.clip_norm);
            if (!std::isfinite(sl.grad_norm)) {
                throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step) + ": L_total=" + std::to_string(sl.l_total));
            }
            adam.step(grads);
            el.l_sup += sl.l_sup;
            el.l_adv += sl.l_adv;
            el.l_total += sl.l_total;
            report.steps.push_back(sl);
        }
        const auto n = static_cast<double>(pairs.size());
        el.l_sup /= n;
        el.l_adv /= n;
        el.l_total /= n;
        el.val = evaluate(model, vocab, data.val).score;
        el.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (el.val.f1 > best_f1) {
            best_f1 = el.val.f1;
            best = model;
            report.best_epoch = epoch;
        }
        if (log) {
            char line[256];
            std::snprintf(line, sizeof line,
                          "epoch %zu  L_sup %.4f  L_adv %.4f  L_total %.4f  val F1 %.4f (P %.4f R %.4f)  %.1fs%s\n",
                          epoch, el.l_sup, el.l_adv, el.l_total, el.val.f1, el.val.precision, el.val.recall,
                          el.seconds, el.degenerate ? "  [degenerate perturbations]" : "");
            *log << line << std::flush;
        }
        report.epochs.push_back(el);
    }
    if (!data.test.empty()) report.test = evaluate(best, vocab, data.test).score;
    return {std::move(best), std::move(vocab), std::move(report)};
}

namespace detail {

inline std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

// Machine-readable report: config echo as comments, then one row per step,
// epoch, and the optional test score. Contains no timing, so it is
// reproducible byte for byte.
inline void write_report_tsv(std::ostream& out, const RunReport& r)
{
    for (const auto& [k, v] : r.config) out << "# " << k << " = " << v << '\n';
    out << "# train_sentences = " << r.train_sentences << '\n';
    out << "# unlabeled_sentences = " << r.unlabeled_sentences << '\n';
    out << "# vocab_size = " << r.vocab_size << '\n';
    out << "kind\tepoch\tstep\tl_sup\tl_adv\tl_total\tgrad_norm\tf1\tprecision\trecall\n";
    using detail::fmt;
    for (const auto& s : r.steps) {
        out << "step\t" << s.epoch << '\t' << s.step << '\t' << fmt(s.l_sup) << '\t' << fmt(s.l_adv) << '\t'
            << fmt(s.l_total) << '\t' << fmt(s.grad_norm) << "\t\t\t\n";
    }
    for (const auto& e : r.epochs) {
        out << "epoch\t" << e.epoch << "\t\t" << fmt(e.l_sup) << '\t' << fmt(e.l_adv) << '\t' << fmt(e.l_total)
            << "\t\t" << fmt(e.val.f1) << '\t' << fmt(e.val.precision) << '\t' << fmt(e.val.recall) << '\n';
    }
    out << "best\t" << r.best_epoch << "\t\t\t\t\t\t" << fmt(r.epochs.at(r.best_epoch - 1).val.f1) << "\t\t\n";
    if (r.test) {
        out << "test\t\t\t\t\t\t\t" << fmt(r.test->f1) << '\t' << fmt(r.test->precision) << '\t'
            << fmt(r.test->recall) << '\n';
    }
}

inline void write_report_log(std::ostream& out, const RunReport& r)
{
    out << "configuration:\n";
    for (const auto& [k, v] : r.config) out << "  " << k << " = " << v << '\n';
    out << "training sentences: " << r.train_sentences << ", unlabeled sentences: " << r.unlabeled_sentences
        << ", vocabulary: " << r.vocab_size << '\n';
    char line[256];
    for (const auto& e : r.epochs) {
        std::snprintf(line, sizeof line,
                      "epoch %zu: L_sup %.4f  L_adv %.4f  L_total %.4f  val F1 %.4f  P %.4f  R %.4f  (%.1fs)\n",
                      e.epoch, e.l_sup, e.l_adv, e.l_total, e.val.f1, e.val.precision, e.val.recall, e.seconds);
        out << line;
    }
    out << "best epoch: " << r.best_epoch << '\n';
    if (r.test) {
        std::snprintf(line, sizeof line, "test F1 %.4f  P %.4f  R %.4f\n", r.test->f1, r.test->precision,
                      r.test->recall);
        out << line;
    }
}

inline double best_val_f1(const RunReport& r) { return r.epochs.at(r.best_epoch - 1).val.f1; }

struct SweepRow {
    double epsilon{0.0};
    double val_f1{0.0};
    std::optional<double> test_f1;
};

// One training run per epsilon, everything else fixed. Rows are written to
// `out` as soon as each run finishes.
inline std::vector<SweepRow> sweep_epsilon(const TrainConfig& cfg, const Datasets& data,
                                           const std::vector<double>& epsilons, std::ostream& out,
                                           std::ostream* log = nullptr)
{
    if (epsilons.size() < 2) throw ConfigError("sweep needs at least two epsilon values");
    std::vector<SweepRow> rows;
    out << "epsilon\tval_f1\ttest_f1\n" << std::flush;
    for (double eps : epsilons) {
        TrainConfig c = cfg;
        c.vat.epsilon = eps;
        if (log) *log << "sweep: epsilon = " << eps << '\n';
        auto result = train(c, data, log);
        SweepRow row{eps, best_val_f1(result.report), std::nullopt};
        if (result.report.test) row.test_f1 = result.report.test->f1;
        out << detail::format_double(eps) << '\t' << detail::fmt(row.val_f1) << '\t'
            << (row.test_f1 ? detail::fmt(*row.test_f1) : std::string()) << '\n'
            << std::flush;
        rows.push_back(row);
    }
    return rows;
}

struct CorpusStats {
    std::size_t records{0};
    double fraction_with_spans{0.0};
    std::optional<double> mean_toxicity;
    std::size_t sentences{0};
    double bandwidth{0.0};
    std::vector<double> grid;
    std::vector<double> density;
};

// `bandwidth` <= 0 selects Scott's rule.
inline CorpusStats corpus_stats(const std::vector<RawRecord>& records, double bandwidth, std::size_t grid_size,
                                std::ostream* warn = nullptr)
{
    if (records.empty()) throw std::invalid_argument("stats: no records");
    if (grid_size < 2) throw ConfigError("stats: grid size must be >= 2");
    CorpusStats s;
    s.records = records.size();
    std::size_t with_spans = 0;
    std::vector<double> tox;
    for (const auto& r : records) {
        with_spans += r.gold.empty() ? 0 : 1;
        if (r.toxicity) tox.push_back(*r.toxicity);
        s.sentences += split_sentences(r).size();
    }
    s.fraction_with_spans = static_cast<double>(with_spans) / static_cast<double>(records.size());
    if (tox.size() != records.size()) {
        if (warn) *warn << "warning: toxicity column missing or incomplete; skipping density estimate\n";
        return s;
    }
    double sum = 0.0;
    for (double t : tox) sum += t;
    s.mean_toxicity = sum / static_cast<double>(tox.size());
    s.bandwidth = bandwidth > 0.0 ? bandwidth : scott_bandwidth(tox);
    if (!(s.bandwidth > 0.0)) s.bandwidth = 0.05; // all values identical
    s.grid = linspace(0.0, 1.0, grid_size);
    s.density = gaussian_kde(tox, s.bandwidth, s.grid);
    return s;
}

inline void write_stats_summary(std::ostream& out, const CorpusStats& s)
{
    char line[128];
    out << "records\t" << s.records << '\n';
    std::snprintf(line, sizeof line, "fraction_with_spans\t%.6f\n", s.fraction_with_spans);
    out << line;
    if (s.mean_toxicity) {
        std::snprintf(line, sizeof line, "mean_toxicity\t%.6f\n", *s.mean_toxicity);
        out << line;
        std::snprintf(line, sizeof line, "kde_bandwidth\t%.6f\n", s.bandwidth);
        out << line;
    }
    out << "sentences\t" << s.sentences << '\n';
}

inline void write_kde_tsv(std::ostream& out, const CorpusStats& s)
{
    out << "toxicity\tdensity\n";
    for (std::size_t i = 0; i < s.grid.size(); ++i) out << detail::fmt(s.grid[i]) << '\t' << detail::fmt(s.density[i]) << '\n';
}

} // namespace toxspan
