#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace toxspan {

// Document-level split under a seeded shuffle. Both halves keep input order.
template <typename Record>
std::pair<std::vector<Record>, std::vector<Record>> train_val_split(const std::vector<Record>& records,
                                                                    double val_fraction, std::uint64_t seed)
{
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw std::invalid_argument("train_val_split: val_fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(records.size())));
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::pair<std::vector<Record>, std::vector<Record>> out;
    for (auto i : train_idx) out.first.push_back(records[i]);
    for (auto i : val_idx) out.second.push_back(records[i]);
    return out;
}

// Indices into the labeled and unlabeled pools for one optimization step.
struct BatchPair {
    std::vector<std::size_t> labeled;
    std::vector<std::size_t> unlabeled;

    friend bool operator==(const BatchPair&, const BatchPair&) = default;
};

// Labeled pool is reshuffled every epoch; the unlabeled pool runs on its own
// cursor and engine, reshuffling whenever it wraps. The two engines are
// independent so the labeled order never depends on the unlabeled pool.
class BatchStream {
public:
    BatchStream(std::size_t labeled_count, std::size_t unlabeled_count, std::size_t batch_size, std::uint64_t seed)
        : labeled_(labeled_count), unlabeled_(unlabeled_count), batch_size_(batch_size),
          labeled_rng_(seed), unlabeled_rng_(seed ^ 0x9E3779B97F4A7C15ULL)
    {
        if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be >= 1");
        if (labeled_count == 0) throw std::invalid_argument("make_batches: empty labeled set");
        std::iota(labeled_.begin(), labeled_.end(), std::size_t{0});
        std::iota(unlabeled_.begin(), unlabeled_.end(), std::size_t{0});
        unlabeled_cursor_ = unlabeled_.size(); // forces a shuffle on first draw
    }

    std::vector<BatchPair> next_epoch()
    {
        std::shuffle(labeled_.begin(), labeled_.end(), labeled_rng_);
        std::vector<BatchPair> pairs;
        for (std::size_t b = 0; b < labeled_.size(); b += batch_size_) {
            BatchPair pair;
            const auto e = std::min(labeled_.size(), b + batch_size_);
            pair.labeled.assign(labeled_.begin() + static_cast<std::ptrdiff_t>(b),
                                labeled_.begin() + static_cast<std::ptrdiff_t>(e));
            pair.unlabeled = draw_unlabeled(std::min(batch_size_, unlabeled_.size()));
            pairs.push_back(std::move(pair));
        }
        return pairs;
    }

private:
    std::vector<std::size_t> draw_unlabeled(std::size_t count)
    {
        std::vector<std::size_t> out;
        out.reserve(count);
        while (out.size() < count) {
            if (unlabeled_cursor_ >= unlabeled_.size()) {
                std::shuffle(unlabeled_.begin(), unlabeled_.end(), unlabeled_rng_);
                unlabeled_cursor_ = 0;
            }
            out.push_back(unlabeled_[unlabeled_cursor_++]);
        }
        return out;
    }

    std::vector<std::size_t> labeled_;
    std::vector<std::size_t> unlabeled_;
    std::size_t batch_size_;
    std::size_t unlabeled_cursor_{0};
    std::mt19937_64 labeled_rng_;
    std::mt19937_64 unlabeled_rng_;
};

inline BatchStream make_batches(std::size_t labeled_count, std::size_t unlabeled_count, std::size_t batch_size,
                                std::uint64_t seed)
{
    return BatchStream(labeled_count, unlabeled_count, batch_size, seed);
}

} // namespace toxspan
