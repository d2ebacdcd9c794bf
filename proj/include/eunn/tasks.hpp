#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "eunn/errors.hpp"
#include "eunn/rng.hpp"
#include "eunn/rnn_cell.hpp"

namespace eunn {

// ---------------------------------------------------------------------------
// Copying memory task
// ---------------------------------------------------------------------------

/// Alphabet: n data symbols, then blank, then start-recall. Input layout is
/// M data symbols, T-1 blanks, the start-recall marker, M blanks; the target
/// is T+M blanks followed by the data. Total sequence length T + 2M.
struct CopyTaskConfig {
    std::size_t n_symbols = 8;  // data alphabet size n
    std::size_t m_len = 10;     // data length M
    std::size_t t_delay = 100;  // blank delay T
    std::size_t batch = 128;

    std::size_t alphabet() const { return n_symbols + 2; }
    std::size_t blank() const { return n_symbols; }
    std::size_t start_recall() const { return n_symbols + 1; }
    std::size_t seq_len() const { return t_delay + 2 * m_len; }

    void validate() const {
        if (n_symbols < 2 || m_len < 1 || t_delay < 1 || batch < 1)
            throw ConfigError("copy task: need n >= 2, M >= 1, T >= 1, batch >= 1");
    }
};

/// One-hot input batch with the whole output sequence scored (blanks count;
/// the loss mask covers every step, matching the memoryless baseline's
/// denominator T + 2M).
inline SequenceBatch copy_batch(const CopyTaskConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t T = cfg.seq_len(), B = cfg.batch, A = cfg.alphabet();
    SequenceBatch batch;
    batch.t_len = T;
    batch.batch = B;
    batch.n_in = A;
    batch.inputs.assign(T * B * A, 0.0);
    batch.targets_i.assign(T * B, int(cfg.blank()));
    batch.mask.assign(T * B, 1);
    for (std::size_t item = 0; item < B; ++item) {
        for (std::size_t m = 0; m < cfg.m_len; ++m) {
            const std::size_t sym = rng.below(cfg.n_symbols);
            batch.inputs[(m * B + item) * A + sym] = 1.0;
            batch.targets_i[(cfg.t_delay + cfg.m_len + m) * B + item] = int(sym);
        }
        for (std::size_t t = cfg.m_len; t < T; ++t) {
            const std::size_t sym =
                (t == cfg.m_len + cfg.t_delay - 1) ? cfg.start_recall() : cfg.blank();
            batch.inputs[(t * B + item) * A + sym] = 1.0;
        }
    }
    return batch;
}

/// Cross entropy (nats) of the strategy that outputs blanks then random data
/// symbols: M ln(n) / (T + 2M).
inline double memoryless_baseline(const CopyTaskConfig& cfg) {
    return double(cfg.m_len) * std::log(double(cfg.n_symbols)) /
           double(cfg.t_delay + 2 * cfg.m_len);
}

// ---------------------------------------------------------------------------
// MNIST (IDX format) ingestion
// ---------------------------------------------------------------------------

struct IdxData {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> bytes;

    std::size_t count() const { return dims.empty() ? 0 : dims[0]; }
    std::size_t item_size() const {
        std::size_t s = 1;
        for (std::size_t i = 1; i < dims.size(); ++i) s *= dims[i];
        return s;
    }
};

/// Read an IDX file (big-endian magic + dims + raw bytes). expected_magic is
/// 0x00000803 for image files, 0x00000801 for label files.
inline IdxData read_idx(const std::string& path, std::uint32_t expected_magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path);
    auto read_u32 = [&](std::size_t offset) -> std::uint32_t {
        unsigned char buf[4];
        if (!in.read(reinterpret_cast<char*>(buf), 4))
            throw IngestionError(path + ": truncated at offset " + std::to_string(offset));
        return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
               (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
    };
    const std::uint32_t magic = read_u32(0);
    if (magic != expected_magic)
        throw IngestionError(path + ": bad magic at offset 0 (got " + std::to_string(magic) +
                             ", want " + std::to_string(expected_magic) + ")");
    IdxData data;
    const std::size_t ndims = magic & 0xff;
    data.dims.resize(ndims);
    for (std::size_t i = 0; i < ndims; ++i) data.dims[i] = read_u32(4 + 4 * i);
    std::size_t total = 1;
    for (auto d : data.dims) total *= d;
    data.bytes.resize(total);
    if (!in.read(reinterpret_cast<char*>(data.bytes.data()), std::streamsize(total)))
        throw IngestionError(path + ": truncated payload at offset " +
                             std::to_string(4 + 4 * ndims));
    return data;
}

struct MnistConfig {
    std::string train_images, train_labels;
    std::string test_images, test_labels;  // optional; empty skips the split
    std::uint64_t permutation_seed = 92;
    std::size_t subset = 10000;    // training images taken from the head
    std::size_t val_size = 2000;   // validation images taken from the tail
    std::size_t downsample = 1;    // block-average factor; 28 % downsample == 0
    std::size_t batch = 128;
};

/// Pixel-sequence views of the MNIST splits. Every image becomes a scalar
/// sequence: block-averaged by the downsample factor, scaled to [0,1], then
/// reordered by one fixed permutation shared by train/validation/test. The
/// label is scored at the final step only.
class MnistTask {
public:
    explicit MnistTask(const MnistConfig& cfg) : cfg_(cfg) {
        if (cfg.downsample == 0 || 28 % cfg.downsample != 0)
            throw ConfigError("mnist: downsample must divide 28");
        images_ = read_idx(cfg.train_images, 0x00000803);
        labels_ = read_idx(cfg.train_labels, 0x00000801);
        if (images_.dims.size() != 3)
            throw IngestionError(cfg.train_images + ": expected 3 dims");
        if (images_.count() != labels_.count())
            throw IngestionError("mnist: image/label count mismatch");
        rows_ = images_.dims[1];
        cols_ = images_.dims[2];
        if (rows_ % cfg.downsample != 0 || cols_ % cfg.downsample != 0)
            throw ConfigError("mnist: downsample must divide the image size");
        if (!cfg.test_images.empty()) {
            test_images_ = read_idx(cfg.test_images, 0x00000803);
            test_labels_ = read_idx(cfg.test_labels, 0x00000801);
        }
        if (cfg.subset == 0) throw ConfigError("mnist: subset must be positive");
        if (cfg.subset + cfg.val_size > images_.count())
            throw ConfigError("mnist: subset + val_size exceeds the training file");
        const std::size_t steps = seq_len();
        Rng rng(cfg.permutation_seed);
        perm_.resize(steps);
        for (std::size_t i = 0; i < steps; ++i) perm_[i] = i;
        for (std::size_t i = steps; i-- > 1;) {
            const std::size_t j = rng.below(i + 1);
            std::swap(perm_[i], perm_[j]);
        }
    }

    std::size_t seq_len() const {
        return (rows_ / cfg_.downsample) * (cols_ / cfg_.downsample);
    }
    std::size_t train_count() const { return cfg_.subset; }
    std::size_t val_count() const { return cfg_.val_size; }
    std::size_t test_count() const { return test_images_.count(); }
    const std::vector<std::size_t>& permutation() const { return perm_; }

    /// Batch of training images sampled with replacement.
    SequenceBatch sample_train(std::size_t batch, Rng& rng) const {
        std::vector<std::size_t> idx(batch);
        for (auto& i : idx) i = rng.below(cfg_.subset);
        return make_batch(images_, labels_, idx);
    }

    /// The validation set (training-file tail) chunked into batches.
    std::vector<SequenceBatch> val_batches(std::size_t batch, std::size_t cap = 0) const {
        const std::size_t base = images_.count() - cfg_.val_size;
        std::size_t total = cfg_.val_size;
        if (cap > 0) total = std::min(total, cap);
        return chunked(images_, labels_, base, total, batch);
    }

    std::vector<SequenceBatch> test_batches(std::size_t batch, std::size_t cap = 0) const {
        std::size_t total = test_images_.count();
        if (cap > 0) total = std::min(total, cap);
        return chunked(test_images_, test_labels_, 0, total, batch);
    }

private:
    std::vector<SequenceBatch> chunked(const IdxData& images, const IdxData& labels,
                                       std::size_t base, std::size_t total,
                                       std::size_t batch) const {
        std::vector<SequenceBatch> out;
        for (std::size_t off = 0; off < total; off += batch) {
            std::vector<std::size_t> idx;
            for (std::size_t i = off; i < std::min(total, off + batch); ++i)
                idx.push_back(base + i);
            out.push_back(make_batch(images, labels, idx));
        }
        return out;
    }

    SequenceBatch make_batch(const IdxData& images, const IdxData& labels,
                             const std::vector<std::size_t>& idx) const {
        const std::size_t steps = seq_len(), B = idx.size(), d = cfg_.downsample;
        const std::size_t dcols = cols_ / d;
        SequenceBatch batch;
        batch.t_len = steps;
        batch.batch = B;
        batch.n_in = 1;
        batch.inputs.assign(steps * B, 0.0);
        batch.targets_i.assign(steps * B, 0);
        batch.mask.assign(steps * B, 0);
        std::vector<double> pixels(steps);
        for (std::size_t b = 0; b < B; ++b) {
            const std::uint8_t* img = images.bytes.data() + idx[b] * rows_ * cols_;
            for (std::size_t p = 0; p < steps; ++p) {
                const std::size_t r0 = (p / dcols) * d, c0 = (p % dcols) * d;
                double sum = 0.0;
                for (std::size_t r = 0; r < d; ++r)
                    for (std::size_t c = 0; c < d; ++c)
                        sum += img[(r0 + r) * cols_ + (c0 + c)];
                pixels[p] = sum / (255.0 * double(d * d));
            }
            for (std::size_t t = 0; t < steps; ++t)
                batch.inputs[t * B + b] = pixels[perm_[t]];
            batch.targets_i[(steps - 1) * B + b] = int(labels.bytes[idx[b]]);
            batch.mask[(steps - 1) * B + b] = 1;
        }
        return batch;
    }

    MnistConfig cfg_;
    IdxData images_, labels_, test_images_, test_labels_;
    std::size_t rows_ = 28, cols_ = 28;
    std::vector<std::size_t> perm_;
};

// ---------------------------------------------------------------------------
// Batch sources, the training loop's view of a task
// ---------------------------------------------------------------------------

enum class EvalMetricKind { loss, accuracy };

struct BatchSource {
    virtual ~BatchSource() = default;
    virtual SequenceBatch next_batch(Rng& rng) = 0;
    /// Fixed evaluation set, drawn once at training start.
    virtual std::vector<SequenceBatch> eval_set(Rng& rng) = 0;
    virtual EvalMetricKind eval_metric() const = 0;
};

struct CopySource final : BatchSource {
    CopyTaskConfig cfg;
    explicit CopySource(const CopyTaskConfig& c) : cfg(c) {}

    SequenceBatch next_batch(Rng& rng) override { return copy_batch(cfg, rng); }
    std::vector<SequenceBatch> eval_set(Rng& rng) override {
        return {copy_batch(cfg, rng)};
    }
    EvalMetricKind eval_metric() const override { return EvalMetricKind::loss; }
};

struct MnistSource final : BatchSource {
    const MnistTask& task;
    std::size_t batch, eval_cap;
    MnistSource(const MnistTask& t, std::size_t batch_size, std::size_t cap = 1024)
        : task(t), batch(batch_size), eval_cap(cap) {}

    SequenceBatch next_batch(Rng& rng) override { return task.sample_train(batch, rng); }
    std::vector<SequenceBatch> eval_set(Rng&) override {
        return task.val_batches(batch, eval_cap);
    }
    EvalMetricKind eval_metric() const override { return EvalMetricKind::accuracy; }
};

}  // namespace eunn
