#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "eunn/errors.hpp"
#include "eunn/rng.hpp"
#include "eunn/rnn_cell.hpp"
#include "eunn/tasks.hpp"

namespace eunn {

// ---------------------------------------------------------------------------
// RMSProp
// ---------------------------------------------------------------------------

struct RmsPropConfig {
    double lr = 0.001;
    double decay = 0.9;
    double momentum = 0.0;
    double epsilon = 1e-8;

    void validate() const {
        if (lr < 0 || decay < 0 || decay >= 1 || momentum < 0 || momentum >= 1 ||
            epsilon <= 0)
            throw ConfigError("rmsprop: need lr >= 0, decay/momentum in [0,1), epsilon > 0");
    }
};

/// Per-parameter accumulators for the update
///   ms  <- decay * ms + (1 - decay) * g^2
///   mom <- momentum * mom + lr * g / sqrt(ms + epsilon)
///   p   <- p - mom
struct RmsPropState {
    RmsPropConfig cfg;
    std::vector<std::vector<double>> ms, mom;

    RmsPropState(const RmsPropConfig& c, const std::vector<std::span<double>>& params)
        : cfg(c) {
        cfg.validate();
        ms.reserve(params.size());
        mom.reserve(params.size());
        for (const auto& p : params) {
            ms.emplace_back(p.size(), 0.0);
            mom.emplace_back(p.size(), 0.0);
        }
    }
};

inline void rmsprop_step(RmsPropState& state, const std::vector<std::span<double>>& params,
                         const std::vector<std::span<double>>& grads) {
    check_same_size(params.size(), grads.size(), "rmsprop_step: array count");
    for (std::size_t a = 0; a < params.size(); ++a) {
        check_same_size(params[a].size(), grads[a].size(), "rmsprop_step: array shape");
        auto& ms = state.ms[a];
        auto& mom = state.mom[a];
        for (std::size_t i = 0; i < params[a].size(); ++i) {
            const double g = grads[a][i];
            if (!std::isfinite(g)) throw DivergedError("rmsprop_step: non-finite gradient");
            ms[i] = state.cfg.decay * ms[i] + (1.0 - state.cfg.decay) * g * g;
            mom[i] = state.cfg.momentum * mom[i] +
                     state.cfg.lr * g / std::sqrt(ms[i] + state.cfg.epsilon);
            params[a][i] -= mom[i];
        }
    }
}

inline double global_norm(const std::vector<std::span<double>>& grads) {
    double s = 0.0;
    for (const auto& g : grads)
        for (double x : g) s += x * x;
    return std::sqrt(s);
}

inline void clip_global_norm(const std::vector<std::span<double>>& grads, double max_norm) {
    const double n = global_norm(grads);
    if (n > max_norm && n > 0.0) {
        const double scale = max_norm / n;
        for (const auto& g : grads)
            for (double& x : g) x *= scale;
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t iters = 1000;
    std::size_t eval_interval = 50;
    std::uint64_t seed = 1;
    RmsPropConfig opt;
    LossKind loss = LossKind::cross_entropy;
    unsigned threads = 1;
    double clip = 0.0;  // 0 disables gradient clipping

    void validate() const {
        if (eval_interval == 0) throw ConfigError("train: eval_interval must be positive");
        if (threads == 0) throw ConfigError("train: threads must be positive");
        opt.validate();
    }
};

struct MetricsRow {
    std::size_t iter = 0;
    double loss = 0.0;
    std::optional<double> val_metric;
};

/// Outcome of one training run: the metrics stream plus a divergence flag.
struct TrainRun {
    std::vector<MetricsRow> rows;
    bool diverged = false;

    double best_loss() const {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : rows)
            if (std::isfinite(r.loss)) best = std::min(best, r.loss);
        return best;
    }

    double best_val() const {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& r : rows)
            if (r.val_metric && std::isfinite(*r.val_metric))
                best = std::max(best, *r.val_metric);
        return best;
    }
};

namespace detail {

inline SeqResult forward_backward(EurnnCell& m, const SequenceBatch& b, LossKind l,
                                  unsigned threads) {
    return sequence_forward_backward(m, b, l, threads);
}
inline VanillaSeqResult forward_backward(VanillaCell& m, const SequenceBatch& b, LossKind l,
                                         unsigned threads) {
    return vanilla_sequence_forward_backward(m, b, l, threads);
}

template <class Model>
double eval_metric_over(const Model& model, const std::vector<SequenceBatch>& eval_set,
                        LossKind loss, EvalMetricKind kind, unsigned threads) {
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& batch : eval_set) {
        const EvalResult r = sequence_evaluate(model, batch, loss, threads);
        const std::size_t m = batch.mask_count();
        weighted += m * (kind == EvalMetricKind::accuracy ? r.accuracy : r.loss);
        total += m;
    }
    return total ? weighted / double(total) : 0.0;
}

}  // namespace detail

/// Sample batch -> forward/backward -> RMSProp step, for the configured
/// budget. Evaluates on the source's fixed eval set every eval_interval
/// iterations (and on the final one). Deterministic given (config, seed):
/// the batch and eval streams are split off one master generator.
/// A non-finite loss stops the run early with a diagnostic row.
template <class Model>
TrainRun train(const TrainConfig& cfg, Model& model, BatchSource& source,
               std::optional<double> stop_below_loss = std::nullopt) {
    cfg.validate();
    TrainRun run;
    Rng master(cfg.seed);
    Rng rng_batch = master.split();
    Rng rng_eval = master.split();
    const std::vector<SequenceBatch> eval_set = source.eval_set(rng_eval);
    auto params = param_views(model);
    RmsPropState state(cfg.opt, params);
    for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
        const SequenceBatch batch = source.next_batch(rng_batch);
        MetricsRow row;
        row.iter = iter;
        try {
            auto result = detail::forward_backward(model, batch, cfg.loss, cfg.threads);
            row.loss = result.loss;
            auto gv = grad_views(result.grads);
            if (cfg.clip > 0.0) clip_global_norm(gv, cfg.clip);
            rmsprop_step(state, params, gv);
        } catch (const DivergedError&) {
            row.loss = std::numeric_limits<double>::quiet_NaN();
            run.rows.push_back(row);
            run.diverged = true;
            return run;
        }
        if ((iter + 1) % cfg.eval_interval == 0 || iter + 1 == cfg.iters)
            row.val_metric = detail::eval_metric_over(model, eval_set, cfg.loss,
                                                      source.eval_metric(), cfg.threads);
        run.rows.push_back(row);
        if (stop_below_loss && row.loss < *stop_below_loss) break;
    }
    return run;
}

}  // namespace eunn
