#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "eunn/complex_vec.hpp"
#include "eunn/errors.hpp"
#include "eunn/rng.hpp"
#include "eunn/unitary_ops.hpp"

namespace eunn {

// ---------------------------------------------------------------------------
// modReLU
// ---------------------------------------------------------------------------

/// modReLU(z, b)_i = z_i/|z_i| * ReLU(|z_i| + b_i). At z_i = 0 the phase
/// factor is undefined; the output (and gradient) are defined as 0 there.
inline void modrelu(const ComplexVec& z, const std::vector<double>& b, ComplexVec& out) {
    const std::size_t n = z.size();
    check_same_size(n, b.size(), "modrelu");
    if (out.size() != n) out = ComplexVec(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::sqrt(z.re[i] * z.re[i] + z.im[i] * z.im[i]);
        const double u = r + b[i];
        if (r == 0.0 || u <= 0.0) {
            out.re[i] = 0.0;
            out.im[i] = 0.0;
        } else {
            const double scale = u / r;
            out.re[i] = z.re[i] * scale;
            out.im[i] = z.im[i] * scale;
        }
    }
}

inline ComplexVec modrelu(const ComplexVec& z, const std::vector<double>& b) {
    ComplexVec out;
    modrelu(z, b, out);
    return out;
}

/// Reverse-mode modReLU. Active coordinates see the symmetric 2x2 Jacobian
/// of z -> z (1 + b/|z|); dead coordinates (|z| + b <= 0 or z = 0) pass
/// nothing. db is accumulated, dz overwritten.
inline void modrelu_backward(const ComplexVec& z, const std::vector<double>& b,
                             const ComplexVec& dy, ComplexVec& dz,
                             std::vector<double>& db) {
    const std::size_t n = z.size();
    check_same_size(n, dy.size(), "modrelu_backward");
    if (dz.size() != n) dz = ComplexVec(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double zr = z.re[i], zi = z.im[i];
        const double r = std::sqrt(zr * zr + zi * zi);
        const double u = r + b[i];
        if (r == 0.0 || u <= 0.0) {
            dz.re[i] = 0.0;
            dz.im[i] = 0.0;
            continue;
        }
        const double scale = u / r;
        const double k = b[i] / (r * r * r);
        dz.re[i] = dy.re[i] * (scale - k * zr * zr) + dy.im[i] * (-k * zr * zi);
        dz.im[i] = dy.re[i] * (-k * zr * zi) + dy.im[i] * (scale - k * zi * zi);
        db[i] += (dy.re[i] * zr + dy.im[i] * zi) / r;
    }
}

inline std::pair<ComplexVec, std::vector<double>> modrelu_backward(
    const ComplexVec& z, const std::vector<double>& b, const ComplexVec& dy) {
    ComplexVec dz;
    std::vector<double> db(b.size(), 0.0);
    modrelu_backward(z, b, dy, dz, db);
    return {std::move(dz), std::move(db)};
}

// ---------------------------------------------------------------------------
// Sequence data
// ---------------------------------------------------------------------------

/// A batch of input sequences with per-step targets and a loss mask.
/// inputs is [time][batch][n_in] row-major; classification targets live in
/// targets_i, regression targets in targets_r ([time][batch][n_target]).
struct SequenceBatch {
    std::size_t t_len = 0, batch = 0, n_in = 0, n_target = 0;
    std::vector<double> inputs;
    std::vector<int> targets_i;
    std::vector<double> targets_r;
    std::vector<char> mask;  // [time][batch], 1 = scored

    const double* input_at(std::size_t t, std::size_t b) const {
        return inputs.data() + (t * batch + b) * n_in;
    }
    const double* target_r_at(std::size_t t, std::size_t b) const {
        return targets_r.data() + (t * batch + b) * n_target;
    }
    int target_i_at(std::size_t t, std::size_t b) const {
        return targets_i[t * batch + b];
    }
    bool masked(std::size_t t, std::size_t b) const { return mask[t * batch + b] != 0; }

    std::size_t mask_count() const {
        std::size_t c = 0;
        for (char m : mask) c += (m != 0);
        return c;
    }
};

enum class LossKind { cross_entropy, mse };

// ---------------------------------------------------------------------------
// Losses (standalone forms; the sequence engine fuses the same math)
// ---------------------------------------------------------------------------

/// Mean cross entropy in nats over masked positions; softmax folded in with
/// max-subtraction. Empty mask gives 0.
inline double cross_entropy_sequence(const std::vector<double>& logits,
                                     const std::vector<int>& targets,
                                     const std::vector<char>& mask, std::size_t t_len,
                                     std::size_t batch, std::size_t n_classes) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t b = 0; b < batch; ++b) {
            if (!mask[t * batch + b]) continue;
            const double* row = logits.data() + (t * batch + b) * n_classes;
            double mx = row[0];
            for (std::size_t k = 1; k < n_classes; ++k) mx = std::max(mx, row[k]);
            double z = 0.0;
            for (std::size_t k = 0; k < n_classes; ++k) z += std::exp(row[k] - mx);
            total += std::log(z) - (row[targets[t * batch + b]] - mx);
            ++count;
        }
    return count == 0 ? 0.0 : total / double(count);
}

/// Mean over masked positions of the squared error summed over output dims.
inline double mse_sequence(const std::vector<double>& pred,
                           const std::vector<double>& target,
                           const std::vector<char>& mask, std::size_t t_len,
                           std::size_t batch, std::size_t n_out) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t b = 0; b < batch; ++b) {
            if (!mask[t * batch + b]) continue;
            const double* p = pred.data() + (t * batch + b) * n_out;
            const double* q = target.data() + (t * batch + b) * n_out;
            for (std::size_t k = 0; k < n_out; ++k) total += (p[k] - q[k]) * (p[k] - q[k]);
            ++count;
        }
    return count == 0 ? 0.0 : total / double(count);
}

// ---------------------------------------------------------------------------
// EURNN cell
// ---------------------------------------------------------------------------

/// Recurrence h^(t) = modReLU(U x^(t) + W h^(t-1), b) with unitary W, plus a
/// real output head y = V [Re h; Im h] + c. The hidden state is complex; the
/// input map U is complex; the head acts on the concatenated planes.
struct EurnnCell {
    std::size_t n_in = 0, n_hidden = 0, n_out = 0;
    std::vector<double> u_re, u_im;  // [n_hidden][n_in]
    UnitaryComposition w;
    std::vector<double> b;  // modReLU bias, [n_hidden]
    std::vector<double> v;  // [n_out][2*n_hidden], re plane columns first
    std::vector<double> c;  // [n_out]
};

/// Mirrors every EurnnCell parameter array with a same-shape gradient.
struct CellGradients {
    std::vector<double> u_re, u_im;
    CompositionGrad wg;
    std::vector<double> b, v, c;

    static CellGradients zeros_like(const EurnnCell& cell) {
        CellGradients g;
        g.u_re.assign(cell.u_re.size(), 0.0);
        g.u_im.assign(cell.u_im.size(), 0.0);
        g.wg = CompositionGrad::zeros_like(cell.w);
        g.b.assign(cell.b.size(), 0.0);
        g.v.assign(cell.v.size(), 0.0);
        g.c.assign(cell.c.size(), 0.0);
        return g;
    }

    void add(const CellGradients& o) {
        for (std::size_t i = 0; i < u_re.size(); ++i) u_re[i] += o.u_re[i];
        for (std::size_t i = 0; i < u_im.size(); ++i) u_im[i] += o.u_im[i];
        wg.add(o.wg);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += o.b[i];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += o.c[i];
    }
};

/// Rotation angles and phases uniform on (-pi, pi): the composition starts
/// at a generic point of its unitary subspace (eigenvalues are unit-modulus
/// whatever the angles, so no spectral care is needed). b starts at 0, the
/// norm-preserving modReLU regime. U, V entries uniform(+-1/sqrt(n_hidden)).
inline EurnnCell make_eurnn_cell(std::size_t n_in, std::size_t n_hidden,
                                 std::size_t n_out, MeshStyle style,
                                 std::size_t capacity, Rng& rng) {
    EurnnCell cell;
    cell.n_in = n_in;
    cell.n_hidden = n_hidden;
    cell.n_out = n_out;
    cell.w = (style == MeshStyle::tunable) ? make_tunable_composition(n_hidden, capacity)
                                           : make_fft_composition(n_hidden);
    const double pi = 3.14159265358979323846;
    for (auto& layer : cell.w.layers)
        for (std::size_t m = 0; m < layer.rotation_count(); ++m) {
            layer.theta[m] = rng.uniform(-pi, pi);
            layer.phi[m] = rng.uniform(-pi, pi);
        }
    for (auto& wj : cell.w.diag.w) wj = rng.uniform(-pi, pi);
    const double s = 1.0 / std::sqrt(double(n_hidden));
    cell.u_re.resize(n_hidden * n_in);
    cell.u_im.resize(n_hidden * n_in);
    for (auto& x : cell.u_re) x = rng.uniform(-s, s);
    for (auto& x : cell.u_im) x = rng.uniform(-s, s);
    cell.b.assign(n_hidden, 0.0);
    cell.v.resize(n_out * 2 * n_hidden);
    for (auto& x : cell.v) x = rng.uniform(-s, s);
    cell.c.assign(n_out, 0.0);
    return cell;
}

/// z^(t) = U x^(t) + W h^(t-1);  h^(t) = modReLU(z^(t), b).
inline void cell_forward(const EurnnCell& cell, const CompiledComposition& cw,
                         const double* x_t, const ComplexVec& h_prev, ComplexVec& z_t,
                         ComplexVec& h_t, ApplyStash* stash = nullptr) {
    const std::size_t n = cell.n_hidden;
    check_same_size(n, h_prev.size(), "cell_forward");
    apply(cw, h_prev, z_t, stash);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ur = cell.u_re.data() + i * cell.n_in;
        const double* ui = cell.u_im.data() + i * cell.n_in;
        double ar = 0.0, ai = 0.0;
        for (std::size_t j = 0; j < cell.n_in; ++j) {
            ar += ur[j] * x_t[j];
            ai += ui[j] * x_t[j];
        }
        z_t.re[i] += ar;
        z_t.im[i] += ai;
    }
    modrelu(z_t, cell.b, h_t);
}

/// y = V [Re h; Im h] + c.
inline void output_head(const EurnnCell& cell, const ComplexVec& h, double* y) {
    const std::size_t n = cell.n_hidden;
    for (std::size_t k = 0; k < cell.n_out; ++k) {
        const double* row = cell.v.data() + k * 2 * n;
        double s = cell.c[k];
        for (std::size_t j = 0; j < n; ++j) s += row[j] * h.re[j] + row[n + j] * h.im[j];
        y[k] = s;
    }
}

namespace detail {

struct StepStash {
    ApplyStash w_stash;
    ComplexVec z, h;
    std::vector<double> out;  // probs (cross entropy) or predictions (mse)
};

// Shared softmax helper: fills probs and returns the CE of the target.
inline double softmax_ce(const double* logits, std::size_t n, int target, double* probs) {
    double mx = logits[0];
    for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, logits[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        probs[k] = std::exp(logits[k] - mx);
        z += probs[k];
    }
    for (std::size_t k = 0; k < n; ++k) probs[k] /= z;
    return std::log(z) - (logits[target] - mx);
}

template <class Fn>
inline void parallel_over_items(std::size_t count, unsigned threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i, 0);
        return;
    }
    const unsigned nt = std::min<unsigned>(threads, unsigned(count));
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([=, &fn] {
            for (std::size_t i = t; i < count; i += nt) fn(i, t);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

struct SeqResult {
    double loss = 0.0;
    CellGradients grads;
};

/// Full BPTT over a batch: mean loss over masked positions, gradients for
/// every parameter. Each batch item is processed independently (forward
/// stash, reverse sweep) and per-item gradients are reduced in item order,
/// so results are bit-identical for any thread count.
inline SeqResult sequence_forward_backward(const EurnnCell& cell, const SequenceBatch& batch,
                                           LossKind loss, unsigned threads = 1) {
    check_same_size(cell.n_in, batch.n_in, "sequence_forward_backward: input width");
    if (loss == LossKind::mse)
        check_same_size(cell.n_out, batch.n_target, "sequence_forward_backward: target width");
    const std::size_t T = batch.t_len, B = batch.batch;
    const std::size_t n = cell.n_hidden, n_out = cell.n_out;
    const std::size_t total_mask = batch.mask_count();
    const CompiledComposition cw = compile(cell.w);

    std::vector<double> item_loss(B, 0.0);
    std::vector<CellGradients> item_grads(B);
    const double inv_mask = total_mask ? 1.0 / double(total_mask) : 0.0;

    detail::parallel_over_items(B, threads, [&](std::size_t item, unsigned) {
        thread_local std::vector<detail::StepStash> steps;
        if (steps.size() < T) steps.resize(T);
        CellGradients g = CellGradients::zeros_like(cell);

        ComplexVec h(n);  // h^(0) = 0
        std::vector<double> logits(n_out);
        double lsum = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            detail::StepStash& st = steps[t];
            cell_forward(cell, cw, batch.input_at(t, item), h, st.z, st.h, &st.w_stash);
            h = st.h;
            if (!batch.masked(t, item)) continue;
            st.out.resize(n_out);
            output_head(cell, st.h, logits.data());
            if (loss == LossKind::cross_entropy) {
                lsum += detail::softmax_ce(logits.data(), n_out, batch.target_i_at(t, item),
                                           st.out.data());
            } else {
                const double* target = batch.target_r_at(t, item);
                for (std::size_t k = 0; k < n_out; ++k) {
                    st.out[k] = logits[k];
                    lsum += (logits[k] - target[k]) * (logits[k] - target[k]);
                }
            }
        }
        item_loss[item] = lsum;

        ComplexVec dh(n), dz(n), carry(n);
        std::vector<double> dlogits(n_out);
        for (std::size_t t = T; t-- > 0;) {
            detail::StepStash& st = steps[t];
            dh = carry;
            if (batch.masked(t, item)) {
                if (loss == LossKind::cross_entropy) {
                    const int target = batch.target_i_at(t, item);
                    for (std::size_t k = 0; k < n_out; ++k)
                        dlogits[k] = (st.out[k] - (int(k) == target ? 1.0 : 0.0)) * inv_mask;
                } else {
                    const double* target = batch.target_r_at(t, item);
                    for (std::size_t k = 0; k < n_out; ++k)
                        dlogits[k] = 2.0 * (st.out[k] - target[k]) * inv_mask;
                }
                for (std::size_t k = 0; k < n_out; ++k) {
                    const double d = dlogits[k];
                    g.c[k] += d;
                    const double* row = cell.v.data() + k * 2 * n;
                    double* grow = g.v.data() + k * 2 * n;
                    for (std::size_t j = 0; j < n; ++j) {
                        grow[j] += d * st.h.re[j];
                        grow[n + j] += d * st.h.im[j];
                        dh.re[j] += d * row[j];
                        dh.im[j] += d * row[n + j];
                    }
                }
            }
            modrelu_backward(st.z, cell.b, dh, dz, g.b);
            const double* x_t = batch.input_at(t, item);
            for (std::size_t i = 0; i < n; ++i) {
                const double dr = dz.re[i], di = dz.im[i];
                if (dr == 0.0 && di == 0.0) continue;
                double* gur = g.u_re.data() + i * cell.n_in;
                double* gui = g.u_im.data() + i * cell.n_in;
                for (std::size_t j = 0; j < cell.n_in; ++j) {
                    gur[j] += dr * x_t[j];
                    gui[j] += di * x_t[j];
                }
            }
            backward(cw, cell.w, st.w_stash, dz, carry, g.wg);
        }
        item_grads[item] = std::move(g);
    });

    SeqResult result;
    result.grads = CellGradients::zeros_like(cell);
    double lsum = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        lsum += item_loss[i];
        result.grads.add(item_grads[i]);
    }
    result.loss = total_mask ? lsum / double(total_mask) : 0.0;
    if (!std::isfinite(result.loss)) throw DivergedError("sequence loss is not finite");
    return result;
}

/// Loss (and classification accuracy) without gradients.
struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline EvalResult sequence_evaluate(const EurnnCell& cell, const SequenceBatch& batch,
                                    LossKind loss, unsigned threads = 1) {
    const std::size_t T = batch.t_len, B = batch.batch, n_out = cell.n_out;
    const std::size_t total_mask = batch.mask_count();
    const CompiledComposition cw = compile(cell.w);
    std::vector<double> item_loss(B, 0.0);
    std::vector<std::size_t> item_correct(B, 0);
    detail::parallel_over_items(B, threads, [&](std::size_t item, unsigned) {
        ComplexVec h(cell.n_hidden), z, hn;
        std::vector<double> logits(n_out), probs(n_out);
        double lsum = 0.0;
        std::size_t correct = 0;
        for (std::size_t t = 0; t < T; ++t) {
            cell_forward(cell, cw, batch.input_at(t, item), h, z, hn);
            h = hn;
            if (!batch.masked(t, item)) continue;
            output_head(cell, h, logits.data());
            if (loss == LossKind::cross_entropy) {
                const int target = batch.target_i_at(t, item);
                lsum += detail::softmax_ce(logits.data(), n_out, target, probs.data());
                const std::size_t amax =
                    std::max_element(logits.begin(), logits.end()) - logits.begin();
                correct += (int(amax) == target);
            } else {
                const double* target = batch.target_r_at(t, item);
                for (std::size_t k = 0; k < n_out; ++k)
                    lsum += (logits[k] - target[k]) * (logits[k] - target[k]);
            }
        }
        item_loss[item] = lsum;
        item_correct[item] = correct;
    });
    EvalResult r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < B; ++i) {
        r.loss += item_loss[i];
        correct += item_correct[i];
    }
    r.loss = total_mask ? r.loss / double(total_mask) : 0.0;
    r.accuracy = total_mask ? double(correct) / double(total_mask) : 0.0;
    return r;
}

/// Cotangent of the initial hidden state for the probe loss
/// L = Re<probe, h^(T)>, with zero inputs throughout. Exposes the
/// through-time gradient path for the vanishing/exploding diagnostics.
inline ComplexVec hidden_cotangent(const EurnnCell& cell, const ComplexVec& h0,
                                   const ComplexVec& probe, std::size_t t_len) {
    const CompiledComposition cw = compile(cell.w);
    std::vector<double> x_zero(cell.n_in, 0.0);
    std::vector<detail::StepStash> steps(t_len);
    ComplexVec h = h0;
    for (std::size_t t = 0; t < t_len; ++t) {
        cell_forward(cell, cw, x_zero.data(), h, steps[t].z, steps[t].h, &steps[t].w_stash);
        h = steps[t].h;
    }
    CellGradients scratch = CellGradients::zeros_like(cell);
    ComplexVec dh = probe, dz, carry;
    for (std::size_t t = t_len; t-- > 0;) {
        modrelu_backward(steps[t].z, cell.b, dh, dz, scratch.b);
        backward(cw, cell.w, steps[t].w_stash, dz, carry, scratch.wg);
        dh = carry;
    }
    return dh;
}

// ---------------------------------------------------------------------------
// Vanilla (non-unitary) baseline: dense real W, tanh nonlinearity
// ---------------------------------------------------------------------------

struct VanillaCell {
    std::size_t n_in = 0, n_hidden = 0, n_out = 0;
    std::vector<double> w;  // [n_hidden][n_hidden]
    std::vector<double> u;  // [n_hidden][n_in]
    std::vector<double> b;  // [n_hidden]
    std::vector<double> v;  // [n_out][n_hidden]
    std::vector<double> c;  // [n_out]
};

struct VanillaGradients {
    std::vector<double> w, u, b, v, c;

    static VanillaGradients zeros_like(const VanillaCell& cell) {
        VanillaGradients g;
        g.w.assign(cell.w.size(), 0.0);
        g.u.assign(cell.u.size(), 0.0);
        g.b.assign(cell.b.size(), 0.0);
        g.v.assign(cell.v.size(), 0.0);
        g.c.assign(cell.c.size(), 0.0);
        return g;
    }

    void add(const VanillaGradients& o) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += o.w[i];
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += o.u[i];
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += o.b[i];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += o.c[i];
    }
};

/// Estimate of the dominant |eigenvalue| via normalized power iteration.
inline double spectral_radius_estimate(const std::vector<double>& w, std::size_t n,
                                       Rng& rng, std::size_t iters = 128) {
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = rng.normal();
    double growth = 1.0;
    for (std::size_t it = 0; it < iters; ++it) {
        double nrm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += w[i * n + j] * x[j];
            y[i] = s;
            nrm2 += s * s;
        }
        const double nrm = std::sqrt(nrm2);
        if (nrm == 0.0) return 0.0;
        growth = nrm;
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / nrm;
    }
    return growth;
}

/// Gaussian W rescaled to the requested spectral radius; U, V as in the
/// EURNN cell; zero biases.
inline VanillaCell make_vanilla_cell(std::size_t n_in, std::size_t n_hidden,
                                     std::size_t n_out, double spectral_radius,
                                     Rng& rng) {
    VanillaCell cell;
    cell.n_in = n_in;
    cell.n_hidden = n_hidden;
    cell.n_out = n_out;
    cell.w.resize(n_hidden * n_hidden);
    for (auto& x : cell.w) x = rng.normal() / std::sqrt(double(n_hidden));
    Rng probe = rng.split();
    const double rho = spectral_radius_estimate(cell.w, n_hidden, probe);
    if (rho > 0.0)
        for (auto& x : cell.w) x *= spectral_radius / rho;
    const double s = 1.0 / std::sqrt(double(n_hidden));
    cell.u.resize(n_hidden * n_in);
    for (auto& x : cell.u) x = rng.uniform(-s, s);
    cell.b.assign(n_hidden, 0.0);
    cell.v.resize(n_out * n_hidden);
    for (auto& x : cell.v) x = rng.uniform(-s, s);
    cell.c.assign(n_out, 0.0);
    return cell;
}

/// h^(t) = tanh(U x^(t) + W h^(t-1) + b).
inline void vanilla_cell_forward(const VanillaCell& cell, const double* x_t,
                                 const std::vector<double>& h_prev,
                                 std::vector<double>& z_t, std::vector<double>& h_t) {
    const std::size_t n = cell.n_hidden;
    z_t.resize(n);
    h_t.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = cell.b[i];
        const double* wrow = cell.w.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) s += wrow[j] * h_prev[j];
        const double* urow = cell.u.data() + i * cell.n_in;
        for (std::size_t j = 0; j < cell.n_in; ++j) s += urow[j] * x_t[j];
        z_t[i] = s;
        h_t[i] = std::tanh(s);
    }
}

inline void vanilla_output_head(const VanillaCell& cell, const std::vector<double>& h,
                                double* y) {
    for (std::size_t k = 0; k < cell.n_out; ++k) {
        const double* row = cell.v.data() + k * cell.n_hidden;
        double s = cell.c[k];
        for (std::size_t j = 0; j < cell.n_hidden; ++j) s += row[j] * h[j];
        y[k] = s;
    }
}

struct VanillaSeqResult {
    double loss = 0.0;
    VanillaGradients grads;
};

inline VanillaSeqResult vanilla_sequence_forward_backward(const VanillaCell& cell,
                                                          const SequenceBatch& batch,
                                                          LossKind loss,
                                                          unsigned threads = 1) {
    check_same_size(cell.n_in, batch.n_in, "vanilla forward_backward: input width");
    const std::size_t T = batch.t_len, B = batch.batch;
    const std::size_t n = cell.n_hidden, n_out = cell.n_out;
    const std::size_t total_mask = batch.mask_count();
    const double inv_mask = total_mask ? 1.0 / double(total_mask) : 0.0;

    std::vector<double> item_loss(B, 0.0);
    std::vector<VanillaGradients> item_grads(B);
    detail::parallel_over_items(B, threads, [&](std::size_t item, unsigned) {
        VanillaGradients g = VanillaGradients::zeros_like(cell);
        std::vector<std::vector<double>> hs(T + 1), zs(T);
        std::vector<std::vector<double>> outs(T);
        hs[0].assign(n, 0.0);
        std::vector<double> logits(n_out);
        double lsum = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            vanilla_cell_forward(cell, batch.input_at(t, item), hs[t], zs[t], hs[t + 1]);
            if (!batch.masked(t, item)) continue;
            outs[t].resize(n_out);
            vanilla_output_head(cell, hs[t + 1], logits.data());
            if (loss == LossKind::cross_entropy) {
                lsum += detail::softmax_ce(logits.data(), n_out, batch.target_i_at(t, item),
                                           outs[t].data());
            } else {
                const double* target = batch.target_r_at(t, item);
                for (std::size_t k = 0; k < n_out; ++k) {
                    outs[t][k] = logits[k];
                    lsum += (logits[k] - target[k]) * (logits[k] - target[k]);
                }
            }
        }
        item_loss[item] = lsum;

        std::vector<double> dh(n, 0.0), dz(n), carry(n, 0.0), dlogits(n_out);
        for (std::size_t t = T; t-- > 0;) {
            dh = carry;
            if (batch.masked(t, item)) {
                if (loss == LossKind::cross_entropy) {
                    const int target = batch.target_i_at(t, item);
                    for (std::size_t k = 0; k < n_out; ++k)
                        dlogits[k] = (outs[t][k] - (int(k) == target ? 1.0 : 0.0)) * inv_mask;
                } else {
                    const double* target = batch.target_r_at(t, item);
                    for (std::size_t k = 0; k < n_out; ++k)
                        dlogits[k] = 2.0 * (outs[t][k] - target[k]) * inv_mask;
                }
                for (std::size_t k = 0; k < n_out; ++k) {
                    const double d = dlogits[k];
                    g.c[k] += d;
                    const double* row = cell.v.data() + k * n;
                    double* grow = g.v.data() + k * n;
                    for (std::size_t j = 0; j < n; ++j) {
                        grow[j] += d * hs[t + 1][j];
                        dh[j] += d * row[j];
                    }
                }
            }
            const double* x_t = batch.input_at(t, item);
            std::fill(carry.begin(), carry.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double th = std::tanh(zs[t][i]);
                dz[i] = dh[i] * (1.0 - th * th);
                g.b[i] += dz[i];
                double* gu = g.u.data() + i * cell.n_in;
                for (std::size_t j = 0; j < cell.n_in; ++j) gu[j] += dz[i] * x_t[j];
                double* gw = g.w.data() + i * n;
                const double* wrow = cell.w.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) {
                    gw[j] += dz[i] * hs[t][j];
                    carry[j] += dz[i] * wrow[j];
                }
            }
        }
        item_grads[item] = std::move(g);
    });

    VanillaSeqResult result;
    result.grads = VanillaGradients::zeros_like(cell);
    double lsum = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        lsum += item_loss[i];
        result.grads.add(item_grads[i]);
    }
    result.loss = total_mask ? lsum / double(total_mask) : 0.0;
    if (!std::isfinite(result.loss)) throw DivergedError("sequence loss is not finite");
    return result;
}

inline EvalResult sequence_evaluate(const VanillaCell& cell, const SequenceBatch& batch,
                                    LossKind loss, unsigned threads = 1) {
    const std::size_t T = batch.t_len, B = batch.batch, n_out = cell.n_out;
    const std::size_t total_mask = batch.mask_count();
    std::vector<double> item_loss(B, 0.0);
    std::vector<std::size_t> item_correct(B, 0);
    detail::parallel_over_items(B, threads, [&](std::size_t item, unsigned) {
        std::vector<double> h(cell.n_hidden, 0.0), z, hn;
        std::vector<double> logits(n_out), probs(n_out);
        double lsum = 0.0;
        std::size_t correct = 0;
        for (std::size_t t = 0; t < T; ++t) {
            vanilla_cell_forward(cell, batch.input_at(t, item), h, z, hn);
            h = hn;
            if (!batch.masked(t, item)) continue;
            vanilla_output_head(cell, h, logits.data());
            if (loss == LossKind::cross_entropy) {
                const int target = batch.target_i_at(t, item);
                lsum += detail::softmax_ce(logits.data(), n_out, target, probs.data());
                const std::size_t amax =
                    std::max_element(logits.begin(), logits.end()) - logits.begin();
                correct += (int(amax) == target);
            } else {
                const double* target = batch.target_r_at(t, item);
                for (std::size_t k = 0; k < n_out; ++k)
                    lsum += (logits[k] - target[k]) * (logits[k] - target[k]);
            }
        }
        item_loss[item] = lsum;
        item_correct[item] = correct;
    });
    EvalResult r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < B; ++i) {
        r.loss += item_loss[i];
        correct += item_correct[i];
    }
    r.loss = total_mask ? r.loss / double(total_mask) : 0.0;
    r.accuracy = total_mask ? double(correct) / double(total_mask) : 0.0;
    return r;
}

/// Vanilla counterpart of hidden_cotangent: dL/dh^(0) for L = <probe, h^(T)>
/// with zero inputs.
inline std::vector<double> vanilla_hidden_cotangent(const VanillaCell& cell,
                                                    const std::vector<double>& h0,
                                                    const std::vector<double>& probe,
                                                    std::size_t t_len) {
    const std::size_t n = cell.n_hidden;
    std::vector<double> x_zero(cell.n_in, 0.0);
    std::vector<std::vector<double>> zs(t_len);
    std::vector<double> h = h0, hn;
    for (std::size_t t = 0; t < t_len; ++t) {
        vanilla_cell_forward(cell, x_zero.data(), h, zs[t], hn);
        h = hn;
    }
    std::vector<double> dh = probe, carry(n);
    for (std::size_t t = t_len; t-- > 0;) {
        std::fill(carry.begin(), carry.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double th = std::tanh(zs[t][i]);
            const double dz = dh[i] * (1.0 - th * th);
            const double* wrow = cell.w.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) carry[j] += dz * wrow[j];
        }
        dh = carry;
    }
    return dh;
}

// ---------------------------------------------------------------------------
// Flat parameter/gradient views, the optimizer's interface
// ---------------------------------------------------------------------------

inline std::vector<std::span<double>> param_views(EurnnCell& cell) {
    std::vector<std::span<double>> views;
    views.emplace_back(cell.u_re);
    views.emplace_back(cell.u_im);
    for (auto& layer : cell.w.layers) {
        views.emplace_back(layer.theta);
        views.emplace_back(layer.phi);
    }
    views.emplace_back(cell.w.diag.w);
    views.emplace_back(cell.b);
    views.emplace_back(cell.v);
    views.emplace_back(cell.c);
    return views;
}

inline std::vector<std::span<double>> grad_views(CellGradients& g) {
    std::vector<std::span<double>> views;
    views.emplace_back(g.u_re);
    views.emplace_back(g.u_im);
    for (auto& layer : g.wg.layers) {
        views.emplace_back(layer.d_theta);
        views.emplace_back(layer.d_phi);
    }
    views.emplace_back(g.wg.d_w);
    views.emplace_back(g.b);
    views.emplace_back(g.v);
    views.emplace_back(g.c);
    return views;
}

inline std::vector<std::span<double>> param_views(VanillaCell& cell) {
    return {cell.w, cell.u, cell.b, cell.v, cell.c};
}

inline std::vector<std::span<double>> grad_views(VanillaGradients& g) {
    return {g.w, g.u, g.b, g.v, g.c};
}

}  // namespace eunn
