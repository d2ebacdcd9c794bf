#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "eunn/complex_vec.hpp"
#include "eunn/dense.hpp"
#include "eunn/errors.hpp"
#include "eunn/rotation_plan.hpp"

namespace eunn {

/// Diagonal matrix of unit-modulus entries e^{i w_j}.
struct DiagonalPhase {
    std::size_t n = 0;
    std::vector<double> w;

    static DiagonalPhase zeros(std::size_t n) {
        DiagonalPhase d;
        d.n = n;
        d.w.assign(n, 0.0);
        return d;
    }
};

enum class MeshStyle { tunable, fft };

/// Ordered product W = D * F^(1) * F^(2) * ... * F^(L). layers[0] is F^(1),
/// the factor applied last before the diagonal.
struct UnitaryComposition {
    DiagonalPhase diag;
    std::vector<RotationLayer> layers;
    MeshStyle style = MeshStyle::tunable;

    std::size_t n() const { return diag.n; }
    std::size_t capacity() const { return layers.size(); }

    std::size_t rotation_count() const {
        std::size_t c = 0;
        for (const auto& l : layers) c += l.rotation_count();
        return c;
    }

    std::size_t parameter_count() const { return 2 * rotation_count() + diag.n; }
};

inline UnitaryComposition make_tunable_composition(std::size_t n, std::size_t capacity) {
    UnitaryComposition w;
    w.layers = tunable_plan(n, capacity);
    w.diag = DiagonalPhase::zeros(n);
    w.style = MeshStyle::tunable;
    return w;
}

inline UnitaryComposition make_fft_composition(std::size_t n) {
    UnitaryComposition w;
    w.layers = fft_plan(n);
    w.diag = DiagonalPhase::zeros(n);
    w.style = MeshStyle::fft;
    return w;
}

/// Angle-dependent state lowered for fast application: one LayerKernels per
/// rotation layer plus the materialized diagonal phases. Rebuild after every
/// parameter update; one rebuild is O(n L) and is reused across a whole
/// batch and sequence.
struct CompiledComposition {
    std::vector<LayerKernels> layers;
    ComplexVec diag;  // e^{i w_j}

    std::size_t n() const { return diag.size(); }
};

inline CompiledComposition compile(const UnitaryComposition& w) {
    CompiledComposition c;
    c.layers.reserve(w.layers.size());
    for (const auto& l : w.layers) {
        if (l.n != w.n()) throw DimensionError("composition: layer dimension mismatch");
        c.layers.push_back(compile_layer(l));
    }
    c.diag = ComplexVec(w.n());
    for (std::size_t j = 0; j < w.n(); ++j) {
        c.diag.re[j] = std::cos(w.diag.w[j]);
        c.diag.im[j] = std::sin(w.diag.w[j]);
    }
    return c;
}

/// Per-application record of what each factor saw, needed by backward():
/// layer_in[l] is the input to layer l, diag_in the input to the diagonal.
struct ApplyStash {
    std::vector<ComplexVec> layer_in;
    ComplexVec diag_in;
};

/// y = D F^(1) ... F^(L) x, evaluated right to left in O(nL).
/// If stash is non-null, records each factor's input for backward().
inline void apply(const CompiledComposition& c, const ComplexVec& x, ComplexVec& y,
                  ApplyStash* stash = nullptr) {
    const std::size_t n = c.n();
    check_same_size(n, x.size(), "composition apply");
    const std::size_t nl = c.layers.size();
    if (stash) stash->layer_in.resize(nl);

    ComplexVec cur = x;
    ComplexVec next(n);
    for (std::size_t l = nl; l-- > 0;) {
        if (stash) stash->layer_in[l] = cur;
        apply_layer(c.layers[l], cur, next);
        std::swap(cur, next);
    }
    if (stash) stash->diag_in = cur;
    if (y.size() != n) y = ComplexVec(n);
    for (std::size_t j = 0; j < n; ++j) {
        y.re[j] = c.diag.re[j] * cur.re[j] - c.diag.im[j] * cur.im[j];
        y.im[j] = c.diag.re[j] * cur.im[j] + c.diag.im[j] * cur.re[j];
    }
    EUNN_COUNT_CMUL(n);
}

inline ComplexVec apply(const CompiledComposition& c, const ComplexVec& x) {
    ComplexVec y;
    apply(c, x, y);
    return y;
}

/// Gradients for every composition parameter, shaped like the composition.
struct CompositionGrad {
    std::vector<LayerGrad> layers;
    std::vector<double> d_w;

    static CompositionGrad zeros_like(const UnitaryComposition& w) {
        CompositionGrad g;
        g.layers.resize(w.layers.size());
        for (std::size_t l = 0; l < w.layers.size(); ++l) {
            g.layers[l].d_theta.assign(w.layers[l].rotation_count(), 0.0);
            g.layers[l].d_phi.assign(w.layers[l].rotation_count(), 0.0);
        }
        g.d_w.assign(w.n(), 0.0);
        return g;
    }

    void add(const CompositionGrad& o) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            for (std::size_t m = 0; m < layers[l].d_theta.size(); ++m) {
                layers[l].d_theta[m] += o.layers[l].d_theta[m];
                layers[l].d_phi[m] += o.layers[l].d_phi[m];
            }
        }
        for (std::size_t j = 0; j < d_w.size(); ++j) d_w[j] += o.d_w[j];
    }
};

/// Chains backward_layer right to left through the composition. dy is the
/// cotangent of the output; dx receives the cotangent of the input, and all
/// parameter gradients are accumulated into grad. O(nL) total.
inline void backward(const CompiledComposition& c, const UnitaryComposition& w,
                     const ApplyStash& stash, const ComplexVec& dy, ComplexVec& dx,
                     CompositionGrad& grad) {
    const std::size_t n = c.n();
    check_same_size(n, dy.size(), "composition backward");
    // Diagonal: dL/dw_j = Re(conj(dy_j) i e^{i w_j} x_j) with x the diagonal's input.
    ComplexVec g(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double yr = c.diag.re[j] * stash.diag_in.re[j] - c.diag.im[j] * stash.diag_in.im[j];
        const double yi = c.diag.re[j] * stash.diag_in.im[j] + c.diag.im[j] * stash.diag_in.re[j];
        grad.d_w[j] += dy.re[j] * (-yi) + dy.im[j] * yr;
        // dx through the diagonal: conj(e^{i w_j}) dy_j
        g.re[j] = c.diag.re[j] * dy.re[j] + c.diag.im[j] * dy.im[j];
        g.im[j] = c.diag.re[j] * dy.im[j] - c.diag.im[j] * dy.re[j];
    }
    ComplexVec next(n);
    LayerGrad lg;
    for (std::size_t l = 0; l < c.layers.size(); ++l) {
        backward_layer(c.layers[l], w.layers[l], stash.layer_in[l], g, next, lg);
        for (std::size_t m = 0; m < lg.d_theta.size(); ++m) {
            grad.layers[l].d_theta[m] += lg.d_theta[m];
            grad.layers[l].d_phi[m] += lg.d_phi[m];
        }
        std::swap(g, next);
    }
    dx = std::move(g);
}

/// Dense matrix of the composition, built from per-layer dense factors
/// (independent of the fast apply path; used as its oracle).
inline CMatrix materialize(const UnitaryComposition& w) {
    CMatrix m = CMatrix::identity(w.n());
    for (const auto& layer : w.layers) m = mul(m, materialize_layer(layer));
    for (std::size_t i = 0; i < w.n(); ++i) {
        const std::complex<double> d{std::cos(w.diag.w[i]), std::sin(w.diag.w[i])};
        for (std::size_t j = 0; j < w.n(); ++j) m.at(i, j) *= d;
    }
    return m;
}

/// One rotation of an elimination program: the U(2) block on coordinates
/// (i, j) with i the phased row, exactly the mesh-layer block.
struct AngleRotation {
    std::size_t i = 0, j = 0;
    double theta = 0.0, phi = 0.0;
};

/// Product program for an arbitrary unitary: rotations in elimination order
/// followed by a diagonal of phases. A full decomposition of an n x n
/// unitary has n(n-1)/2 rotations.
struct AngleProgram {
    std::size_t n = 0;
    std::vector<AngleRotation> rotations;
    std::vector<double> phases;
};

/// Gaussian-elimination-style synthesis: right-multiply by rotations on
/// coordinate pairs (r, j), j = r-1, ..., 0, zeroing row r left of the
/// diagonal, for r = n-1 down to 1; the residual is then diagonal because a
/// triangular unitary matrix must be diagonal. Angles are chosen so that
/// cos(theta), sin(theta) >= 0.
inline AngleProgram decompose_unitary(const CMatrix& m, double tol = 1e-8) {
    check_same_size(m.rows, m.cols, "decompose_unitary");
    const std::size_t n = m.rows;
    if (n == 0) throw DimensionError("decompose_unitary: empty matrix");
    if (unitarity_error(m) >= tol)
        throw ValidationError("decompose_unitary: input is not unitary within tolerance");

    CMatrix work = m;
    AngleProgram prog;
    prog.n = n;
    prog.rotations.reserve(n * (n - 1) / 2);
    for (std::size_t r = n; r-- > 1;) {
        for (std::size_t j = r; j-- > 0;) {
            const std::complex<double> a = work.at(r, j);  // entry to zero
            const std::complex<double> b = work.at(r, r);
            AngleRotation rot;
            rot.i = r;
            rot.j = j;
            if (std::abs(a) == 0.0) {
                // already zero; keep the identity rotation
                prog.rotations.push_back(rot);
                continue;
            }
            rot.theta = std::atan2(std::abs(a), std::abs(b));
            rot.phi = std::arg(a) - (std::abs(b) == 0.0 ? 0.0 : std::arg(b));
            const double c = std::cos(rot.theta);
            const double s = std::sin(rot.theta);
            const std::complex<double> e{std::cos(rot.phi), std::sin(rot.phi)};
            // Right-multiply: col_j <- c col_j - e s col_r ; col_r <- s col_j + e c col_r
            for (std::size_t i = 0; i <= r; ++i) {
                const std::complex<double> cj = work.at(i, j);
                const std::complex<double> cr = work.at(i, r);
                work.at(i, j) = c * cj - e * s * cr;
                work.at(i, r) = s * cj + e * c * cr;
            }
            prog.rotations.push_back(rot);
        }
    }
    // Residual must be diagonal with unit-modulus entries.
    prog.phases.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && std::abs(work.at(i, j)) > 1e-6)
                throw NumericalError("decompose_unitary: residual is not diagonal");
        prog.phases[i] = std::arg(work.at(i, i));
    }
    return prog;
}

/// W = D * R_K† * ... * R_1† where R_1..R_K are the program's rotations in
/// elimination order. Inverse of the elimination by construction.
inline CMatrix reconstruct(const AngleProgram& p) {
    CMatrix m(p.n, p.n);
    for (std::size_t i = 0; i < p.n; ++i)
        m.at(i, i) = {std::cos(p.phases[i]), std::sin(p.phases[i])};
    for (std::size_t k = p.rotations.size(); k-- > 0;) {
        const AngleRotation& rot = p.rotations[k];
        if (rot.i >= p.n || rot.j >= p.n || rot.i == rot.j)
            throw ValidationError("reconstruct: rotation indices out of range");
        const double c = std::cos(rot.theta);
        const double s = std::sin(rot.theta);
        const std::complex<double> ec{std::cos(rot.phi), -std::sin(rot.phi)};
        // M <- M * R† touches only columns i and j:
        // col_i' = conj(e) c col_i - conj(e) s col_j ; col_j' = s col_i + c col_j
        for (std::size_t row = 0; row < p.n; ++row) {
            const std::complex<double> ci = m.at(row, rot.i);
            const std::complex<double> cj = m.at(row, rot.j);
            m.at(row, rot.i) = ec * c * ci - ec * s * cj;
            m.at(row, rot.j) = s * ci + c * cj;
        }
    }
    return m;
}

/// Full-space projective baseline: one gradient step followed by the exact
/// unitarity-restoring Cayley transform of A = G†W - W†G,
/// W' = (I + lr/2 A)^{-1} (I - lr/2 A) W. O(n^3), baseline only.
inline CMatrix projective_update(const CMatrix& w, const CMatrix& g, double lr) {
    check_same_size(w.rows, w.cols, "projective_update");
    check_same_size(w.rows, g.rows, "projective_update");
    check_same_size(w.cols, g.cols, "projective_update");
    if (unitarity_error(w) >= 1e-8)
        throw ValidationError("projective_update: W is not unitary within tolerance");
    const std::size_t n = w.rows;
    const CMatrix gw = mul(adjoint(g), w);
    CMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a.at(i, j) = gw.at(i, j) - std::conj(gw.at(j, i));
    CMatrix plus = CMatrix::identity(n);
    CMatrix minus = CMatrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            plus.at(i, j) += 0.5 * lr * a.at(i, j);
            minus.at(i, j) -= 0.5 * lr * a.at(i, j);
        }
    return lu_solve(std::move(plus), mul(minus, w));
}

}  // namespace eunn
