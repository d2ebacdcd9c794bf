#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "eunn/complex_vec.hpp"
#include "eunn/dense.hpp"
#include "eunn/errors.hpp"

namespace eunn {

/// One layer of Givens rotations on disjoint coordinate pairs. Rotations
/// within a layer commute, so the layer is a well-defined block transform.
/// The first index of each pair is the phased row of its U(2) block:
///
///   y_a = e^{i phi} (cos(theta) x_a - sin(theta) x_b)
///   y_b = sin(theta) x_a + cos(theta) x_b
///
/// Coordinates not covered by any pair pass through unchanged.
struct RotationLayer {
    std::size_t n = 0;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<double> theta, phi;

    std::size_t rotation_count() const { return pairs.size(); }
};

inline void validate(const RotationLayer& layer) {
    if (layer.theta.size() != layer.pairs.size() || layer.phi.size() != layer.pairs.size())
        throw InvalidPlanError("rotation layer: angle arrays must match pair count");
    std::vector<char> used(layer.n, 0);
    for (const auto& [a, b] : layer.pairs) {
        if (a >= layer.n || b >= layer.n)
            throw InvalidPlanError("rotation layer: pair index out of range");
        if (a == b) throw InvalidPlanError("rotation layer: pair must use two coordinates");
        if (used[a] || used[b])
            throw InvalidPlanError("rotation layer: overlapping pairs");
        used[a] = used[b] = 1;
    }
}

/// The layer lowered to the elementwise form y = v1.*x + v2.*permute(x).
/// Paired coordinates satisfy |v1_i|^2 + |v2_i|^2 = 1; unpaired ones carry
/// v1 = 1, v2 = 0 and a self-mapping permutation entry.
struct LayerKernels {
    ComplexVec v1, v2;
    PermutationPlan perm;

    std::size_t size() const { return v1.size(); }
};

/// Real-valued loss gradients for a layer's angles, aligned with its pairs.
struct LayerGrad {
    std::vector<double> d_theta, d_phi;
};

inline LayerKernels compile_layer(const RotationLayer& layer) {
    validate(layer);
    const std::size_t n = layer.n;
    LayerKernels k;
    k.v1 = ComplexVec(n);
    k.v2 = ComplexVec(n);
    std::vector<std::size_t> fwd(n);
    for (std::size_t i = 0; i < n; ++i) {
        fwd[i] = i;
        k.v1.re[i] = 1.0;
    }
    for (std::size_t m = 0; m < layer.pairs.size(); ++m) {
        const auto [a, b] = layer.pairs[m];
        const double c = std::cos(layer.theta[m]);
        const double s = std::sin(layer.theta[m]);
        const double pr = std::cos(layer.phi[m]);
        const double pi = std::sin(layer.phi[m]);
        k.v1.re[a] = pr * c;
        k.v1.im[a] = pi * c;
        k.v2.re[a] = -pr * s;
        k.v2.im[a] = -pi * s;
        k.v1.re[b] = c;
        k.v1.im[b] = 0.0;
        k.v2.re[b] = s;
        k.v2.im[b] = 0.0;
        fwd[a] = b;
        fwd[b] = a;
    }
    k.perm = PermutationPlan::from_forward(std::move(fwd));
    return k;
}

/// y = v1.*x + v2.*permute(x). Exactly two complex multiply-adds per
/// coordinate; preserves the Euclidean norm to rounding.
inline void apply_layer(const LayerKernels& k, const ComplexVec& x, ComplexVec& y) {
    const std::size_t n = k.size();
    check_same_size(n, x.size(), "apply_layer");
    if (y.size() != n) y = ComplexVec(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = k.perm.forward[i];
        const double xr = x.re[i], xi = x.im[i];
        const double qr = x.re[p], qi = x.im[p];
        y.re[i] = k.v1.re[i] * xr - k.v1.im[i] * xi + k.v2.re[i] * qr - k.v2.im[i] * qi;
        y.im[i] = k.v1.re[i] * xi + k.v1.im[i] * xr + k.v2.re[i] * qi + k.v2.im[i] * qr;
    }
    EUNN_COUNT_CMUL(2 * n);
}

inline ComplexVec apply_layer(const LayerKernels& k, const ComplexVec& x) {
    ComplexVec y;
    apply_layer(k, x, y);
    return y;
}

/// x = F† y with the same kernel machinery: conjugated v1/v2 and the inverse
/// permutation. Inverts apply_layer exactly up to rounding.
inline void apply_layer_adjoint(const LayerKernels& k, const ComplexVec& y, ComplexVec& x) {
    const std::size_t n = k.size();
    check_same_size(n, y.size(), "apply_layer_adjoint");
    if (x.size() != n) x = ComplexVec(n);
    for (std::size_t i = 0; i < n; ++i) {
        // x_i = conj(v1_i) y_i + conj(v2_q) y_q with q = perm^{-1}(i)
        const std::size_t q = k.perm.inverse[i];
        const double yr = y.re[i], yi = y.im[i];
        const double zr = y.re[q], zi = y.im[q];
        x.re[i] = k.v1.re[i] * yr + k.v1.im[i] * yi + k.v2.re[q] * zr + k.v2.im[q] * zi;
        x.im[i] = k.v1.re[i] * yi - k.v1.im[i] * yr + k.v2.re[q] * zi - k.v2.im[q] * zr;
    }
    EUNN_COUNT_CMUL(2 * n);
}

/// Reverse-mode step through one layer. x is the input the forward pass saw
/// and dy the cotangent of the output, both in the dL/d(re), dL/d(im) plane
/// convention. Because F is unitary, dx = F† dy; the angle gradients come
/// from the four touched scalars of each pair via the analytic derivative of
/// the U(2) block, dL/dtheta = sum_i Re(conj(dy_i) * dy_i/dtheta). One pass,
/// O(1) work per parameter.
inline void backward_layer(const LayerKernels& k, const RotationLayer& layer,
                           const ComplexVec& x, const ComplexVec& dy,
                           ComplexVec& dx, LayerGrad& grad) {
    const std::size_t n = k.size();
    check_same_size(n, x.size(), "backward_layer");
    check_same_size(n, dy.size(), "backward_layer");
    apply_layer_adjoint(k, dy, dx);
    grad.d_theta.resize(layer.pairs.size());
    grad.d_phi.resize(layer.pairs.size());
    for (std::size_t m = 0; m < layer.pairs.size(); ++m) {
        const auto [a, b] = layer.pairs[m];
        const double c = std::cos(layer.theta[m]);
        const double s = std::sin(layer.theta[m]);
        const double er = std::cos(layer.phi[m]);
        const double ei = std::sin(layer.phi[m]);
        const double xar = x.re[a], xai = x.im[a];
        const double xbr = x.re[b], xbi = x.im[b];
        const double gar = dy.re[a], gai = dy.im[a];
        const double gbr = dy.re[b], gbi = dy.im[b];
        // dtheta: dy_a/dtheta = e^{i phi}(-s x_a - c x_b), dy_b/dtheta = c x_a - s x_b
        const double tar = -s * xar - c * xbr, tai = -s * xai - c * xbi;
        const double dar = er * tar - ei * tai, dai = er * tai + ei * tar;
        const double dbr = c * xar - s * xbr, dbi = c * xai - s * xbi;
        grad.d_theta[m] = gar * dar + gai * dai + gbr * dbr + gbi * dbi;
        // dphi: dy_a/dphi = i y_a with y_a = e^{i phi}(c x_a - s x_b); dy_b/dphi = 0
        const double uar = c * xar - s * xbr, uai = c * xai - s * xbi;
        const double yar = er * uar - ei * uai, yai = er * uai + ei * uar;
        grad.d_phi[m] = gar * (-yai) + gai * yar;
    }
}

/// Alternating adjacent-pair mesh. Odd layers (1st, 3rd, ...) pair
/// (0,1),(2,3),...,(n-2,n-1); even layers pair (1,2),(3,4),...,(n-3,n-2).
/// Angles start at zero; initialization is the caller's business.
inline std::vector<RotationLayer> tunable_plan(std::size_t n, std::size_t capacity) {
    if (n == 0 || n % 2 != 0)
        throw UnsupportedDimensionError("tunable_plan: dimension must be even");
    if (capacity < 1 || capacity > n)
        throw ConfigError("tunable_plan: capacity must be in [1, n]");
    std::vector<RotationLayer> layers(capacity);
    for (std::size_t l = 0; l < capacity; ++l) {
        RotationLayer& layer = layers[l];
        layer.n = n;
        const std::size_t first = (l % 2 == 0) ? 0 : 1;
        for (std::size_t a = first; a + 1 < n; a += 2) layer.pairs.emplace_back(a, a + 1);
        layer.theta.assign(layer.pairs.size(), 0.0);
        layer.phi.assign(layer.pairs.size(), 0.0);
    }
    return layers;
}

/// FFT-style mesh: log2(n) layers whose pair span halves each layer.
/// Layer i (1-based) has span p = n/2^i and pairs (2pk + j, 2pk + p + j) for
/// k in [0, 2^{i-1}), j in [0, p), n/2 pairs per layer.
inline std::vector<RotationLayer> fft_plan(std::size_t n) {
    if (n < 2 || (n & (n - 1)) != 0)
        throw UnsupportedDimensionError("fft_plan: dimension must be a power of two");
    std::vector<RotationLayer> layers;
    for (std::size_t p = n / 2; p >= 1; p /= 2) {
        RotationLayer layer;
        layer.n = n;
        for (std::size_t k = 0; 2 * p * k < n; ++k)
            for (std::size_t j = 0; j < p; ++j)
                layer.pairs.emplace_back(2 * p * k + j, 2 * p * k + p + j);
        layer.theta.assign(layer.pairs.size(), 0.0);
        layer.phi.assign(layer.pairs.size(), 0.0);
        layers.push_back(std::move(layer));
    }
    return layers;
}

/// Dense n x n matrix of the layer; test oracle, O(n^2) is fine.
inline CMatrix materialize_layer(const RotationLayer& layer) {
    validate(layer);
    CMatrix m = CMatrix::identity(layer.n);
    for (std::size_t i = 0; i < layer.pairs.size(); ++i) {
        const auto [a, b] = layer.pairs[i];
        const double c = std::cos(layer.theta[i]);
        const double s = std::sin(layer.theta[i]);
        const std::complex<double> e{std::cos(layer.phi[i]), std::sin(layer.phi[i])};
        m.at(a, a) = e * c;
        m.at(a, b) = -e * s;
        m.at(b, a) = s;
        m.at(b, b) = c;
    }
    return m;
}

}  // namespace eunn
