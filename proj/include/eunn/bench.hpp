#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "eunn/dense.hpp"
#include "eunn/rng.hpp"
#include "eunn/unitary_ops.hpp"

namespace eunn {

/// Median wall time per call, in microseconds. Each sample times a block of
/// inner repetitions sized to at least min_block_ms, which keeps the clock
/// resolution and loop overhead out of the numbers.
template <class Fn>
double median_time_us(Fn&& fn, int samples = 9, double min_block_ms = 2.0) {
    using clock = std::chrono::steady_clock;
    auto block_us = [&](std::size_t reps) {
        const auto t0 = clock::now();
        for (std::size_t r = 0; r < reps; ++r) fn();
        const auto t1 = clock::now();
        return std::chrono::duration<double, std::micro>(t1 - t0).count();
    };
    fn();  // warm up
    std::size_t reps = 1;
    double est = block_us(1);
    while (est < min_block_ms * 1000.0 && reps < (1ull << 24)) {
        reps *= 2;
        est = block_us(reps);
    }
    std::vector<double> times(static_cast<std::size_t>(samples), 0.0);
    for (auto& t : times) t = block_us(reps) / double(reps);
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

/// One bench measurement. style "dense" rows hold the dense matrix-vector
/// reference; composition rows hold forward (apply_us) and forward+backward
/// (grad_us) times.
struct BenchPoint {
    std::string style;
    std::size_t n = 0, capacity = 0;
    double apply_us = 0.0, grad_us = 0.0;
};

namespace detail {
inline volatile double bench_sink = 0.0;
}

inline BenchPoint bench_composition(MeshStyle style, std::size_t n, std::size_t capacity,
                                    std::uint64_t seed, int samples) {
    Rng rng(seed);
    UnitaryComposition w = (style == MeshStyle::tunable)
                               ? make_tunable_composition(n, capacity)
                               : make_fft_composition(n);
    const double pi = 3.14159265358979323846;
    for (auto& layer : w.layers)
        for (std::size_t m = 0; m < layer.rotation_count(); ++m) {
            layer.theta[m] = rng.uniform(-pi, pi);
            layer.phi[m] = rng.uniform(-pi, pi);
        }
    for (auto& wj : w.diag.w) wj = rng.uniform(-pi, pi);
    const CompiledComposition c = compile(w);
    ComplexVec x(n), y(n), dx(n);
    for (std::size_t i = 0; i < n; ++i) {
        x.re[i] = rng.normal();
        x.im[i] = rng.normal();
    }
    BenchPoint point;
    point.style = (style == MeshStyle::tunable) ? "tunable" : "fft";
    point.n = n;
    point.capacity = w.capacity();
    point.apply_us = median_time_us([&] {
        apply(c, x, y);
        detail::bench_sink = y.re[0];
    }, samples);
    ApplyStash stash;
    CompositionGrad grad = CompositionGrad::zeros_like(w);
    point.grad_us = median_time_us([&] {
        apply(c, x, y, &stash);
        backward(c, w, stash, y, dx, grad);
        detail::bench_sink = dx.re[0];
    }, samples);
    return point;
}

inline BenchPoint bench_dense(std::size_t n, std::uint64_t seed, int samples) {
    Rng rng(seed);
    CMatrix m = haar_unitary(std::min<std::size_t>(n, 64), rng);
    // Beyond small n a Haar sample is needlessly slow to build; any dense
    // matrix exercises the same multiply.
    if (n > 64) {
        m = CMatrix(n, n);
        for (auto& z : m.a) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    }
    ComplexVec x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x.re[i] = rng.normal();
        x.im[i] = rng.normal();
    }
    BenchPoint point;
    point.style = "dense";
    point.n = n;
    point.apply_us = median_time_us([&] {
        y = matvec(m, x);
        detail::bench_sink = y.re[0];
    }, samples);
    point.grad_us = point.apply_us;
    return point;
}

}  // namespace eunn
