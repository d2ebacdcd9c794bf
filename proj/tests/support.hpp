#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "eunn/complex_vec.hpp"
#include "eunn/dense.hpp"
#include "eunn/rng.hpp"

namespace testsup {

inline eunn::ComplexVec random_cvec(std::size_t n, eunn::Rng& rng) {
    eunn::ComplexVec x(n);
    for (std::size_t i = 0; i < n; ++i) rng.normal_pair(x.re[i], x.im[i]);
    return x;
}

inline double max_entry_diff(const eunn::ComplexVec& a, const eunn::ComplexVec& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a.at(i) - b.at(i)));
    return d;
}

// --- central finite differences --------------------------------------------

template <class LossFn>
double central_diff(double& slot, LossFn&& loss, double h = 1e-6) {
    const double saved = slot;
    slot = saved + h;
    const double lp = loss();
    slot = saved - h;
    const double lm = loss();
    slot = saved;
    return (lp - lm) / (2.0 * h);
}

struct GradCheckResult {
    double max_rel = 0.0;
    double max_abs = 0.0;
    std::size_t checked = 0;
};

// Checks every analytic gradient entry against a central difference of the
// loss closure. The relative error uses a magnitude floor so that the finite
// difference noise floor (~1e-9 for O(1) losses at h=1e-6) does not dominate
// near-zero gradients.
template <class LossFn>
GradCheckResult check_gradients(const std::vector<std::span<double>>& params,
                                const std::vector<std::span<double>>& analytic,
                                LossFn&& loss, double h = 1e-6, double floor_mag = 1e-3) {
    GradCheckResult res;
    for (std::size_t a = 0; a < params.size(); ++a) {
        for (std::size_t i = 0; i < params[a].size(); ++i) {
            const double fd = central_diff(params[a][i], loss, h);
            const double an = analytic[a][i];
            const double denom = std::max({std::fabs(fd), std::fabs(an), floor_mag});
            res.max_rel = std::max(res.max_rel, std::fabs(fd - an) / denom);
            res.max_abs = std::max(res.max_abs, std::fabs(fd - an));
            ++res.checked;
        }
    }
    return res;
}

// --- IDX fixtures -----------------------------------------------------------

inline void write_u32be(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

inline void write_idx_images(const std::string& path,
                             const std::vector<std::uint8_t>& bytes, std::uint32_t count,
                             std::uint32_t rows, std::uint32_t cols) {
    std::ofstream out(path, std::ios::binary);
    write_u32be(out, 0x00000803);
    write_u32be(out, count);
    write_u32be(out, rows);
    write_u32be(out, cols);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

inline void write_idx_labels(const std::string& path,
                             const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    write_u32be(out, 0x00000801);
    write_u32be(out, std::uint32_t(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              std::streamsize(labels.size()));
}

// 10-class image set with smooth per-class templates plus pixel noise;
// stands in for the real digit files when they are not on disk.
inline void make_synthetic_digits(const std::string& dir, std::size_t n_train,
                                  std::size_t n_test, std::uint64_t seed) {
    eunn::Rng rng(seed);
    std::vector<std::vector<double>> templates(10, std::vector<double>(28 * 28));
    for (auto& tpl : templates) {
        // random low-frequency pattern: sum of a few plane waves
        double ar[4], br[4], cr[4];
        for (int w = 0; w < 4; ++w) {
            ar[w] = rng.uniform(-0.5, 0.5);
            br[w] = rng.uniform(-0.5, 0.5);
            cr[w] = rng.uniform(0.0, 6.28318530717958648);
        }
        for (std::size_t r = 0; r < 28; ++r)
            for (std::size_t c = 0; c < 28; ++c) {
                double v = 0.0;
                for (int w = 0; w < 4; ++w)
                    v += std::sin(ar[w] * double(r) + br[w] * double(c) + cr[w]);
                tpl[r * 28 + c] = 127.0 + 30.0 * v;
            }
    }
    auto emit = [&](const std::string& img_path, const std::string& lab_path,
                    std::size_t count) {
        std::vector<std::uint8_t> bytes(count * 28 * 28);
        std::vector<std::uint8_t> labels(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t k = rng.below(10);
            labels[i] = std::uint8_t(k);
            for (std::size_t p = 0; p < 28 * 28; ++p) {
                const double v = templates[k][p] + 25.0 * rng.normal();
                bytes[i * 28 * 28 + p] =
                    std::uint8_t(std::min(255.0, std::max(0.0, v)));
            }
        }
        write_idx_images(img_path, bytes, std::uint32_t(count), 28, 28);
        write_idx_labels(lab_path, labels);
    };
    emit(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte", n_train);
    emit(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte", n_test);
}

}  // namespace testsup
