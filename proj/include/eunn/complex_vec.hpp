#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "eunn/errors.hpp"

namespace eunn {

#ifdef EUNN_COUNT_OPS
// Instrumentation hook for the work-bound tests: counts complex
// multiply-accumulate operations issued by the elementwise kernels.
namespace opcount {
inline thread_local unsigned long long cmul_adds = 0;
inline void reset() { cmul_adds = 0; }
}  // namespace opcount
#define EUNN_COUNT_CMUL(n) (::eunn::opcount::cmul_adds += (n))
#else
#define EUNN_COUNT_CMUL(n) ((void)0)
#endif

/// Complex vector stored as separate real/imaginary planes. Every kernel in
/// the library is elementwise over the planes.
struct ComplexVec {
    std::vector<double> re, im;

    ComplexVec() = default;
    explicit ComplexVec(std::size_t n) : re(n, 0.0), im(n, 0.0) {}

    std::size_t size() const { return re.size(); }

    std::complex<double> at(std::size_t i) const { return {re[i], im[i]}; }
    void set(std::size_t i, std::complex<double> z) {
        re[i] = z.real();
        im[i] = z.imag();
    }

    void assign_zero(std::size_t n) {
        re.assign(n, 0.0);
        im.assign(n, 0.0);
    }
};

/// Index permutation with its precomputed inverse.
/// forward is a bijection on {0..n-1}; inverse[forward[i]] == i.
struct PermutationPlan {
    std::vector<std::size_t> forward, inverse;

    std::size_t size() const { return forward.size(); }

    static PermutationPlan identity(std::size_t n) {
        PermutationPlan p;
        p.forward.resize(n);
        p.inverse.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            p.forward[i] = i;
            p.inverse[i] = i;
        }
        return p;
    }

    static PermutationPlan from_forward(std::vector<std::size_t> fwd) {
        const std::size_t n = fwd.size();
        PermutationPlan p;
        p.inverse.assign(n, n);  // n marks "unset"
        for (std::size_t i = 0; i < n; ++i) {
            if (fwd[i] >= n || p.inverse[fwd[i]] != n)
                throw InvalidPlanError("permutation is not a bijection");
            p.inverse[fwd[i]] = i;
        }
        p.forward = std::move(fwd);
        return p;
    }
};

inline void check_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw DimensionError(std::string(what) + ": length mismatch");
}

/// acc + a .* b, complex elementwise product accumulated after the product.
/// Operands are untouched.
inline ComplexVec cmul_accumulate(const ComplexVec& a, const ComplexVec& b,
                                  const ComplexVec& acc) {
    const std::size_t n = a.size();
    check_same_size(n, b.size(), "cmul_accumulate");
    check_same_size(n, acc.size(), "cmul_accumulate");
    ComplexVec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double pr = a.re[i] * b.re[i] - a.im[i] * b.im[i];
        const double pi = a.re[i] * b.im[i] + a.im[i] * b.re[i];
        out.re[i] = acc.re[i] + pr;
        out.im[i] = acc.im[i] + pi;
    }
    EUNN_COUNT_CMUL(n);
    return out;
}

/// out[i] = x[forward[i]].
inline ComplexVec permute(const ComplexVec& x, const PermutationPlan& p) {
    const std::size_t n = x.size();
    check_same_size(n, p.size(), "permute");
    ComplexVec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.re[i] = x.re[p.forward[i]];
        out.im[i] = x.im[p.forward[i]];
    }
    return out;
}

/// out[i] = x[inverse[i]]; undoes permute().
inline ComplexVec permute_inverse(const ComplexVec& x, const PermutationPlan& p) {
    const std::size_t n = x.size();
    check_same_size(n, p.size(), "permute_inverse");
    ComplexVec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.re[i] = x.re[p.inverse[i]];
        out.im[i] = x.im[p.inverse[i]];
    }
    return out;
}

/// Euclidean norm, sqrt(sum re^2 + im^2).
inline double norm2(const ComplexVec& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += x.re[i] * x.re[i] + x.im[i] * x.im[i];
    return std::sqrt(s);
}

inline bool all_finite(const ComplexVec& x) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.re[i]) || !std::isfinite(x.im[i])) return false;
    return true;
}

}  // namespace eunn
