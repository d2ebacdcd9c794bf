#include <doctest.h>

#include <cmath>
#include <complex>

#include "eunn/rnn_cell.hpp"
#include "support.hpp"

using namespace eunn;

namespace {

// Random dense-input batch for gradient checks.
SequenceBatch random_batch(std::size_t t_len, std::size_t batch, std::size_t n_in,
                           std::size_t n_classes, Rng& rng) {
    SequenceBatch b;
    b.t_len = t_len;
    b.batch = batch;
    b.n_in = n_in;
    b.inputs.resize(t_len * batch * n_in);
    for (auto& x : b.inputs) x = rng.uniform(-1.0, 1.0);
    b.targets_i.resize(t_len * batch);
    for (auto& t : b.targets_i) t = int(rng.below(n_classes));
    b.mask.assign(t_len * batch, 1);
    return b;
}

double min_kink_margin(const EurnnCell& cell, const SequenceBatch& batch) {
    const CompiledComposition cw = compile(cell.w);
    double margin = 1e300;
    for (std::size_t item = 0; item < batch.batch; ++item) {
        ComplexVec h(cell.n_hidden), z, hn;
        for (std::size_t t = 0; t < batch.t_len; ++t) {
            cell_forward(cell, cw, batch.input_at(t, item), h, z, hn);
            h = hn;
            for (std::size_t i = 0; i < cell.n_hidden; ++i) {
                const double r = std::abs(z.at(i));
                margin = std::min(margin, std::fabs(r + cell.b[i]));
            }
        }
    }
    return margin;
}

}  // namespace

TEST_CASE("modrelu evaluates the stated convention") {
    ComplexVec z(3);
    std::vector<double> b = {-2.0, 0.0, -10.0};
    z.set(0, {3, 4});   // |z|=5, b=-2 -> scale 3/5
    z.set(1, {1, -2});  // b=0 -> unchanged
    z.set(2, {0.5, 0});  // |z|+b < 0 -> dead
    const ComplexVec y = modrelu(z, b);
    CHECK(std::abs(y.at(0) - std::complex<double>(1.8, 2.4)) < 1e-15);
    CHECK(y.at(1) == z.at(1));
    CHECK(y.at(2) == std::complex<double>(0, 0));

    // z = 0 gives 0 regardless of b
    ComplexVec zero(1);
    std::vector<double> bp = {5.0};
    CHECK(modrelu(zero, bp).at(0) == std::complex<double>(0, 0));
}

TEST_CASE("modrelu_backward: dead coordinates contribute nothing") {
    ComplexVec z(2);
    z.set(0, {0.1, 0.0});
    z.set(1, {1.0, 1.0});
    std::vector<double> b = {-1.0, 0.0};
    ComplexVec dy(2);
    dy.set(0, {1, 1});
    dy.set(1, {1, 1});
    auto [dz, db] = modrelu_backward(z, b, dy);
    CHECK(dz.at(0) == std::complex<double>(0, 0));
    CHECK(db[0] == 0.0);
    CHECK(dz.at(1) == dy.at(1));  // b = 0: Jacobian is the identity
    CHECK(db[1] == doctest::Approx((1.0 + 1.0) / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("modrelu_backward matches finite differences away from the kink") {
    Rng rng(51);
    const std::size_t n = 32;
    ComplexVec z = testsup::random_cvec(n, rng);
    std::vector<double> b(n);
    for (auto& x : b) x = rng.uniform(-0.5, 0.5);
    const ComplexVec g = testsup::random_cvec(n, rng);

    auto loss = [&] {
        const ComplexVec y = modrelu(z, b);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += g.re[i] * y.re[i] + g.im[i] * y.im[i];
        return s;
    };
    ComplexVec dz;
    std::vector<double> db(n, 0.0);
    modrelu_backward(z, b, g, dz, db);
    for (std::size_t i = 0; i < n; ++i) {
        const double margin = std::fabs(std::abs(z.at(i)) + b[i]);
        if (margin < 1e-4) continue;  // kink-adjacent excluded
        const double fr = testsup::central_diff(z.re[i], loss);
        const double fi = testsup::central_diff(z.im[i], loss);
        const double fb = testsup::central_diff(b[i], loss);
        CHECK(std::fabs(fr - dz.re[i]) < 1e-5 * std::max(1.0, std::fabs(fr)));
        CHECK(std::fabs(fi - dz.im[i]) < 1e-5 * std::max(1.0, std::fabs(fi)));
        CHECK(std::fabs(fb - db[i]) < 1e-5 * std::max(1.0, std::fabs(fb)));
    }
}

TEST_CASE("cell_forward basics") {
    Rng rng(53);
    EurnnCell cell = make_eurnn_cell(3, 4, 2, MeshStyle::tunable, 2, rng);
    const CompiledComposition cw = compile(cell.w);

    // zero input, zero state -> zero state
    const std::vector<double> x0(3, 0.0);
    ComplexVec h0(4), z, h;
    cell_forward(cell, cw, x0.data(), h0, z, h);
    CHECK(norm2(h) == 0.0);

    // b = 0 and zero input preserve the norm
    Rng rng2(54);
    ComplexVec hr = testsup::random_cvec(4, rng2);
    cell_forward(cell, cw, x0.data(), hr, z, h);
    CHECK(std::fabs(norm2(h) - norm2(hr)) < 1e-12 * norm2(hr));
}

TEST_CASE("cell_forward matches a dense complex reference") {
    Rng rng(55);
    EurnnCell cell = make_eurnn_cell(3, 4, 2, MeshStyle::tunable, 3, rng);
    const CompiledComposition cw = compile(cell.w);
    std::vector<double> x = {0.3, -0.8, 0.25};
    const ComplexVec h_prev = testsup::random_cvec(4, rng);
    ComplexVec z, h;
    cell_forward(cell, cw, x.data(), h_prev, z, h);

    const CMatrix wm = materialize(cell.w);
    for (std::size_t i = 0; i < 4; ++i) {
        std::complex<double> zi = 0.0;
        for (std::size_t j = 0; j < 4; ++j) zi += wm.at(i, j) * h_prev.at(j);
        for (std::size_t j = 0; j < 3; ++j)
            zi += std::complex<double>(cell.u_re[i * 3 + j], cell.u_im[i * 3 + j]) * x[j];
        CHECK(std::abs(zi - z.at(i)) < 1e-12);
        const double r = std::abs(zi);
        const std::complex<double> hi =
            (r == 0.0 || r + cell.b[i] <= 0.0) ? 0.0 : zi * ((r + cell.b[i]) / r);
        CHECK(std::abs(hi - h.at(i)) < 1e-12);
    }
}

TEST_CASE("output_head basics") {
    Rng rng(57);
    EurnnCell cell = make_eurnn_cell(2, 4, 4, MeshStyle::tunable, 1, rng);
    cell.c = {0.5, -1.0, 0.25, 2.0};
    std::vector<double> y(4);

    const ComplexVec h0(4);
    output_head(cell, h0, y.data());
    for (std::size_t k = 0; k < 4; ++k) CHECK(y[k] == cell.c[k]);

    // V = 0 gives y = c for any h
    std::fill(cell.v.begin(), cell.v.end(), 0.0);
    const ComplexVec h = testsup::random_cvec(4, rng);
    output_head(cell, h, y.data());
    for (std::size_t k = 0; k < 4; ++k) CHECK(y[k] == cell.c[k]);
}

TEST_CASE("output_head matches a dense reference") {
    Rng rng(59);
    EurnnCell cell = make_eurnn_cell(2, 4, 4, MeshStyle::tunable, 1, rng);
    const ComplexVec h = testsup::random_cvec(4, rng);
    std::vector<double> y(4);
    output_head(cell, h, y.data());
    for (std::size_t k = 0; k < 4; ++k) {
        double s = cell.c[k];
        for (std::size_t j = 0; j < 4; ++j) {
            s += cell.v[k * 8 + j] * h.re[j];
            s += cell.v[k * 8 + 4 + j] * h.im[j];
        }
        CHECK(y[k] == doctest::Approx(s).epsilon(1e-15));
    }
}

TEST_CASE("losses: uniform logits and perfect predictions") {
    const std::size_t T = 1, B = 1, C = 8;
    std::vector<double> logits(C, 0.37);  // uniform
    std::vector<int> targets = {3};
    std::vector<char> mask = {1};
    CHECK(cross_entropy_sequence(logits, targets, mask, T, B, C) ==
          doctest::Approx(std::log(8.0)).epsilon(1e-12));

    // near-one-hot prediction drives CE toward 0
    std::vector<double> sharp(C, -30.0);
    sharp[3] = 30.0;
    CHECK(cross_entropy_sequence(sharp, targets, mask, T, B, C) < 1e-12);

    // empty mask defines the loss as 0
    std::vector<char> none = {0};
    CHECK(cross_entropy_sequence(logits, targets, none, T, B, C) == 0.0);
}

TEST_CASE("cross entropy matches a direct summation oracle") {
    Rng rng(61);
    const std::size_t T = 4, B = 3, C = 5;
    std::vector<double> logits(T * B * C);
    for (auto& x : logits) x = rng.uniform(-2, 2);
    std::vector<int> targets(T * B);
    for (auto& t : targets) t = int(rng.below(C));
    std::vector<char> mask(T * B);
    for (auto& m : mask) m = char(rng.below(2));

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < T * B; ++p) {
        if (!mask[p]) continue;
        double z = 0.0;
        for (std::size_t k = 0; k < C; ++k) z += std::exp(logits[p * C + k]);
        total += -std::log(std::exp(logits[p * C + targets[p]]) / z);
        ++count;
    }
    CHECK(cross_entropy_sequence(logits, targets, mask, T, B, C) ==
          doctest::Approx(total / double(count)).epsilon(1e-12));
}

TEST_CASE("mse_sequence matches a scalar oracle") {
    Rng rng(63);
    const std::size_t T = 3, B = 2, K = 4;
    std::vector<double> pred(T * B * K), target(T * B * K);
    for (auto& x : pred) x = rng.uniform(-1, 1);
    for (auto& x : target) x = rng.uniform(-1, 1);
    std::vector<char> mask(T * B, 1);
    mask[0] = 0;
    double total = 0.0;
    for (std::size_t p = 1; p < T * B; ++p)
        for (std::size_t k = 0; k < K; ++k) {
            const double d = pred[p * K + k] - target[p * K + k];
            total += d * d;
        }
    CHECK(mse_sequence(pred, target, mask, T, B, K) ==
          doctest::Approx(total / double(T * B - 1)).epsilon(1e-12));
}

TEST_CASE("T=1 sequence gradients match finite differences") {
    Rng rng(65);
    EurnnCell cell = make_eurnn_cell(4, 8, 3, MeshStyle::tunable, 2, rng);
    Rng brng(66);
    const SequenceBatch batch = random_batch(1, 2, 4, 3, brng);
    REQUIRE(min_kink_margin(cell, batch) > 1e-3);

    const SeqResult res = sequence_forward_backward(cell, batch, LossKind::cross_entropy);
    CellGradients grads = res.grads;
    const auto report = testsup::check_gradients(
        param_views(cell), grad_views(grads), [&] {
            return sequence_forward_backward(cell, batch, LossKind::cross_entropy).loss;
        });
    CHECK(report.max_rel < 1e-5);
    CHECK(report.checked > 100);
}

TEST_CASE("mse path gradients match finite differences") {
    Rng rng(67);
    EurnnCell cell = make_eurnn_cell(3, 4, 2, MeshStyle::fft, 2, rng);
    Rng brng(68);
    SequenceBatch batch;
    batch.t_len = 3;
    batch.batch = 2;
    batch.n_in = 3;
    batch.n_target = 2;
    batch.inputs.resize(3 * 2 * 3);
    for (auto& x : batch.inputs) x = brng.uniform(-1, 1);
    batch.targets_r.resize(3 * 2 * 2);
    for (auto& x : batch.targets_r) x = brng.uniform(-1, 1);
    batch.mask.assign(3 * 2, 1);
    REQUIRE(min_kink_margin(cell, batch) > 1e-3);

    SeqResult res = sequence_forward_backward(cell, batch, LossKind::mse);
    const auto report = testsup::check_gradients(
        param_views(cell), grad_views(res.grads), [&] {
            return sequence_forward_backward(cell, batch, LossKind::mse).loss;
        });
    CHECK(report.max_rel < 1e-5);
}

TEST_CASE("zero-length mask gives zero loss and zero gradients") {
    Rng rng(69);
    EurnnCell cell = make_eurnn_cell(2, 4, 2, MeshStyle::tunable, 1, rng);
    Rng brng(70);
    SequenceBatch batch = random_batch(3, 2, 2, 2, brng);
    batch.mask.assign(batch.mask.size(), 0);
    const SeqResult res = sequence_forward_backward(cell, batch, LossKind::cross_entropy);
    CHECK(res.loss == 0.0);
    CellGradients grads = res.grads;
    for (const auto& view : grad_views(grads))
        for (double gv : view) CHECK(gv == 0.0);
}

TEST_CASE("threaded BPTT is bit-identical to single-threaded") {
    Rng rng(71);
    EurnnCell cell = make_eurnn_cell(4, 8, 3, MeshStyle::tunable, 4, rng);
    Rng brng(72);
    const SequenceBatch batch = random_batch(6, 5, 4, 3, brng);
    const SeqResult r1 = sequence_forward_backward(cell, batch, LossKind::cross_entropy, 1);
    SeqResult r3 = sequence_forward_backward(cell, batch, LossKind::cross_entropy, 3);
    CHECK(r1.loss == r3.loss);
    CellGradients g1 = r1.grads;
    const auto v1 = grad_views(g1);
    const auto v3 = grad_views(r3.grads);
    for (std::size_t a = 0; a < v1.size(); ++a)
        for (std::size_t i = 0; i < v1[a].size(); ++i) CHECK(v1[a][i] == v3[a][i]);
}

TEST_CASE("norm conservation over time with b = 0 and zero input") {
    Rng rng(73);
    EurnnCell cell = make_eurnn_cell(2, 16, 2, MeshStyle::fft, 4, rng);
    const CompiledComposition cw = compile(cell.w);
    const std::vector<double> x0(2, 0.0);
    Rng hrng(74);
    ComplexVec h = testsup::random_cvec(16, hrng);
    const double norm0 = norm2(h);
    ComplexVec z, hn;
    for (int t = 0; t < 200; ++t) {
        cell_forward(cell, cw, x0.data(), h, z, hn);
        h = hn;
    }
    CHECK(std::fabs(norm2(h) - norm0) < 1e-10 * norm0);
}

TEST_CASE("EURNN cotangent norm is conserved; contractive vanilla decays") {
    Rng rng(75);
    EurnnCell cell = make_eurnn_cell(2, 16, 2, MeshStyle::tunable, 4, rng);
    Rng prng(76);
    const ComplexVec h0 = testsup::random_cvec(16, prng);
    const ComplexVec probe = testsup::random_cvec(16, prng);
    const std::size_t T = 100;
    const ComplexVec dh0 = hidden_cotangent(cell, h0, probe, T);
    const double ratio = norm2(dh0) / norm2(probe);
    CHECK(ratio > 1e-2);
    CHECK(ratio < 1e2);

    VanillaCell vcell = make_vanilla_cell(2, 16, 2, 0.5, rng);
    std::vector<double> vh0(16), vprobe(16);
    for (auto& x : vh0) x = 0.05 * prng.normal();
    for (auto& x : vprobe) x = prng.normal();
    const std::vector<double> vdh0 = vanilla_hidden_cotangent(vcell, vh0, vprobe, T);
    double nd = 0.0, np = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
        nd += vdh0[i] * vdh0[i];
        np += vprobe[i] * vprobe[i];
    }
    CHECK(std::sqrt(nd / np) < 1e-6);
}

TEST_CASE("EURNN cotangent magnitude is flat in T; contractive vanilla decays") {
    Rng rng(91);
    EurnnCell cell = make_eurnn_cell(2, 16, 2, MeshStyle::tunable, 4, rng);
    Rng prng(92);
    const ComplexVec h0 = testsup::random_cvec(16, prng);
    const ComplexVec probe = testsup::random_cvec(16, prng);
    const double at5 = norm2(hidden_cotangent(cell, h0, probe, 5));
    const double at50 = norm2(hidden_cotangent(cell, h0, probe, 50));
    CHECK(at50 > 1e-3 * at5);
    CHECK(at50 < 1e3 * at5);

    VanillaCell vcell = make_vanilla_cell(2, 16, 2, 0.5, rng);
    std::vector<double> vh0(16, 0.0), vprobe(16);
    for (auto& x : vprobe) x = prng.normal();
    const auto vdh0 = vanilla_hidden_cotangent(vcell, vh0, vprobe, 50);
    double nd = 0.0;
    for (double x : vdh0) nd += x * x;
    CHECK(std::sqrt(nd) < 1e-6);
}

TEST_CASE("expanding vanilla cell explodes the cotangent") {
    Rng rng(77);
    VanillaCell cell = make_vanilla_cell(2, 16, 2, 1.5, rng);
    std::vector<double> h0(16, 0.0), probe(16);
    Rng prng(78);
    for (auto& x : probe) x = prng.normal();
    const std::vector<double> dh0 = vanilla_hidden_cotangent(cell, h0, probe, 50);
    double nd = 0.0, np = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
        nd += dh0[i] * dh0[i];
        np += probe[i] * probe[i];
    }
    CHECK(std::sqrt(nd / np) > 1e3);
}

TEST_CASE("vanilla: zero W makes the state depend on the input only") {
    Rng rng(79);
    VanillaCell cell = make_vanilla_cell(3, 4, 2, 0.9, rng);
    std::fill(cell.w.begin(), cell.w.end(), 0.0);
    std::vector<double> x = {0.2, -0.4, 0.9};
    std::vector<double> ha(4, 0.0), hb(4), z, out_a, out_b;
    vanilla_cell_forward(cell, x.data(), ha, z, out_a);
    for (auto& v : hb) v = rng.normal();  // different previous state
    vanilla_cell_forward(cell, x.data(), hb, z, out_b);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out_a[i] == out_b[i]);
}

TEST_CASE("vanilla gradients match finite differences") {
    Rng rng(81);
    VanillaCell cell = make_vanilla_cell(4, 8, 3, 0.9, rng);
    Rng brng(82);
    const SequenceBatch batch = random_batch(3, 2, 4, 3, brng);
    VanillaSeqResult res =
        vanilla_sequence_forward_backward(cell, batch, LossKind::cross_entropy);
    const auto report = testsup::check_gradients(
        param_views(cell), grad_views(res.grads), [&] {
            return vanilla_sequence_forward_backward(cell, batch, LossKind::cross_entropy)
                .loss;
        });
    CHECK(report.max_rel < 1e-5);
}

TEST_CASE("spectral radius targeting") {
    Rng rng(83);
    VanillaCell cell = make_vanilla_cell(2, 24, 2, 0.5, rng);
    Rng prng(84);
    const double rho = spectral_radius_estimate(cell.w, 24, prng);
    CHECK(rho == doctest::Approx(0.5).epsilon(0.05));
}
