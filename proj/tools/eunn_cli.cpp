// eunn: train EURNN models on the benchmark tasks, decompose/reconstruct
// unitary matrices, run timing benches and verify the library invariants.
//
// Exit codes: 0 success, 1 validation/config error, 2 training divergence,
// 3 invariant failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "eunn/eunn.hpp"

namespace fs = std::filesystem;
using namespace eunn;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double x) { return fmt_g17(x); }

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string task = "copy";
    std::string model = "eurnn-tunable";
    std::size_t n_hidden = 128;
    std::size_t capacity = 2;
    std::size_t n_symbols = 8, m_len = 10, t_delay = 100;
    std::size_t batch = 128, iters = 2000, eval_interval = 50, eval_cap = 1024;
    double lr = -1.0;     // task default applied after parsing
    double decay = -1.0;  // model default applied after parsing
    double momentum = 0.0, epsilon = 1e-8;
    double clip = 0.0, stop_below = 0.0, spectral_radius = 0.9;
    std::uint64_t seed = 1, permutation_seed = 92;
    unsigned threads = 1;
    std::size_t subset = 10000, val_size = 2000, downsample = 1;
    std::string data_dir;
    std::string out = "run";
    std::string config;

    std::map<std::string, CLI::Option*> cli;  // key -> option, for config merging
};

void add_train_options(CLI::App* cmd, TrainOptions& o) {
    cmd->add_option("--config", o.config, "key=value file with defaults; flags override");
    auto opt = [&](const std::string& key, auto& field, const std::string& desc) {
        o.cli[key] = cmd->add_option("--" + key, field, desc);
    };
    o.cli["task"] = cmd->add_option("--task", o.task, "copy | mnist")
                        ->check(CLI::IsMember({"copy", "mnist"}));
    o.cli["model"] =
        cmd->add_option("--model", o.model, "eurnn-tunable | eurnn-fft | vanilla")
            ->check(CLI::IsMember({"eurnn-tunable", "eurnn-fft", "vanilla"}));
    opt("n-hidden", o.n_hidden, "hidden state size");
    opt("capacity", o.capacity, "rotation layer count L (tunable mesh)");
    opt("n-symbols", o.n_symbols, "copy task: data alphabet size");
    opt("m-len", o.m_len, "copy task: data length M");
    opt("t-delay", o.t_delay, "copy task: blank delay T");
    opt("batch", o.batch, "batch size");
    opt("iters", o.iters, "iteration budget");
    opt("eval-interval", o.eval_interval, "iterations between evaluations");
    opt("eval-cap", o.eval_cap, "max validation items per evaluation");
    opt("lr", o.lr, "learning rate (default 0.001 copy, 0.0001 mnist)");
    opt("decay", o.decay,
        "RMSProp decay (default 0.5 for eurnn models, 0.9 for vanilla)");
    opt("momentum", o.momentum, "RMSProp momentum");
    opt("epsilon", o.epsilon, "RMSProp epsilon");
    opt("clip", o.clip, "gradient clipping norm, 0 disables");
    opt("stop-below", o.stop_below,
        "stop once the training loss drops below this value, 0 disables");
    opt("spectral-radius", o.spectral_radius,
        "vanilla model: initial spectral radius of W");
    opt("seed", o.seed, "run seed");
    opt("permutation-seed", o.permutation_seed, "mnist pixel permutation");
    opt("threads", o.threads, "worker threads over the batch");
    opt("subset", o.subset, "mnist: training images taken from the head");
    opt("val-size", o.val_size, "mnist: validation images from the tail");
    opt("downsample", o.downsample, "mnist: block-average factor");
    opt("data-dir", o.data_dir, "mnist data directory (default $EUNN_DATA_DIR or ./data)");
    opt("out", o.out, "output directory");
}

// Applies key=value settings from --config for every flag not given on the
// command line. Unknown keys are configuration errors.
void merge_config_file(TrainOptions& o) {
    if (o.config.empty()) return;
    auto parse_u = [](const std::string& v) { return std::stoull(v); };
    const std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"task", [&](const std::string& v) { o.task = v; }},
        {"model", [&](const std::string& v) { o.model = v; }},
        {"n-hidden", [&](const std::string& v) { o.n_hidden = parse_u(v); }},
        {"capacity", [&](const std::string& v) { o.capacity = parse_u(v); }},
        {"n-symbols", [&](const std::string& v) { o.n_symbols = parse_u(v); }},
        {"m-len", [&](const std::string& v) { o.m_len = parse_u(v); }},
        {"t-delay", [&](const std::string& v) { o.t_delay = parse_u(v); }},
        {"batch", [&](const std::string& v) { o.batch = parse_u(v); }},
        {"iters", [&](const std::string& v) { o.iters = parse_u(v); }},
        {"eval-interval", [&](const std::string& v) { o.eval_interval = parse_u(v); }},
        {"eval-cap", [&](const std::string& v) { o.eval_cap = parse_u(v); }},
        {"lr", [&](const std::string& v) { o.lr = std::stod(v); }},
        {"decay", [&](const std::string& v) { o.decay = std::stod(v); }},
        {"momentum", [&](const std::string& v) { o.momentum = std::stod(v); }},
        {"epsilon", [&](const std::string& v) { o.epsilon = std::stod(v); }},
        {"clip", [&](const std::string& v) { o.clip = std::stod(v); }},
        {"stop-below", [&](const std::string& v) { o.stop_below = std::stod(v); }},
        {"spectral-radius",
         [&](const std::string& v) { o.spectral_radius = std::stod(v); }},
        {"seed", [&](const std::string& v) { o.seed = parse_u(v); }},
        {"permutation-seed",
         [&](const std::string& v) { o.permutation_seed = parse_u(v); }},
        {"threads", [&](const std::string& v) { o.threads = unsigned(parse_u(v)); }},
        {"subset", [&](const std::string& v) { o.subset = parse_u(v); }},
        {"val-size", [&](const std::string& v) { o.val_size = parse_u(v); }},
        {"downsample", [&](const std::string& v) { o.downsample = parse_u(v); }},
        {"data-dir", [&](const std::string& v) { o.data_dir = v; }},
        {"out", [&](const std::string& v) { o.out = v; }},
    };
    for (const auto& [key, value] : read_kv_file(o.config)) {
        const auto setter = setters.find(key);
        if (setter == setters.end())
            throw ConfigError(o.config + ": unknown config key '" + key + "'");
        const auto opt = o.cli.find(key);
        if (opt != o.cli.end() && opt->second->count() > 0) continue;  // flag wins
        try {
            setter->second(value);
        } catch (const ConfigError&) {
            throw;
        } catch (...) {
            throw ConfigError(o.config + ": bad value for '" + key + "': " + value);
        }
    }
}

void apply_task_defaults(TrainOptions& o) {
    if (o.lr < 0) o.lr = (o.task == "mnist") ? 1e-4 : 1e-3;
    if (o.decay < 0) o.decay = (o.model == "vanilla") ? 0.9 : 0.5;
    if (o.data_dir.empty()) {
        const char* env = std::getenv("EUNN_DATA_DIR");
        o.data_dir = env ? env : "data";
    }
}

std::map<std::string, std::string> resolved_map(const TrainOptions& o) {
    std::map<std::string, std::string> kv;
    kv["task"] = o.task;
    kv["model"] = o.model;
    kv["n-hidden"] = std::to_string(o.n_hidden);
    kv["capacity"] = std::to_string(o.capacity);
    kv["n-symbols"] = std::to_string(o.n_symbols);
    kv["m-len"] = std::to_string(o.m_len);
    kv["t-delay"] = std::to_string(o.t_delay);
    kv["batch"] = std::to_string(o.batch);
    kv["iters"] = std::to_string(o.iters);
    kv["eval-interval"] = std::to_string(o.eval_interval);
    kv["eval-cap"] = std::to_string(o.eval_cap);
    kv["lr"] = fmt(o.lr);
    kv["decay"] = fmt(o.decay);
    kv["momentum"] = fmt(o.momentum);
    kv["epsilon"] = fmt(o.epsilon);
    kv["clip"] = fmt(o.clip);
    kv["stop-below"] = fmt(o.stop_below);
    kv["spectral-radius"] = fmt(o.spectral_radius);
    kv["seed"] = std::to_string(o.seed);
    kv["permutation-seed"] = std::to_string(o.permutation_seed);
    kv["threads"] = std::to_string(o.threads);
    kv["subset"] = std::to_string(o.subset);
    kv["val-size"] = std::to_string(o.val_size);
    kv["downsample"] = std::to_string(o.downsample);
    kv["data-dir"] = o.data_dir;
    return kv;
}

TrainConfig to_train_config(const TrainOptions& o) {
    TrainConfig cfg;
    cfg.iters = o.iters;
    cfg.eval_interval = o.eval_interval;
    cfg.seed = o.seed;
    cfg.opt.lr = o.lr;
    cfg.opt.decay = o.decay;
    cfg.opt.momentum = o.momentum;
    cfg.opt.epsilon = o.epsilon;
    cfg.loss = LossKind::cross_entropy;
    cfg.threads = o.threads;
    cfg.clip = o.clip;
    return cfg;
}

int cmd_train(const TrainOptions& opts_in) {
    TrainOptions o = opts_in;
    merge_config_file(o);
    apply_task_defaults(o);
    if (o.model != "vanilla" && o.clip > 0)
        throw ConfigError("--clip applies to the vanilla baseline only");
    fs::create_directories(o.out);
    write_kv_file((fs::path(o.out) / "config.resolved").string(), resolved_map(o));

    std::unique_ptr<MnistTask> mnist;
    std::unique_ptr<BatchSource> source;
    std::size_t n_in = 0, n_out = 0;
    if (o.task == "copy") {
        CopyTaskConfig cfg{o.n_symbols, o.m_len, o.t_delay, o.batch};
        cfg.validate();
        n_in = n_out = cfg.alphabet();
        source = std::make_unique<CopySource>(cfg);
        std::cerr << "copy task: T=" << o.t_delay << " M=" << o.m_len
                  << " n=" << o.n_symbols
                  << " memoryless baseline=" << memoryless_baseline(cfg) << " nats\n";
    } else {
        MnistConfig cfg;
        cfg.train_images = (fs::path(o.data_dir) / "train-images-idx3-ubyte").string();
        cfg.train_labels = (fs::path(o.data_dir) / "train-labels-idx1-ubyte").string();
        const auto test_img = fs::path(o.data_dir) / "t10k-images-idx3-ubyte";
        if (fs::exists(test_img)) {
            cfg.test_images = test_img.string();
            cfg.test_labels = (fs::path(o.data_dir) / "t10k-labels-idx1-ubyte").string();
        }
        cfg.permutation_seed = o.permutation_seed;
        cfg.subset = o.subset;
        cfg.val_size = o.val_size;
        cfg.downsample = o.downsample;
        cfg.batch = o.batch;
        mnist = std::make_unique<MnistTask>(cfg);
        n_in = 1;
        n_out = 10;
        source = std::make_unique<MnistSource>(*mnist, o.batch, o.eval_cap);
        std::cerr << "mnist task: " << mnist->train_count() << " train / "
                  << mnist->val_count() << " val images, " << mnist->seq_len()
                  << " steps per image\n";
    }

    const TrainConfig cfg = to_train_config(o);
    const std::optional<double> stop =
        o.stop_below > 0 ? std::optional<double>(o.stop_below) : std::nullopt;
    Rng master(o.seed);
    Rng init_rng = master.split();

    TrainRun run;
    const auto t0 = std::chrono::steady_clock::now();
    std::ofstream ckpt(fs::path(o.out) / "model.ckpt");
    if (o.model == "vanilla") {
        VanillaCell cell =
            make_vanilla_cell(n_in, o.n_hidden, n_out, o.spectral_radius, init_rng);
        run = train(cfg, cell, *source, stop);
        write_checkpoint(ckpt, cell);
    } else {
        const MeshStyle style =
            (o.model == "eurnn-fft") ? MeshStyle::fft : MeshStyle::tunable;
        EurnnCell cell =
            make_eurnn_cell(n_in, o.n_hidden, n_out, style, o.capacity, init_rng);
        run = train(cfg, cell, *source, stop);
        write_checkpoint(ckpt, cell);
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_metrics_csv_file((fs::path(o.out) / "metrics.csv").string(), run.rows);
    std::cerr << "trained " << run.rows.size() << " iterations in " << elapsed
              << " s\n";
    if (run.diverged) {
        std::cerr << "error: training diverged (non-finite loss); see metrics.csv\n";
        return 2;
    }
    if (!run.rows.empty()) {
        std::cerr << "final loss " << run.rows.back().loss;
        if (run.rows.back().val_metric)
            std::cerr << ", val metric " << *run.rows.back().val_metric;
        std::cerr << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// decompose / reconstruct
// ---------------------------------------------------------------------------

int cmd_decompose(const std::string& input, const std::string& output) {
    const CMatrix m = read_matrix_file(input);
    const double uerr = unitarity_error(m);
    if (uerr >= 1e-8)
        throw ValidationError(input + ": not unitary, max |W†W - I| = " + fmt(uerr));
    const AngleProgram prog = decompose_unitary(m);
    write_angle_program_file(output, prog);
    const double rt = max_abs_diff(reconstruct(prog), m);
    std::cout << "rotations " << prog.rotations.size() << "\n";
    std::cout << "round_trip_max_error " << fmt(rt) << "\n";
    if (rt >= 1e-8)
        throw NumericalError("round-trip error " + fmt(rt) + " exceeds 1e-8");
    return 0;
}

int cmd_reconstruct(const std::string& input, const std::string& output) {
    const AngleProgram prog = read_angle_program_file(input);
    const CMatrix m = reconstruct(prog);
    write_matrix_file(output, m);
    std::cout << "n " << prog.n << "\n";
    std::cout << "unitarity_error " << fmt(unitarity_error(m)) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

int cmd_bench(const std::vector<std::size_t>& dims,
              const std::vector<std::size_t>& capacities,
              const std::vector<std::string>& styles, int samples, std::uint64_t seed,
              const std::string& out_path) {
    std::vector<BenchPoint> points;
    auto log_point = [](const BenchPoint& p) {
        std::cerr << p.style << " n=" << p.n << " L=" << p.capacity << " apply "
                  << p.apply_us << " us, apply+backward " << p.grad_us << " us\n";
    };
    for (const auto& style : styles) {
        for (std::size_t n : dims) {
            if (style == "tunable") {
                for (std::size_t cap : capacities) {
                    points.push_back(bench_composition(MeshStyle::tunable, n,
                                                       std::min(cap, n), seed, samples));
                    log_point(points.back());
                }
                continue;
            }
            if (style == "fft") {
                if ((n & (n - 1)) != 0) continue;
                points.push_back(bench_composition(MeshStyle::fft, n, 0, seed, samples));
            } else if (style == "dense") {
                points.push_back(bench_dense(n, seed, samples));
            } else {
                throw ConfigError("unknown bench style: " + style);
            }
            log_point(points.back());
        }
    }
    std::ostringstream csv;
    csv << "style,n,capacity,apply_us,grad_us\n";
    for (const auto& p : points)
        csv << p.style << ',' << p.n << ',' << p.capacity << ',' << fmt(p.apply_us)
            << ',' << fmt(p.grad_us) << "\n";
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(out_path);
        if (!out) throw ValidationError("cannot write " + out_path);
        out << csv.str();
    }
    return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyReport {
    bool all_ok = true;

    void line(const std::string& name, bool ok, const std::string& detail) {
        std::printf("%-4s %-34s %s\n", ok ? "PASS" : "FAIL", name.c_str(),
                    detail.c_str());
        all_ok = all_ok && ok;
    }
};

void randomize_angles(UnitaryComposition& w, Rng& rng) {
    for (auto& layer : w.layers)
        for (std::size_t m = 0; m < layer.rotation_count(); ++m) {
            layer.theta[m] = rng.uniform(-kPi, kPi);
            layer.phi[m] = rng.uniform(-kPi, kPi);
        }
    for (auto& wj : w.diag.w) wj = rng.uniform(-kPi, kPi);
}

int cmd_verify(std::uint64_t seed, bool corrupt) {
    VerifyReport report;
    Rng rng(seed);

    {  // unitarity of compositions (with the optional corruption hook)
        double worst = 0.0;
        for (int variant = 0; variant < 4; ++variant) {
            UnitaryComposition w = (variant < 3)
                                       ? make_tunable_composition(64, variant == 0 ? 2
                                                                  : variant == 1 ? 8
                                                                                 : 64)
                                       : make_fft_composition(64);
            randomize_angles(w, rng);
            CompiledComposition c = compile(w);
            if (corrupt) c.layers[0].v1.re[3] *= 1.01;  // debug hook: break one kernel
            for (int rep = 0; rep < 20; ++rep) {
                ComplexVec x(64);
                for (std::size_t i = 0; i < 64; ++i) rng.normal_pair(x.re[i], x.im[i]);
                const ComplexVec y = apply(c, x);
                worst = std::max(worst, std::fabs(norm2(y) / norm2(x) - 1.0));
            }
        }
        report.line("unitarity", worst < 1e-10, "max |‖Wx‖/‖x‖ - 1| = " + fmt(worst));
    }
    {  // fast apply against the dense oracle
        UnitaryComposition w = make_tunable_composition(16, 16);
        randomize_angles(w, rng);
        const CMatrix m = materialize(w);
        ComplexVec x(16);
        for (std::size_t i = 0; i < 16; ++i) rng.normal_pair(x.re[i], x.im[i]);
        const ComplexVec fast = apply(compile(w), x);
        const ComplexVec dense = matvec(m, x);
        double diff = 0.0;
        for (std::size_t i = 0; i < 16; ++i)
            diff = std::max(diff, std::abs(fast.at(i) - dense.at(i)));
        report.line("dense_oracle", diff < 1e-12, "max entry diff = " + fmt(diff));
    }
    {  // gradients against finite differences on a toy cell
        Rng cell_rng(seed + 1);
        EurnnCell cell = make_eurnn_cell(4, 8, 3, MeshStyle::tunable, 4, cell_rng);
        SequenceBatch batch;
        batch.t_len = 5;
        batch.batch = 2;
        batch.n_in = 4;
        batch.inputs.resize(5 * 2 * 4);
        Rng brng(seed + 2);
        for (auto& x : batch.inputs) x = brng.uniform(-1, 1);
        batch.targets_i.resize(5 * 2);
        for (auto& t : batch.targets_i) t = int(brng.below(3));
        batch.mask.assign(5 * 2, 1);
        SeqResult res = sequence_forward_backward(cell, batch, LossKind::cross_entropy);
        auto loss = [&] {
            return sequence_forward_backward(cell, batch, LossKind::cross_entropy).loss;
        };
        auto pv = param_views(cell);
        auto gv = grad_views(res.grads);
        double max_rel = 0.0;
        for (std::size_t a = 0; a < pv.size(); ++a)
            for (std::size_t i = 0; i < pv[a].size(); ++i) {
                const double saved = pv[a][i];
                const double h = 1e-6;
                pv[a][i] = saved + h;
                const double lp = loss();
                pv[a][i] = saved - h;
                const double lm = loss();
                pv[a][i] = saved;
                const double fd = (lp - lm) / (2 * h);
                max_rel = std::max(max_rel,
                                   std::fabs(fd - gv[a][i]) /
                                       std::max({std::fabs(fd), std::fabs(gv[a][i]), 1e-3}));
            }
        report.line("gradients", max_rel < 1e-5, "max rel err = " + fmt(max_rel));
    }
    {  // decomposition round trip
        double worst = 0.0;
        for (int rep = 0; rep < 3; ++rep) {
            const CMatrix m = haar_unitary(8, rng);
            worst = std::max(worst, max_abs_diff(reconstruct(decompose_unitary(m)), m));
        }
        report.line("decompose_roundtrip", worst < 1e-8, "max entry err = " + fmt(worst));
    }
    {  // projective baseline drift
        CMatrix w = haar_unitary(8, rng);
        for (int step = 0; step < 200; ++step) {
            CMatrix g(8, 8);
            for (auto& z : g.a) z = {rng.normal(), rng.normal()};
            w = projective_update(w, g, 0.01);
        }
        const double drift = unitarity_error(w);
        report.line("projective_drift", drift < 1e-8, "|W†W - I| = " + fmt(drift));
    }
    {  // parameter count identities
        bool ok = true;
        for (std::size_t n : {4ul, 16ul, 64ul})
            ok = ok && make_tunable_composition(n, n).rotation_count() == n * (n - 1) / 2;
        ok = ok && make_fft_composition(64).rotation_count() == 64 * 6 / 2;
        report.line("parameter_counts", ok, "tunable n(n-1)/2, fft n log2(n)/2");
    }
    {  // permutation round trip, bit-exact
        std::vector<std::size_t> fwd(128);
        for (std::size_t i = 0; i < 128; ++i) fwd[i] = i;
        for (std::size_t i = 128; i-- > 1;) std::swap(fwd[i], fwd[rng.below(i + 1)]);
        const auto plan = PermutationPlan::from_forward(fwd);
        ComplexVec x(128);
        for (std::size_t i = 0; i < 128; ++i) rng.normal_pair(x.re[i], x.im[i]);
        const ComplexVec back = permute_inverse(permute(x, plan), plan);
        bool ok = true;
        for (std::size_t i = 0; i < 128; ++i)
            ok = ok && back.re[i] == x.re[i] && back.im[i] == x.im[i];
        report.line("permutation_roundtrip", ok, "bit-exact inverse");
    }
    {  // vanishing-gradient contrast
        Rng cell_rng(seed + 3);
        EurnnCell cell = make_eurnn_cell(2, 16, 2, MeshStyle::tunable, 4, cell_rng);
        ComplexVec h0(16), probe(16);
        for (std::size_t i = 0; i < 16; ++i) {
            cell_rng.normal_pair(h0.re[i], h0.im[i]);
            cell_rng.normal_pair(probe.re[i], probe.im[i]);
        }
        const double ratio =
            norm2(hidden_cotangent(cell, h0, probe, 100)) / norm2(probe);
        VanillaCell vcell = make_vanilla_cell(2, 16, 2, 0.5, cell_rng);
        std::vector<double> vh0(16, 0.0), vprobe(16);
        for (auto& x : vprobe) x = cell_rng.normal();
        const auto vdh0 = vanilla_hidden_cotangent(vcell, vh0, vprobe, 100);
        double nd = 0.0, np = 0.0;
        for (std::size_t i = 0; i < 16; ++i) {
            nd += vdh0[i] * vdh0[i];
            np += vprobe[i] * vprobe[i];
        }
        const double vratio = std::sqrt(nd / np);
        report.line("gradient_contrast", ratio > 1e-2 && ratio < 1e2 && vratio < 1e-6,
                    "eurnn ratio " + fmt(ratio) + ", vanilla ratio " + fmt(vratio));
    }

    return report.all_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Efficient unitary neural network benchmark tool"};
    app.require_subcommand(1);

    TrainOptions train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model on a task");
    add_train_options(train_cmd, train_opts);

    std::string in_path, out_path;
    CLI::App* dec_cmd =
        app.add_subcommand("decompose", "matrix file -> rotation program file");
    dec_cmd->add_option("--input", in_path, "matrix file")->required();
    dec_cmd->add_option("--output", out_path, "program file")->required();

    std::string rin_path, rout_path;
    CLI::App* rec_cmd =
        app.add_subcommand("reconstruct", "rotation program file -> matrix file");
    rec_cmd->add_option("--input", rin_path, "program file")->required();
    rec_cmd->add_option("--output", rout_path, "matrix file")->required();

    std::vector<std::size_t> bench_dims = {256, 512, 1024};
    std::vector<std::size_t> bench_capacities = {4};
    std::vector<std::string> bench_styles = {"tunable", "fft", "dense"};
    int bench_samples = 9;
    std::uint64_t bench_seed = 1;
    std::string bench_out;
    CLI::App* bench_cmd = app.add_subcommand("bench", "apply/backward timing table");
    bench_cmd->add_option("--dims", bench_dims, "dimensions to measure");
    bench_cmd->add_option("--capacities", bench_capacities, "tunable capacities L");
    bench_cmd->add_option("--styles", bench_styles, "tunable, fft, dense");
    bench_cmd->add_option("--samples", bench_samples, "timing samples per point");
    bench_cmd->add_option("--seed", bench_seed, "rng seed");
    bench_cmd->add_option("--out", bench_out, "CSV path (default stdout)");

    std::uint64_t verify_seed = 7;
    bool verify_corrupt = false;
    CLI::App* verify_cmd = app.add_subcommand("verify", "run the invariant suite");
    verify_cmd->add_option("--seed", verify_seed, "rng seed");
    verify_cmd->add_flag("--corrupt", verify_corrupt,
                         "debug hook: inject a kernel corruption (must fail)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    }

    try {
        if (*train_cmd) return cmd_train(train_opts);
        if (*dec_cmd) return cmd_decompose(in_path, out_path);
        if (*rec_cmd) return cmd_reconstruct(rin_path, rout_path);
        if (*bench_cmd)
            return cmd_bench(bench_dims, bench_capacities, bench_styles, bench_samples,
                             bench_seed, bench_out);
        if (*verify_cmd) return cmd_verify(verify_seed, verify_corrupt);
    } catch (const DivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
