#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eunn/dense.hpp"
#include "eunn/errors.hpp"
#include "eunn/optim.hpp"
#include "eunn/rnn_cell.hpp"
#include "eunn/unitary_ops.hpp"

namespace eunn {

// All text formats use decimal with 17 significant digits (round-trips a
// double exactly); the checkpoint uses hexfloat for bit-exact reload.

inline std::string fmt_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string fmt_hex(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", x);
    return buf;
}

// ---------------------------------------------------------------------------
// Matrix files: first line n, then n rows of n "re,im" pairs
// ---------------------------------------------------------------------------

inline void write_matrix(std::ostream& out, const CMatrix& m) {
    check_same_size(m.rows, m.cols, "write_matrix");
    out << m.rows << "\n";
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) out << ' ';
            out << fmt_g17(m.at(i, j).real()) << ',' << fmt_g17(m.at(i, j).imag());
        }
        out << "\n";
    }
}

inline void write_matrix_file(const std::string& path, const CMatrix& m) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    write_matrix(out, m);
}

inline CMatrix read_matrix(std::istream& in, const std::string& name = "<matrix>") {
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) -> ValidationError {
        return ValidationError(name + ":" + std::to_string(lineno) + ": " + what);
    };
    if (!std::getline(in, line)) throw fail("missing dimension line");
    ++lineno;
    std::size_t n = 0;
    try {
        n = std::stoul(line);
    } catch (...) {
        throw fail("unparseable dimension");
    }
    if (n == 0) throw fail("dimension must be positive");
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw fail("missing matrix row");
        ++lineno;
        std::istringstream row(line);
        for (std::size_t j = 0; j < n; ++j) {
            std::string cell;
            if (!(row >> cell)) throw fail("short row");
            const std::size_t comma = cell.find(',');
            if (comma == std::string::npos) throw fail("entry is not re,im");
            try {
                m.at(i, j) = {std::stod(cell.substr(0, comma)),
                              std::stod(cell.substr(comma + 1))};
            } catch (...) {
                throw fail("unparseable entry");
            }
        }
    }
    return m;
}

inline CMatrix read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    return read_matrix(in, path);
}

// ---------------------------------------------------------------------------
// Angle program files: one "i j theta phi" line per rotation, then a final
// "D w_0 ... w_{n-1}" line
// ---------------------------------------------------------------------------

inline void write_angle_program(std::ostream& out, const AngleProgram& p) {
    for (const auto& r : p.rotations)
        out << r.i << ' ' << r.j << ' ' << fmt_g17(r.theta) << ' ' << fmt_g17(r.phi)
            << "\n";
    out << "D";
    for (double w : p.phases) out << ' ' << fmt_g17(w);
    out << "\n";
}

inline void write_angle_program_file(const std::string& path, const AngleProgram& p) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    write_angle_program(out, p);
}

inline AngleProgram read_angle_program(std::istream& in,
                                       const std::string& name = "<program>") {
    AngleProgram p;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        if (line[0] == 'D') {
            std::string d;
            row >> d;
            double w;
            while (row >> w) p.phases.push_back(w);
            p.n = p.phases.size();
            return p;
        }
        AngleRotation r;
        if (!(row >> r.i >> r.j >> r.theta >> r.phi))
            throw ValidationError(name + ":" + std::to_string(lineno) +
                                  ": expected 'i j theta phi'");
        p.rotations.push_back(r);
    }
    throw ValidationError(name + ": missing final D line");
}

inline AngleProgram read_angle_program_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    return read_angle_program(in, path);
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned text dump of every parameter array, hexfloat
// payload for bit-exact reload
// ---------------------------------------------------------------------------

namespace detail {

inline void write_array(std::ostream& out, const std::string& name,
                        const std::vector<double>& a) {
    out << "array " << name << ' ' << a.size() << "\n";
    for (std::size_t i = 0; i < a.size(); ++i)
        out << fmt_hex(a[i]) << ((i + 1) % 8 == 0 || i + 1 == a.size() ? "\n" : " ");
}

inline std::vector<double> read_array(std::istream& in, const std::string& name) {
    std::string tag, got;
    std::size_t count = 0;
    if (!(in >> tag >> got >> count) || tag != "array" || got != name)
        throw ValidationError("checkpoint: expected array " + name);
    std::vector<double> a(count);
    for (auto& x : a) {
        std::string tok;
        if (!(in >> tok)) throw ValidationError("checkpoint: truncated array " + name);
        x = std::strtod(tok.c_str(), nullptr);
    }
    return a;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const EurnnCell& cell) {
    out << "EUNN-CKPT 1 eurnn\n";
    out << "dims " << cell.n_in << ' ' << cell.n_hidden << ' ' << cell.n_out << "\n";
    out << "mesh " << (cell.w.style == MeshStyle::tunable ? "tunable" : "fft") << ' '
        << cell.w.capacity() << "\n";
    detail::write_array(out, "u_re", cell.u_re);
    detail::write_array(out, "u_im", cell.u_im);
    for (std::size_t l = 0; l < cell.w.layers.size(); ++l) {
        detail::write_array(out, "theta" + std::to_string(l), cell.w.layers[l].theta);
        detail::write_array(out, "phi" + std::to_string(l), cell.w.layers[l].phi);
    }
    detail::write_array(out, "diag", cell.w.diag.w);
    detail::write_array(out, "b", cell.b);
    detail::write_array(out, "v", cell.v);
    detail::write_array(out, "c", cell.c);
}

inline EurnnCell read_checkpoint_eurnn(std::istream& in) {
    std::string magic, kind;
    int version = 0;
    if (!(in >> magic >> version >> kind) || magic != "EUNN-CKPT" || version != 1 ||
        kind != "eurnn")
        throw ValidationError("checkpoint: bad header");
    std::string tag;
    EurnnCell cell;
    std::size_t capacity = 0;
    std::string style;
    if (!(in >> tag >> cell.n_in >> cell.n_hidden >> cell.n_out) || tag != "dims")
        throw ValidationError("checkpoint: bad dims line");
    if (!(in >> tag >> style >> capacity) || tag != "mesh")
        throw ValidationError("checkpoint: bad mesh line");
    cell.w = (style == "tunable") ? make_tunable_composition(cell.n_hidden, capacity)
                                  : make_fft_composition(cell.n_hidden);
    cell.u_re = detail::read_array(in, "u_re");
    cell.u_im = detail::read_array(in, "u_im");
    for (std::size_t l = 0; l < cell.w.layers.size(); ++l) {
        cell.w.layers[l].theta = detail::read_array(in, "theta" + std::to_string(l));
        cell.w.layers[l].phi = detail::read_array(in, "phi" + std::to_string(l));
        if (cell.w.layers[l].theta.size() != cell.w.layers[l].pairs.size())
            throw ValidationError("checkpoint: layer angle count mismatch");
    }
    cell.w.diag.w = detail::read_array(in, "diag");
    cell.b = detail::read_array(in, "b");
    cell.v = detail::read_array(in, "v");
    cell.c = detail::read_array(in, "c");
    if (cell.u_re.size() != cell.n_hidden * cell.n_in ||
        cell.v.size() != cell.n_out * 2 * cell.n_hidden)
        throw ValidationError("checkpoint: array shape mismatch");
    return cell;
}

inline void write_checkpoint(std::ostream& out, const VanillaCell& cell) {
    out << "EUNN-CKPT 1 vanilla\n";
    out << "dims " << cell.n_in << ' ' << cell.n_hidden << ' ' << cell.n_out << "\n";
    detail::write_array(out, "w", cell.w);
    detail::write_array(out, "u", cell.u);
    detail::write_array(out, "b", cell.b);
    detail::write_array(out, "v", cell.v);
    detail::write_array(out, "c", cell.c);
}

inline VanillaCell read_checkpoint_vanilla(std::istream& in) {
    std::string magic, kind;
    int version = 0;
    if (!(in >> magic >> version >> kind) || magic != "EUNN-CKPT" || version != 1 ||
        kind != "vanilla")
        throw ValidationError("checkpoint: bad header");
    std::string tag;
    VanillaCell cell;
    if (!(in >> tag >> cell.n_in >> cell.n_hidden >> cell.n_out) || tag != "dims")
        throw ValidationError("checkpoint: bad dims line");
    cell.w = detail::read_array(in, "w");
    cell.u = detail::read_array(in, "u");
    cell.b = detail::read_array(in, "b");
    cell.v = detail::read_array(in, "v");
    cell.c = detail::read_array(in, "c");
    if (cell.w.size() != cell.n_hidden * cell.n_hidden)
        throw ValidationError("checkpoint: array shape mismatch");
    return cell;
}

// ---------------------------------------------------------------------------
// Metrics CSV: header iter,loss,val_metric,wall_ms. Only deterministic
// values are emitted (wall_ms is reserved and always 0; wall-clock timing
// belongs to the bench command), so identical runs produce identical bytes.
// ---------------------------------------------------------------------------

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << "iter,loss,val_metric,wall_ms\n";
    for (const auto& r : rows) {
        out << r.iter << ',' << fmt_g17(r.loss) << ',';
        if (r.val_metric) out << fmt_g17(*r.val_metric);
        out << ",0\n";
    }
}

inline void write_metrics_csv_file(const std::string& path,
                                   const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    write_metrics_csv(out, rows);
}

// ---------------------------------------------------------------------------
// key=value config files (resolved experiment settings)
// ---------------------------------------------------------------------------

inline void write_kv_file(const std::string& path,
                          const std::map<std::string, std::string>& kv) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    for (const auto& [k, v] : kv) out << k << '=' << v << "\n";
}

inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

}  // namespace eunn
