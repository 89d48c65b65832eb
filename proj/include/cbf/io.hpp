#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cbf/forward.hpp"
#include "cbf/optimize.hpp"

namespace cbf {

/// Binary field-file header. Little-endian throughout; doubles are IEEE-754.
/// Payload: `count` fields, each n^2 nodes of complex coefficient pairs
/// (u1.re, u1.im, u2.re, u2.im) in row-major mode order, 32 bytes per node.
struct FieldFileHeader {
    static constexpr char magic[4] = {'C', 'B', 'F', '1'};
    static constexpr uint32_t current_version = 1;
    static constexpr uint32_t flag_spectral = 1u;

    uint32_t version = current_version;
    uint32_t n = 0;
    double length = 0.0;
    uint32_t count = 0;
    double dt = 0.0;
    uint32_t flags = flag_spectral;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_raw(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("field file: truncated payload");
}

} // namespace detail

inline void write_header(std::ostream& os, const FieldFileHeader& h) {
    os.write(FieldFileHeader::magic, 4);
    detail::write_raw(os, h.version);
    detail::write_raw(os, h.n);
    detail::write_raw(os, h.length);
    detail::write_raw(os, h.count);
    detail::write_raw(os, h.dt);
    detail::write_raw(os, h.flags);
}

inline FieldFileHeader read_header(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, FieldFileHeader::magic, 4) != 0)
        throw FormatError("field file: bad magic");
    FieldFileHeader h;
    detail::read_raw(is, h.version);
    if (h.version != FieldFileHeader::current_version)
        throw FormatError("field file: unsupported version");
    detail::read_raw(is, h.n);
    detail::read_raw(is, h.length);
    detail::read_raw(is, h.count);
    detail::read_raw(is, h.dt);
    detail::read_raw(is, h.flags);
    return h;
}

inline void save_fields(const std::string& path, const std::vector<SpectralVecField>& fields,
                        double dt) {
    if (fields.empty()) throw std::invalid_argument("save_fields: nothing to save");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("save_fields: cannot open " + path);
    FieldFileHeader h;
    h.n = static_cast<uint32_t>(fields.front().n());
    h.length = fields.front().grid.length;
    h.count = static_cast<uint32_t>(fields.size());
    h.dt = dt;
    write_header(os, h);
    for (const auto& f : fields) {
        f.check_same_grid(fields.front());
        for (size_t i = 0; i < f.size(); ++i) {
            detail::write_raw(os, f.comp[0][i].real());
            detail::write_raw(os, f.comp[0][i].imag());
            detail::write_raw(os, f.comp[1][i].real());
            detail::write_raw(os, f.comp[1][i].imag());
        }
    }
    if (!os) throw FormatError("save_fields: write failure on " + path);
}

inline std::vector<SpectralVecField> load_fields(const std::string& path, GridSpec* grid_out,
                                                 double* dt_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("load_fields: cannot open " + path);
    const FieldFileHeader h = read_header(is);
    if (!(h.flags & FieldFileHeader::flag_spectral))
        throw FormatError("load_fields: physical payloads are not supported here");
    GridSpec grid;
    grid.n = static_cast<int>(h.n);
    grid.length = h.length;
    grid.validate();
    std::vector<SpectralVecField> fields;
    fields.reserve(h.count);
    for (uint32_t j = 0; j < h.count; ++j) {
        SpectralVecField f(grid);
        for (size_t i = 0; i < f.size(); ++i) {
            double re0, im0, re1, im1;
            detail::read_raw(is, re0);
            detail::read_raw(is, im0);
            detail::read_raw(is, re1);
            detail::read_raw(is, im1);
            f.comp[0][i] = Complex(re0, im0);
            f.comp[1][i] = Complex(re1, im1);
        }
        fields.push_back(std::move(f));
    }
    char extra;
    if (is.read(&extra, 1)) throw FormatError("load_fields: trailing bytes after payload");
    if (grid_out) *grid_out = grid;
    if (dt_out) *dt_out = h.dt;
    return fields;
}

inline void save_field(const std::string& path, const SpectralVecField& f) {
    save_fields(path, {f}, 0.0);
}

inline SpectralVecField load_field(const std::string& path) {
    auto fields = load_fields(path, nullptr, nullptr);
    if (fields.size() != 1) throw FormatError("load_field: expected a single field");
    return std::move(fields.front());
}

/// Stored snapshots with the snapshot spacing as the file dt; bit-exact
/// round trip of the coefficients.
inline void save_trajectory(const std::string& path, const Trajectory& traj) {
    save_fields(path, traj.stored, traj.dt * traj.checkpoint_stride);
}

/// Reloaded trajectories carry the stored states at the snapshot spacing
/// (stride 1); they serve analysis, not adjoint resumption.
inline Trajectory load_trajectory(const std::string& path) {
    GridSpec grid;
    double dt = 0.0;
    auto fields = load_fields(path, &grid, &dt);
    Trajectory traj;
    traj.grid = grid;
    traj.dt = dt;
    traj.n_steps = static_cast<int>(fields.size()) - 1;
    traj.checkpoint_stride = 1;
    traj.stored = std::move(fields);
    return traj;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void write_energy_csv(const std::string& path, const EnergyLedger& ledger) {
    std::ofstream os(path);
    if (!os) throw FormatError("write_energy_csv: cannot open " + path);
    os << "t,kinetic,viscous,darcy,forchheimer,work_f,work_DU,equality_residual\n";
    for (size_t k = 0; k < ledger.n_nodes(); ++k) {
        os << detail::format_double(ledger.t[k]) << ','
           << detail::format_double(ledger.kinetic[k]) << ','
           << detail::format_double(ledger.viscous[k]) << ','
           << detail::format_double(ledger.darcy[k]) << ','
           << detail::format_double(ledger.forchheimer[k]) << ','
           << detail::format_double(ledger.work_f[k]) << ','
           << detail::format_double(ledger.work_du[k]) << ','
           << detail::format_double(ledger.equality_residual[k]) << '\n';
    }
}

inline void write_report_csv(const std::string& path, const OptimReport& report) {
    std::ofstream os(path);
    if (!os) throw FormatError("write_report_csv: cannot open " + path);
    os << "iter,cost,grad_norm,step,pontryagin_residual\n";
    for (const auto& it : report.history) {
        os << it.iter << ',' << detail::format_double(it.cost) << ','
           << detail::format_double(it.grad_norm) << ',' << detail::format_double(it.step)
           << ',' << detail::format_double(it.pontryagin) << '\n';
    }
}

} // namespace cbf
