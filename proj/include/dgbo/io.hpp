#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dgbo/dynamics.hpp"
#include "dgbo/errors.hpp"
#include "dgbo/grid.hpp"
#include "dgbo/ground_state.hpp"
#include "dgbo/linearized.hpp"
#include "dgbo/modulation.hpp"
#include "dgbo/monotonicity.hpp"

namespace dgbo {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Version stamp carried by every artifact header.
inline json version_stamp() {
    return {{"dgbo", kVersion},
            {"modules", {{"spectral_core", kVersion}, {"dynamics", kVersion}, {"ground_state", kVersion},
                         {"linearized", kVersion}, {"modulation", kVersion}, {"monotonicity", kVersion}, {"cli", kVersion}}}};
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json to_json(const GridSpec& g) { return {{"half_length", g.half_length()}, {"n", g.size()}}; }

inline GridSpec grid_from_json(const json& j) {
    try {
        return GridSpec(j.at("half_length").get<double>(), j.at("n").get<std::size_t>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open " + p.string() + " for writing");
    out << text;
    if (!out) throw Error("write failed: " + p.string());
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& p) {
    try {
        return json::parse(read_text(p));
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Field binaries
// ---------------------------------------------------------------------------

/// Sidecar path: foo.bin -> foo.json.
inline std::filesystem::path sidecar_path(std::filesystem::path p) { return p.replace_extension(".json"); }

/// Little-endian float64 samples plus a JSON sidecar with the grid and `meta`.
inline void write_field(const std::filesystem::path& bin, const RealField& f, json meta = json::object()) {
    if (bin.has_parent_path()) std::filesystem::create_directories(bin.parent_path());
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw Error("cannot open " + bin.string() + " for writing");
    for (double v : f.values()) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        char bytes[8];
        std::memcpy(bytes, &bits, 8);
        out.write(bytes, 8);
    }
    if (!out) throw Error("write failed: " + bin.string());
    json side;
    side["format"] = "float64-le";
    side["grid"] = to_json(f.grid());
    side["diverged"] = f.diverged();
    for (auto it = meta.begin(); it != meta.end(); ++it) side[it.key()] = it.value();
    side["version"] = version_stamp();
    write_json(sidecar_path(bin), side);
}

struct LoadedField {
    RealField field;
    json meta;
};

inline LoadedField read_field(const std::filesystem::path& bin) {
    const json meta = read_json(sidecar_path(bin));
    const GridSpec g = grid_from_json(meta.at("grid"));
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + bin.string());
    std::vector<double> v(g.size());
    for (auto& x : v) {
        char bytes[8];
        in.read(bytes, 8);
        if (!in) throw ConfigError(bin.string() + ": fewer samples than the sidecar grid declares");
        std::uint64_t bits;
        std::memcpy(&bits, bytes, 8);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        x = std::bit_cast<double>(bits);
    }
    RealField f(g, std::move(v));
    if (meta.value("diverged", false)) f.mark_diverged();
    return {std::move(f), meta};
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Column-oriented table written with a leading "# {json header}" line.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(const std::vector<double>& row) {
        if (row.size() != columns_.size()) throw ContractError("CsvTable: row width does not match the header");
        rows_.push_back(row);
    }

    std::string str(const json& header = nullptr) const {
        std::string s;
        if (!header.is_null()) s += "# " + header.dump() + "\n";
        for (std::size_t c = 0; c < columns_.size(); ++c) s += (c ? "," : "") + columns_[c];
        s += "\n";
        for (const auto& r : rows_) {
            for (std::size_t c = 0; c < r.size(); ++c) s += (c ? "," : "") + format_double(r[c]);
            s += "\n";
        }
        return s;
    }

    void write(const std::filesystem::path& p, const json& header = nullptr) const { write_text(p, str(header)); }

    const std::vector<std::string>& columns() const noexcept { return columns_; }
    const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

    /// Parses a table written by write(); the header line, if any, lands in `header`.
    static CsvTable read(const std::filesystem::path& p, json* header = nullptr) {
        std::istringstream in(read_text(p));
        std::string line;
        std::vector<std::string> cols;
        while (std::getline(in, line)) {
            if (line.rfind("# ", 0) == 0) {
                if (header) *header = json::parse(line.substr(2));
                continue;
            }
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) cols.push_back(cell);
            break;
        }
        CsvTable t(cols);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<double> row;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) {
                // strtod keeps subnormals that stod rejects as out of range
                char* end = nullptr;
                const double v = std::strtod(cell.c_str(), &end);
                if (end == cell.c_str()) throw ConfigError(p.string() + ": non-numeric cell '" + cell + "'");
                row.push_back(v);
            }
            t.add_row(row);
        }
        return t;
    }

    std::vector<double> column(const std::string& name) const {
        const auto it = std::find(columns_.begin(), columns_.end(), name);
        if (it == columns_.end()) throw ConfigError("CSV has no column '" + name + "'");
        const std::size_t c = static_cast<std::size_t>(it - columns_.begin());
        std::vector<double> out;
        out.reserve(rows_.size());
        for (const auto& r : rows_) out.push_back(r[c]);
        return out;
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

inline json to_json(const EvolutionConfig& c) {
    return {{"alpha", c.alpha},
            {"nonlinearity", to_string(c.sign)},
            {"dt", c.dt},
            {"t_end", c.t_end},
            {"filter_strength", c.filter_strength},
            {"dealias_pad", c.dealias_pad},
            {"checkpoint_every", c.checkpoint_every},
            {"linf_ceiling", c.linf_ceiling},
            {"sobolev_growth_limit", c.sobolev_growth_limit},
            {"tail_threshold", c.tail_threshold}};
}

inline CsvTable diagnostics_table(const RunRecord& rec) {
    CsvTable t({"t", "mass", "energy", "mean", "sobolev", "linf"});
    for (const auto& d : rec.samples) t.add_row({d.t, d.mass, d.energy, d.mean, d.sobolev, d.linf});
    return t;
}

/// RUNDIR/run.json, RUNDIR/diagnostics.csv, RUNDIR/final.bin and RUNDIR/frames/frame_NNNNN.bin.
inline void write_run(const std::filesystem::path& dir, const RunRecord& rec, const json& config_echo = json::object()) {
    std::filesystem::create_directories(dir);
    json head;
    head["config"] = config_echo;
    head["evolution"] = to_json(rec.config);
    head["grid"] = to_json(rec.grid);
    head["status"] = to_string(rec.status);
    head["status_time"] = rec.status_time;
    head["status_reason"] = rec.status_reason;
    head["dt_used"] = rec.dt_used;
    head["frames"] = rec.frames.size();
    head["version"] = version_stamp();
    write_json(dir / "run.json", head);
    diagnostics_table(rec).write(dir / "diagnostics.csv", {{"config", config_echo}, {"grid", to_json(rec.grid)}});
    const json meta{{"alpha", rec.config.alpha}, {"t", rec.status_time}};
    write_field(dir / "final.bin", rec.final_state, meta);
    for (std::size_t i = 0; i < rec.frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.bin", i);
        write_field(dir / "frames" / name, rec.frames[i].u, {{"alpha", rec.config.alpha}, {"t", rec.frames[i].t}});
    }
}

struct LoadedRun {
    json header;
    std::vector<Frame> frames;
    double alpha = 2.0;
    GridSpec grid;
};

inline LoadedRun read_run(const std::filesystem::path& dir) {
    LoadedRun r;
    r.header = read_json(dir / "run.json");
    r.alpha = r.header.at("evolution").at("alpha").get<double>();
    r.grid = grid_from_json(r.header.at("grid"));
    const std::size_t n = r.header.at("frames").get<std::size_t>();
    for (std::size_t i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.bin", i);
        auto f = read_field(dir / "frames" / name);
        r.frames.push_back({f.meta.at("t").get<double>(), std::move(f.field)});
    }
    return r;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json to_json(const PohozaevResiduals& p) {
    return {{"mass_gradient", p.mass_gradient}, {"mass_potential", p.mass_potential}, {"energy", p.energy}};
}

/// Certificate written next to a ground-state binary.
inline json certificate(const GroundState& gs) {
    json j;
    j["alpha"] = gs.alpha;
    j["grid"] = to_json(gs.grid);
    j["converged"] = gs.converged;
    j["iterations"] = gs.iterations;
    j["Q0"] = gs.Q[gs.grid.origin_index()];
    j["mass"] = gs.mass();
    j["pohozaev"] = to_json(gs.pohozaev);
    j["energy_residual"] = gs.energy_residual;
    j["equation_residual_l2"] = gs.equation_residual_l2;
    j["decay_exponent_fit"] = gs.decay_exponent_fit ? json(*gs.decay_exponent_fit) : json(nullptr);
    j["j1"] = j1(gs.Q, gs.alpha);
    return j;
}

inline json to_json(const SpectrumReport& r) {
    json j;
    j["mu0"] = r.mu0;
    j["chi0_residual"] = r.chi0_residual;
    j["chi0_even_defect"] = r.chi0_even_defect;
    j["chi0_positive"] = r.chi0_positive;
    j["negative_count"] = r.negative_count;
    j["kernel_tol"] = r.kernel_tol;
    j["matrix_norm"] = r.matrix_norm;
    j["kernel_similarity"] = r.kernel_similarity;
    j["essential_edge_estimate"] = r.essential_edge_estimate;
    j["spectral_gap"] = r.spectral_gap;
    json nk = json::array();
    for (const auto& p : r.near_kernel) nk.push_back({{"value", p.value}, {"residual", p.residual}});
    j["near_kernel"] = nk;
    j["lowest"] = r.lowest;
    j["coercivity_constant"] = r.coercivity_constant ? json(*r.coercivity_constant) : json(nullptr);
    return j;
}

inline CsvTable track_table(const ModulationTrack& tr) {
    CsvTable t({"t", "s", "lambda", "rho", "eta_l2", "eta_sobolev", "dlambda_rel", "drho_rel"});
    for (std::size_t i = 0; i < tr.size(); ++i)
        t.add_row({tr.t[i], tr.s[i], tr.lambda[i], tr.rho[i], tr.eta_l2[i], tr.eta_sobolev[i], tr.dlambda_rel[i], tr.drho_rel[i]});
    return t;
}

inline json track_header(const ModulationTrack& tr) {
    json j;
    j["alpha"] = tr.alpha;
    j["samples"] = tr.size();
    j["truncated_at"] = tr.truncated_at ? json(*tr.truncated_at) : json(nullptr);
    j["truncation_reason"] = tr.truncation_reason;
    j["fitted_c"] = tr.fitted_c;
    j["fitted_c_weighted"] = tr.fitted_c_weighted;
    j["version"] = version_stamp();
    return j;
}

/// Parameter columns of a track CSV; eta fields are not stored.
inline ModulationTrack read_track(const std::filesystem::path& p, json* header = nullptr) {
    json h;
    const CsvTable t = CsvTable::read(p, &h);
    ModulationTrack tr;
    tr.t = t.column("t");
    tr.s = t.column("s");
    tr.lambda = t.column("lambda");
    tr.rho = t.column("rho");
    tr.eta_l2 = t.column("eta_l2");
    tr.eta_sobolev = t.column("eta_sobolev");
    tr.dlambda_rel = t.column("dlambda_rel");
    tr.drho_rel = t.column("drho_rel");
    if (h.contains("alpha")) tr.alpha = h["alpha"].get<double>();
    if (h.contains("truncated_at") && !h["truncated_at"].is_null()) tr.truncated_at = h["truncated_at"].get<std::size_t>();
    if (h.contains("truncation_reason")) tr.truncation_reason = h["truncation_reason"].get<std::string>();
    if (header) *header = h;
    return tr;
}

inline json to_json(const MonotonicityReport& r) {
    json j;
    j["kind"] = to_string(r.kind);
    j["x0"] = r.x0;
    j["mu"] = r.mu;
    j["r"] = r.r;
    j["A"] = r.A;
    j["constant"] = r.constant;
    j["error_budget"] = r.error_budget;
    j["window_fraction"] = r.window_fraction;
    j["tolerance"] = r.tolerance;
    j["lambda_max"] = r.lambda_max;
    j["rho_t_min"] = r.rho_t_min;
    j["rho_t_bound"] = r.rho_t_bound;
    j["violations"] = r.violations();
    j["all_true"] = r.all_true();
    j["min_slack"] = r.min_slack();
    j["max_deficit"] = r.max_deficit();
    j["pairs"] = {{"t1", r.t1}, {"t2", r.t2}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"slack", r.slack}, {"budget", r.budget},
                  {"verdict", r.verdict}};
    return j;
}

}  // namespace dgbo
