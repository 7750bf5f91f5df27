#pragma once

// Canonical JSON output, atomic file writes and curve CSV export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <unistd.h>

#include "json.hpp"

#include "psc/bending.hpp"

namespace psc {

using Json = nlohmann::json;

namespace detail {

inline void append_double(std::string& out, double v) {
    if (!std::isfinite(v)) {
        out += "null";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    out += buf;
}

inline void emit_canonical(const Json& j, std::string& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {  // std::map storage: keys sorted
                if (!first) out += ",\n";
                first = false;
                out += inner + Json(it.key()).dump() + ": ";
                emit_canonical(it.value(), out, indent + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ",\n";
                out += inner;
                emit_canonical(j[i], out, indent + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case Json::value_t::number_float: append_double(out, j.get<double>()); return;
        default: out += j.dump(); return;
    }
}

}  // namespace detail

/// Sorted keys, two-space indent, every floating-point value as %.12e.
inline std::string canonical_json(const Json& j) {
    std::string out;
    detail::emit_canonical(j, out, 0);
    out += "\n";
    return out;
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write never leaves a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::Io, "directory does not exist: " + dir.string());
    const fs::path tmp = dir / (path.filename().string() + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(ErrorCode::Io, "cannot open " + tmp.string());
        f << content;
        f.flush();
        if (!f) {
            f.close();
            fs::remove(tmp, ec);
            throw Error(ErrorCode::Io, "write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::Io, "cannot move output into place: " + path.string());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::Config, what + ": " + e.what());
    }
}

/// CSV of samples + 1 rows at uniform global arclength.
inline std::string curve_csv(const BendingCurve& curve, std::size_t samples) {
    if (samples < 1) throw Error(ErrorCode::OutOfRange, "need at least one sample interval");
    std::string out = "s,t,r,theta,kappa,stage,formula_value\n";
    const double L = curve.total_length();
    char buf[256];
    for (std::size_t i = 0; i <= samples; ++i) {
        const double s = i == samples ? L : L * static_cast<double>(i) / static_cast<double>(samples);
        const CurvePoint p = curve.at(s);
        std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e,%.12e,%.12e,%zu,%.12e\n", p.s, p.t, p.r, p.theta, p.kappa,
                      p.stage, worst_case_formula(p, curve.params));
        out += buf;
    }
    return out;
}

inline void export_curve_csv(const BendingCurve& curve, const std::filesystem::path& path, std::size_t samples) {
    atomic_write(path, curve_csv(curve, samples));
}

}  // namespace psc
