#pragma once

#include "srcid/errors.hpp"
#include "srcid/fem.hpp"
#include "srcid/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace srcid::harness {

/// Shortest round-trip-safe text for a double (17 significant digits).
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes through a temporary sibling file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << contents;
        os.flush();
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Field dump: one "x1 x2 value" line per node in mesh order.
inline std::string format_field(const Mesh& mesh, const Field& f) {
    if (f.size() != mesh.node_count()) throw InvalidArgument("field does not match mesh");
    std::string out;
    out.reserve(mesh.node_count() * 64);
    for (std::size_t i = 0; i < f.size(); ++i) {
        out += format_real(mesh.nodes[i].x1);
        out += ' ';
        out += format_real(mesh.nodes[i].x2);
        out += ' ';
        out += format_real(f[i]);
        out += '\n';
    }
    return out;
}

/// Parses a field dump and checks that its coordinates match the mesh.
inline Field parse_field(const Mesh& mesh, const std::string& text) {
    std::istringstream is(text);
    Field f(mesh.node_count());
    std::string line;
    std::size_t i = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (i >= mesh.node_count()) throw InvalidArgument("field dump has more lines than mesh nodes");
        std::istringstream ls(line);
        double x1, x2, v;
        if (!(ls >> x1 >> x2 >> v)) throw InvalidArgument("malformed field dump line " + std::to_string(i + 1));
        const Point& p = mesh.nodes[i];
        if (std::abs(x1 - p.x1) > 1e-12 || std::abs(x2 - p.x2) > 1e-12) {
            throw InvalidArgument("field dump node " + std::to_string(i) + " does not match the mesh");
        }
        f[i] = v;
        ++i;
    }
    if (i != mesh.node_count()) throw InvalidArgument("field dump has fewer lines than mesh nodes");
    return f;
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

/// Flat "key = value" text; '#' starts a comment, blank lines are skipped.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(const std::string& text, const std::string& origin) {
    KeyValues kv;
    std::istringstream is(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

inline std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string out;
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
    return out;
}

}  // namespace srcid::harness
