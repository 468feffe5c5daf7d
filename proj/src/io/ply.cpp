// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/io/ply.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

namespace MONOSPLAT_NS {

namespace {

std::vector<std::string> property_names(int bands) {
    std::vector<std::string> names{"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    for (int i = 0; i < 3 * (bands - 1); ++i) {
        names.push_back("f_rest_" + std::to_string(i));
    }
    names.push_back("opacity");
    for (int i = 0; i < 3; ++i) {
        names.push_back("scale_" + std::to_string(i));
    }
    for (int i = 0; i < 4; ++i) {
        names.push_back("rot_" + std::to_string(i));
    }
    return names;
}

std::string next_line(std::span<const std::uint8_t> bytes, std::size_t &off) {
    std::string line;
    while (off < bytes.size() && bytes[off] != '\n') {
        line.push_back(static_cast<char>(bytes[off++]));
    }
    if (off >= bytes.size()) {
        throw FormatError("PLY: truncated header");
    }
    ++off;
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    return line;
}

} // namespace

PlyTable to_ply_table(const GaussianSet &g) {
    g.validate(false);
    const int B = g.sh_bands();
    PlyTable t;
    t.properties = property_names(B);
    t.count = g.size();
    const auto P = t.properties.size();
    t.values.assign(static_cast<std::size_t>(t.count) * P, 0.0f);
    for (std::int64_t i = 0; i < t.count; ++i) {
        float *row = t.values.data() + static_cast<std::size_t>(i) * P;
        std::size_t k = 0;
        for (int e = 0; e < 3; ++e) {
            row[k++] = static_cast<float>(g.mu[i * 3 + e]);
        }
        k += 3; // normals stay zero
        for (int c = 0; c < 3; ++c) {
            row[k++] = static_cast<float>(g.sh[(i * 3 + c) * B]);
        }
        for (int c = 0; c < 3; ++c) {
            for (int b = 1; b < B; ++b) {
                row[k++] = static_cast<float>(g.sh[(i * 3 + c) * B + b]);
            }
        }
        const double a = g.alpha[i];
        row[k++] = static_cast<float>(std::log(a / (1.0 - a)));
        for (int e = 0; e < 3; ++e) {
            row[k++] = static_cast<float>(std::log(static_cast<double>(g.scale[i * 3 + e])));
        }
        for (int e = 0; e < 4; ++e) {
            row[k++] = static_cast<float>(g.rot[i * 4 + e]);
        }
    }
    return t;
}

GaussianSet from_ply_table(const PlyTable &table) {
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < table.properties.size(); ++i) {
        col[table.properties[i]] = i;
    }
    std::int64_t rest = 0;
    while (col.count("f_rest_" + std::to_string(rest)) != 0) {
        ++rest;
    }
    if (rest % 3 != 0) {
        throw FormatError("PLY: f_rest count is not a multiple of 3");
    }
    const int B = static_cast<int>(rest / 3 + 1);
    auto need = [&](const std::string &name) {
        auto it = col.find(name);
        if (it == col.end()) {
            throw FormatError("PLY: missing property " + name);
        }
        return it->second;
    };
    const std::size_t P = table.properties.size();
    if (table.values.size() != static_cast<std::size_t>(table.count) * P) {
        throw FormatError("PLY: value count does not match the vertex count");
    }
    GaussianSet g = GaussianSet::allocate(table.count, B);
    const std::size_t cx = need("x"), cy = need("y"), cz = need("z"), co = need("opacity");
    std::size_t cs[3], cr[4], cdc[3];
    for (int e = 0; e < 3; ++e) {
        cs[e] = need("scale_" + std::to_string(e));
        cdc[e] = need("f_dc_" + std::to_string(e));
    }
    for (int e = 0; e < 4; ++e) {
        cr[e] = need("rot_" + std::to_string(e));
    }
    for (std::int64_t i = 0; i < table.count; ++i) {
        const float *row = table.values.data() + static_cast<std::size_t>(i) * P;
        g.mu[i * 3] = row[cx];
        g.mu[i * 3 + 1] = row[cy];
        g.mu[i * 3 + 2] = row[cz];
        g.alpha[i] = static_cast<Real>(1.0 / (1.0 + std::exp(-static_cast<double>(row[co]))));
        for (int e = 0; e < 3; ++e) {
            g.scale[i * 3 + e] = static_cast<Real>(std::exp(static_cast<double>(row[cs[e]])));
        }
        double qn = 0.0;
        for (int e = 0; e < 4; ++e) {
            qn += static_cast<double>(row[cr[e]]) * row[cr[e]];
        }
        qn = std::sqrt(qn);
        if (!(qn > 0.0)) {
            throw FormatError("PLY: zero quaternion at vertex " + std::to_string(i));
        }
        for (int e = 0; e < 4; ++e) {
            g.rot[i * 4 + e] = static_cast<Real>(row[cr[e]] / qn);
        }
        for (int c = 0; c < 3; ++c) {
            g.sh[(i * 3 + c) * B] = row[cdc[c]];
            for (int b = 1; b < B; ++b) {
                g.sh[(i * 3 + c) * B + b] = row[col.at("f_rest_" + std::to_string(c * (B - 1) + b - 1))];
            }
        }
    }
    g.validate(false);
    return g;
}

std::vector<std::uint8_t> serialize_ply(const PlyTable &table) {
    std::ostringstream h;
    h << "ply\nformat binary_little_endian 1.0\nelement vertex " << table.count << "\n";
    for (const auto &p : table.properties) {
        h << "property float " << p << "\n";
    }
    h << "end_header\n";
    const std::string header = h.str();
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + table.values.size() * 4);
    for (float v : table.values) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        for (int b = 0; b < 4; ++b) {
            out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
        }
    }
    return out;
}

PlyTable parse_ply(std::span<const std::uint8_t> bytes) {
    std::size_t off = 0;
    if (next_line(bytes, off) != "ply") {
        throw FormatError("PLY: bad magic");
    }
    PlyTable t;
    bool have_format = false, have_vertex = false;
    for (;;) {
        const std::string line = next_line(bytes, off);
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "end_header") {
            break;
        }
        if (kw == "comment" || kw == "obj_info" || kw.empty()) {
            continue;
        }
        if (kw == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt != "binary_little_endian") {
                throw FormatError("PLY: only binary_little_endian is supported, got " + fmt);
            }
            have_format = true;
        } else if (kw == "element") {
            std::string name;
            std::int64_t n = -1;
            ls >> name >> n;
            if (name != "vertex" || have_vertex || n < 0) {
                throw FormatError("PLY: expected a single vertex element");
            }
            t.count = n;
            have_vertex = true;
        } else if (kw == "property") {
            std::string type, name;
            ls >> type >> name;
            if (!have_vertex) {
                throw FormatError("PLY: property before element");
            }
            if (type != "float" && type != "float32") {
                throw FormatError("PLY: unsupported property type " + type);
            }
            t.properties.push_back(name);
        } else {
            throw FormatError("PLY: unexpected header line '" + line + "'");
        }
    }
    if (!have_format || !have_vertex) {
        throw FormatError("PLY: incomplete header");
    }
    const std::size_t n = static_cast<std::size_t>(t.count) * t.properties.size();
    if (bytes.size() - off != n * 4) {
        throw FormatError("PLY: payload length does not match the header");
    }
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) {
            u |= static_cast<std::uint32_t>(bytes[off + i * 4 + static_cast<std::size_t>(b)]) << (8 * b);
        }
        std::memcpy(&t.values[i], &u, 4);
    }
    return t;
}

void write_ply(const std::filesystem::path &path, const GaussianSet &g) {
    write_file_bytes(path, serialize_ply(to_ply_table(g)));
}

GaussianSet read_ply(const std::filesystem::path &path) { return from_ply_table(parse_ply(read_file_bytes(path))); }

} // namespace monosplat
