#include "gsmae/ply_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace gsmae {

namespace {

int property_size(const std::string& type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
        type == "float" || type == "float32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    return -1;
}

bool is_float32(const std::string& type) { return type == "float" || type == "float32"; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
    const double c = std::clamp(p, 1e-7, 1.0 - 1e-7);
    return std::log(c / (1.0 - c));
}

struct VertexLayout {
    std::int64_t count = -1;
    std::vector<std::string> names;
    std::vector<std::string> types;
    std::vector<std::int64_t> offsets;
    std::int64_t stride = 0;

    // Byte offset of a required float32 property.
    std::int64_t require(const std::string& name, const std::filesystem::path& path) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) {
                if (!is_float32(types[i]))
                    throw FormatError(path.string() + ": property " + name +
                                      " has unsupported type " + types[i]);
                return offsets[i];
            }
        }
        throw FormatError(path.string() + ": missing vertex property " + name);
    }
};

} // namespace

SplatSet load_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") throw FormatError(path.string() + ": not a PLY file");

    VertexLayout layout;
    bool format_seen = false;
    bool in_vertex = false;
    bool other_element_first = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment") continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii")
                throw FormatError(path.string() + ": ASCII PLY is not supported, expected "
                                                  "binary_little_endian");
            if (fmt != "binary_little_endian")
                throw FormatError(path.string() + ": unsupported PLY format " + fmt);
            format_seen = true;
        } else if (word == "element") {
            std::string name;
            std::int64_t count = 0;
            ls >> name >> count;
            if (name == "vertex") {
                if (other_element_first)
                    throw FormatError(path.string() + ": vertex element must come first");
                layout.count = count;
                in_vertex = true;
            } else {
                if (layout.count < 0) other_element_first = true;
                in_vertex = false;
            }
        } else if (word == "property") {
            if (!in_vertex) continue;
            std::string type, name;
            ls >> type >> name;
            if (type == "list")
                throw FormatError(path.string() + ": list properties are not supported");
            const int size = property_size(type);
            if (size < 0)
                throw FormatError(path.string() + ": unknown property type " + type);
            layout.names.push_back(name);
            layout.types.push_back(type);
            layout.offsets.push_back(layout.stride);
            layout.stride += size;
        } else if (word == "end_header") {
            break;
        }
    }
    if (!format_seen) throw FormatError(path.string() + ": missing format line");
    if (layout.count < 0) throw FormatError(path.string() + ": missing vertex element");

    std::vector<std::int64_t> off;
    static const char* kCoord[] = {"x", "y", "z"};
    for (auto* n : kCoord) off.push_back(layout.require(n, path));
    for (int i = 0; i < 3; ++i) off.push_back(layout.require("f_dc_" + std::to_string(i), path));
    for (int i = 0; i < 45; ++i)
        off.push_back(layout.require("f_rest_" + std::to_string(i), path));
    off.push_back(layout.require("opacity", path));
    for (int i = 0; i < 3; ++i) off.push_back(layout.require("scale_" + std::to_string(i), path));
    for (int i = 0; i < 4; ++i) off.push_back(layout.require("rot_" + std::to_string(i), path));

    const std::int64_t n = layout.count;
    std::vector<char> row(layout.stride);
    SplatSet set = SplatSet::with_size(n);
    auto read_f = [&](std::int64_t byte_off) {
        float v;
        std::memcpy(&v, row.data() + byte_off, 4);
        return static_cast<double>(v);
    };
    for (std::int64_t i = 0; i < n; ++i) {
        if (!in.read(row.data(), layout.stride))
            throw FormatError(path.string() + ": truncated vertex data at splat " +
                              std::to_string(i));
        int f = 0;
        for (int d = 0; d < 3; ++d) set.centroids[i * 3 + d] = read_f(off[f++]);
        for (int d = 0; d < 48; ++d) set.sh[i * 48 + d] = read_f(off[f++]);
        set.opacities[i] = sigmoid(read_f(off[f++]));
        for (int d = 0; d < 3; ++d) set.scales[i * 3 + d] = std::exp(read_f(off[f++]));
        std::array<double, 4> q;
        for (int d = 0; d < 4; ++d) q[d] = read_f(off[f++]);
        double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (!(norm > 1e-30) || !std::isfinite(norm))
            throw DataError(path.string() + ": degenerate quaternion at splat " +
                            std::to_string(i));
        q = quat_canonical(q);
        for (int d = 0; d < 4; ++d) set.rotations[i * 4 + d] = q[d];

        for (int d = 0; d < 3; ++d) {
            if (std::isnan(set.centroids[i * 3 + d]) || std::isnan(set.scales[i * 3 + d]))
                throw DataError(path.string() + ": NaN after activation at splat " +
                                std::to_string(i));
        }
        if (std::isnan(set.opacities[i]))
            throw DataError(path.string() + ": NaN after activation at splat " +
                            std::to_string(i));
    }
    set.validate();
    return set;
}

void save_ply(const SplatSet& set, const std::filesystem::path& path) {
    set.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());

    const std::int64_t n = set.size();
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "element vertex " << n << "\n";
    static const char* kLeading[] = {"x", "y", "z", "nx", "ny", "nz"};
    for (auto* p : kLeading) header << "property float " << p << "\n";
    for (int i = 0; i < 3; ++i) header << "property float f_dc_" << i << "\n";
    for (int i = 0; i < 45; ++i) header << "property float f_rest_" << i << "\n";
    header << "property float opacity\n";
    for (int i = 0; i < 3; ++i) header << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) header << "property float rot_" << i << "\n";
    header << "end_header\n";
    out << header.str();

    std::vector<float> row(62);
    for (std::int64_t i = 0; i < n; ++i) {
        int f = 0;
        for (int d = 0; d < 3; ++d) row[f++] = static_cast<float>(set.centroids[i * 3 + d]);
        for (int d = 0; d < 3; ++d) row[f++] = 0.0f; // normals, unused
        for (int d = 0; d < 48; ++d) row[f++] = static_cast<float>(set.sh[i * 48 + d]);
        row[f++] = static_cast<float>(logit(set.opacities[i]));
        for (int d = 0; d < 3; ++d)
            row[f++] = static_cast<float>(std::log(set.scales[i * 3 + d]));
        for (int d = 0; d < 4; ++d) row[f++] = static_cast<float>(set.rotations[i * 4 + d]);
        out.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace gsmae
