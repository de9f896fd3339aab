#pragma once

// OFF / OBJ reading, OFF writing and ASCII PLY export of colored meshes.

#include "error.hpp"
#include "mesh.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace semfm {

enum class MeshFormat { OFF, OBJ };

namespace detail {

struct Line {
    std::size_t number;
    std::vector<std::string> tokens;
};

inline std::vector<Line> tokenize_lines(std::istream& in)
{
    std::vector<Line> lines;
    std::string raw;
    std::size_t number = 0;
    while (std::getline(in, raw)) {
        ++number;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
        std::istringstream ss(raw);
        Line line{number, {}};
        std::string tok;
        while (ss >> tok) line.tokens.push_back(tok);
        if (!line.tokens.empty()) lines.push_back(std::move(line));
    }
    return lines;
}

inline double parse_double(const std::string& tok, std::size_t line)
{
    double value = 0.0;
    const auto* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value))
        throw ParseError("non-numeric coordinate '" + tok + "'", line);
    return value;
}

inline long parse_int(const std::string& tok, std::size_t line, const char* what)
{
    long value = 0;
    const auto* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ParseError(std::string("invalid ") + what + " '" + tok + "'", line);
    return value;
}

struct RawFace {
    std::array<int, 3> v;
    std::size_t line;
};

// Fan-triangulates a polygon and checks indices, repetition and area.
inline void emit_polygon(const std::vector<long>& poly, const std::vector<Eigen::Vector3d>& verts, std::size_t line,
                         std::vector<RawFace>& out)
{
    if (poly.size() < 3) throw ParseError("face has fewer than 3 vertices", line);
    for (long idx : poly) {
        if (idx < 0 || idx >= static_cast<long>(verts.size()))
            throw ParseError("face index " + std::to_string(idx) + " out of range [0, " +
                                 std::to_string(verts.size()) + ")",
                             line);
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        const std::array<int, 3> tri{static_cast<int>(poly[0]), static_cast<int>(poly[k]),
                                     static_cast<int>(poly[k + 1])};
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw ParseError("degenerate face (repeated vertex)", line);
        const double area = 0.5 * (verts[tri[1]] - verts[tri[0]]).cross(verts[tri[2]] - verts[tri[0]]).norm();
        if (!(area > kMinFaceArea)) throw ParseError("degenerate face (zero area)", line);
        out.push_back({tri, line});
    }
}

inline TriangleMesh assemble(const std::vector<Eigen::Vector3d>& verts, const std::vector<RawFace>& faces)
{
    if (verts.size() < 4) throw ParseError("mesh needs at least 4 vertices", 0);
    if (faces.empty()) throw ParseError("mesh has no faces", 0);
    Points V(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) V.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
    Faces F(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f)
        for (int c = 0; c < 3; ++c) F(static_cast<Eigen::Index>(f), c) = faces[f].v[c];
    return TriangleMesh(std::move(V), std::move(F));
}

inline TriangleMesh read_off(std::istream& in)
{
    const auto lines = tokenize_lines(in);
    if (lines.empty()) throw ParseError("empty OFF stream", 1);
    std::size_t li = 0;
    const Line& header = lines[li];
    if (header.tokens[0] != "OFF") throw ParseError("malformed header: expected 'OFF'", header.number);
    std::vector<std::string> counts(header.tokens.begin() + 1, header.tokens.end());
    std::size_t counts_line = header.number;
    ++li;
    if (counts.empty()) {
        if (li >= lines.size()) throw ParseError("malformed header: missing counts", header.number);
        counts = lines[li].tokens;
        counts_line = lines[li].number;
        ++li;
    }
    if (counts.size() < 2) throw ParseError("malformed header: expected vertex and face counts", counts_line);
    const long nv = parse_int(counts[0], counts_line, "vertex count");
    const long nf = parse_int(counts[1], counts_line, "face count");
    if (nv < 0 || nf < 0) throw ParseError("malformed header: negative count", counts_line);

    std::vector<Eigen::Vector3d> verts;
    verts.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i, ++li) {
        if (li >= lines.size()) throw ParseError("unexpected end of file in vertex block", lines.back().number);
        const Line& l = lines[li];
        if (l.tokens.size() < 3) throw ParseError("vertex line needs 3 coordinates", l.number);
        verts.emplace_back(parse_double(l.tokens[0], l.number), parse_double(l.tokens[1], l.number),
                           parse_double(l.tokens[2], l.number));
    }
    std::vector<RawFace> faces;
    for (long f = 0; f < nf; ++f, ++li) {
        if (li >= lines.size()) throw ParseError("unexpected end of file in face block", lines.back().number);
        const Line& l = lines[li];
        const long n = parse_int(l.tokens[0], l.number, "face size");
        if (n < 3 || static_cast<std::size_t>(n) + 1 > l.tokens.size())
            throw ParseError("face line does not list " + std::to_string(n) + " indices", l.number);
        std::vector<long> poly;
        for (long k = 0; k < n; ++k) poly.push_back(parse_int(l.tokens[1 + k], l.number, "face index"));
        emit_polygon(poly, verts, l.number, faces);
    }
    return assemble(verts, faces);
}

inline TriangleMesh read_obj(std::istream& in)
{
    const auto lines = tokenize_lines(in);
    std::vector<Eigen::Vector3d> verts;
    std::vector<RawFace> faces;
    for (const Line& l : lines) {
        const std::string& kw = l.tokens[0];
        if (kw == "v") {
            if (l.tokens.size() < 4) throw ParseError("vertex line needs 3 coordinates", l.number);
            verts.emplace_back(parse_double(l.tokens[1], l.number), parse_double(l.tokens[2], l.number),
                               parse_double(l.tokens[3], l.number));
        } else if (kw == "f") {
            std::vector<long> poly;
            for (std::size_t k = 1; k < l.tokens.size(); ++k) {
                const std::string& t = l.tokens[k];
                const long raw = parse_int(t.substr(0, t.find('/')), l.number, "face index");
                if (raw == 0) throw ParseError("face index 0 is invalid in OBJ", l.number);
                // OBJ is 1-based; negative indices count back from the latest vertex
                poly.push_back(raw > 0 ? raw - 1 : static_cast<long>(verts.size()) + raw);
            }
            emit_polygon(poly, verts, l.number, faces);
        }
        // vt, vn, g, o, s, usemtl, ... are ignored
    }
    return assemble(verts, faces);
}

inline std::string lowercase_extension(const std::string& path)
{
    const auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

} // namespace detail

///
/// Parses an ASCII OFF or OBJ stream. Polygons are fan-triangulated; file
/// order of vertices and faces is preserved. Throws ParseError naming the
/// offending line.
///
inline TriangleMesh load_mesh(std::istream& in, MeshFormat format)
{
    return format == MeshFormat::OFF ? detail::read_off(in) : detail::read_obj(in);
}

inline TriangleMesh load_mesh_string(const std::string& text, MeshFormat format)
{
    std::istringstream in(text);
    return load_mesh(in, format);
}

/// Format chosen from the extension (.off / .obj).
inline TriangleMesh load_mesh_file(const std::string& path)
{
    const std::string ext = detail::lowercase_extension(path);
    MeshFormat format;
    if (ext == "off")
        format = MeshFormat::OFF;
    else if (ext == "obj")
        format = MeshFormat::OBJ;
    else
        throw ArgumentError("unsupported mesh extension '." + ext + "' (expected .off or .obj): " + path);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh", path);
    try {
        return load_mesh(in, format);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line());
    }
}

inline void write_off(std::ostream& out, const TriangleMesh& mesh)
{
    out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << " 0\n";
    out << std::setprecision(17);
    for (int i = 0; i < mesh.num_vertices(); ++i)
        out << mesh.vertices()(i, 0) << ' ' << mesh.vertices()(i, 1) << ' ' << mesh.vertices()(i, 2) << '\n';
    for (int f = 0; f < mesh.num_faces(); ++f)
        out << "3 " << mesh.faces()(f, 0) << ' ' << mesh.faces()(f, 1) << ' ' << mesh.faces()(f, 2) << '\n';
}

inline void write_off_file(const std::string& path, const TriangleMesh& mesh)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write mesh", path);
    write_off(out, mesh);
    if (!out) throw IoError("write failed", path);
}

using Rgb = std::array<std::uint8_t, 3>;

///
/// Scalar ramp: five stops (dark blue, cyan, green, yellow, red) linearly
/// interpolated over [min, max] of the field. A constant field maps to the
/// first stop.
///
inline std::vector<Rgb> scalar_colors(std::span<const double> field)
{
    static constexpr std::array<std::array<double, 3>, 5> stops{
        {{0.0, 0.0, 0.5}, {0.0, 0.8, 1.0}, {0.1, 0.8, 0.1}, {1.0, 0.9, 0.0}, {0.8, 0.0, 0.0}}};
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : field) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    std::vector<Rgb> colors;
    colors.reserve(field.size());
    for (double v : field) {
        double t = (hi > lo && std::isfinite(v)) ? (v - lo) / (hi - lo) : (std::isfinite(v) ? 0.0 : 1.0);
        t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
        const auto seg = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
        const double w = t - static_cast<double>(seg);
        Rgb c{};
        for (int ch = 0; ch < 3; ++ch)
            c[ch] = static_cast<std::uint8_t>(std::lround(255.0 * ((1 - w) * stops[seg][ch] + w * stops[seg + 1][ch])));
        colors.push_back(c);
    }
    return colors;
}

/// Ten-entry categorical palette, cycled by label id.
inline Rgb label_color(int label)
{
    static constexpr std::array<Rgb, 10> palette{{{31, 119, 180},
                                                  {255, 127, 14},
                                                  {44, 160, 44},
                                                  {214, 39, 40},
                                                  {148, 103, 189},
                                                  {140, 86, 75},
                                                  {227, 119, 194},
                                                  {127, 127, 127},
                                                  {188, 189, 34},
                                                  {23, 190, 207}}};
    if (label < 0) return {40, 40, 40};
    return palette[static_cast<std::size_t>(label) % palette.size()];
}

inline std::vector<Rgb> label_colors(std::span<const int> labels)
{
    std::vector<Rgb> colors;
    colors.reserve(labels.size());
    for (int l : labels) colors.push_back(label_color(l));
    return colors;
}

inline void write_colored_ply(std::ostream& out, const TriangleMesh& mesh, std::span<const Rgb> colors)
{
    if (colors.size() != static_cast<std::size_t>(mesh.num_vertices()))
        throw ArgumentError("export_colored_mesh: field length " + std::to_string(colors.size()) +
                            " does not match vertex count " + std::to_string(mesh.num_vertices()));
    out << "ply\nformat ascii 1.0\n"
        << "element vertex " << mesh.num_vertices() << '\n'
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "element face " << mesh.num_faces() << '\n'
        << "property list uchar int vertex_indices\nend_header\n";
    out << std::setprecision(9);
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        const auto& c = colors[static_cast<std::size_t>(i)];
        out << mesh.vertices()(i, 0) << ' ' << mesh.vertices()(i, 1) << ' ' << mesh.vertices()(i, 2) << ' '
            << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2]) << '\n';
    }
    for (int f = 0; f < mesh.num_faces(); ++f)
        out << "3 " << mesh.faces()(f, 0) << ' ' << mesh.faces()(f, 1) << ' ' << mesh.faces()(f, 2) << '\n';
}

inline void export_colored_mesh(const TriangleMesh& mesh, std::span<const double> field, const std::string& path)
{
    if (field.size() != static_cast<std::size_t>(mesh.num_vertices()))
        throw ArgumentError("export_colored_mesh: field length does not match vertex count");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write PLY", path);
    const auto colors = scalar_colors(field);
    write_colored_ply(out, mesh, colors);
    if (!out) throw IoError("write failed", path);
}

inline void export_labeled_mesh(const TriangleMesh& mesh, std::span<const int> labels, const std::string& path)
{
    if (labels.size() != static_cast<std::size_t>(mesh.num_vertices()))
        throw ArgumentError("export_colored_mesh: label count does not match vertex count");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write PLY", path);
    const auto colors = label_colors(labels);
    write_colored_ply(out, mesh, colors);
    if (!out) throw IoError("write failed", path);
}

} // namespace semfm
