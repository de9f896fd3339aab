#pragma once

// File formats of the command-line front end.

#include "error.hpp"
#include "fmap.hpp"
#include "semantics.hpp"
#include "transfer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace semfm::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr char kSamplesMagic[8] = {'S', 'E', 'M', 'F', 'M', 'L', 'S', '1'};

inline std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file", path);
    out << text;
    if (!out) throw IoError("write failed", path);
}

inline Json parse_json(const std::string& text, const std::string& path)
{
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

inline Json read_json(const std::string& path) { return parse_json(read_text(path), path); }

inline void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- lifted samples -------------------------------------------------------

inline Json samples_to_json(const LiftedSampleSet& s)
{
    Json j;
    j["d"] = s.dim();
    Json arr = Json::array();
    for (int i = 0; i < s.size(); ++i) {
        Json rec;
        rec["p"] = {s.positions(i, 0), s.positions(i, 1), s.positions(i, 2)};
        Json e = Json::array();
        for (int c = 0; c < s.dim(); ++c) e.push_back(s.embeddings(i, c));
        rec["e"] = std::move(e);
        arr.push_back(std::move(rec));
    }
    j["samples"] = std::move(arr);
    return j;
}

inline LiftedSampleSet samples_from_json(const Json& j, const std::string& path)
{
    try {
        const int d = j.at("d").get<int>();
        if (d < 1) throw ArgumentError(path + ": embedding dimension must be >= 1");
        const auto& arr = j.at("samples");
        LiftedSampleSet s;
        s.positions.resize(static_cast<Eigen::Index>(arr.size()), 3);
        s.embeddings.resize(static_cast<Eigen::Index>(arr.size()), d);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto& p = arr[i].at("p");
            const auto& e = arr[i].at("e");
            if (p.size() != 3) throw ArgumentError(path + ": sample " + std::to_string(i) + " position needs 3 values");
            if (e.size() != static_cast<std::size_t>(d))
                throw ArgumentError(path + ": sample " + std::to_string(i) + " has " + std::to_string(e.size()) +
                                    " embedding values, expected " + std::to_string(d));
            const auto row = static_cast<Eigen::Index>(i);
            for (int c = 0; c < 3; ++c) s.positions(row, c) = p[c].get<double>();
            for (int c = 0; c < d; ++c) s.embeddings(row, c) = e[c].get<double>();
        }
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": malformed sample set: " + e.what(), 0);
    }
}

/// Binary form: magic, u32 d, u64 count, then count records of 3 + d doubles.
inline void write_samples_binary(const std::string& path, const LiftedSampleSet& s)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file", path);
    const auto d = static_cast<std::uint32_t>(s.dim());
    const auto n = static_cast<std::uint64_t>(s.size());
    out.write(kSamplesMagic, sizeof kSamplesMagic);
    out.write(reinterpret_cast<const char*>(&d), sizeof d);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    std::vector<double> rec(3 + d);
    for (int i = 0; i < s.size(); ++i) {
        for (int c = 0; c < 3; ++c) rec[c] = s.positions(i, c);
        for (std::uint32_t c = 0; c < d; ++c) rec[3 + c] = s.embeddings(i, c);
        out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed", path);
}

inline LiftedSampleSet read_samples_binary(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file", path);
    char magic[8];
    std::uint32_t d = 0;
    std::uint64_t n = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&d), sizeof d);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || std::memcmp(magic, kSamplesMagic, sizeof magic) != 0)
        throw ParseError(path + ": not a binary sample set", 0);
    if (d < 1) throw ParseError(path + ": embedding dimension must be >= 1", 0);
    LiftedSampleSet s;
    s.positions.resize(static_cast<Eigen::Index>(n), 3);
    s.embeddings.resize(static_cast<Eigen::Index>(n), d);
    std::vector<double> rec(3 + d);
    for (std::uint64_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(rec.size() * sizeof(double)));
        if (!in) throw ParseError(path + ": truncated at record " + std::to_string(i), 0);
        const auto row = static_cast<Eigen::Index>(i);
        for (int c = 0; c < 3; ++c) s.positions(row, c) = rec[c];
        for (std::uint32_t c = 0; c < d; ++c) s.embeddings(row, c) = rec[3 + c];
    }
    s.validate();
    return s;
}

inline bool has_extension(const std::string& path, const char* ext)
{
    auto e = std::filesystem::path(path).extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ext;
}

/// ".json" is read as JSON; anything else as the binary form.
inline LiftedSampleSet load_samples(const std::string& path)
{
    if (has_extension(path, ".json")) return samples_from_json(read_json(path), path);
    return read_samples_binary(path);
}

inline void save_samples(const std::string& path, const LiftedSampleSet& s)
{
    if (has_extension(path, ".json"))
        write_json(path, samples_to_json(s));
    else
        write_samples_binary(path, s);
}

// ---- regions and maps -----------------------------------------------------

inline Json region_to_json(const AffordanceRegion& r)
{
    Json j;
    j["mesh"] = r.mesh_id();
    j["vertices"] = r.vertices();
    return j;
}

/// {"mesh": id, "vertices": [...]}; `mesh` falls back to `default_id`.
inline AffordanceRegion load_region(const std::string& path, int num_vertices, const std::string& default_id)
{
    const Json j = read_json(path);
    try {
        const std::string id = j.contains("mesh") ? j.at("mesh").get<std::string>() : default_id;
        return AffordanceRegion(id, j.at("vertices").get<std::vector<int>>(), num_vertices);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": malformed affordance region: " + e.what(), 0);
    }
}

inline Json fmap_to_json(const FunctionalMap& fm)
{
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["k"] = fm.k();
    Json rows = Json::array();
    for (int i = 0; i < fm.k(); ++i) {
        Json row = Json::array();
        for (int c = 0; c < fm.k(); ++c) row.push_back(fm.C(i, c));
        rows.push_back(std::move(row));
    }
    j["C"] = std::move(rows);
    j["alpha"] = fm.alpha;
    j["reg_weight"] = fm.reg_weight;
    j["trace"] = fm.trace;
    return j;
}

inline FunctionalMap fmap_from_json(const Json& j, const std::string& path)
{
    try {
        FunctionalMap fm;
        const int k = j.at("k").get<int>();
        const auto& rows = j.at("C");
        if (k < 1 || rows.size() != static_cast<std::size_t>(k))
            throw ParseError(path + ": C must have k rows", 0);
        fm.C.resize(k, k);
        for (int i = 0; i < k; ++i) {
            if (rows[i].size() != static_cast<std::size_t>(k)) throw ParseError(path + ": C must be k x k", 0);
            for (int c = 0; c < k; ++c) fm.C(i, c) = rows[i][c].get<double>();
        }
        if (j.contains("alpha")) fm.alpha = j["alpha"].get<int>();
        if (j.contains("reg_weight")) fm.reg_weight = j["reg_weight"].get<double>();
        if (j.contains("trace")) fm.trace = j["trace"].get<std::vector<int>>();
        return fm;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": malformed functional map: " + e.what(), 0);
    }
}

inline Json pointwise_to_json(const PointwiseMap& T)
{
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["map"] = T.target;
    return j;
}

inline PointwiseMap pointwise_from_json(const Json& j, const std::string& path)
{
    try {
        return PointwiseMap{j.at("map").get<std::vector<int>>()};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": malformed pointwise map: " + e.what(), 0);
    }
}

// ---- reports --------------------------------------------------------------

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json report_to_json(const TransferReport& r)
{
    Json j;
    j["source"] = r.source;
    j["target"] = r.target;
    j["method"] = r.method;
    j["mode"] = r.mode;
    j["iou"] = optional_number(r.iou);
    j["median_geodesic_error"] = optional_number(r.median_geodesic_error);
    j["alpha"] = r.alpha;
    j["anchor_similarities"] = r.anchor_similarities;
    j["runtime_s"] = r.runtime_seconds;
    return j;
}

// ---- manifest -------------------------------------------------------------

struct ManifestObject {
    std::string id;
    std::string mesh;       // path relative to the manifest directory
    std::string samples;    // idem
    std::string affordance; // idem
};

struct Manifest {
    std::string base;
    std::uint64_t seed = 0;
    Json spec;
    std::string correspondence; // "identity" when all objects share connectivity
    std::vector<ManifestObject> objects;
    std::filesystem::path dir;

    std::string resolve(const std::string& rel) const { return (dir / rel).string(); }
};

inline Json manifest_to_json(const Manifest& m)
{
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["base"] = m.base;
    j["seed"] = m.seed;
    j["spec"] = m.spec;
    if (!m.correspondence.empty()) j["correspondence"] = m.correspondence;
    Json objs = Json::array();
    Json gts = Json::array();
    for (const auto& o : m.objects) {
        objs.push_back(Json{{"id", o.id}, {"mesh", o.mesh}, {"samples", o.samples}});
        gts.push_back(Json{{"id", o.id}, {"path", o.affordance}});
    }
    j["objects"] = std::move(objs);
    j["gt_affordances"] = std::move(gts);
    return j;
}

/// Every object needs a mesh, a sample set and a ground-truth region.
inline Manifest load_manifest(const std::string& path)
{
    const Json j = read_json(path);
    Manifest m;
    m.dir = std::filesystem::path(path).parent_path();
    try {
        m.base = j.value("base", std::string{});
        m.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("spec")) m.spec = j["spec"];
        m.correspondence = j.value("correspondence", std::string{});
        const auto& objs = j.at("objects");
        const auto& gts = j.at("gt_affordances");
        for (const auto& o : objs) {
            ManifestObject mo;
            mo.id = o.at("id").get<std::string>();
            mo.mesh = o.at("mesh").get<std::string>();
            mo.samples = o.at("samples").get<std::string>();
            for (const auto& g : gts)
                if (g.at("id").get<std::string>() == mo.id) mo.affordance = g.at("path").get<std::string>();
            if (mo.affordance.empty())
                throw ArgumentError(path + ": object '" + mo.id + "' has no ground-truth affordance entry");
            m.objects.push_back(std::move(mo));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(path + ": incomplete manifest: " + e.what());
    }
    if (m.objects.size() < 2) throw ArgumentError(path + ": manifest needs at least 2 objects");
    return m;
}

} // namespace semfm::io
