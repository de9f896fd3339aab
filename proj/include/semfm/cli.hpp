#pragma once

// Commands behind the semfm executable: transfer, eval-category, synth, anchors.

#include "error.hpp"
#include "io.hpp"
#include "mesh_io.hpp"
#include "pipeline.hpp"
#include "spectral.hpp"
#include "synthbench.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace semfm::cli {

using io::Json;

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2 };

/// Error carrying the exit code and the failing stage.
class CommandError : public std::runtime_error {
public:
    CommandError(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

/// Runs `f`, turning library errors into CommandError tagged with `stage`.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const CommandError&) {
        throw;
    } catch (const ArgumentError& e) {
        throw CommandError(kUsage, name + ": " + e.what());
    } catch (const ParseError& e) {
        throw CommandError(kUsage, name + ": " + e.what());
    } catch (const IoError& e) {
        throw CommandError(kUsage, name + ": " + e.what());
    } catch (const std::exception& e) {
        throw CommandError(kInternal, name + ": " + e.what());
    }
}

inline std::string default_cache_dir()
{
    if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
        return (std::filesystem::path(xdg) / "semfm").string();
    if (const char* home = std::getenv("HOME"); home && *home)
        return (std::filesystem::path(home) / ".cache" / "semfm").string();
    return ".semfm-cache";
}

struct RunConfig {
    // paths
    std::string source_mesh, target_mesh;
    std::string source_samples, target_samples;
    std::string source_affordance, target_affordance;
    std::string gt_map; // "identity" or a pointwise map JSON
    std::string manifest;
    std::string output;
    std::string cache_dir = default_cache_dir();
    bool cache = true;
    int workers = 1;
    bool baseline = false;
    bool write_maps = true;

    PipelineParams params;
    std::optional<std::uint64_t> seed;

    // synth
    CategorySpec spec;
    std::string spec_file;
};

// ---- configuration keys ---------------------------------------------------

namespace detail {

inline std::string as_string(const Json& v, const std::string& key)
{
    if (!v.is_string()) throw ArgumentError("config key '" + key + "' expects a string");
    return v.get<std::string>();
}

inline double as_double(const Json& v, const std::string& key)
{
    if (!v.is_number()) throw ArgumentError("config key '" + key + "' expects a number");
    return v.get<double>();
}

inline int as_int(const Json& v, const std::string& key)
{
    if (!v.is_number_integer()) throw ArgumentError("config key '" + key + "' expects an integer");
    return v.get<int>();
}

inline bool as_bool(const Json& v, const std::string& key)
{
    if (!v.is_boolean()) throw ArgumentError("config key '" + key + "' expects true or false");
    return v.get<bool>();
}

inline std::uint64_t as_seed(const Json& v, const std::string& key)
{
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ArgumentError("config key '" + key + "' expects a non-negative integer");
    return v.get<std::uint64_t>();
}

using Setter = std::function<void(RunConfig&, const Json&)>;

struct Key {
    std::string name;
    std::string help;
    Setter set;
};

// clang-format off
inline const std::vector<Key>& keys()
{
    static const std::vector<Key> table = {
        {"source_mesh", "source mesh (OFF or OBJ)", [](RunConfig& c, const Json& v) { c.source_mesh = as_string(v, "source_mesh"); }},
        {"target_mesh", "target mesh (OFF or OBJ)", [](RunConfig& c, const Json& v) { c.target_mesh = as_string(v, "target_mesh"); }},
        {"source_samples", "source lifted samples (.json or binary)", [](RunConfig& c, const Json& v) { c.source_samples = as_string(v, "source_samples"); }},
        {"target_samples", "target lifted samples (.json or binary)", [](RunConfig& c, const Json& v) { c.target_samples = as_string(v, "target_samples"); }},
        {"source_affordance", "affordance region on the source", [](RunConfig& c, const Json& v) { c.source_affordance = as_string(v, "source_affordance"); }},
        {"target_affordance", "ground-truth region on the target (enables IoU)", [](RunConfig& c, const Json& v) { c.target_affordance = as_string(v, "target_affordance"); }},
        {"gt_map", "ground-truth map: 'identity' or a map JSON (enables geodesic error)", [](RunConfig& c, const Json& v) { c.gt_map = as_string(v, "gt_map"); }},
        {"manifest", "category manifest JSON", [](RunConfig& c, const Json& v) { c.manifest = as_string(v, "manifest"); }},
        {"output", "output directory", [](RunConfig& c, const Json& v) { c.output = as_string(v, "output"); }},
        {"cache_dir", "basis cache directory", [](RunConfig& c, const Json& v) { c.cache_dir = as_string(v, "cache_dir"); }},
        {"cache", "use the basis cache", [](RunConfig& c, const Json& v) { c.cache = as_bool(v, "cache"); }},
        {"workers", "concurrent pairs in eval-category", [](RunConfig& c, const Json& v) { c.workers = as_int(v, "workers"); }},
        {"baseline", "eval-category also runs fm-wks and reports the gap", [](RunConfig& c, const Json& v) { c.baseline = as_bool(v, "baseline"); }},
        {"write_maps", "transfer writes fmap.json and map.json", [](RunConfig& c, const Json& v) { c.write_maps = as_bool(v, "write_maps"); }},
        {"seed", "seed for every randomized step", [](RunConfig& c, const Json& v) { c.seed = as_seed(v, "seed"); }},
        {"k", "eigenpairs per shape", [](RunConfig& c, const Json& v) { c.params.k = as_int(v, "k"); }},
        {"k0", "initial map dimension", [](RunConfig& c, const Json& v) { c.params.k0 = as_int(v, "k0"); }},
        {"step", "ZoomOut step", [](RunConfig& c, const Json& v) { c.params.step = as_int(v, "step"); }},
        {"k_final", "final map dimension", [](RunConfig& c, const Json& v) { c.params.k_final = as_int(v, "k_final"); }},
        {"M", "semantic point cloud size", [](RunConfig& c, const Json& v) { c.params.points = as_int(v, "M"); }},
        {"eps_scale", "aggregation radius in bounding-box diagonals", [](RunConfig& c, const Json& v) { c.params.eps_scale = as_double(v, "eps_scale"); }},
        {"K", "semantic clusters per shape", [](RunConfig& c, const Json& v) { c.params.K = as_int(v, "K"); }},
        {"alpha", "anchor pairs", [](RunConfig& c, const Json& v) { c.params.alpha = as_int(v, "alpha"); }},
        {"k_nn", "neighbors in the semantic graph", [](RunConfig& c, const Json& v) { c.params.k_nn = as_int(v, "k_nn"); }},
        {"sigma", "graph bandwidth: a positive number or \"median\"", [](RunConfig& c, const Json& v) {
             if (v.is_string() && v.get<std::string>() == "median") c.params.sigma.reset();
             else c.params.sigma = as_double(v, "sigma");
         }},
        {"t_scale", "diffusion time in mean-edge-length^2", [](RunConfig& c, const Json& v) { c.params.t_scale = as_double(v, "t_scale"); }},
        {"reg_weight", "commutativity weight: a number or \"auto\"", [](RunConfig& c, const Json& v) {
             if (v.is_string() && v.get<std::string>() == "auto") c.params.reg_weight.reset();
             else c.params.reg_weight = as_double(v, "reg_weight");
         }},
        {"mode", "region transfer: pointwise or indicator", [](RunConfig& c, const Json& v) { c.params.mode = parse_mode(as_string(v, "mode")); }},
        {"threshold", "indicator threshold as a fraction of the peak", [](RunConfig& c, const Json& v) { c.params.threshold = as_double(v, "threshold"); }},
        {"method", "semfm or fm-wks", [](RunConfig& c, const Json& v) { c.params.method = parse_method(as_string(v, "method")); }},
        {"wks_energies", "WKS energy count", [](RunConfig& c, const Json& v) { c.params.wks_energies = as_int(v, "wks_energies"); }},
        {"wks_sigma_scale", "WKS bandwidth in energy steps", [](RunConfig& c, const Json& v) { c.params.wks_sigma_scale = as_double(v, "wks_sigma_scale"); }},
        {"spec", "category spec JSON for synth", [](RunConfig& c, const Json& v) { c.spec_file = as_string(v, "spec"); }},
        {"base", "handle-tool, two-part-container or blade-tool", [](RunConfig& c, const Json& v) { c.spec.base = parse_base_shape(as_string(v, "base")); }},
        {"N", "objects per category", [](RunConfig& c, const Json& v) { c.spec.num_objects = as_int(v, "N"); }},
        {"amplitude", "deformation amplitude in [0, 0.5]", [](RunConfig& c, const Json& v) { c.spec.amplitude = as_double(v, "amplitude"); }},
        {"d", "embedding dimension", [](RunConfig& c, const Json& v) { c.spec.embedding_dim = as_int(v, "d"); }},
        {"noise", "embedding noise per component", [](RunConfig& c, const Json& v) { c.spec.noise = as_double(v, "noise"); }},
        {"affordance_radius", "ground-truth radius in geodesic diameters", [](RunConfig& c, const Json& v) { c.spec.affordance_radius = as_double(v, "affordance_radius"); }},
        {"samples_per_object", "lifted samples per object", [](RunConfig& c, const Json& v) { c.spec.samples_per_object = as_int(v, "samples_per_object"); }},
    };
    return table;
}
// clang-format on

inline const Key* find_key(const std::string& name)
{
    for (const auto& k : keys())
        if (k.name == name) return &k;
    return nullptr;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// Flat `key = value` lines; values are JSON scalars, '#' starts a comment.
inline Json parse_key_values(const std::string& text, const std::string& path)
{
    Json out = Json::object();
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(path + ": expected key = value", lineno);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            out[key] = Json::parse(value);
        } catch (const nlohmann::json::parse_error&) {
            throw ParseError(path + ": cannot parse value of '" + key + "'", lineno);
        }
    }
    return out;
}

} // namespace detail

/// Applies a flat key/value object; unknown keys are rejected.
inline void apply_config(RunConfig& cfg, const Json& j, const std::string& origin)
{
    if (!j.is_object()) throw ArgumentError(origin + ": config must be a flat key/value object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto* key = detail::find_key(it.key());
        if (!key) throw ArgumentError(origin + ": unknown config key '" + it.key() + "'");
        key->set(cfg, it.value());
    }
}

/// `.json` files are JSON objects; anything else is read as `key = value` lines.
inline Json read_config_file(const std::string& path)
{
    const std::string text = io::read_text(path);
    if (io::has_extension(path, ".json")) return io::parse_json(text, path);
    return detail::parse_key_values(text, path);
}

/// Command-line flag text to a JSON scalar: numbers and booleans stay typed.
inline Json flag_value(const std::string& text)
{
    try {
        Json v = Json::parse(text);
        if (v.is_number() || v.is_boolean()) return v;
    } catch (const nlohmann::json::parse_error&) {
    }
    return Json(text);
}

inline Json params_to_json(const PipelineParams& p)
{
    Json j;
    j["k"] = p.k;
    j["k0"] = p.k0;
    j["step"] = p.step;
    j["k_final"] = p.k_final;
    j["M"] = p.points;
    j["eps_scale"] = p.eps_scale;
    j["K"] = p.K;
    j["alpha"] = p.alpha;
    j["k_nn"] = p.k_nn;
    j["sigma"] = p.sigma ? Json(*p.sigma) : Json("median");
    j["t_scale"] = p.t_scale;
    j["reg_weight"] = p.reg_weight ? Json(*p.reg_weight) : Json("auto");
    j["mode"] = to_string(p.mode);
    j["threshold"] = p.threshold;
    j["method"] = to_string(p.method);
    if (p.method == Method::FmWks) {
        j["wks_energies"] = p.wks_energies;
        j["wks_sigma_scale"] = p.wks_sigma_scale;
    }
    j["seed"] = p.seed;
    return j;
}

inline Json spec_to_json(const CategorySpec& s)
{
    Json j;
    j["base"] = to_string(s.base);
    j["N"] = s.num_objects;
    j["amplitude"] = s.amplitude;
    j["d"] = s.embedding_dim;
    j["noise"] = s.noise;
    j["seed"] = s.seed;
    j["affordance_radius"] = s.affordance_radius;
    j["samples_per_object"] = s.samples_per_object;
    return j;
}

// ---- shared loading -------------------------------------------------------

namespace detail {

inline void require_file(const std::string& path, const std::string& what)
{
    if (path.empty()) throw CommandError(kUsage, "missing required input: " + what);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw CommandError(kUsage, what + " not found: " + path);
}

inline void ensure_directory(const std::string& dir)
{
    if (dir.empty()) throw CommandError(kUsage, "missing required option: output");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (!std::filesystem::is_directory(dir, ec)) throw CommandError(kUsage, "cannot create output directory: " + dir);
    // probe writability
    const auto probe = std::filesystem::path(dir) / ".semfm-write-probe";
    {
        std::ofstream out(probe);
        if (!out) throw CommandError(kUsage, "output directory is not writable: " + dir);
    }
    std::filesystem::remove(probe, ec);
}

inline std::string stem_id(const std::string& path) { return std::filesystem::path(path).stem().string(); }

struct LoadedShape {
    std::string id;
    TriangleMesh mesh;
    std::optional<LiftedSampleSet> samples;
    SpectralBasis basis;
};

inline TriangleMesh load_mesh_stage(const std::string& path, const std::string& what)
{
    require_file(path, what);
    return stage("load " + what + " " + path, [&] { return load_mesh_file(path); });
}

inline LiftedSampleSet load_samples_stage(const std::string& path, const std::string& what)
{
    require_file(path, what);
    return stage("load " + what + " " + path, [&] { return io::load_samples(path); });
}

inline SpectralBasis basis_stage(const RunConfig& cfg, const TriangleMesh& mesh, const std::string& id)
{
    return stage("spectral basis of " + id, [&] {
        const BasisCache cache(cfg.cache ? cfg.cache_dir : std::string{});
        return cache.get(mesh, cfg.params.k);
    });
}

inline std::vector<Rgb> anchor_colors(const std::vector<int>& vertex_labels, const AnchorSet& anchors, Side side)
{
    std::vector<int> labels(vertex_labels.size(), -1);
    for (std::size_t v = 0; v < vertex_labels.size(); ++v)
        for (int a = 0; a < anchors.size(); ++a) {
            const auto& p = anchors.pairs[a];
            if (vertex_labels[v] == (side == Side::Source ? p.source_cluster : p.target_cluster)) labels[v] = a;
        }
    return label_colors(labels);
}

inline std::vector<Rgb> region_colors(int num_vertices, const AffordanceRegion& region)
{
    std::vector<Rgb> colors(static_cast<std::size_t>(num_vertices), Rgb{200, 200, 200});
    for (int v : region.vertices()) colors[static_cast<std::size_t>(v)] = Rgb{214, 39, 40};
    return colors;
}

inline void write_ply(const std::string& path, const TriangleMesh& mesh, const std::vector<Rgb>& colors)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write PLY", path);
    write_colored_ply(out, mesh, colors);
    if (!out) throw IoError("write failed", path);
}

inline Json anchors_to_json(const AnchorSet& anchors)
{
    Json arr = Json::array();
    for (const auto& p : anchors.pairs)
        arr.push_back(Json{{"source_cluster", p.source_cluster},
                           {"target_cluster", p.target_cluster},
                           {"similarity", p.similarity}});
    return arr;
}

inline Json matrix_to_json(const Matrix& m)
{
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline TransferReport make_report(const std::string& src, const std::string& tgt, const PipelineParams& p,
                                  const TransferOutcome& out)
{
    TransferReport r;
    r.source = src;
    r.target = tgt;
    r.runtime_seconds = out.seconds;
    r.alpha = p.method == Method::SemFM ? out.anchors.size() : 0;
    for (const auto& a : out.anchors.pairs) r.anchor_similarities.push_back(a.similarity);
    r.mode = to_string(p.mode);
    r.method = to_string(p.method);
    return r;
}

inline void apply_seed(RunConfig& cfg)
{
    if (cfg.seed) cfg.params.seed = *cfg.seed;
}

} // namespace detail

// ---- transfer -------------------------------------------------------------

/// Transfers the source affordance to the target; writes report.json and PLYs into cfg.output.
inline Json cmd_transfer(RunConfig cfg, std::ostream& log = std::cerr)
{
    using namespace detail;
    apply_seed(cfg);
    stage("parameters", [&] { cfg.params.validate(); });
    const bool semantic = cfg.params.method == Method::SemFM;

    TriangleMesh m1 = load_mesh_stage(cfg.source_mesh, "source mesh");
    TriangleMesh m2 = load_mesh_stage(cfg.target_mesh, "target mesh");
    std::optional<LiftedSampleSet> s1, s2;
    if (semantic) {
        s1 = load_samples_stage(cfg.source_samples, "source samples");
        s2 = load_samples_stage(cfg.target_samples, "target samples");
    }
    const std::string id1 = stem_id(cfg.source_mesh), id2 = stem_id(cfg.target_mesh);
    require_file(cfg.source_affordance, "source affordance");
    const AffordanceRegion region = stage("load source affordance " + cfg.source_affordance, [&] {
        const AffordanceRegion r = io::load_region(cfg.source_affordance, m1.num_vertices(), id1);
        return AffordanceRegion(id1, r.vertices(), m1.num_vertices());
    });
    std::optional<AffordanceRegion> truth;
    if (!cfg.target_affordance.empty()) {
        require_file(cfg.target_affordance, "target affordance");
        truth = stage("load target affordance " + cfg.target_affordance, [&] {
            const AffordanceRegion r = io::load_region(cfg.target_affordance, m2.num_vertices(), id2);
            return AffordanceRegion(id2, r.vertices(), m2.num_vertices());
        });
    }
    std::optional<PointwiseMap> gt;
    if (cfg.gt_map == "identity") {
        if (m1.num_vertices() != m2.num_vertices())
            throw CommandError(kUsage, "gt_map identity needs meshes with equal vertex counts");
        gt = PointwiseMap{std::vector<int>(static_cast<std::size_t>(m1.num_vertices()))};
        std::iota(gt->target.begin(), gt->target.end(), 0);
    } else if (!cfg.gt_map.empty()) {
        require_file(cfg.gt_map, "ground-truth map");
        gt = stage("load ground-truth map " + cfg.gt_map,
                   [&] { return io::pointwise_from_json(io::read_json(cfg.gt_map), cfg.gt_map); });
        if (gt->size() != m1.num_vertices())
            throw CommandError(kUsage, "ground-truth map " + cfg.gt_map + " does not cover the source vertices");
    }
    ensure_directory(cfg.output);

    const SpectralBasis b1 = basis_stage(cfg, m1, id1);
    const SpectralBasis b2 = basis_stage(cfg, m2, id2);
    const ShapeInput in1{id1, &m1, s1 ? &*s1 : nullptr, &b1}, in2{id2, &m2, s2 ? &*s2 : nullptr, &b2};
    const TransferOutcome out = stage("transfer", [&] { return run_transfer(in1, in2, region, cfg.params); });

    TransferReport report = make_report(id1, id2, cfg.params, out);
    if (truth) report.iou = iou(out.predicted, *truth);
    if (gt) report.median_geodesic_error = stage("geodesic error", [&] { return median(geodesic_error(out.map, *gt, m2)); });

    const auto dir = std::filesystem::path(cfg.output);
    Json j;
    j["schema_version"] = io::kSchemaVersion;
    j["command"] = "transfer";
    j["baseline"] = cfg.params.method == Method::FmWks;
    const Json record = io::report_to_json(report);
    for (auto& [k, v] : record.items()) j[k] = v;
    j["params"] = params_to_json(cfg.params);
    j["predicted_size"] = out.predicted.size();
    if (semantic) {
        j["similarity"] = matrix_to_json(out.similarity);
        j["anchors"] = anchors_to_json(out.anchors);
    }
    j["functional_map_trace"] = out.refined.trace;
    j["warnings"] = out.warnings;

    stage("write outputs to " + cfg.output, [&] {
        io::write_json((dir / "report.json").string(), j);
        io::write_json((dir / "predicted_affordance.json").string(), io::region_to_json(out.predicted));
        if (cfg.write_maps) {
            io::write_json((dir / "fmap.json").string(), io::fmap_to_json(out.refined));
            io::write_json((dir / "map.json").string(), io::pointwise_to_json(out.map));
        }
        write_ply((dir / "source_affordance.ply").string(), m1, region_colors(m1.num_vertices(), region));
        write_ply((dir / "target_affordance.ply").string(), m2, region_colors(m2.num_vertices(), out.predicted));
        if (semantic) {
            write_ply((dir / "source_anchors.ply").string(), m1,
                      anchor_colors(out.source_semantics->vertex_labels, out.anchors, Side::Source));
            write_ply((dir / "target_anchors.ply").string(), m2,
                      anchor_colors(out.target_semantics->vertex_labels, out.anchors, Side::Target));
        }
    });
    for (const auto& w : out.warnings) log << "warning: " << w << '\n';
    return j;
}

// ---- anchors --------------------------------------------------------------

/// Similarity matrix and anchor set between two objects; no basis needed.
inline Json cmd_anchors(RunConfig cfg)
{
    using namespace detail;
    apply_seed(cfg);
    cfg.params.method = Method::SemFM;
    stage("parameters", [&] { cfg.params.validate(); });
    const TriangleMesh m1 = load_mesh_stage(cfg.source_mesh, "source mesh");
    const TriangleMesh m2 = load_mesh_stage(cfg.target_mesh, "target mesh");
    const LiftedSampleSet s1 = load_samples_stage(cfg.source_samples, "source samples");
    const LiftedSampleSet s2 = load_samples_stage(cfg.target_samples, "target samples");
    const std::string id1 = stem_id(cfg.source_mesh), id2 = stem_id(cfg.target_mesh);
    const ShapeInput in1{id1, &m1, &s1, nullptr}, in2{id2, &m2, &s2, nullptr};
    const SemanticAnalysis a1 = stage("semantic clustering of " + id1, [&] { return analyze_semantics(in1, cfg.params); });
    const SemanticAnalysis a2 = stage("semantic clustering of " + id2, [&] { return analyze_semantics(in2, cfg.params); });
    Warnings warnings;
    const Matrix S = stage("cluster similarity", [&] { return cluster_similarity(a1.clusters, a2.clusters, &warnings); });
    const AnchorSet anchors = stage("anchor selection", [&] { return select_anchors(S, cfg.params.alpha); });

    Json j;
    j["schema_version"] = io::kSchemaVersion;
    j["command"] = "anchors";
    j["source"] = id1;
    j["target"] = id2;
    j["K"] = cfg.params.K;
    j["alpha"] = cfg.params.alpha;
    j["source_cluster_sizes"] = a1.clusters.sizes;
    j["target_cluster_sizes"] = a2.clusters.sizes;
    j["source_sigma"] = a1.graph.sigma;
    j["target_sigma"] = a2.graph.sigma;
    j["S"] = matrix_to_json(S);
    j["anchors"] = anchors_to_json(anchors);
    j["total_similarity"] = anchors.total();
    j["warnings"] = warnings;
    if (!cfg.output.empty()) {
        ensure_directory(cfg.output);
        stage("write outputs to " + cfg.output,
              [&] { io::write_json((std::filesystem::path(cfg.output) / "anchors.json").string(), j); });
    }
    return j;
}

// ---- eval-category --------------------------------------------------------

namespace detail {

struct PairResult {
    TransferReport report;
    Warnings warnings;
};

inline std::vector<PairResult> evaluate_pairs(const std::vector<LoadedShape>& shapes,
                                              const std::vector<AffordanceRegion>& truth, bool identity_gt,
                                              const PipelineParams& p, int workers)
{
    const int n = static_cast<int>(shapes.size());
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) pairs.emplace_back(i, j);
    std::vector<PairResult> results(pairs.size());
    std::vector<std::optional<CommandError>> errors(pairs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < pairs.size();) {
            const auto [i, j] = pairs[t];
            const auto& a = shapes[static_cast<std::size_t>(i)];
            const auto& b = shapes[static_cast<std::size_t>(j)];
            try {
                const std::string name = to_string(p.method) + " transfer " + a.id + " -> " + b.id;
                const ShapeInput in1{a.id, &a.mesh, a.samples ? &*a.samples : nullptr, &a.basis};
                const ShapeInput in2{b.id, &b.mesh, b.samples ? &*b.samples : nullptr, &b.basis};
                const TransferOutcome out = stage(name, [&] {
                    return run_transfer(in1, in2, truth[static_cast<std::size_t>(i)], p);
                });
                PairResult r{make_report(a.id, b.id, p, out), out.warnings};
                r.report.iou = iou(out.predicted, truth[static_cast<std::size_t>(j)]);
                if (identity_gt) {
                    PointwiseMap gt{std::vector<int>(static_cast<std::size_t>(a.mesh.num_vertices()))};
                    std::iota(gt.target.begin(), gt.target.end(), 0);
                    r.report.median_geodesic_error =
                        stage(name + " geodesic error", [&] { return median(geodesic_error(out.map, gt, b.mesh)); });
                }
                results[t] = std::move(r);
            } catch (const CommandError& e) {
                errors[t] = e;
            }
        }
    };
    const int threads = std::max(1, std::min<int>(workers, static_cast<int>(pairs.size())));
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) throw *e;
    return results;
}

inline Json summarize(const std::vector<PairResult>& results, int n, const PipelineParams& p)
{
    Json j;
    j["method"] = to_string(p.method);
    j["params"] = params_to_json(p);
    Json records = Json::array();
    std::vector<TransferReport> reports;
    std::vector<double> errs;
    double runtime = 0.0;
    for (const auto& r : results) {
        Json rec = io::report_to_json(r.report);
        rec["warnings"] = r.warnings;
        records.push_back(std::move(rec));
        reports.push_back(r.report);
        runtime += r.report.runtime_seconds;
        if (r.report.median_geodesic_error) errs.push_back(*r.report.median_geodesic_error);
    }
    j["pairs"] = std::move(records);
    j["num_pairs"] = results.size();
    j["avg_iou"] = category_average_iou(reports, n);
    j["median_geodesic_error"] = errs.empty() ? Json(nullptr) : Json(median(errs));
    j["avg_runtime_s"] = results.empty() ? 0.0 : runtime / static_cast<double>(results.size());
    return j;
}

} // namespace detail

/// All N(N-1) ordered transfers of a manifest; writes category_report.json when cfg.output is set.
inline Json cmd_eval_category(RunConfig cfg, std::ostream& log = std::cerr)
{
    using namespace detail;
    apply_seed(cfg);
    stage("parameters", [&] {
        cfg.params.validate();
        if (cfg.workers < 1) throw ArgumentError("workers must be >= 1");
    });
    require_file(cfg.manifest, "manifest");
    const io::Manifest manifest = stage("load manifest " + cfg.manifest, [&] { return io::load_manifest(cfg.manifest); });
    const bool need_samples = cfg.params.method == Method::SemFM || cfg.baseline;
    const bool identity_gt = manifest.correspondence == "identity";

    const std::size_t n = manifest.objects.size();
    std::vector<std::optional<LoadedShape>> loaded(n);
    std::vector<std::optional<AffordanceRegion>> truth_opt(n);
    std::vector<std::optional<CommandError>> errors(n);
    std::atomic<std::size_t> next{0};
    auto load = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            const auto& o = manifest.objects[i];
            try {
                LoadedShape s{o.id, load_mesh_stage(manifest.resolve(o.mesh), "mesh of " + o.id), {}, {}};
                if (need_samples) s.samples = load_samples_stage(manifest.resolve(o.samples), "samples of " + o.id);
                const std::string gt_path = manifest.resolve(o.affordance);
                require_file(gt_path, "affordance of " + o.id);
                truth_opt[i] = stage("load affordance " + gt_path, [&] {
                    const AffordanceRegion r = io::load_region(gt_path, s.mesh.num_vertices(), o.id);
                    return AffordanceRegion(o.id, r.vertices(), s.mesh.num_vertices());
                });
                s.basis = basis_stage(cfg, s.mesh, o.id);
                loaded[i] = std::move(s);
            } catch (const CommandError& e) {
                errors[i] = e;
            }
        }
    };
    {
        const int threads = std::max(1, std::min<int>(cfg.workers, static_cast<int>(n)));
        std::vector<std::thread> pool;
        for (int w = 1; w < threads; ++w) pool.emplace_back(load);
        load();
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) throw *e;
    std::vector<LoadedShape> shapes;
    shapes.reserve(n);
    for (auto& s : loaded) shapes.push_back(std::move(*s));
    if (identity_gt)
        for (const auto& s : shapes)
            if (s.mesh.num_vertices() != shapes.front().mesh.num_vertices())
                throw CommandError(kUsage, cfg.manifest + ": identity correspondence needs equal vertex counts");
    std::vector<AffordanceRegion> truth;
    for (auto& t : truth_opt) truth.push_back(std::move(*t));

    Json j;
    j["schema_version"] = io::kSchemaVersion;
    j["command"] = "eval-category";
    j["category"] = Json{{"base", manifest.base}, {"seed", manifest.seed}, {"spec", manifest.spec}};
    j["N"] = n;
    const Json primary = summarize(evaluate_pairs(shapes, truth, identity_gt, cfg.params, cfg.workers),
                                   static_cast<int>(n), cfg.params);
    for (auto& [k, v] : primary.items()) j[k] = v;
    if (cfg.baseline && cfg.params.method != Method::FmWks) {
        PipelineParams bp = cfg.params;
        bp.method = Method::FmWks;
        Json b = summarize(evaluate_pairs(shapes, truth, identity_gt, bp, cfg.workers), static_cast<int>(n), bp);
        j["iou_gap"] = j["avg_iou"].get<double>() - b["avg_iou"].get<double>();
        j["baseline"] = std::move(b);
    }
    if (!cfg.output.empty()) {
        ensure_directory(cfg.output);
        stage("write outputs to " + cfg.output,
              [&] { io::write_json((std::filesystem::path(cfg.output) / "category_report.json").string(), j); });
    }
    log << "eval-category: " << n << " objects, " << j["num_pairs"].get<int>() << " pairs, "
        << to_string(cfg.params.method) << " avg IoU " << j["avg_iou"].get<double>();
    if (j.contains("baseline")) log << ", fm-wks avg IoU " << j["baseline"]["avg_iou"].get<double>();
    log << '\n';
    return j;
}

/// Copy of a report with every runtime field removed, for determinism checks.
inline Json strip_runtime(Json j)
{
    if (j.is_object()) {
        Json out = Json::object();
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "runtime_s" && it.key() != "avg_runtime_s") out[it.key()] = strip_runtime(it.value());
        return out;
    }
    if (j.is_array()) {
        Json out = Json::array();
        for (auto& v : j) out.push_back(strip_runtime(v));
        return out;
    }
    return j;
}

// ---- synth ----------------------------------------------------------------

/// Writes one OFF, sample JSON and affordance JSON per object plus manifest.json.
inline Json cmd_synth(RunConfig cfg, std::ostream& out = std::cout)
{
    using namespace detail;
    if (!cfg.spec_file.empty()) {
        require_file(cfg.spec_file, "category spec");
        const Json spec_json = stage("load category spec " + cfg.spec_file, [&] { return io::read_json(cfg.spec_file); });
        RunConfig from_file;
        stage("category spec " + cfg.spec_file, [&] { apply_config(from_file, spec_json, cfg.spec_file); });
        cfg.spec = from_file.spec;
        if (from_file.seed && !cfg.seed) cfg.seed = from_file.seed;
    }
    if (cfg.seed) cfg.spec.seed = *cfg.seed;
    stage("category spec", [&] { cfg.spec.validate(); });
    ensure_directory(cfg.output);
    const auto objects = stage("generate category", [&] { return generate_category(cfg.spec); });

    io::Manifest manifest;
    manifest.base = to_string(cfg.spec.base);
    manifest.seed = cfg.spec.seed;
    manifest.spec = spec_to_json(cfg.spec);
    manifest.correspondence = "identity";
    const auto dir = std::filesystem::path(cfg.output);
    stage("write dataset to " + cfg.output, [&] {
        for (const auto& o : objects) {
            const LiftedSampleSet samples = generate_semantic_field(o, cfg.spec.embedding_dim, cfg.spec.noise,
                                                                    cfg.spec.seed, cfg.spec.samples_per_object);
            io::ManifestObject mo{o.id, o.id + ".off", o.id + ".samples.json", o.id + ".affordance.json"};
            write_off_file((dir / mo.mesh).string(), o.mesh);
            io::save_samples((dir / mo.samples).string(), samples);
            io::write_json((dir / mo.affordance).string(), io::region_to_json(o.gt_affordance));
            manifest.objects.push_back(std::move(mo));
        }
        io::write_json((dir / "manifest.json").string(), io::manifest_to_json(manifest));
    });
    out << "synth: " << objects.size() << " " << manifest.base << " objects, " << objects.front().mesh.num_vertices()
        << " vertices each, seed " << manifest.seed << " -> " << cfg.output << '\n';
    return io::manifest_to_json(manifest);
}

} // namespace semfm::cli
