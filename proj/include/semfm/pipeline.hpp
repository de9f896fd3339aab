#pragma once

#include "descriptors.hpp"
#include "error.hpp"
#include "fmap.hpp"
#include "semantics.hpp"
#include "spectral.hpp"
#include "transfer.hpp"

#include <chrono>
#include <optional>
#include <string>

namespace semfm {

enum class Method { SemFM, FmWks };
enum class TransferMode { Pointwise, Indicator };

inline std::string to_string(Method m) { return m == Method::SemFM ? "semfm" : "fm-wks"; }
inline std::string to_string(TransferMode m) { return m == TransferMode::Pointwise ? "pointwise" : "indicator"; }

inline Method parse_method(const std::string& s)
{
    if (s == "semfm") return Method::SemFM;
    if (s == "fm-wks") return Method::FmWks;
    throw ArgumentError("unknown method '" + s + "' (semfm, fm-wks)");
}

inline TransferMode parse_mode(const std::string& s)
{
    if (s == "pointwise") return TransferMode::Pointwise;
    if (s == "indicator") return TransferMode::Indicator;
    throw ArgumentError("unknown transfer mode '" + s + "' (pointwise, indicator)");
}

struct PipelineParams {
    int k = 80; // eigenpairs per shape
    int k0 = 20;
    int step = 5;
    int k_final = 80;
    int points = 500;       // semantic point cloud size M
    double eps_scale = 0.02; // aggregation radius in bounding-box diagonals
    int K = 5;
    int alpha = 2;
    int k_nn = 10;
    std::optional<double> sigma;
    double t_scale = 10.0;
    std::optional<double> reg_weight;
    TransferMode mode = TransferMode::Pointwise;
    double threshold = 0.5;
    Method method = Method::SemFM;
    int wks_energies = kDefaultWksEnergies;
    double wks_sigma_scale = kDefaultWksSigmaScale;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (k < 1 || k > kMaxBasisSize) throw ArgumentError("k must lie in [1, " + std::to_string(kMaxBasisSize) + "]");
        if (k0 < 1 || k0 > k_final) throw ArgumentError("k0 must lie in [1, k_final]");
        if (k_final > k) throw ArgumentError("k_final must not exceed k");
        if (step < 1) throw ArgumentError("step must be >= 1");
        if (points < 2) throw ArgumentError("points must be >= 2");
        if (!(eps_scale > 0.0)) throw ArgumentError("eps_scale must be positive");
        if (K < 2 || K > points) throw ArgumentError("K must lie in [2, points]");
        if (alpha < 1 || alpha > K) throw ArgumentError("alpha must lie in [1, K]");
        if (k_nn < 1 || k_nn >= points) throw ArgumentError("k_nn must lie in [1, points)");
        if (sigma && !(*sigma > 0.0)) throw ArgumentError("sigma must be positive");
        if (!(t_scale >= 0.0)) throw ArgumentError("t_scale must be >= 0");
        if (reg_weight && !(*reg_weight >= 0.0)) throw ArgumentError("reg_weight must be >= 0");
        if (!(threshold > 0.0 && threshold <= 1.0)) throw ArgumentError("threshold must lie in (0, 1]");
    }
};

/// A shape as seen by the pipeline; all pointers must outlive the call.
struct ShapeInput {
    std::string id;
    const TriangleMesh* mesh = nullptr;
    const LiftedSampleSet* samples = nullptr; // unused by fm-wks
    const SpectralBasis* basis = nullptr;
};

struct SemanticAnalysis {
    SemanticPointCloud cloud;
    SemanticGraph graph;
    ClusterSet clusters;
    std::vector<int> vertex_labels;
};

inline SemanticAnalysis analyze_semantics(const ShapeInput& shape, const PipelineParams& p)
{
    SemanticAnalysis a;
    const double radius = p.eps_scale * bounding_box_diagonal(shape.mesh->vertices());
    a.cloud = aggregate_samples(*shape.mesh, *shape.samples, p.points, radius, p.seed);
    a.graph = build_semantic_graph(a.cloud, p.k_nn, p.sigma);
    a.clusters = spectral_cluster(a.cloud, a.graph, p.K, p.seed);
    a.vertex_labels = vertex_cluster_assignment(*shape.mesh, a.cloud, a.clusters.labels);
    return a;
}

struct TransferOutcome {
    FunctionalMap initial;
    FunctionalMap refined;
    PointwiseMap map;
    AffordanceRegion predicted;
    std::optional<SemanticAnalysis> source_semantics, target_semantics;
    Matrix similarity;
    AnchorSet anchors;
    double seconds = 0.0;
    Warnings warnings;
};

///
/// Source region -> target region. Timing covers everything after the bases
/// are available.
///
inline TransferOutcome run_transfer(const ShapeInput& src, const ShapeInput& tgt, const AffordanceRegion& region,
                                    const PipelineParams& p)
{
    p.validate();
    if (!src.mesh || !tgt.mesh || !src.basis || !tgt.basis) throw ArgumentError("run_transfer: incomplete input");
    if (p.method == Method::SemFM && (!src.samples || !tgt.samples))
        throw ArgumentError("run_transfer: semfm needs lifted samples on both shapes");
    const auto start = std::chrono::steady_clock::now();

    Matrix F1, F2;
    Matrix S;
    AnchorSet anchors;
    std::optional<SemanticAnalysis> a1, a2;
    Warnings warnings;
    if (p.method == Method::SemFM) {
        a1 = analyze_semantics(src, p);
        a2 = analyze_semantics(tgt, p);
        S = cluster_similarity(a1->clusters, a2->clusters, &warnings);
        anchors = select_anchors(S, p.alpha);
        const Matrix I1 = indicator_functions(a1->vertex_labels, anchors, Side::Source);
        const Matrix I2 = indicator_functions(a2->vertex_labels, anchors, Side::Target);
        F1 = diffuse_descriptors(*src.basis, I1, default_diffusion_time(*src.mesh, p.t_scale));
        F2 = diffuse_descriptors(*tgt.basis, I2, default_diffusion_time(*tgt.mesh, p.t_scale));
    } else {
        F1 = wks_descriptors(*src.basis, p.wks_energies, p.wks_sigma_scale);
        F2 = wks_descriptors(*tgt.basis, p.wks_energies, p.wks_sigma_scale);
    }
    FunctionalMap initial = estimate_fmap(*src.basis, *tgt.basis, F1, F2, p.k0, p.reg_weight);
    FunctionalMap refined = zoomout_refine(*src.basis, *tgt.basis, initial, p.step, p.k_final);
    PointwiseMap T = fmap_to_pointwise(*src.basis, *tgt.basis, refined.C);
    AffordanceRegion predicted =
        p.mode == TransferMode::Pointwise
            ? transfer_region_pointwise(T, region, tgt.id)
            : transfer_region_indicator(*src.basis, *tgt.basis, refined.C, region, p.threshold, tgt.id);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (const auto& w : initial.warnings) warnings.push_back(w);
    for (const auto& w : refined.warnings) warnings.push_back(w);
    return TransferOutcome{std::move(initial), std::move(refined), std::move(T), std::move(predicted),
                           std::move(a1), std::move(a2), std::move(S), std::move(anchors), seconds,
                           std::move(warnings)};
}

} // namespace semfm
