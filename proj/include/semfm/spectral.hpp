#pragma once

#include "eigensolver.hpp"
#include "error.hpp"
#include "mesh.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace semfm {

///
/// Truncated Laplace-Beltrami eigenbasis: eigenvalues ascending, eigenfunctions
/// as columns of a |V| x k matrix, M-orthonormal under the lumped mass.
///
struct SpectralBasis {
    Vector eigenvalues;
    Matrix eigenfunctions;
    Vector mass;

    int k() const noexcept { return static_cast<int>(eigenvalues.size()); }
    int num_vertices() const noexcept { return static_cast<int>(eigenfunctions.rows()); }
    double area() const { return mass.sum(); }

    /// First `dim` eigenfunctions.
    auto phi(int dim) const { return eigenfunctions.leftCols(dim); }
};

/// Hard limit on the basis dimension.
inline constexpr int kMaxBasisSize = 512;

/// Each column's entry of largest magnitude is made positive (first index wins ties).
inline void fix_signs(Matrix& phi)
{
    for (Eigen::Index j = 0; j < phi.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < phi.rows(); ++i) {
            if (std::abs(phi(i, j)) > best) {
                best = std::abs(phi(i, j));
                arg = i;
            }
        }
        if (phi(arg, j) < 0) phi.col(j) *= -1.0;
    }
}

inline SpectralBasis compute_basis(const TriangleMesh& mesh, int k, const EigenOptions& opt = {},
                                   Warnings* warnings = nullptr)
{
    if (k < 1) throw ArgumentError("compute_basis: k must be positive");
    if (k >= mesh.num_vertices())
        throw ArgumentError("compute_basis: k=" + std::to_string(k) + " must be below the vertex count " +
                            std::to_string(mesh.num_vertices()));
    if (k > kMaxBasisSize) throw ArgumentError("compute_basis: k above " + std::to_string(kMaxBasisSize));
    const SparseMatrix L = cotangent_laplacian(mesh, warnings);
    SpectralBasis basis;
    basis.mass = vertex_areas(mesh);
    EigenPairs pairs = smallest_eigenpairs(L, basis.mass, k, opt);
    basis.eigenvalues = std::move(pairs.values);
    basis.eigenfunctions = std::move(pairs.vectors);
    fix_signs(basis.eigenfunctions);
    return basis;
}

namespace detail {
inline void require_rows(const SpectralBasis& basis, Eigen::Index rows, const char* op)
{
    if (rows != basis.num_vertices())
        throw ArgumentError(std::string(op) + ": field has " + std::to_string(rows) + " rows, basis has " +
                            std::to_string(basis.num_vertices()) + " vertices");
}
} // namespace detail

/// Spectral coefficients Phi^T M F.
inline Matrix project(const SpectralBasis& basis, const Matrix& fields)
{
    detail::require_rows(basis, fields.rows(), "project");
    return basis.eigenfunctions.transpose() * (basis.mass.asDiagonal() * fields);
}

inline Matrix reconstruct(const SpectralBasis& basis, const Matrix& coeffs)
{
    if (coeffs.rows() != basis.k())
        throw ArgumentError("reconstruct: coefficient rows " + std::to_string(coeffs.rows()) + " != k " +
                            std::to_string(basis.k()));
    return basis.eigenfunctions * coeffs;
}

/// Diffusion through the truncated spectrum: Phi diag(exp(-t lambda)) Phi^T M f.
inline Matrix heat_diffuse(const SpectralBasis& basis, const Matrix& fields, double t)
{
    if (!(t >= 0.0)) throw ArgumentError("heat_diffuse: diffusion time must be >= 0");
    Matrix coeffs = project(basis, fields);
    const Vector decay = (-t * basis.eigenvalues.array().max(0.0)).exp();
    coeffs = decay.asDiagonal() * coeffs;
    return basis.eigenfunctions * coeffs;
}

inline Vector heat_diffuse(const SpectralBasis& basis, const Vector& field, double t)
{
    return heat_diffuse(basis, Matrix(field), t).col(0);
}

/// Default diffusion time: t_scale * (mean edge length)^2.
inline double default_diffusion_time(const TriangleMesh& mesh, double t_scale = 10.0)
{
    const double h = mean_edge_length(mesh);
    return t_scale * h * h;
}

// Basis cache file, little-endian native layout:
//   magic "SEMFMBS1" | u32 version | u64 mesh hash | u32 k | u32 |V|
//   | f64 eigenvalues[k] | f64 phi[|V|*k] row-major | f64 mass[|V|]
inline constexpr char kBasisMagic[8] = {'S', 'E', 'M', 'F', 'M', 'B', 'S', '1'};
inline constexpr std::uint32_t kBasisCacheVersion = 1;

inline void save_basis(const std::string& path, const SpectralBasis& basis, std::uint64_t mesh_hash)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write basis cache", path);
    const std::uint32_t version = kBasisCacheVersion;
    const auto k = static_cast<std::uint32_t>(basis.k());
    const auto n = static_cast<std::uint32_t>(basis.num_vertices());
    out.write(kBasisMagic, sizeof kBasisMagic);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&mesh_hash), sizeof mesh_hash);
    out.write(reinterpret_cast<const char*>(&k), sizeof k);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(basis.eigenvalues.data()), sizeof(double) * k);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = basis.eigenfunctions;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
    out.write(reinterpret_cast<const char*>(basis.mass.data()), sizeof(double) * n);
    if (!out) throw IoError("basis cache write failed", path);
}

/// Returns nothing when the file is missing, of another version, or keyed to another mesh.
inline std::optional<SpectralBasis> load_basis(const std::string& path, std::uint64_t mesh_hash, int expected_k)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8];
    std::uint32_t version = 0, k = 0, n = 0;
    std::uint64_t hash = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&hash), sizeof hash);
    in.read(reinterpret_cast<char*>(&k), sizeof k);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || std::memcmp(magic, kBasisMagic, sizeof magic) != 0 || version != kBasisCacheVersion ||
        hash != mesh_hash || static_cast<int>(k) != expected_k)
        return std::nullopt;
    SpectralBasis basis;
    basis.eigenvalues.resize(k);
    in.read(reinterpret_cast<char*>(basis.eigenvalues.data()), sizeof(double) * k);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, k);
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
    basis.eigenfunctions = rm;
    basis.mass.resize(n);
    in.read(reinterpret_cast<char*>(basis.mass.data()), sizeof(double) * n);
    if (!in) return std::nullopt;
    return basis;
}

///
/// On-disk basis cache keyed by mesh content hash and k. An empty directory
/// disables caching.
///
class BasisCache {
public:
    explicit BasisCache(std::string dir = {}) : dir_(std::move(dir)) {}

    bool enabled() const noexcept { return !dir_.empty(); }

    std::string path_for(std::uint64_t hash, int k) const
    {
        char name[64];
        std::snprintf(name, sizeof name, "%016llx_k%d.basis", static_cast<unsigned long long>(hash), k);
        return (std::filesystem::path(dir_) / name).string();
    }

    /// `hit` reports whether the basis came from disk.
    SpectralBasis get(const TriangleMesh& mesh, int k, bool* hit = nullptr, const EigenOptions& opt = {}) const
    {
        const std::uint64_t hash = content_hash(mesh);
        if (enabled()) {
            if (auto cached = load_basis(path_for(hash, k), hash, k);
                cached && cached->num_vertices() == mesh.num_vertices()) {
                if (hit) *hit = true;
                return std::move(*cached);
            }
        }
        if (hit) *hit = false;
        SpectralBasis basis = compute_basis(mesh, k, opt);
        if (enabled()) {
            std::error_code ec;
            std::filesystem::create_directories(dir_, ec);
            // write to a temporary name first so concurrent readers never see a partial file
            const std::string final_path = path_for(hash, k);
            const std::string tmp = final_path + ".tmp" + std::to_string(reinterpret_cast<std::uintptr_t>(&basis));
            save_basis(tmp, basis, hash);
            std::filesystem::rename(tmp, final_path, ec);
        }
        return basis;
    }

private:
    std::string dir_;
};

} // namespace semfm
