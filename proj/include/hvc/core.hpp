#pragma once
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "hvc/error.hpp"

namespace hvc {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
};

inline double dist2(const Vec3& a, const Vec3& b) { return (a - b).norm2(); }

using Color = std::array<uint8_t, 3>;

/// Positions plus optional per-point RGB. Empty clouds are valid containers
/// (I/O needs them) but geometry operations reject them.
struct PointCloud {
    std::vector<Vec3> positions;
    std::optional<std::vector<Color>> colors;

    size_t count() const { return positions.size(); }
    bool has_colors() const { return colors.has_value(); }

    /// True when every coordinate is finite and color count matches N.
    bool valid() const;
};

struct BoundingBox {
    Vec3 min{}, max{};
    /// Largest axis extent; used as the PSNR peak value.
    double p = 0.0;
};

BoundingBox compute_bounds(const PointCloud& cloud);

/// Exact k-NN / radius queries over an immutable cloud (kd-tree inside).
/// Results always match a brute-force scan; equal distances break toward the
/// lower point index.
class NeighborIndex {
  public:
    explicit NeighborIndex(const PointCloud& cloud);
    ~NeighborIndex();
    NeighborIndex(NeighborIndex&&) noexcept;
    NeighborIndex& operator=(NeighborIndex&&) noexcept;
    NeighborIndex(const NeighborIndex&) = delete;
    NeighborIndex& operator=(const NeighborIndex&) = delete;

    size_t count() const;

    /// k nearest neighbors of an arbitrary query point, ascending by squared
    /// distance (ties by lower index). Throws InsufficientPoints if k > N.
    std::vector<std::pair<uint32_t, double>> knn(const Vec3& query, size_t k) const;

    /// All points with squared distance <= r2, ascending by squared distance.
    std::vector<std::pair<uint32_t, double>> radius(const Vec3& query, double r2) const;

    /// Nearest neighbor squared distance only (hot path for metrics).
    double nearest_dist2(const Vec3& query) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

NeighborIndex build_index(const PointCloud& cloud);

struct NormalsResult {
    std::vector<Vec3> normals;            // unit vectors
    std::vector<uint8_t> degenerate;      // 1 where covariance was degenerate
};

/// PCA normals: eigenvector of the k-neighborhood covariance with the smallest
/// eigenvalue; sign fixed so the largest-magnitude component is non-negative.
NormalsResult estimate_normals(const PointCloud& cloud, size_t k);

/// Uniform scale by 1/(largest extent) + translation into [0,1]^3.
/// Returns the original bounding box for inverse mapping.
std::pair<PointCloud, BoundingBox> normalize_unit_cube(const PointCloud& cloud);

using Voxel = std::array<uint32_t, 3>;

struct VoxelGrid {
    uint32_t depth = 0;
    std::vector<Voxel> voxels;            // unique, sorted lexicographically
    std::vector<uint32_t> point_to_voxel; // index into voxels per input point
};

/// floor(coord * 2^depth) clamped to 2^depth - 1; input must be in [0,1]^3.
VoxelGrid voxelize(const PointCloud& cloud, uint32_t depth);

/// Voxel centers as a point cloud in [0,1]^3 (inverse of voxelize up to
/// quantization error).
PointCloud voxel_centers(const VoxelGrid& grid);

}  // namespace hvc
