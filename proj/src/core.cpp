#include "hvc/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace hvc {

bool PointCloud::valid() const {
    for (const Vec3& p : positions) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            return false;
    }
    if (colors && colors->size() != positions.size()) return false;
    return true;
}

BoundingBox compute_bounds(const PointCloud& cloud) {
    if (cloud.count() == 0) throw EmptyCloud("compute_bounds: empty cloud");
    BoundingBox b;
    b.min = b.max = cloud.positions[0];
    for (const Vec3& p : cloud.positions) {
        for (int a = 0; a < 3; ++a) {
            b.min[a] = std::min(b.min[a], p[a]);
            b.max[a] = std::max(b.max[a], p[a]);
        }
    }
    b.p = std::max({b.max.x - b.min.x, b.max.y - b.min.y, b.max.z - b.min.z});
    return b;
}

// ---------------------------------------------------------------- kd-tree

namespace {

struct KdNode {
    int32_t left = -1, right = -1;
    uint32_t begin = 0, end = 0;  // leaf range into the index array
    int axis = -1;                // -1 marks a leaf
    double split = 0.0;
};

constexpr size_t kLeafSize = 16;

// total order used for "better neighbor": smaller distance, then lower index
inline bool better(double d2a, uint32_t ia, double d2b, uint32_t ib) {
    return d2a < d2b || (d2a == d2b && ia < ib);
}

}  // namespace

struct NeighborIndex::Impl {
    std::vector<Vec3> pts;
    std::vector<uint32_t> order;    // point indices, partitioned by the tree
    std::vector<KdNode> nodes;

    int32_t build(uint32_t begin, uint32_t end) {
        KdNode node;
        node.begin = begin;
        node.end = end;
        const int32_t id = static_cast<int32_t>(nodes.size());
        nodes.push_back(node);
        if (end - begin <= kLeafSize) return id;

        // split on the widest axis at the median point
        Vec3 lo = pts[order[begin]], hi = lo;
        for (uint32_t i = begin; i < end; ++i) {
            const Vec3& p = pts[order[i]];
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::min(lo[a], p[a]);
                hi[a] = std::max(hi[a], p[a]);
            }
        }
        int axis = 0;
        double width = hi[0] - lo[0];
        for (int a = 1; a < 3; ++a) {
            if (hi[a] - lo[a] > width) { width = hi[a] - lo[a]; axis = a; }
        }
        if (width == 0.0) return id;  // all coincident: keep as leaf

        const uint32_t mid = begin + (end - begin) / 2;
        std::nth_element(order.begin() + begin, order.begin() + mid,
                         order.begin() + end, [&](uint32_t a, uint32_t b) {
                             const double ca = pts[a][axis], cb = pts[b][axis];
                             return ca < cb || (ca == cb && a < b);
                         });
        const double split = pts[order[mid]][axis];

        const int32_t l = build(begin, mid);
        const int32_t r = build(mid, end);
        nodes[id].left = l;
        nodes[id].right = r;
        nodes[id].axis = axis;
        nodes[id].split = split;
        return id;
    }

    template <typename Visit>
    void search(int32_t id, const Vec3& q, double& bound, Visit&& visit) const {
        const KdNode& node = nodes[id];
        if (node.axis < 0) {
            for (uint32_t i = node.begin; i < node.end; ++i) visit(order[i]);
            return;
        }
        const double delta = q[node.axis] - node.split;
        const int32_t near = delta < 0.0 ? node.left : node.right;
        const int32_t far = delta < 0.0 ? node.right : node.left;
        search(near, q, bound, visit);
        // visit the far side unless strictly beyond the current worst; equal
        // distances must still be visited so lower indices can win ties
        if (delta * delta <= bound) search(far, q, bound, visit);
    }
};

NeighborIndex::NeighborIndex(const PointCloud& cloud) : impl_(new Impl) {
    if (cloud.count() == 0) throw EmptyCloud("build_index: empty cloud");
    impl_->pts = cloud.positions;
    impl_->order.resize(cloud.count());
    for (uint32_t i = 0; i < cloud.count(); ++i) impl_->order[i] = i;
    impl_->nodes.reserve(2 * cloud.count() / kLeafSize + 8);
    impl_->build(0, static_cast<uint32_t>(cloud.count()));
}

NeighborIndex::~NeighborIndex() = default;
NeighborIndex::NeighborIndex(NeighborIndex&&) noexcept = default;
NeighborIndex& NeighborIndex::operator=(NeighborIndex&&) noexcept = default;

size_t NeighborIndex::count() const { return impl_->pts.size(); }

NeighborIndex build_index(const PointCloud& cloud) { return NeighborIndex(cloud); }

std::vector<std::pair<uint32_t, double>> NeighborIndex::knn(const Vec3& query,
                                                            size_t k) const {
    const size_t n = impl_->pts.size();
    if (k < 1 || k > n) throw InsufficientPoints("knn: k out of range");

    // max-heap on (distance, index) so the worst kept neighbor is on top
    std::vector<std::pair<double, uint32_t>> heap;
    heap.reserve(k + 1);
    auto worse = [](const std::pair<double, uint32_t>& a,
                    const std::pair<double, uint32_t>& b) {
        return better(a.first, a.second, b.first, b.second);
    };
    double bound = std::numeric_limits<double>::infinity();
    impl_->search(0, query, bound, [&](uint32_t i) {
        const double d2 = dist2(impl_->pts[i], query);
        if (heap.size() < k) {
            heap.emplace_back(d2, i);
            std::push_heap(heap.begin(), heap.end(), worse);
        } else if (better(d2, i, heap.front().first, heap.front().second)) {
            std::pop_heap(heap.begin(), heap.end(), worse);
            heap.back() = {d2, i};
            std::push_heap(heap.begin(), heap.end(), worse);
        }
        if (heap.size() == k) bound = heap.front().first;
    });

    std::sort(heap.begin(), heap.end(), worse);
    std::vector<std::pair<uint32_t, double>> out;
    out.reserve(k);
    for (const auto& [d2, i] : heap) out.emplace_back(i, d2);
    return out;
}

std::vector<std::pair<uint32_t, double>> NeighborIndex::radius(const Vec3& query,
                                                               double r2) const {
    std::vector<std::pair<double, uint32_t>> found;
    double bound = r2;
    impl_->search(0, query, bound, [&](uint32_t i) {
        const double d2 = dist2(impl_->pts[i], query);
        if (d2 <= r2) found.emplace_back(d2, i);
    });
    std::sort(found.begin(), found.end());
    std::vector<std::pair<uint32_t, double>> out;
    out.reserve(found.size());
    for (const auto& [d2, i] : found) out.emplace_back(i, d2);
    return out;
}

double NeighborIndex::nearest_dist2(const Vec3& query) const {
    double bound = std::numeric_limits<double>::infinity();
    double best = bound;
    impl_->search(0, query, bound, [&](uint32_t i) {
        const double d2 = dist2(impl_->pts[i], query);
        if (d2 < best) { best = d2; bound = d2; }
    });
    return best;
}

// ---------------------------------------------------------------- normals

namespace {

/// Jacobi eigendecomposition of a symmetric 3x3 matrix. Columns of `vec` end
/// up as unit eigenvectors matching `val`.
void jacobi3(double m[3][3], double val[3], double vec[3][3]) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) vec[i][j] = (i == j) ? 1.0 : 0.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::abs(m[0][1]) + std::abs(m[0][2]) + std::abs(m[1][2]);
        if (off == 0.0) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(m[p][q]) < 1e-300) continue;
                const double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                // rotate rows/cols p,q of m
                const double mpp = m[p][p], mqq = m[q][q], mpq = m[p][q];
                m[p][p] = c * c * mpp - 2.0 * s * c * mpq + s * s * mqq;
                m[q][q] = s * s * mpp + 2.0 * s * c * mpq + c * c * mqq;
                m[p][q] = m[q][p] = 0.0;
                for (int r = 0; r < 3; ++r) {
                    if (r == p || r == q) continue;
                    const double mrp = m[r][p], mrq = m[r][q];
                    m[r][p] = m[p][r] = c * mrp - s * mrq;
                    m[r][q] = m[q][r] = s * mrp + c * mrq;
                }
                for (int r = 0; r < 3; ++r) {
                    const double vrp = vec[r][p], vrq = vec[r][q];
                    vec[r][p] = c * vrp - s * vrq;
                    vec[r][q] = s * vrp + c * vrq;
                }
            }
        }
    }
    for (int i = 0; i < 3; ++i) val[i] = m[i][i];
}

}  // namespace

NormalsResult estimate_normals(const PointCloud& cloud, size_t k) {
    const size_t n = cloud.count();
    if (k < 3 || n < k) throw InsufficientPoints("estimate_normals: need k >= 3 and N >= k");
    NeighborIndex index(cloud);
    NormalsResult res;
    res.normals.resize(n);
    res.degenerate.assign(n, 0);

    for (size_t i = 0; i < n; ++i) {
        const auto nb = index.knn(cloud.positions[i], k);
        Vec3 mean{};
        for (const auto& [j, d2] : nb) mean = mean + cloud.positions[j];
        mean = mean / static_cast<double>(k);
        double cov[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        for (const auto& [j, d2] : nb) {
            const Vec3 d = cloud.positions[j] - mean;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) cov[a][b] += d[a] * d[b];
        }
        const double trace = cov[0][0] + cov[1][1] + cov[2][2];
        if (trace <= 1e-24) {
            res.normals[i] = {0.0, 0.0, 1.0};
            res.degenerate[i] = 1;
            continue;
        }
        double val[3], vec[3][3];
        jacobi3(cov, val, vec);
        int smallest = 0;
        for (int a = 1; a < 3; ++a)
            if (val[a] < val[smallest]) smallest = a;
        Vec3 nrm{vec[0][smallest], vec[1][smallest], vec[2][smallest]};
        nrm = nrm / nrm.norm();
        // orientation: largest-magnitude component non-negative
        int big = 0;
        for (int a = 1; a < 3; ++a)
            if (std::abs(nrm[a]) > std::abs(nrm[big])) big = a;
        if (nrm[big] < 0.0) nrm = nrm * -1.0;
        res.normals[i] = nrm;
    }
    return res;
}

// ------------------------------------------------- normalize / voxelize

std::pair<PointCloud, BoundingBox> normalize_unit_cube(const PointCloud& cloud) {
    const BoundingBox box = compute_bounds(cloud);
    if (box.p <= 0.0) throw DegenerateExtent("normalize_unit_cube: zero extent");
    PointCloud out;
    out.positions.reserve(cloud.count());
    for (const Vec3& p : cloud.positions) out.positions.push_back((p - box.min) / box.p);
    out.colors = cloud.colors;
    return {std::move(out), box};
}

VoxelGrid voxelize(const PointCloud& cloud, uint32_t depth) {
    if (depth < 1 || depth > 16) throw InvalidParameter("voxelize: depth must be 1..16");
    if (cloud.count() == 0) throw EmptyCloud("voxelize: empty cloud");
    const double scale = static_cast<double>(1u << depth);
    const uint32_t maxc = (1u << depth) - 1;

    std::vector<Voxel> per_point(cloud.count());
    for (size_t i = 0; i < cloud.count(); ++i) {
        const Vec3& p = cloud.positions[i];
        Voxel v;
        for (int a = 0; a < 3; ++a) {
            const double c = p[a];
            if (c < 0.0 || c > 1.0) throw NotNormalized("voxelize: coordinate outside [0,1]");
            v[a] = std::min(static_cast<uint32_t>(std::floor(c * scale)), maxc);
        }
        per_point[i] = v;
    }

    VoxelGrid grid;
    grid.depth = depth;
    grid.voxels = per_point;
    std::sort(grid.voxels.begin(), grid.voxels.end());
    grid.voxels.erase(std::unique(grid.voxels.begin(), grid.voxels.end()),
                      grid.voxels.end());
    grid.point_to_voxel.resize(cloud.count());
    for (size_t i = 0; i < cloud.count(); ++i) {
        const auto it = std::lower_bound(grid.voxels.begin(), grid.voxels.end(),
                                         per_point[i]);
        grid.point_to_voxel[i] =
            static_cast<uint32_t>(it - grid.voxels.begin());
    }
    return grid;
}

PointCloud voxel_centers(const VoxelGrid& grid) {
    PointCloud out;
    const double inv = 1.0 / static_cast<double>(1u << grid.depth);
    out.positions.reserve(grid.voxels.size());
    for (const Voxel& v : grid.voxels) {
        out.positions.push_back({(v[0] + 0.5) * inv, (v[1] + 0.5) * inv,
                                 (v[2] + 0.5) * inv});
    }
    return out;
}

}  // namespace hvc
