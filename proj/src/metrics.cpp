#include "hvc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hvc/io.hpp"

namespace hvc {

std::string QualityReport::csv_row() const {
    std::string row;
    row += fmt_double(chamfer);
    row += ',';
    row += fmt_double(d1_mse);
    row += ',';
    row += fmt_double(d1_psnr_db);
    row += ',';
    row += fmt_double(d2_mse);
    row += ',';
    row += fmt_double(d2_psnr_db);
    row += ',';
    row += fmt_double(peak);
    return row;
}

namespace {

double directional_mse(const PointCloud& from, const NeighborIndex& to_index) {
    double sum = 0.0;
    for (const Vec3& p : from.positions) sum += to_index.nearest_dist2(p);
    return sum / static_cast<double>(from.count());
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
    if (a.count() == 0 || b.count() == 0) throw EmptyCloud("chamfer: empty cloud");
    NeighborIndex ia(a), ib(b);
    return 0.5 * (directional_mse(a, ib) + directional_mse(b, ia));
}

double psnr_db(double mse, double peak) {
    if (peak <= 0.0) throw InvalidPeak("psnr: peak must be positive");
    if (mse <= 0.0) return 999.0;
    return std::min(999.0, 10.0 * std::log10(3.0 * peak * peak / mse));
}

std::pair<double, double> d1(const PointCloud& ref, const PointCloud& deg, double peak) {
    if (ref.count() == 0 || deg.count() == 0) throw EmptyCloud("d1: empty cloud");
    if (peak <= 0.0) throw InvalidPeak("d1: peak must be positive");
    NeighborIndex iref(ref), ideg(deg);
    const double mse = std::max(directional_mse(deg, iref), directional_mse(ref, ideg));
    return {mse, psnr_db(mse, peak)};
}

namespace {

/// Mean squared projection of NN residuals onto the target cloud's normals.
/// Each `from` point projects onto the normal of its nearest `to` point.
double directional_plane_mse(const PointCloud& from, const PointCloud& to,
                             const NeighborIndex& to_index,
                             const std::vector<Vec3>& to_normals) {
    double sum = 0.0;
    for (const Vec3& p : from.positions) {
        const auto nn = to_index.knn(p, 1);
        const uint32_t j = nn[0].first;
        const Vec3 d = p - to.positions[j];
        const double proj = d.dot(to_normals[j]);
        // Cauchy-Schwarz guard: keep the pointwise d2 <= d1 bound exact in
        // floating point as well
        sum += std::min(proj * proj, d.norm2());
    }
    return sum / static_cast<double>(from.count());
}

std::vector<Vec3> fallback_or_estimated_normals(const PointCloud& cloud) {
    const size_t k = std::min<size_t>(16, cloud.count());
    if (k < 3) return std::vector<Vec3>(cloud.count(), Vec3{0.0, 0.0, 1.0});
    return estimate_normals(cloud, k).normals;
}

}  // namespace

std::pair<double, double> d2(const PointCloud& ref, const std::vector<Vec3>& ref_normals,
                             const PointCloud& deg, double peak) {
    if (ref.count() == 0 || deg.count() == 0) throw EmptyCloud("d2: empty cloud");
    if (ref_normals.size() != ref.count()) throw NormalsRequired("d2: reference normals missing");
    if (peak <= 0.0) throw InvalidPeak("d2: peak must be positive");
    NeighborIndex iref(ref), ideg(deg);
    const std::vector<Vec3> deg_normals = fallback_or_estimated_normals(deg);
    const double mse =
        std::max(directional_plane_mse(deg, ref, iref, ref_normals),
                 directional_plane_mse(ref, deg, ideg, deg_normals));
    return {mse, psnr_db(mse, peak)};
}

QualityReport quality_report(const PointCloud& ref, const PointCloud& deg,
                             std::optional<double> peak) {
    QualityReport q;
    q.peak = peak.value_or(compute_bounds(ref).p);
    q.chamfer = chamfer(ref, deg);
    std::tie(q.d1_mse, q.d1_psnr_db) = d1(ref, deg, q.peak);
    const std::vector<Vec3> ref_normals = fallback_or_estimated_normals(ref);
    std::tie(q.d2_mse, q.d2_psnr_db) = d2(ref, ref_normals, deg, q.peak);
    return q;
}

double ber(const std::vector<uint8_t>& sent, const std::vector<uint8_t>& received) {
    if (sent.size() != received.size()) throw LengthError("ber: length mismatch");
    if (sent.empty()) return 0.0;
    size_t diff = 0;
    for (size_t i = 0; i < sent.size(); ++i) diff += (sent[i] != received[i]);
    return static_cast<double>(diff) / static_cast<double>(sent.size());
}

double per(const std::vector<std::vector<uint8_t>>& sent,
           const std::vector<std::vector<uint8_t>>& received) {
    if (sent.size() != received.size()) throw LengthError("per: packet count mismatch");
    if (sent.empty()) return 0.0;
    size_t bad = 0;
    for (size_t i = 0; i < sent.size(); ++i) bad += (sent[i] != received[i]);
    return static_cast<double>(bad) / static_cast<double>(sent.size());
}

}  // namespace hvc
