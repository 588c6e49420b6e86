#pragma once
#include <optional>
#include <string>
#include <vector>

#include "hvc/core.hpp"

namespace hvc {

/// MPEG-style quality summary for one (reference, degraded) pair.
struct QualityReport {
    double chamfer = 0.0;
    double d1_mse = 0.0, d1_psnr_db = 0.0;
    double d2_mse = 0.0, d2_psnr_db = 0.0;
    double peak = 0.0;

    /// "chamfer,d1_mse,d1_psnr,d2_mse,d2_psnr,peak" with shortest-round-trip
    /// number formatting.
    std::string csv_row() const;
};

/// Symmetric mean squared nearest-neighbor distance:
/// (mean_a NN2(a->b) + mean_b NN2(b->a)) / 2.
double chamfer(const PointCloud& a, const PointCloud& b);

/// 10*log10(3 p^2 / mse), capped at 999.0 (also the mse == 0 sentinel).
double psnr_db(double mse, double peak);

/// Point-to-point metric: max of the two directional mean squared NN
/// distances. Returns (mse, psnr).
std::pair<double, double> d1(const PointCloud& ref, const PointCloud& deg, double peak);

/// Point-to-plane metric: squared projection of each NN residual onto the
/// nearest point's normal; max of both directions. The forward direction uses
/// `ref_normals`; the reverse direction estimates degraded-cloud normals on
/// the fly with k = min(16, N_deg).
std::pair<double, double> d2(const PointCloud& ref, const std::vector<Vec3>& ref_normals,
                             const PointCloud& deg, double peak);

/// All metrics in one pass. Peak defaults to the reference cloud's largest
/// bounding-box extent when not given.
QualityReport quality_report(const PointCloud& ref, const PointCloud& deg,
                             std::optional<double> peak = std::nullopt);

/// Fraction of differing bits; inputs must have equal length.
double ber(const std::vector<uint8_t>& sent, const std::vector<uint8_t>& received);

/// Fraction of packets with at least one differing bit.
double per(const std::vector<std::vector<uint8_t>>& sent,
           const std::vector<std::vector<uint8_t>>& received);

}  // namespace hvc
