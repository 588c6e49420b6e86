#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "hvc/metrics.hpp"
#include "hvc/rng.hpp"

using namespace hvc;

namespace {

PointCloud random_cloud(size_t n, uint64_t seed) {
    Rng rng(seed);
    PointCloud c;
    for (size_t i = 0; i < n; ++i)
        c.positions.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    return c;
}

double brute_nn2_mean(const PointCloud& from, const PointCloud& to) {
    double total = 0.0;
    for (const Vec3& p : from.positions) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : to.positions) best = std::min(best, dist2(p, q));
        total += best;
    }
    return total / double(from.count());
}

}  // namespace

TEST_CASE("hand-computed d1 case") {
    PointCloud ref, deg;
    ref.positions = {{0, 0, 0}, {1, 0, 0}};
    deg.positions = {{0, 0, 0.5}};
    const auto [mse, psnr] = d1(ref, deg, 1.0);
    // ref->deg: 0.25 and 1.25 (mean 0.75); deg->ref: 0.25. Max = 0.75.
    CHECK(mse == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(psnr == doctest::Approx(10.0 * std::log10(3.0 / 0.75)).epsilon(1e-12));
    CHECK(chamfer(ref, deg) == doctest::Approx((0.75 + 0.25) / 2.0).epsilon(1e-12));
}

TEST_CASE("chamfer and d1 match brute force") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const PointCloud a = random_cloud(4 + seed * 3, 1000 + seed);
        const PointCloud b = random_cloud(3 + seed * 2, 2000 + seed);
        const double want_ab = brute_nn2_mean(a, b);
        const double want_ba = brute_nn2_mean(b, a);
        CHECK(std::abs(chamfer(a, b) - 0.5 * (want_ab + want_ba)) < 1e-9);
        const auto [mse, psnr] = d1(a, b, 1.0);
        CHECK(std::abs(mse - std::max(want_ab, want_ba)) < 1e-9);
        CHECK(chamfer(a, b) == doctest::Approx(chamfer(b, a)));
    }
}

TEST_CASE("identical clouds score zero error and capped psnr") {
    const PointCloud c = random_cloud(256, 5);
    CHECK(chamfer(c, c) == 0.0);
    const QualityReport r = quality_report(c, c);
    CHECK(r.chamfer == 0.0);
    CHECK(r.d1_mse == 0.0);
    CHECK(r.d1_psnr_db == 999.0);
    CHECK(r.d2_mse == 0.0);
    CHECK(r.d2_psnr_db == 999.0);
}

TEST_CASE("psnr formula and cap") {
    CHECK(psnr_db(0.03, 1.0) == doctest::Approx(10.0 * std::log10(3.0 / 0.03)));
    CHECK(psnr_db(3.0, 10.0) == doctest::Approx(20.0));
    CHECK(psnr_db(0.0, 1.0) == 999.0);
    CHECK(psnr_db(1e-300, 1.0) == 999.0);  // cap
}

TEST_CASE("d2 never exceeds d1") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        const PointCloud ref = random_cloud(60, 3000 + seed);
        const PointCloud deg = random_cloud(50, 4000 + seed);
        const QualityReport r = quality_report(ref, deg, 1.0);
        CHECK(r.d2_mse <= r.d1_mse);
        CHECK(r.d2_psnr_db >= r.d1_psnr_db);
    }
}

TEST_CASE("d2 forgives in-plane displacement") {
    PointCloud ref, deg;
    for (int x = 0; x < 16; ++x)
        for (int y = 0; y < 16; ++y) {
            ref.positions.push_back({x / 16.0, y / 16.0, 0.0});
            deg.positions.push_back({x / 16.0 + 0.013, y / 16.0 + 0.007, 0.0});
        }
    const std::vector<Vec3> normals(ref.count(), Vec3{0.0, 0.0, 1.0});
    const auto [d2_mse, d2_psnr] = d2(ref, normals, deg, 1.0);
    const auto [d1_mse, d1_psnr] = d1(ref, deg, 1.0);
    CHECK(d1_mse > 1e-5);       // point-to-point sees the shift
    CHECK(d2_mse < 1e-12);      // point-to-plane projects it away
    CHECK(d2_psnr == 999.0);
}

TEST_CASE("quality_report default peak is the bounding extent") {
    PointCloud ref;
    ref.positions = {{0, 0, 0}, {4, 0, 0}};
    PointCloud deg;
    deg.positions = {{0, 0, 1}, {4, 0, 1}};
    const QualityReport r = quality_report(ref, deg);
    CHECK(r.peak == doctest::Approx(4.0));
    CHECK(r.d1_mse == doctest::Approx(1.0));
    CHECK(r.d1_psnr_db == doctest::Approx(10.0 * std::log10(3.0 * 16.0 / 1.0)));
    const QualityReport r2 = quality_report(ref, deg, 8.0);
    CHECK(r2.peak == 8.0);
}

TEST_CASE("csv_row uses shortest formatting") {
    QualityReport r;
    r.chamfer = 0.5;
    r.d1_mse = 0.25;
    r.d1_psnr_db = 10.0;
    r.d2_mse = 0.125;
    r.d2_psnr_db = 20.0;
    r.peak = 1.0;
    CHECK(r.csv_row() == "0.5,0.25,10,0.125,20,1");
}

TEST_CASE("ber and per basics") {
    CHECK(ber({0, 1, 0, 1}, {0, 1, 0, 1}) == 0.0);
    CHECK(ber({0, 1, 0, 1}, {1, 1, 0, 1}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(ber({0, 1}, {0}), LengthError);
    const std::vector<std::vector<uint8_t>> sent = {{0, 0}, {1, 1}, {0, 1}};
    const std::vector<std::vector<uint8_t>> recv = {{0, 0}, {1, 0}, {0, 1}};
    CHECK(per(sent, recv) == doctest::Approx(1.0 / 3.0));
}
