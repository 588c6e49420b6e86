#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "hvc/metrics.hpp"
#include "hvc/rng.hpp"
#include "hvc/sampling.hpp"

using namespace hvc;

namespace {

PointCloud random_cloud(size_t n, uint64_t seed) {
    Rng rng(seed);
    PointCloud c;
    for (size_t i = 0; i < n; ++i)
        c.positions.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    return c;
}

// points on the surface of the axis-aligned unit cube, uniform per face
PointCloud cube_surface(size_t n, uint64_t seed) {
    Rng rng(seed);
    PointCloud c;
    for (size_t i = 0; i < n; ++i) {
        const int face = int(rng.below(6));
        const double u = rng.uniform(), v = rng.uniform();
        Vec3 p;
        switch (face) {
            case 0: p = {0.0, u, v}; break;
            case 1: p = {1.0, u, v}; break;
            case 2: p = {u, 0.0, v}; break;
            case 3: p = {u, 1.0, v}; break;
            case 4: p = {u, v, 0.0}; break;
            default: p = {u, v, 1.0}; break;
        }
        c.positions.push_back(p);
    }
    return c;
}

double edge_fraction(const PointCloud& c, const std::vector<uint32_t>& idx) {
    size_t near_edge = 0;
    for (const uint32_t i : idx) {
        const Vec3& p = c.positions[i];
        int extreme = 0;
        for (int a = 0; a < 3; ++a)
            if (p[a] < 0.05 || p[a] > 0.95) ++extreme;
        if (extreme >= 2) ++near_edge;
    }
    return double(near_edge) / double(idx.size());
}

// independent forward pass for a 3 -> ... -> d ReLU MLP
std::vector<double> oracle_embed(const SamplerWeights& w, const Vec3& p) {
    std::vector<double> cur = {p.x, p.y, p.z};
    for (size_t li = 0; li < w.mlp.size(); ++li) {
        const DenseLayer& l = w.mlp[li];
        std::vector<double> next(l.rows, 0.0);
        for (uint32_t r = 0; r < l.rows; ++r) {
            double acc = r < l.b.size() ? double(l.b[r]) : 0.0;
            for (uint32_t cc = 0; cc < l.cols; ++cc)
                acc += double(l.w[r * l.cols + cc]) * cur[cc];
            next[r] = acc;
        }
        if (li + 1 < w.mlp.size())
            for (double& x : next) x = std::max(0.0, x);
        cur = std::move(next);
    }
    return cur;
}

std::multiset<std::array<double, 3>> position_set(const PointCloud& c,
                                                  const std::vector<uint32_t>& idx) {
    std::multiset<std::array<double, 3>> out;
    for (const uint32_t i : idx)
        out.insert({c.positions[i].x, c.positions[i].y, c.positions[i].z});
    return out;
}

}  // namespace

TEST_CASE("embedding matches an independent forward pass") {
    const SamplerWeights w = make_default_weights();
    const PointCloud c = random_cloud(16, 3);
    const FeatureMatrix f = embed_points(c, w);
    REQUIRE(f.n == 16);
    REQUIRE(f.d == w.dim());
    for (size_t i = 0; i < c.count(); ++i) {
        const auto want = oracle_embed(w, c.positions[i]);
        for (size_t ch = 0; ch < f.d; ++ch)
            CHECK(f.at(i, ch) == doctest::Approx(want[ch]).epsilon(1e-6));
    }
}

TEST_CASE("structured weights reproduce triangle waves and linear channels") {
    const SamplerWeights w = make_structured_weights();
    CHECK(w.dim() == 8);
    const PointCloud c = random_cloud(64, 4);
    const FeatureMatrix f = embed_points(c, w);
    for (size_t i = 0; i < c.count(); ++i) {
        const auto want = oracle_embed(w, c.positions[i]);
        for (size_t ch = 0; ch < 8; ++ch)
            CHECK(f.at(i, ch) == doctest::Approx(want[ch]).epsilon(1e-9));
        // last three channels are gamma-scaled coordinates
        for (int a = 0; a < 3; ++a)
            CHECK(f.at(i, 5 + a) == doctest::Approx(1.5 * c.positions[i][a]).epsilon(1e-9));
        // wave channels stay inside the amplitude
        for (size_t ch = 0; ch < 5; ++ch) CHECK(std::abs(f.at(i, ch)) <= 1.0 + 1e-9);
    }
}

TEST_CASE("zero weights embed to zero") {
    SamplerWeights w;
    DenseLayer l;
    l.rows = 4;
    l.cols = 3;
    l.w.assign(12, 0.0f);
    l.b.assign(4, 0.0f);
    w.mlp = {l};
    w.q = w.k = w.v = DenseLayer{4, 4, std::vector<float>(16, 0.0f), {}};
    const FeatureMatrix f = embed_points(random_cloud(10, 5), w);
    for (double x : f.v) CHECK(x == 0.0);
}

TEST_CASE("patches put the centroid first") {
    PointCloud line;
    line.positions = {{0, 0, 0}, {0.1, 0, 0}, {0.2, 0, 0}, {0.3, 0, 0}};
    const auto patches = build_patches(line, 2);
    REQUIRE(patches.size() == 4);
    CHECK(patches[0].centroid == 0);
    CHECK(patches[0].neighbors == std::vector<uint32_t>{0, 1});
    CHECK(patches[3].neighbors == std::vector<uint32_t>{3, 2});
    const auto solo = build_patches(line, 1);
    for (uint32_t i = 0; i < 4; ++i)
        CHECK(solo[i].neighbors == std::vector<uint32_t>{i});
}

TEST_CASE("attention rows are softmax rows") {
    const PointCloud c = random_cloud(64, 6);
    const SamplerWeights w = make_default_weights();
    const FeatureMatrix f = embed_points(c, w);
    const auto patches = build_patches(c, 6);
    const auto [refined, rows] = local_attention(f, patches, w);
    REQUIRE(rows.size() == patches.size());
    REQUIRE(refined.n == f.n);
    for (const auto& row : rows) {
        REQUIRE(row.size() == 6);
        double total = 0.0;
        for (double a : row) {
            CHECK(a >= 0.0);
            total += a;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("single-member patches reduce to residual plus value") {
    PointCloud c;
    c.positions = {{0.3, 0.7, 0.1}};
    SamplerWeights w = make_default_weights(4, 8, 23);
    const FeatureMatrix f = embed_points(c, w);
    const auto patches = build_patches(c, 1);
    const auto [refined, rows] = local_attention(f, patches, w);
    // one member: softmax row is {1}, so refined = f + V f
    for (size_t ch = 0; ch < f.d; ++ch) {
        double vf = 0.0;
        for (size_t j = 0; j < f.d; ++j) vf += double(w.v.w[ch * f.d + j]) * f.at(0, j);
        CHECK(refined.at(0, ch) == doctest::Approx(f.at(0, ch) + vf).epsilon(1e-9));
    }
    CHECK(rows[0] == std::vector<double>{1.0});
}

TEST_CASE("identical features attend uniformly") {
    PointCloud c;
    for (int i = 0; i < 5; ++i) c.positions.push_back({0.1 * i, 0.0, 0.0});
    SamplerWeights w = make_default_weights(4, 8, 31);
    FeatureMatrix f(5, 4);
    for (size_t i = 0; i < 5; ++i)
        for (size_t ch = 0; ch < 4; ++ch) f.at(i, ch) = 0.5 + 0.1 * double(ch);
    const auto patches = build_patches(c, 5);
    const auto [refined, rows] = local_attention(f, patches, w);
    for (const auto& row : rows)
        for (double a : row) CHECK(a == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("semantic scores match the definition") {
    FeatureMatrix f(3, 4);
    // row 0: constant -> zero std; row 1 and 2: known stds
    for (size_t ch = 0; ch < 4; ++ch) f.at(0, ch) = 2.5;
    const double r1[4] = {1, 1, -1, -1}, r2[4] = {2, 0, 0, 0};
    for (size_t ch = 0; ch < 4; ++ch) {
        f.at(1, ch) = r1[ch];
        f.at(2, ch) = r2[ch];
    }
    const auto scores = semantic_scores(f);
    REQUIRE(scores.size() == 3);
    // population stds: 0, 1, sqrt(3)/2; batch max = 1
    CHECK(scores[0] == doctest::Approx(0.0));
    CHECK(scores[1] == doctest::Approx(1.0));
    CHECK(scores[2] == doctest::Approx(std::sqrt(3.0) / 2.0));

    FeatureMatrix flat(2, 2);
    flat.at(0, 0) = flat.at(0, 1) = 3.0;
    flat.at(1, 0) = flat.at(1, 1) = -1.0;
    for (double s : semantic_scores(flat)) CHECK(s == 0.0);
}

TEST_CASE("top_m_select follows the worked example") {
    const std::vector<double> scores = {0.2, 0.9, 0.9, 0.1};
    CHECK(top_m_select(scores, 2) == std::vector<uint32_t>{1, 2});
    CHECK(top_m_select(scores, 4) == std::vector<uint32_t>{0, 1, 2, 3});
    CHECK_THROWS_AS(top_m_select(scores, 5), InsufficientPoints);

    Rng rng(41);
    std::vector<double> big;
    for (int i = 0; i < 500; ++i) big.push_back(rng.uniform());
    const auto got = top_m_select(big, 100);
    // oracle: sort (score desc, index asc), take 100, sort indices
    std::vector<uint32_t> order(big.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        if (big[a] != big[b]) return big[a] > big[b];
        return a < b;
    });
    std::vector<uint32_t> want(order.begin(), order.begin() + 100);
    std::sort(want.begin(), want.end());
    CHECK(got == want);
}

TEST_CASE("ratio one sampling is the identity") {
    const PointCloud c = random_cloud(100, 8);
    const SamplerWeights w = make_structured_weights();
    const SampleResult res = sample_semantic(c, 1.0, w);
    REQUIRE(res.indices.size() == 100);
    for (uint32_t i = 0; i < 100; ++i) CHECK(res.indices[i] == i);
    CHECK(res.map.m == 100);
    CHECK(res.map.selected_scores.size() == 100);
}

TEST_CASE("sample counts follow round(ratio * N)") {
    const PointCloud c = random_cloud(2048, 9);
    const SamplerWeights w = make_structured_weights();
    const SampleResult res = sample_semantic(c, 0.25, w, 6, 2);
    CHECK(res.indices.size() == 512);
    CHECK(res.cloud.count() == 512);
    CHECK(res.map.iterations.size() == 2);
    CHECK(std::is_sorted(res.indices.begin(), res.indices.end()));
    // recorded scores belong to the selected points
    REQUIRE(res.map.selected_original == res.indices);
    CHECK_THROWS_AS(sample_semantic(c, 0.0, w), InvalidParameter);
    CHECK_THROWS_AS(sample_semantic(c, 1.5, w), InvalidParameter);
}

TEST_CASE("semantic selection is permutation invariant") {
    const SamplerWeights w = make_structured_weights();
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const PointCloud c = random_cloud(300, 100 + seed);
        PointCloud shuffled;
        std::vector<uint32_t> perm(c.count());
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(200 + seed);
        for (size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[rng.below(i)]);
        for (const uint32_t p : perm) shuffled.positions.push_back(c.positions[p]);

        const SampleResult a = sample_semantic(c, 0.25, w);
        const SampleResult b = sample_semantic(shuffled, 0.25, w);
        CHECK(position_set(c, a.indices) == position_set(shuffled, b.indices));
    }
}

TEST_CASE("semantic sampling prefers cube edges over random sampling") {
    double sem_total = 0.0, rnd_total = 0.0;
    int runs = 0;
    const SamplerWeights w = make_structured_weights();
    for (uint64_t cloud_seed = 1; cloud_seed <= 3; ++cloud_seed) {
        const PointCloud c = cube_surface(2048, cloud_seed);
        const SampleResult sem = sample_semantic(c, 0.125, w);
        for (uint64_t s = 1; s <= 10; ++s) {
            sem_total += edge_fraction(c, sem.indices);
            rnd_total += edge_fraction(c, sample_random(c, sem.indices.size(), s));
            ++runs;
        }
    }
    CHECK(sem_total / runs > rnd_total / runs);
}

TEST_CASE("fps follows the greedy rule") {
    PointCloud sq;
    sq.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    const auto two = sample_fps(sq, 2, 0);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == 0);
    CHECK(two[1] == 3);  // opposite corner
    CHECK(sample_fps(sq, 1, 2) == std::vector<uint32_t>{2});

    // oracle: quadratic greedy selection with lower-index ties
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const PointCloud c = random_cloud(40 + seed * 2, 300 + seed);
        const size_t m = 1 + seed * 3 % c.count();
        const uint32_t start = uint32_t(seed % c.count());
        const auto got = sample_fps(c, m, start);
        std::vector<uint32_t> want = {start};
        std::vector<double> best(c.count(), 1e300);
        while (want.size() < m) {
            for (size_t i = 0; i < c.count(); ++i)
                best[i] = std::min(best[i], dist2(c.positions[i], c.positions[want.back()]));
            uint32_t next = 0;
            double far = -1.0;
            for (size_t i = 0; i < c.count(); ++i)
                if (best[i] > far) {
                    far = best[i];
                    next = uint32_t(i);
                }
            want.push_back(next);
        }
        CHECK(got == want);
    }
}

TEST_CASE("random sampling is deterministic and uniform-ish") {
    const PointCloud c = random_cloud(500, 12);
    const auto a = sample_random(c, 100, 77);
    const auto b = sample_random(c, 100, 77);
    CHECK(a == b);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(std::set<uint32_t>(a.begin(), a.end()).size() == 100);
    const auto other = sample_random(c, 100, 78);
    CHECK(a != other);
    const auto all = sample_random(c, 500, 3);
    for (uint32_t i = 0; i < 500; ++i) CHECK(all[i] == i);
    CHECK_THROWS_AS(sample_random(c, 501, 3), InsufficientPoints);
}

TEST_CASE("poisson keeps one of two close points") {
    PointCloud c;
    c.positions = {{0, 0, 0}, {0.5, 0, 0}};
    const auto kept = sample_poisson(c, 1.0, 5);
    CHECK(kept.size() == 1);
    const auto both = sample_poisson(c, 0.5, 5);
    CHECK(both.size() == 2);  // distance exactly r is allowed
}

TEST_CASE("poisson output is maximal with pairwise distance >= r") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const PointCloud c = random_cloud(400, 500 + seed);
        const double r = 0.12;
        const auto kept = sample_poisson(c, r, seed);
        CHECK(std::is_sorted(kept.begin(), kept.end()));
        for (size_t i = 0; i < kept.size(); ++i)
            for (size_t j = i + 1; j < kept.size(); ++j)
                CHECK(dist2(c.positions[kept[i]], c.positions[kept[j]]) >= r * r - 1e-12);
        // maximality: every rejected point is within r of an accepted one
        std::set<uint32_t> in(kept.begin(), kept.end());
        for (uint32_t i = 0; i < c.count(); ++i) {
            if (in.count(i)) continue;
            bool blocked = false;
            for (const uint32_t j : kept)
                if (dist2(c.positions[i], c.positions[j]) < r * r) blocked = true;
            CHECK(blocked);
        }
    }
}

TEST_CASE("upsampling hits the target count and keeps parents") {
    const PointCloud c = random_cloud(600, 21);
    const SamplerWeights w = make_structured_weights();
    const SampleResult res = sample_semantic(c, 0.25, w);
    const PointCloud up = reconstruct_upsample(res.cloud, res.map.selected_scores, 600, 3);
    CHECK(up.count() == 600);
    // parents come first, unchanged
    for (size_t i = 0; i < res.cloud.count(); ++i)
        CHECK(dist2(up.positions[i], res.cloud.positions[i]) == 0.0);
    // adding children can only shrink the reference-to-output distance
    const NeighborIndex to_sampled(res.cloud);
    const NeighborIndex to_up(up);
    double via_sampled = 0.0, via_up = 0.0;
    for (const Vec3& p : c.positions) {
        via_sampled += to_sampled.nearest_dist2(p);
        via_up += to_up.nearest_dist2(p);
    }
    CHECK(via_up <= via_sampled + 1e-12);

    const PointCloud same = reconstruct_upsample(res.cloud, res.map.selected_scores,
                                                 res.cloud.count(), 3);
    for (size_t i = 0; i < same.count(); ++i)
        CHECK(dist2(same.positions[i], res.cloud.positions[i]) == 0.0);

    const PointCloud again = reconstruct_upsample(res.cloud, res.map.selected_scores, 600, 3);
    for (size_t i = 0; i < 600; ++i)
        CHECK(dist2(up.positions[i], again.positions[i]) == 0.0);
    CHECK_THROWS_AS(reconstruct_upsample(res.cloud, res.map.selected_scores, 10, 3),
                    TargetTooSmall);
}

TEST_CASE("largest remainder apportionment matches the oracle") {
    PointCloud parents;
    parents.positions = {{0, 0, 0}, {0.4, 0, 0}, {0.8, 0, 0}};
    const std::vector<double> scores = {0.6, 0.3, 0.1};
    // 7 children: quotas 4.2, 2.1, 0.7 -> floors 4,2,0; remainders .2,.1,.7
    // -> the extra child goes to parent 2: counts 4, 2, 1
    const PointCloud up = reconstruct_upsample(parents, scores, 10, 9);
    REQUIRE(up.count() == 10);
    std::vector<int> counts(3, 0);
    for (size_t i = 3; i < up.count(); ++i) {
        double best = 1e300;
        int parent = -1;
        for (int p = 0; p < 3; ++p) {
            const double d = dist2(up.positions[i], parents.positions[p]);
            if (d < best) {
                best = d;
                parent = p;
            }
        }
        // children jitter within half the parent spacing, so nearest = parent
        counts[parent]++;
    }
    CHECK(counts == std::vector<int>{4, 2, 1});
}

TEST_CASE("sampler weights files round trip") {
    for (const SamplerWeights& w :
         {make_default_weights(), make_structured_weights()}) {
        const std::string path = "sampling_test_weights.bin";
        save_sampler_weights(path, w);
        const SamplerWeights back = load_sampler_weights(path);
        REQUIRE(back.mlp.size() == w.mlp.size());
        for (size_t i = 0; i < w.mlp.size(); ++i) {
            CHECK(back.mlp[i].w == w.mlp[i].w);
            CHECK(back.mlp[i].b == w.mlp[i].b);
        }
        CHECK(back.q.w == w.q.w);
        CHECK(back.k.w == w.k.w);
        CHECK(back.v.w == w.v.w);
        std::remove(path.c_str());
    }
}
