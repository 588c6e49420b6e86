#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <vector>

#include "doctest.h"
#include "hvc/codec.hpp"
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

VoxelGrid random_grid(uint32_t depth, size_t want, uint64_t seed) {
    Rng rng(seed);
    const uint32_t side = 1u << depth;
    std::set<Voxel> vox;
    while (vox.size() < want)
        vox.insert({uint32_t(rng.below(side)), uint32_t(rng.below(side)),
                    uint32_t(rng.below(side))});
    VoxelGrid g;
    g.depth = depth;
    g.voxels.assign(vox.begin(), vox.end());
    return g;
}

std::vector<uint8_t> random_bits(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<uint8_t> bits(n);
    for (auto& b : bits) b = uint8_t(rng.below(2));
    return bits;
}

}  // namespace

TEST_CASE("octree worked examples") {
    VoxelGrid one;
    one.depth = 3;
    one.voxels = {{0, 0, 0}};
    const OctreeCode c1 = octree_encode(one);
    CHECK(c1.depth == 3);
    CHECK(c1.voxel_count == 1);
    CHECK(c1.occupancy == std::vector<uint8_t>{0x01, 0x01, 0x01});

    VoxelGrid corners;
    corners.depth = 1;
    for (uint32_t z = 0; z < 2; ++z)
        for (uint32_t y = 0; y < 2; ++y)
            for (uint32_t x = 0; x < 2; ++x) corners.voxels.push_back({x, y, z});
    std::sort(corners.voxels.begin(), corners.voxels.end());
    const OctreeCode c2 = octree_encode(corners);
    CHECK(c2.occupancy == std::vector<uint8_t>{0xFF});

    // single voxel at depth d costs exactly d bytes
    for (uint32_t d = 1; d <= 16; ++d) {
        VoxelGrid g;
        g.depth = d;
        g.voxels = {{(1u << d) - 1, 0, 3 % (1u << d)}};
        CHECK(octree_encode(g).occupancy.size() == d);
    }
}

TEST_CASE("octree decode inverts encode") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        const uint32_t depth = 1 + uint32_t(seed % 10);
        const size_t max_vox = size_t(1) << std::min<uint32_t>(3 * depth, 12);
        const size_t want = 1 + seed * 17 % max_vox;
        const VoxelGrid g = random_grid(depth, want, 900 + seed);
        const OctreeCode code = octree_encode(g);
        const VoxelGrid back = octree_decode(code);
        CHECK(back.depth == g.depth);
        CHECK(back.voxels == g.voxels);
    }
}

TEST_CASE("octree error handling") {
    VoxelGrid bad;
    bad.depth = 2;
    bad.voxels = {{4, 0, 0}};
    CHECK_THROWS_AS(octree_encode(bad), VoxelOutOfRange);

    VoxelGrid dup;
    dup.depth = 2;
    dup.voxels = {{1, 1, 1}, {1, 1, 1}};
    CHECK_THROWS_AS(octree_encode(dup), InvalidParameter);

    OctreeCode truncated;
    truncated.depth = 3;
    truncated.voxel_count = 1;
    truncated.occupancy = {0x01, 0x01};
    CHECK_THROWS_AS(octree_decode(truncated), DecodeError);

    OctreeCode zero;
    zero.depth = 2;
    zero.voxel_count = 1;
    zero.occupancy = {0x01, 0x00};
    CHECK_THROWS_AS(octree_decode(zero), DecodeError);

    OctreeCode trailing;
    trailing.depth = 1;
    trailing.voxel_count = 1;
    trailing.occupancy = {0x01, 0x01};
    CHECK_THROWS_AS(octree_decode(trailing), DecodeError);

    OctreeCode miscount;
    miscount.depth = 1;
    miscount.voxel_count = 2;
    miscount.occupancy = {0x01};
    CHECK_THROWS_AS(octree_decode(miscount), DecodeError);
}

TEST_CASE("octree pack round trips through the container") {
    const PointCloud cloud = random_cloud(2048, 15);
    const VoxelGrid g = voxelize(cloud, 10);
    const OctreeCode code = octree_encode(g);
    const std::vector<uint8_t> bytes = octree_pack(code);
    const OctreeCode back = octree_unpack(bytes);
    CHECK(back.depth == code.depth);
    CHECK(back.voxel_count == code.voxel_count);
    CHECK(back.occupancy == code.occupancy);
    CHECK(octree_decode(back).voxels == g.voxels);

    std::vector<uint8_t> corrupt = bytes;
    corrupt[0] = 'X';
    CHECK_THROWS_AS(octree_unpack(corrupt), DecodeError);
    corrupt = bytes;
    corrupt.resize(10);
    CHECK_THROWS_AS(octree_unpack(corrupt), DecodeError);
}

TEST_CASE("entropy coder round trips byte strings") {
    Rng rng(33);
    for (int trial = 0; trial < 60; ++trial) {
        const size_t n = 1 + rng.below(1500);
        std::vector<uint8_t> bytes(n);
        const int mode = trial % 3;
        for (auto& b : bytes)
            b = mode == 0   ? uint8_t(rng.below(256))        // uniform
                : mode == 1 ? uint8_t(rng.below(2))          // binary-ish
                            : uint8_t(1u << rng.below(8));   // one-hot
        const Bitstream s = entropy_encode(bytes);
        CHECK(entropy_decode(s, n) == bytes);
    }
}

TEST_CASE("entropy coder compresses skew and tracks uniform input") {
    const std::vector<uint8_t> zeros(10000, 0x00);
    const Bitstream z = entropy_encode(zeros);
    CHECK(z.bytes.size() <= 100);  // highly skewed input shrinks a lot

    Rng rng(35);
    std::vector<uint8_t> uniform(10000);
    for (auto& b : uniform) b = uint8_t(rng.below(256));
    const Bitstream u = entropy_encode(uniform);
    CHECK(double(u.bytes.size()) <= 10000.0 * 1.02 + 8.0);  // within 2% + header slack
    CHECK(entropy_decode(u, uniform.size()) == uniform);

    CHECK_THROWS_AS(entropy_encode({}), InvalidParameter);
}

TEST_CASE("fec encode matches the code definition") {
    const CodedBits z = fec_encode(std::vector<uint8_t>(40, 0));
    CHECK(z.info_bits == 40);
    CHECK(z.bits.size() == 2 * (40 + 6));
    for (uint8_t b : z.bits) CHECK(b == 0);
    CHECK(z.code_id == "conv_r12_k7_171_133");

    // single 1 exercises both generators: first output pair is (1,1)
    const CodedBits one = fec_encode({1});
    CHECK(one.bits[0] == 1);
    CHECK(one.bits[1] == 1);
    CHECK(one.bits.size() == 14);
}

TEST_CASE("hard viterbi corrects any single bit error") {
    const std::vector<uint8_t> info = random_bits(100, 44);
    const CodedBits coded = fec_encode(info);
    CHECK(fec_decode_hard(coded.bits, 100) == info);
    for (size_t flip = 0; flip < coded.bits.size(); ++flip) {
        std::vector<uint8_t> noisy = coded.bits;
        noisy[flip] ^= 1;
        CHECK(fec_decode_hard(noisy, 100) == info);
    }
}

TEST_CASE("hard viterbi corrects well-separated double errors") {
    const std::vector<uint8_t> info = random_bits(200, 45);
    const CodedBits coded = fec_encode(info);
    Rng rng(46);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<uint8_t> noisy = coded.bits;
        const size_t a = rng.below(coded.bits.size() - 60);
        const size_t b = a + 40 + rng.below(20);  // beyond a few constraint lengths
        noisy[a] ^= 1;
        noisy[b] ^= 1;
        CHECK(fec_decode_hard(noisy, 200) == info);
    }
}

TEST_CASE("soft viterbi agrees with hard on saturated llrs") {
    const std::vector<uint8_t> info = random_bits(150, 47);
    const CodedBits coded = fec_encode(info);
    std::vector<double> llrs;
    for (uint8_t b : coded.bits) llrs.push_back(b ? -4.0 : 4.0);
    CHECK(fec_decode_soft(llrs, 150) == info);
    // erase a handful of positions: zero LLR carries no information
    for (int i = 0; i < 10; ++i) llrs[i * 29] = 0.0;
    CHECK(fec_decode_soft(llrs, 150) == info);

    CHECK_THROWS_AS(fec_decode_hard(coded.bits, 151), DecodeError);
    CHECK_THROWS_AS(fec_decode_soft(llrs, 151), DecodeError);
    CHECK_THROWS_AS(fec_encode({}), InvalidParameter);
}

TEST_CASE("default jscc weights have documented shapes") {
    const JsccWeights w = make_default_jscc_weights();
    CHECK(w.d_fine() == 32);
    CHECK(w.d_coarse() == 8);
    CHECK(w.r_max() == 8);
    CHECK(w.sa_mlp.front().cols == 3);
    CHECK(w.aux_proj.cols == 32);
    CHECK(w.offset_head.rows == 24);
    CHECK(w.offset_head.cols == 32);
    for (float x : w.offset_head.w) CHECK(x == 0.0f);

    const PointCloud c = random_cloud(256, 50);
    const FeatureCode code = jscc_encode(c, w, 64, 8);
    CHECK(code.centroids.count() == 64);
    CHECK(code.fine.n == 64);
    CHECK(code.fine.d == 32);
    CHECK(code.coarse.n == 64);
    CHECK(code.coarse.d == 8);

    // deterministic: same inputs, same features
    const FeatureCode code2 = jscc_encode(c, w, 64, 8);
    CHECK(code.fine.v == code2.fine.v);
    CHECK(code.coarse.v == code2.coarse.v);
}

TEST_CASE("set abstraction max-pools the group embeddings") {
    // isolate the pooling stage: zero attention projections make the
    // attention blocks pass features through unchanged
    JsccWeights w = make_default_jscc_weights(8, 4, 8, 2, 51);
    auto zero_block = [](AttentionBlock& b) {
        std::fill(b.q.w.begin(), b.q.w.end(), 0.0f);
        std::fill(b.k.w.begin(), b.k.w.end(), 0.0f);
        std::fill(b.v.w.begin(), b.v.w.end(), 0.0f);
    };
    zero_block(w.main1);
    zero_block(w.main2);
    zero_block(w.aux);

    const PointCloud c = random_cloud(64, 52);
    const size_t n_prime = 4, k = 16;
    const FeatureCode code = jscc_encode(c, w, n_prime, k);

    // oracle: recompute FPS groups and the shared MLP by hand
    const auto fps = sample_fps(c, n_prime, 0);
    const NeighborIndex index(c);
    for (size_t g = 0; g < n_prime; ++g) {
        const Vec3 centroid = c.positions[fps[g]];
        const auto nn = index.knn(centroid, k);
        std::vector<double> pooled(8, -1e300);
        for (const auto& [idx, d2_] : nn) {
            std::vector<double> cur = {c.positions[idx].x - centroid.x,
                                       c.positions[idx].y - centroid.y,
                                       c.positions[idx].z - centroid.z};
            for (size_t li = 0; li < w.sa_mlp.size(); ++li) {
                const DenseLayer& l = w.sa_mlp[li];
                std::vector<double> next(l.rows, 0.0);
                for (uint32_t r = 0; r < l.rows; ++r) {
                    double acc = r < l.b.size() ? double(l.b[r]) : 0.0;
                    for (uint32_t cc = 0; cc < l.cols; ++cc)
                        acc += double(l.w[r * l.cols + cc]) * cur[cc];
                    next[r] = acc;
                }
                if (li + 1 < w.sa_mlp.size())
                    for (double& x : next) x = std::max(0.0, x);
                cur = std::move(next);
            }
            for (size_t ch = 0; ch < 8; ++ch) pooled[ch] = std::max(pooled[ch], cur[ch]);
        }
        for (size_t ch = 0; ch < 8; ++ch)
            CHECK(code.fine.at(g, ch) == doctest::Approx(pooled[ch]).epsilon(1e-9));
    }
}

TEST_CASE("jscc decode with zero offset head returns centroid copies") {
    const JsccWeights w = make_default_jscc_weights();
    const PointCloud c = random_cloud(512, 53);
    const FeatureCode code = jscc_encode(c, w, 128, 8);
    const PointCloud dec = jscc_decode(code, w, 128);
    REQUIRE(dec.count() == 128);
    for (size_t i = 0; i < 128; ++i)
        CHECK(dist2(dec.positions[i], code.centroids.positions[i]) == 0.0);

    // duplicated centroids cannot beat the centroids themselves on D1
    const PointCloud up = jscc_decode(code, w, 500);
    REQUIRE(up.count() == 500);
    const auto [mse_up, psnr_up] = d1(c, up, 1.0);
    const auto [mse_c, psnr_c] = d1(c, code.centroids, 1.0);
    CHECK(mse_up <= mse_c + 1e-12);

    CHECK_THROWS_AS(jscc_decode(code, w, 100), TargetTooSmall);
    CHECK_THROWS_AS(jscc_encode(c, w, 513, 8), InsufficientPoints);
}

TEST_CASE("nonzero offset head spreads the upsampled points") {
    JsccWeights w = make_default_jscc_weights(8, 4, 8, 4, 54);
    for (size_t i = 0; i < w.offset_head.w.size(); ++i)
        w.offset_head.w[i] = float(0.01 * ((i % 7) - 3));
    const PointCloud c = random_cloud(300, 55);
    const FeatureCode code = jscc_encode(c, w, 64, 8);
    const PointCloud dec = jscc_decode(code, w, 256);
    REQUIRE(dec.count() == 256);
    // offsets move children away from the centroid they came from
    std::set<std::array<double, 3>> uniq;
    for (const Vec3& p : dec.positions) uniq.insert({p.x, p.y, p.z});
    CHECK(uniq.size() > 64);
}

TEST_CASE("jscc weights file round trips") {
    const JsccWeights w = make_default_jscc_weights(16, 4, 24, 6, 57);
    const std::string path = "codec_test_jscc.bin";
    save_jscc_weights(path, w);
    const JsccWeights back = load_jscc_weights(path);
    CHECK(back.sa_mlp.size() == w.sa_mlp.size());
    for (size_t i = 0; i < w.sa_mlp.size(); ++i) CHECK(back.sa_mlp[i].w == w.sa_mlp[i].w);
    CHECK(back.main1.q.w == w.main1.q.w);
    CHECK(back.main2.v.w == w.main2.v.w);
    CHECK(back.aux_proj.w == w.aux_proj.w);
    CHECK(back.aux.k.w == w.aux.k.w);
    CHECK(back.dec.q.w == w.dec.q.w);
    CHECK(back.offset_head.w == w.offset_head.w);
    CHECK(back.d_fine() == 16);
    CHECK(back.d_coarse() == 4);
    CHECK(back.r_max() == 6);
    std::remove(path.c_str());
}
