#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "hvc/core.hpp"
#include "hvc/io.hpp"
#include "hvc/sampling.hpp"

namespace hvc {

// ------------------------------------------------------------------ octree

/// Breadth-first octree occupancy code. Child order is z-major: child index
/// = 4*z_bit + 2*y_bit + x_bit, bit i of an occupancy byte (LSB = bit 0) set
/// iff child i is occupied. One byte per internal node, levels 0..depth-1.
struct OctreeCode {
    uint8_t depth = 0;
    std::vector<uint8_t> occupancy;
    uint32_t voxel_count = 0;
};

OctreeCode octree_encode(const VoxelGrid& grid);
VoxelGrid octree_decode(const OctreeCode& code);

/// Container bytes: magic "HPOC0001", depth u8, voxel count u32 LE, occupancy
/// byte count u32 LE, entropy bit length u64 LE, arithmetic-coded payload.
std::vector<uint8_t> octree_pack(const OctreeCode& code);
OctreeCode octree_unpack(const std::vector<uint8_t>& bytes);

// ---------------------------------------------------------- entropy coding

/// Adaptive order-0 binary arithmetic coder over the bits of each byte
/// (MSB first), counts initialized to (1,1) and updated after each symbol.
Bitstream entropy_encode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> entropy_decode(const Bitstream& stream, size_t count);

// ------------------------------------------------------------------- FEC

/// Rate-1/2 terminated convolutional code, constraint length 7, generators
/// 171/133 (octal). Coded length = 2*(info + 6) bits.
struct CodedBits {
    size_t info_bits = 0;
    std::vector<uint8_t> bits;  // 0/1 entries
    std::string code_id = "conv_r12_k7_171_133";
};

CodedBits fec_encode(const std::vector<uint8_t>& info);
/// Viterbi over hard bits (0/1 entries), maximum likelihood for the
/// terminated trellis.
std::vector<uint8_t> fec_decode_hard(const std::vector<uint8_t>& coded, size_t info_bits);
/// Viterbi over LLRs; positive LLR means bit 0 is more likely. Zero LLR = erasure.
std::vector<uint8_t> fec_decode_soft(const std::vector<double>& llrs, size_t info_bits);

// ------------------------------------------------------------------- JSCC

struct AttentionBlock {
    DenseLayer q, k, v;
};

/// Forward-only JSCC weights: set-abstraction MLP (3 -> ... -> d_fine) applied
/// to relative coordinates, two main attention blocks (d_fine), a projection
/// to d_coarse plus one auxiliary attention block, one decoder attention
/// block, and an offset head (3*r_max x d_fine).
struct JsccWeights {
    std::vector<DenseLayer> sa_mlp;
    AttentionBlock main1, main2;
    DenseLayer aux_proj;
    AttentionBlock aux;
    AttentionBlock dec;
    DenseLayer offset_head;

    size_t d_fine() const { return sa_mlp.empty() ? 0 : sa_mlp.back().rows; }
    size_t d_coarse() const { return aux_proj.rows; }
    size_t r_max() const { return offset_head.rows / 3; }
};

/// Deterministic default initialization: uniform weights in +-1/sqrt(d),
/// zero biases, zero offset head (decoded points start at the centroids).
JsccWeights make_default_jscc_weights(size_t d_fine = 32, size_t d_coarse = 8,
                                      size_t hidden = 32, size_t r_max = 8,
                                      uint64_t seed = 29);
void save_jscc_weights(const std::string& path, const JsccWeights& w);
JsccWeights load_jscc_weights(const std::string& path);

struct FeatureCode {
    PointCloud centroids;  // N' points
    FeatureMatrix fine;    // N' x d_fine
    FeatureMatrix coarse;  // N' x d_coarse
};

/// Set abstraction (FPS to n_prime centroids, k-NN groups, shared MLP on
/// relative coordinates, channel-wise max pool) followed by two main
/// attention blocks and one auxiliary block over centroid patches (patch
/// size = k).
FeatureCode jscc_encode(const PointCloud& cloud, const JsccWeights& w,
                        size_t n_prime, size_t k, uint32_t fps_start = 0);

/// One attention block over centroid patches, then r = ceil(target_n / N')
/// offsets per centroid from the offset head (slots cycled if r > r_max),
/// scaled by the centroid's nearest-centroid distance. Output = centroids
/// followed by offset points grouped by ascending centroid index, truncated
/// to target_n.
PointCloud jscc_decode(const FeatureCode& code, const JsccWeights& w,
                       size_t target_n, size_t k_attn = 6);

}  // namespace hvc
