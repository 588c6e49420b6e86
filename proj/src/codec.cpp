#include "hvc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>

#include "hvc/rng.hpp"

namespace hvc {

// ------------------------------------------------------------------ octree

namespace {

constexpr char kOctreeMagic[8] = {'H', 'P', 'O', 'C', '0', '0', '0', '1'};

uint64_t morton_key(const Voxel& v, uint8_t depth) {
    // concatenated child indices from the root level down; child = 4z+2y+x
    uint64_t key = 0;
    for (int level = depth - 1; level >= 0; --level) {
        const uint64_t cx = (v[0] >> level) & 1u;
        const uint64_t cy = (v[1] >> level) & 1u;
        const uint64_t cz = (v[2] >> level) & 1u;
        key = (key << 3) | (cz << 2) | (cy << 1) | cx;
    }
    return key;
}

Voxel key_to_voxel(uint64_t key, uint8_t depth) {
    Voxel v{0, 0, 0};
    for (int level = 0; level < depth; ++level) {
        const uint64_t child = (key >> (3 * level)) & 7u;
        v[0] |= static_cast<uint32_t>(child & 1u) << level;
        v[1] |= static_cast<uint32_t>((child >> 1) & 1u) << level;
        v[2] |= static_cast<uint32_t>((child >> 2) & 1u) << level;
    }
    return v;
}

}  // namespace

OctreeCode octree_encode(const VoxelGrid& grid) {
    if (grid.depth < 1 || grid.depth > 16)
        throw InvalidParameter("octree_encode: depth must be in 1..16");
    if (grid.voxels.empty()) throw EmptyCloud("octree_encode: no voxels");
    const uint32_t limit = 1u << grid.depth;
    std::vector<uint64_t> keys;
    keys.reserve(grid.voxels.size());
    for (const Voxel& v : grid.voxels) {
        if (v[0] >= limit || v[1] >= limit || v[2] >= limit)
            throw VoxelOutOfRange("octree_encode: voxel outside [0, 2^depth)^3");
        keys.push_back(morton_key(v, static_cast<uint8_t>(grid.depth)));
    }
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
        throw InvalidParameter("octree_encode: duplicate voxels");

    OctreeCode code;
    code.depth = static_cast<uint8_t>(grid.depth);
    code.voxel_count = static_cast<uint32_t>(keys.size());

    // breadth-first: nodes are key ranges sharing a prefix of 3*level bits
    struct Node {
        size_t begin, end;
        int level;
    };
    std::deque<Node> queue;
    queue.push_back({0, keys.size(), 0});
    while (!queue.empty()) {
        const Node node = queue.front();
        queue.pop_front();
        if (node.level == code.depth) continue;  // leaf = voxel
        const int shift = 3 * (code.depth - 1 - node.level);
        uint8_t occ = 0;
        size_t pos = node.begin;
        std::array<std::pair<size_t, size_t>, 8> ranges;
        for (unsigned child = 0; child < 8; ++child) {
            size_t start = pos;
            while (pos < node.end && ((keys[pos] >> shift) & 7u) == child) ++pos;
            ranges[child] = {start, pos};
            if (pos > start) occ |= static_cast<uint8_t>(1u << child);
        }
        code.occupancy.push_back(occ);
        for (unsigned child = 0; child < 8; ++child)
            if (ranges[child].second > ranges[child].first)
                queue.push_back({ranges[child].first, ranges[child].second,
                                 node.level + 1});
    }
    return code;
}

VoxelGrid octree_decode(const OctreeCode& code) {
    if (code.depth < 1 || code.depth > 16)
        throw DecodeError("octree_decode: bad depth");
    struct Node {
        uint64_t prefix;
        int level;
    };
    std::deque<Node> queue;
    queue.push_back({0, 0});
    size_t cursor = 0;
    std::vector<uint64_t> leaf_keys;
    while (!queue.empty()) {
        const Node node = queue.front();
        queue.pop_front();
        if (node.level == code.depth) {
            leaf_keys.push_back(node.prefix);
            continue;
        }
        if (cursor >= code.occupancy.size())
            throw DecodeError("octree_decode: truncated occupancy stream");
        const uint8_t occ = code.occupancy[cursor++];
        if (occ == 0) throw DecodeError("octree_decode: empty internal node");
        for (unsigned child = 0; child < 8; ++child)
            if (occ & (1u << child))
                queue.push_back({(node.prefix << 3) | child, node.level + 1});
    }
    if (cursor != code.occupancy.size())
        throw DecodeError("octree_decode: trailing occupancy bytes");
    if (leaf_keys.size() != code.voxel_count)
        throw DecodeError("octree_decode: voxel count mismatch");
    VoxelGrid grid;
    grid.depth = code.depth;
    grid.voxels.reserve(leaf_keys.size());
    for (uint64_t key : leaf_keys) grid.voxels.push_back(key_to_voxel(key, code.depth));
    std::sort(grid.voxels.begin(), grid.voxels.end());
    return grid;
}

// ---------------------------------------------------------- entropy coding

namespace {

constexpr uint64_t kTop = 0xFFFFFFFFull;
constexpr uint64_t kHalf = 0x80000000ull;
constexpr uint64_t kQuarter = 0x40000000ull;
constexpr uint64_t kThreeQuarter = 0xC0000000ull;
constexpr uint32_t kCountCap = 1u << 16;

struct BinaryModel {
    uint32_t c0 = 1, c1 = 1;
    // split point: number of code values assigned to symbol 0
    uint64_t split(uint64_t range) const {
        uint64_t s = range * c0 / (c0 + c1);
        if (s == 0) s = 1;
        if (s == range) s = range - 1;
        return s;
    }
    void update(int bit) {
        if (bit == 0)
            ++c0;
        else
            ++c1;
        if (c0 + c1 >= kCountCap) {
            c0 = (c0 + 1) / 2;
            c1 = (c1 + 1) / 2;
        }
    }
};

}  // namespace

Bitstream entropy_encode(const std::vector<uint8_t>& bytes) {
    if (bytes.empty()) throw InvalidParameter("entropy_encode: empty input");
    BitWriter out;
    BinaryModel model;
    uint64_t low = 0, high = kTop, pending = 0;
    auto emit = [&](int bit) {
        out.write_bits(static_cast<uint64_t>(bit), 1);
        for (; pending > 0; --pending) out.write_bits(static_cast<uint64_t>(1 - bit), 1);
    };
    for (uint8_t byte : bytes) {
        for (int pos = 7; pos >= 0; --pos) {
            const int bit = (byte >> pos) & 1;
            const uint64_t range = high - low + 1;
            const uint64_t mid = low + model.split(range) - 1;
            if (bit == 0)
                high = mid;
            else
                low = mid + 1;
            model.update(bit);
            for (;;) {
                if (high < kHalf) {
                    emit(0);
                } else if (low >= kHalf) {
                    emit(1);
                    low -= kHalf;
                    high -= kHalf;
                } else if (low >= kQuarter && high < kThreeQuarter) {
                    ++pending;
                    low -= kQuarter;
                    high -= kQuarter;
                } else {
                    break;
                }
                low <<= 1;
                high = (high << 1) | 1;
            }
        }
    }
    ++pending;
    if (low < kQuarter)
        emit(0);
    else
        emit(1);
    return out.finish();
}

std::vector<uint8_t> entropy_decode(const Bitstream& stream, size_t count) {
    if (count == 0) return {};
    if (stream.bit_length == 0) throw DecodeError("entropy_decode: empty stream");
    BitReader in(stream);
    auto next_bit = [&]() -> uint64_t {
        return in.bits_left() > 0 ? in.read_bits(1) : 0;  // zero-fill past the end
    };
    BinaryModel model;
    uint64_t low = 0, high = kTop, value = 0;
    for (int i = 0; i < 32; ++i) value = (value << 1) | next_bit();
    std::vector<uint8_t> out;
    out.reserve(count);
    for (size_t s = 0; s < count; ++s) {
        uint8_t byte = 0;
        for (int pos = 7; pos >= 0; --pos) {
            const uint64_t range = high - low + 1;
            const uint64_t mid = low + model.split(range) - 1;
            int bit;
            if (value <= mid) {
                bit = 0;
                high = mid;
            } else {
                bit = 1;
                low = mid + 1;
            }
            model.update(bit);
            byte |= static_cast<uint8_t>(bit << pos);
            for (;;) {
                if (high < kHalf) {
                    // nothing
                } else if (low >= kHalf) {
                    low -= kHalf;
                    high -= kHalf;
                    value -= kHalf;
                } else if (low >= kQuarter && high < kThreeQuarter) {
                    low -= kQuarter;
                    high -= kQuarter;
                    value -= kQuarter;
                } else {
                    break;
                }
                low <<= 1;
                high = (high << 1) | 1;
                value = (value << 1) | next_bit();
            }
        }
        out.push_back(byte);
    }
    return out;
}

std::vector<uint8_t> octree_pack(const OctreeCode& code) {
    const Bitstream payload = entropy_encode(code.occupancy);
    std::vector<uint8_t> out;
    out.insert(out.end(), kOctreeMagic, kOctreeMagic + 8);
    out.push_back(code.depth);
    auto put_u32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    };
    auto put_u64 = [&](uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    };
    put_u32(code.voxel_count);
    put_u32(static_cast<uint32_t>(code.occupancy.size()));
    put_u64(payload.bit_length);
    out.insert(out.end(), payload.bytes.begin(), payload.bytes.end());
    return out;
}

OctreeCode octree_unpack(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 25) throw DecodeError("octree_unpack: truncated header");
    if (std::memcmp(bytes.data(), kOctreeMagic, 8) != 0)
        throw DecodeError("octree_unpack: bad magic");
    size_t pos = 8;
    OctreeCode code;
    code.depth = bytes[pos++];
    auto get_u32 = [&]() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    };
    auto get_u64 = [&]() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[pos++]) << (8 * i);
        return v;
    };
    code.voxel_count = get_u32();
    const uint32_t occ_bytes = get_u32();
    const uint64_t bit_length = get_u64();
    if (code.depth < 1 || code.depth > 16) throw DecodeError("octree_unpack: bad depth");
    if (occ_bytes == 0 || code.voxel_count == 0)
        throw DecodeError("octree_unpack: empty code");
    // Profile limits and a structural invariant (each of the depth internal
    // levels holds at most voxel_count nodes). Corrupted headers otherwise
    // claim absurd counts and stall the arithmetic decoder below.
    constexpr uint32_t kMaxVoxelCount = 1u << 22;
    if (code.voxel_count > kMaxVoxelCount || occ_bytes > kMaxVoxelCount)
        throw DecodeError("octree_unpack: counts beyond profile limit");
    if (static_cast<uint64_t>(occ_bytes) >
        static_cast<uint64_t>(code.voxel_count) * code.depth)
        throw DecodeError("octree_unpack: occupancy count inconsistent");
    Bitstream payload;
    payload.bit_length = bit_length;
    payload.bytes.assign(bytes.begin() + pos, bytes.end());
    if (payload.bytes.size() * 8 < bit_length)
        throw DecodeError("octree_unpack: truncated payload");
    code.occupancy = entropy_decode(payload, occ_bytes);
    return code;
}

// ------------------------------------------------------------------- FEC

namespace {

constexpr unsigned kG1 = 0171;  // octal
constexpr unsigned kG2 = 0133;
constexpr unsigned kStates = 64;
constexpr unsigned kTail = 6;

int parity7(unsigned v) { return __builtin_popcount(v & 0x7F) & 1; }

struct Trellis {
    // [state][input] -> next state and the two coded bits
    uint8_t next[kStates][2];
    uint8_t out0[kStates][2];
    uint8_t out1[kStates][2];
    Trellis() {
        for (unsigned s = 0; s < kStates; ++s)
            for (unsigned b = 0; b < 2; ++b) {
                const unsigned full = (s << 1) | b;
                next[s][b] = static_cast<uint8_t>(full & 0x3F);
                out0[s][b] = static_cast<uint8_t>(parity7(full & kG1));
                out1[s][b] = static_cast<uint8_t>(parity7(full & kG2));
            }
    }
};

const Trellis& trellis() {
    static const Trellis t;
    return t;
}

std::vector<uint8_t> viterbi(const std::vector<double>& metric0, size_t info_bits) {
    // metric0[t*2 + j]: reward for coded bit j at step t being 0 (negated for 1)
    const Trellis& t = trellis();
    const size_t steps = info_bits + kTail;
    constexpr double kNeg = -std::numeric_limits<double>::infinity();
    std::vector<double> pm(kStates, kNeg), nm(kStates);
    pm[0] = 0.0;
    std::vector<uint8_t> decisions(steps * kStates);
    for (size_t step = 0; step < steps; ++step) {
        const double m0 = metric0[step * 2];
        const double m1 = metric0[step * 2 + 1];
        std::fill(nm.begin(), nm.end(), kNeg);
        uint8_t* dec = decisions.data() + step * kStates;
        const unsigned inputs = step < info_bits ? 2 : 1;  // tail forces zeros
        for (unsigned s = 0; s < kStates; ++s) {
            if (pm[s] == kNeg) continue;
            for (unsigned b = 0; b < inputs; ++b) {
                const double gain = (t.out0[s][b] ? -m0 : m0) +
                                    (t.out1[s][b] ? -m1 : m1);
                const double cand = pm[s] + gain;
                const unsigned ns = t.next[s][b];
                if (cand > nm[ns]) {
                    nm[ns] = cand;
                    dec[ns] = static_cast<uint8_t>((s << 1) | b);  // predecessor + input
                }
            }
        }
        pm.swap(nm);
    }
    std::vector<uint8_t> bits(steps);
    unsigned state = 0;  // terminated trellis ends in state 0
    for (size_t step = steps; step-- > 0;) {
        const uint8_t d = decisions[step * kStates + state];
        bits[step] = d & 1;
        state = d >> 1;
    }
    bits.resize(info_bits);
    return bits;
}

}  // namespace

CodedBits fec_encode(const std::vector<uint8_t>& info) {
    if (info.empty()) throw InvalidParameter("fec_encode: empty input");
    const Trellis& t = trellis();
    CodedBits code;
    code.info_bits = info.size();
    code.bits.reserve(2 * (info.size() + kTail));
    unsigned state = 0;
    auto push = [&](unsigned b) {
        code.bits.push_back(t.out0[state][b]);
        code.bits.push_back(t.out1[state][b]);
        state = t.next[state][b];
    };
    for (uint8_t b : info) push(b & 1);
    for (unsigned i = 0; i < kTail; ++i) push(0);
    return code;
}

std::vector<uint8_t> fec_decode_hard(const std::vector<uint8_t>& coded, size_t info_bits) {
    if (coded.size() != 2 * (info_bits + kTail))
        throw DecodeError("fec_decode_hard: coded length mismatch");
    std::vector<double> metric(coded.size());
    for (size_t i = 0; i < coded.size(); ++i) metric[i] = coded[i] ? -1.0 : 1.0;
    return viterbi(metric, info_bits);
}

std::vector<uint8_t> fec_decode_soft(const std::vector<double>& llrs, size_t info_bits) {
    if (llrs.size() != 2 * (info_bits + kTail))
        throw DecodeError("fec_decode_soft: LLR length mismatch");
    return viterbi(llrs, info_bits);
}

// ------------------------------------------------------------------- JSCC

namespace {

void check_block(const AttentionBlock& blk, size_t d, const char* name) {
    if (blk.q.rows != d || blk.q.cols != d || blk.k.rows != d || blk.k.cols != d ||
        blk.v.rows != d || blk.v.cols != d)
        throw WeightShapeError(std::string("jscc: attention block ") + name +
                               " must be d x d");
}

/// Residual local attention over patches, same arithmetic as the sampler's.
FeatureMatrix attention_pass(const FeatureMatrix& features,
                             const std::vector<Patch>& patches,
                             const AttentionBlock& blk) {
    SamplerWeights tmp;
    tmp.q = blk.q;
    tmp.k = blk.k;
    tmp.v = blk.v;
    return local_attention(features, patches, tmp).first;
}

DenseLayer random_layer(uint32_t rows, uint32_t cols, double scale, Rng& rng) {
    DenseLayer l;
    l.rows = rows;
    l.cols = cols;
    l.w.resize(size_t(rows) * cols);
    l.b.assign(rows, 0.0f);
    for (float& x : l.w) x = static_cast<float>(rng.uniform(-scale, scale));
    return l;
}

AttentionBlock random_block(uint32_t d, double scale, Rng& rng) {
    AttentionBlock b;
    b.q = random_layer(d, d, scale, rng);
    b.k = random_layer(d, d, scale, rng);
    b.v = random_layer(d, d, scale, rng);
    return b;
}

std::vector<double> mlp_forward(const std::vector<DenseLayer>& layers,
                                const double* input) {
    std::vector<double> cur(input, input + layers.front().cols), next;
    for (size_t l = 0; l < layers.size(); ++l) {
        const DenseLayer& layer = layers[l];
        next.assign(layer.rows, 0.0);
        for (uint32_t r = 0; r < layer.rows; ++r) {
            double acc = layer.b[r];
            const float* wrow = layer.w.data() + size_t(r) * layer.cols;
            for (uint32_t c = 0; c < layer.cols; ++c) acc += double(wrow[c]) * cur[c];
            next[r] = (l + 1 < layers.size()) ? std::max(acc, 0.0) : acc;
        }
        cur.swap(next);
    }
    return cur;
}

}  // namespace

JsccWeights make_default_jscc_weights(size_t d_fine, size_t d_coarse, size_t hidden,
                                      size_t r_max, uint64_t seed) {
    if (d_fine < 2 || d_coarse < 2)
        throw FeatureDimTooSmall("make_default_jscc_weights: dims must be >= 2");
    Rng rng(seed);
    const double sf = 1.0 / std::sqrt(static_cast<double>(d_fine));
    const double sc = 1.0 / std::sqrt(static_cast<double>(d_coarse));
    JsccWeights w;
    w.sa_mlp.push_back(random_layer(static_cast<uint32_t>(hidden), 3, sf, rng));
    w.sa_mlp.push_back(
        random_layer(static_cast<uint32_t>(d_fine), static_cast<uint32_t>(hidden), sf, rng));
    w.main1 = random_block(static_cast<uint32_t>(d_fine), sf, rng);
    w.main2 = random_block(static_cast<uint32_t>(d_fine), sf, rng);
    w.aux_proj = random_layer(static_cast<uint32_t>(d_coarse),
                              static_cast<uint32_t>(d_fine), sc, rng);
    w.aux = random_block(static_cast<uint32_t>(d_coarse), sc, rng);
    w.dec = random_block(static_cast<uint32_t>(d_fine), sf, rng);
    // zero offset head: decoded points coincide with the centroids until the
    // head is replaced by imported weights
    DenseLayer head;
    head.rows = static_cast<uint32_t>(3 * r_max);
    head.cols = static_cast<uint32_t>(d_fine);
    head.w.assign(size_t(head.rows) * head.cols, 0.0f);
    head.b.assign(head.rows, 0.0f);
    w.offset_head = head;
    return w;
}

void save_jscc_weights(const std::string& path, const JsccWeights& w) {
    std::vector<DenseLayer> layers = w.sa_mlp;
    for (const AttentionBlock* blk : {&w.main1, &w.main2}) {
        layers.push_back(blk->q);
        layers.push_back(blk->k);
        layers.push_back(blk->v);
    }
    layers.push_back(w.aux_proj);
    layers.push_back(w.aux.q);
    layers.push_back(w.aux.k);
    layers.push_back(w.aux.v);
    layers.push_back(w.dec.q);
    layers.push_back(w.dec.k);
    layers.push_back(w.dec.v);
    layers.push_back(w.offset_head);
    write_weights_file(path, static_cast<uint32_t>(w.sa_mlp.size()), layers);
}

JsccWeights load_jscc_weights(const std::string& path) {
    auto [mlp_count, layers] = read_weights_file(path);
    if (layers.size() != size_t(mlp_count) + 14)
        throw WeightShapeError("jscc weights file: expected MLP + 14 extra layers");
    JsccWeights w;
    w.sa_mlp.assign(layers.begin(), layers.begin() + mlp_count);
    size_t pos = mlp_count;
    auto take_block = [&]() {
        AttentionBlock b;
        b.q = layers[pos++];
        b.k = layers[pos++];
        b.v = layers[pos++];
        return b;
    };
    w.main1 = take_block();
    w.main2 = take_block();
    w.aux_proj = layers[pos++];
    w.aux = take_block();
    w.dec = take_block();
    w.offset_head = layers[pos++];
    const size_t df = w.d_fine(), dc = w.d_coarse();
    if (df < 2 || dc < 2) throw WeightShapeError("jscc weights: dims too small");
    if (w.sa_mlp.front().cols != 3)
        throw WeightShapeError("jscc weights: MLP must take 3 inputs");
    check_block(w.main1, df, "main1");
    check_block(w.main2, df, "main2");
    if (w.aux_proj.cols != df) throw WeightShapeError("jscc weights: aux_proj cols");
    check_block(w.aux, dc, "aux");
    check_block(w.dec, df, "dec");
    if (w.offset_head.cols != df || w.offset_head.rows % 3 != 0 ||
        w.offset_head.rows == 0)
        throw WeightShapeError("jscc weights: offset head shape");
    return w;
}

FeatureCode jscc_encode(const PointCloud& cloud, const JsccWeights& w,
                        size_t n_prime, size_t k, uint32_t fps_start) {
    const size_t n = cloud.count();
    if (n == 0) throw EmptyCloud("jscc_encode: empty cloud");
    if (n_prime < 1 || n_prime > n)
        throw InsufficientPoints("jscc_encode: need N >= N' >= 1");
    if (k < 1 || k > n) throw InvalidParameter("jscc_encode: k out of range");
    if (w.sa_mlp.empty() || w.sa_mlp.front().cols != 3)
        throw WeightShapeError("jscc_encode: MLP must take 3 inputs");
    const size_t df = w.d_fine(), dc = w.d_coarse();
    check_block(w.main1, df, "main1");
    check_block(w.main2, df, "main2");
    if (w.aux_proj.cols != df) throw WeightShapeError("jscc_encode: aux_proj cols");
    check_block(w.aux, dc, "aux");

    const std::vector<uint32_t> fps = sample_fps(cloud, n_prime, fps_start);
    FeatureCode code;
    code.centroids.positions.reserve(n_prime);
    for (uint32_t i : fps) code.centroids.positions.push_back(cloud.positions[i]);

    // set abstraction: k-NN group around each centroid, shared MLP on relative
    // coordinates, channel-wise max pool
    NeighborIndex index(cloud);
    FeatureMatrix pooled(n_prime, df);
    std::vector<double> rel(3);
    for (size_t c = 0; c < n_prime; ++c) {
        const Vec3& center = code.centroids.positions[c];
        const auto group = index.knn(center, k);
        for (size_t g = 0; g < group.size(); ++g) {
            const Vec3 d = cloud.positions[group[g].first] - center;
            rel = {d.x, d.y, d.z};
            const std::vector<double> f = mlp_forward(w.sa_mlp, rel.data());
            for (size_t ch = 0; ch < df; ++ch)
                if (g == 0 || f[ch] > pooled.at(c, ch)) pooled.at(c, ch) = f[ch];
        }
    }

    const size_t patch_k = std::min(k, n_prime);
    const std::vector<Patch> patches = build_patches(code.centroids, patch_k);
    FeatureMatrix main = attention_pass(pooled, patches, w.main1);
    code.fine = attention_pass(main, patches, w.main2);

    FeatureMatrix proj(n_prime, dc);
    for (size_t c = 0; c < n_prime; ++c)
        apply_layer(w.aux_proj, &pooled.v[c * df], &proj.v[c * dc]);
    code.coarse = attention_pass(proj, patches, w.aux);
    return code;
}

PointCloud jscc_decode(const FeatureCode& code, const JsccWeights& w,
                       size_t target_n, size_t k_attn) {
    const size_t np = code.centroids.count();
    if (np == 0) throw EmptyCloud("jscc_decode: no centroids");
    if (target_n < np) throw TargetTooSmall("jscc_decode: targetN < N'");
    const size_t df = w.d_fine();
    if (code.fine.n != np || code.fine.d != df)
        throw WeightShapeError("jscc_decode: fine feature shape mismatch");
    check_block(w.dec, df, "dec");
    if (w.offset_head.cols != df || w.offset_head.rows % 3 != 0 ||
        w.offset_head.rows == 0)
        throw WeightShapeError("jscc_decode: offset head shape");

    const size_t patch_k = std::min(k_attn < 1 ? size_t(1) : k_attn, np);
    const std::vector<Patch> patches = build_patches(code.centroids, patch_k);
    const FeatureMatrix refined = attention_pass(code.fine, patches, w.dec);

    // offset scale: distance to the nearest other centroid
    std::vector<double> scale(np, 0.0);
    if (np >= 2) {
        NeighborIndex index(code.centroids);
        for (size_t c = 0; c < np; ++c) {
            const auto nb = index.knn(code.centroids.positions[c], 2);
            scale[c] = std::sqrt(nb[1].second);
        }
    }

    const size_t r = (target_n + np - 1) / np;
    const size_t r_max = w.r_max();
    PointCloud out;
    out.positions = code.centroids.positions;
    std::vector<double> head(w.offset_head.rows);
    for (size_t c = 0; c < np && out.positions.size() < target_n; ++c) {
        apply_layer(w.offset_head, &refined.v[c * df], head.data());
        for (size_t slot = 0; slot < r && out.positions.size() < target_n; ++slot) {
            const size_t s = slot % r_max;
            const Vec3 off{head[3 * s], head[3 * s + 1], head[3 * s + 2]};
            out.positions.push_back(code.centroids.positions[c] + off * scale[c]);
        }
    }
    return out;
}

}  // namespace hvc
