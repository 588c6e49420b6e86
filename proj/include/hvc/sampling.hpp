#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "hvc/core.hpp"
#include "hvc/io.hpp"

namespace hvc {

/// Row-major N x d feature matrix (double precision internally; files store
/// float32).
struct FeatureMatrix {
    size_t n = 0, d = 0;
    std::vector<double> v;

    FeatureMatrix() = default;
    FeatureMatrix(size_t n_, size_t d_) : n(n_), d(d_), v(n_ * d_, 0.0) {}
    double& at(size_t i, size_t c) { return v[i * d + c]; }
    double at(size_t i, size_t c) const { return v[i * d + c]; }
};

/// MLP embedding + attention projections for the semantic sampler.
struct SamplerWeights {
    std::vector<DenseLayer> mlp;  // ReLU between affine layers
    DenseLayer q, k, v;           // d x d projections, bias unused (zero)
    uint64_t init_seed = 0;       // seed for default initialization, 0 = n/a

    size_t dim() const { return mlp.empty() ? 0 : mlp.back().rows; }
};

/// Deterministic pseudo-random initialization, uniform in [-1/sqrt(d), 1/sqrt(d)].
/// Architecture: 3 -> hidden -> d.
SamplerWeights make_default_weights(size_t d = 8, size_t hidden = 16,
                                    uint64_t seed = 17);

/// Procedurally constructed weights shipped with the repo: five triangle-wave
/// channels (period 0.2, quasi-uniform directions, fixed phases) plus three
/// linear coordinate channels scaled by gamma, V = -I. The refined feature
/// f(x_i) - patch_mean(f) then measures local centroid shift in dense patches
/// and saturates at the wave amplitude in sparse ones, so iterative top-M
/// equalizes density while favoring edges.
SamplerWeights make_structured_weights(double period = 0.2, size_t waves = 5,
                                       double amplitude = 1.0, double gamma = 1.5,
                                       uint64_t phase_seed = 5);

void save_sampler_weights(const std::string& path, const SamplerWeights& w);
SamplerWeights load_sampler_weights(const std::string& path);

/// Centroid + its k nearest neighbors (self included, ascending distance).
struct Patch {
    uint32_t centroid = 0;
    std::vector<uint32_t> neighbors;
};

FeatureMatrix embed_points(const PointCloud& cloud, const SamplerWeights& weights);

std::vector<Patch> build_patches(const PointCloud& cloud, size_t k);

/// Scaled dot-product attention within each patch with residual connection.
/// Returns refined features and the per-patch attention rows (each sums to 1).
std::pair<FeatureMatrix, std::vector<std::vector<double>>> local_attention(
    const FeatureMatrix& features, const std::vector<Patch>& patches,
    const SamplerWeights& weights);

/// Per-point std across channels, divided by the batch max (all-zero if the
/// max is 0). Requires d >= 2.
std::vector<double> semantic_scores(const FeatureMatrix& refined);

/// Indices of the M largest scores (ties to the lower index), sorted ascending.
std::vector<uint32_t> top_m_select(const std::vector<double>& scores, size_t m);

/// Per-iteration score vectors and selections of the iterative sampler.
struct SemanticMap {
    size_t original_n = 0;
    double ratio = 1.0;
    size_t m = 0;
    struct Iteration {
        std::vector<double> scores;           // per point entering the iteration
        std::vector<uint32_t> selected_local; // into that iteration's ordering
    };
    std::vector<Iteration> iterations;
    std::vector<uint32_t> selected_original;  // final selection, ascending
    std::vector<double> selected_scores;      // last-iteration scores of those
};

struct SampleResult {
    PointCloud cloud;
    std::vector<uint32_t> indices;
    SemanticMap map;
};

/// Iterative embed -> local attention -> scores -> top-M with per-iteration
/// keep ratio = ratio^(1/iterations).
SampleResult sample_semantic(const PointCloud& cloud, double ratio,
                             const SamplerWeights& weights, size_t k = 6,
                             size_t iterations = 6);

/// Greedy farthest point sampling (ties to the lower index). Output in
/// selection order, starting at `start`.
std::vector<uint32_t> sample_fps(const PointCloud& cloud, size_t m, uint32_t start = 0);

/// Uniform without replacement, seed-deterministic, output sorted ascending.
std::vector<uint32_t> sample_random(const PointCloud& cloud, size_t m, uint64_t seed);

/// Dart throwing in seeded order with grid acceleration; maximal set with
/// pairwise distance >= r. Output sorted ascending.
std::vector<uint32_t> sample_poisson(const PointCloud& cloud, double r, uint64_t seed);

/// Score-proportional upsampling: all sampled points plus (targetN - M)
/// generated children apportioned by largest remainder over `scores` (ties to
/// the lower index); each child = parent + tangent-plane jitter with radius =
/// half the parent's nearest-sampled-neighbor distance.
PointCloud reconstruct_upsample(const PointCloud& sampled, const std::vector<double>& scores,
                                size_t target_n, uint64_t seed = 0);

}  // namespace hvc
