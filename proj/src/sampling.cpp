#include "hvc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "hvc/rng.hpp"

namespace hvc {

// ------------------------------------------------------------- weights

namespace {

DenseLayer zero_layer(uint32_t rows, uint32_t cols) {
    DenseLayer l;
    l.rows = rows;
    l.cols = cols;
    l.w.assign(size_t(rows) * cols, 0.0f);
    l.b.assign(rows, 0.0f);
    return l;
}

void check_square(const DenseLayer& l, size_t d, const char* name) {
    if (l.rows != d || l.cols != d)
        throw WeightShapeError(std::string("attention projection ") + name +
                               " must be d x d");
}

/// ReLU knot offsets/slope-deltas building a periodic triangle wave of period
/// p on [tmin, tmax]: T(t) = sum_m c_m ReLU(t - o_m), slope alternating +-2.
void tri_wave_knots(double p, double tmin, double tmax, std::vector<double>& offs,
                    std::vector<double>& coeffs) {
    offs.clear();
    coeffs.clear();
    double t = tmin;
    double slope = 2.0;
    offs.push_back(t);
    coeffs.push_back(slope);
    t += p / 2.0;
    while (t < tmax) {
        offs.push_back(t);
        coeffs.push_back(-2.0 * slope);
        slope = -slope;
        t += p / 2.0;
    }
}

/// Quasi-uniform directions on the upper hemisphere (Fibonacci spiral).
std::vector<Vec3> fib_directions(size_t m) {
    std::vector<Vec3> dirs;
    const double ga = 3.14159265358979323846 * (3.0 - std::sqrt(5.0));
    for (size_t i = 0; i < m; ++i) {
        const double z = (i + 0.5) / static_cast<double>(m);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double th = ga * static_cast<double>(i);
        Vec3 u{r * std::cos(th), r * std::sin(th), z};
        dirs.push_back(u / u.norm());
    }
    return dirs;
}

}  // namespace

SamplerWeights make_default_weights(size_t d, size_t hidden, uint64_t seed) {
    if (d < 2) throw FeatureDimTooSmall("make_default_weights: d must be >= 2");
    SamplerWeights w;
    w.init_seed = seed;
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    auto fill = [&](DenseLayer& l) {
        for (float& x : l.w) x = static_cast<float>(rng.uniform(-scale, scale));
    };
    DenseLayer l1 = zero_layer(static_cast<uint32_t>(hidden), 3);
    DenseLayer l2 = zero_layer(static_cast<uint32_t>(d), static_cast<uint32_t>(hidden));
    fill(l1);
    fill(l2);
    w.mlp = {l1, l2};
    w.q = zero_layer(static_cast<uint32_t>(d), static_cast<uint32_t>(d));
    w.k = zero_layer(static_cast<uint32_t>(d), static_cast<uint32_t>(d));
    w.v = zero_layer(static_cast<uint32_t>(d), static_cast<uint32_t>(d));
    fill(w.q);
    fill(w.k);
    fill(w.v);
    return w;
}

SamplerWeights make_structured_weights(double period, size_t waves, double amplitude,
                                       double gamma, uint64_t phase_seed) {
    const size_t d = 8;
    if (waves + 3 > d) throw WeightShapeError("make_structured_weights: too many waves");
    Rng rng(phase_seed);
    const std::vector<Vec3> dirs = fib_directions(waves);

    // hidden layer rows: wave knots per direction, then 3 linear units
    std::vector<Vec3> w1_rows;
    std::vector<double> b1;
    std::vector<std::pair<size_t, double>> assign;  // (output channel, coeff)
    std::vector<double> offs, coeffs;
    for (size_t c = 0; c < waves; ++c) {
        const double phase = rng.uniform() * period;
        tri_wave_knots(period, -2.0, 2.0, offs, coeffs);
        for (size_t m = 0; m < offs.size(); ++m) {
            w1_rows.push_back(dirs[c]);
            b1.push_back(-(offs[m] + phase));
            assign.emplace_back(c, amplitude * coeffs[m]);
        }
    }
    for (int a = 0; a < 3; ++a) {
        Vec3 e{};
        e[a] = 1.0;
        w1_rows.push_back(e);
        b1.push_back(2.0);  // ReLU(x_a + 2) stays in the linear region on [0,1]
        assign.emplace_back(waves + a, gamma);
    }

    const uint32_t h = static_cast<uint32_t>(w1_rows.size());
    DenseLayer l1 = zero_layer(h, 3);
    for (uint32_t j = 0; j < h; ++j) {
        l1.w[j * 3 + 0] = static_cast<float>(w1_rows[j].x);
        l1.w[j * 3 + 1] = static_cast<float>(w1_rows[j].y);
        l1.w[j * 3 + 2] = static_cast<float>(w1_rows[j].z);
        l1.b[j] = static_cast<float>(b1[j]);
    }
    DenseLayer l2 = zero_layer(static_cast<uint32_t>(d), h);
    for (uint32_t j = 0; j < h; ++j) {
        const auto [ch, coeff] = assign[j];
        l2.w[ch * h + j] = static_cast<float>(coeff);
        if (ch >= waves) l2.b[ch] += static_cast<float>(-2.0 * coeff);
    }

    SamplerWeights w;
    w.mlp = {l1, l2};
    w.q = zero_layer(d, d);
    w.k = zero_layer(d, d);
    w.v = zero_layer(d, d);
    for (size_t c = 0; c < d; ++c) w.v.w[c * d + c] = -1.0f;  // refined = f - patch mean
    return w;
}

void save_sampler_weights(const std::string& path, const SamplerWeights& w) {
    std::vector<DenseLayer> layers = w.mlp;
    layers.push_back(w.q);
    layers.push_back(w.k);
    layers.push_back(w.v);
    write_weights_file(path, static_cast<uint32_t>(w.mlp.size()), layers);
}

SamplerWeights load_sampler_weights(const std::string& path) {
    auto [mlp_count, layers] = read_weights_file(path);
    if (layers.size() != size_t(mlp_count) + 3)
        throw WeightShapeError("sampler weights file must have mlp layers + Q,K,V");
    SamplerWeights w;
    w.mlp.assign(layers.begin(), layers.begin() + mlp_count);
    w.q = layers[mlp_count];
    w.k = layers[mlp_count + 1];
    w.v = layers[mlp_count + 2];
    const size_t d = w.dim();
    if (d < 2) throw FeatureDimTooSmall("sampler weights: embedding dim < 2");
    check_square(w.q, d, "Q");
    check_square(w.k, d, "K");
    check_square(w.v, d, "V");
    return w;
}

// ------------------------------------------------------------- pipeline ops

FeatureMatrix embed_points(const PointCloud& cloud, const SamplerWeights& weights) {
    if (cloud.count() == 0) throw EmptyCloud("embed_points: empty cloud");
    if (weights.mlp.empty()) throw WeightShapeError("embed_points: no MLP layers");
    if (weights.mlp.front().cols != 3)
        throw WeightShapeError("embed_points: first layer must take 3 inputs");
    for (size_t l = 1; l < weights.mlp.size(); ++l)
        if (weights.mlp[l].cols != weights.mlp[l - 1].rows)
            throw WeightShapeError("embed_points: layer dimension mismatch");

    const size_t n = cloud.count();
    std::vector<double> cur(3), next;
    FeatureMatrix out(n, weights.mlp.back().rows);
    for (size_t i = 0; i < n; ++i) {
        cur = {cloud.positions[i].x, cloud.positions[i].y, cloud.positions[i].z};
        for (size_t l = 0; l < weights.mlp.size(); ++l) {
            const DenseLayer& layer = weights.mlp[l];
            next.assign(layer.rows, 0.0);
            for (uint32_t r = 0; r < layer.rows; ++r) {
                double acc = layer.b[r];
                const float* wrow = layer.w.data() + size_t(r) * layer.cols;
                for (uint32_t c = 0; c < layer.cols; ++c) acc += double(wrow[c]) * cur[c];
                next[r] = (l + 1 < weights.mlp.size()) ? std::max(acc, 0.0) : acc;
            }
            cur.swap(next);
        }
        for (size_t c = 0; c < out.d; ++c) out.at(i, c) = cur[c];
    }
    return out;
}

std::vector<Patch> build_patches(const PointCloud& cloud, size_t k) {
    const size_t n = cloud.count();
    if (k < 1 || k > n) throw InsufficientPoints("build_patches: k out of range");
    NeighborIndex index(cloud);
    std::vector<Patch> patches(n);
    for (uint32_t i = 0; i < n; ++i) {
        // centroid always first, then its nearest other points
        auto nb = index.knn(cloud.positions[i], k);
        Patch& p = patches[i];
        p.centroid = i;
        p.neighbors.reserve(k);
        p.neighbors.push_back(i);
        for (const auto& [j, d2] : nb) {
            if (j == i) continue;
            if (p.neighbors.size() == k) break;
            p.neighbors.push_back(j);
        }
        // if i was not inside its own k-NN (k duplicates with lower indices),
        // the loop above produced k entries plus the centroid; trim
        if (p.neighbors.size() < k) {
            // can only happen when i itself occupied one slot of nb
            for (const auto& [j, d2] : nb) {
                if (p.neighbors.size() == k) break;
                if (std::find(p.neighbors.begin(), p.neighbors.end(), j) ==
                    p.neighbors.end())
                    p.neighbors.push_back(j);
            }
        }
    }
    return patches;
}

std::pair<FeatureMatrix, std::vector<std::vector<double>>> local_attention(
    const FeatureMatrix& features, const std::vector<Patch>& patches,
    const SamplerWeights& weights) {
    const size_t n = features.n, d = features.d;
    if (patches.size() != n) throw WeightShapeError("local_attention: patch count mismatch");
    check_square(weights.q, d, "Q");
    check_square(weights.k, d, "K");
    check_square(weights.v, d, "V");

    // precompute projections for all points
    FeatureMatrix pq(n, d), pk(n, d), pv(n, d);
    for (size_t i = 0; i < n; ++i) {
        apply_layer(weights.q, &features.v[i * d], &pq.v[i * d]);
        apply_layer(weights.k, &features.v[i * d], &pk.v[i * d]);
        apply_layer(weights.v, &features.v[i * d], &pv.v[i * d]);
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    FeatureMatrix refined(n, d);
    std::vector<std::vector<double>> rows(n);
    std::vector<double> scores;
    for (size_t i = 0; i < n; ++i) {
        const Patch& patch = patches[i];
        const size_t m = patch.neighbors.size();
        scores.assign(m, 0.0);
        double smax = -1e300;
        for (size_t t = 0; t < m; ++t) {
            const uint32_t j = patch.neighbors[t];
            double acc = 0.0;
            for (size_t c = 0; c < d; ++c) acc += pq.at(i, c) * pk.at(j, c);
            scores[t] = acc * inv_sqrt_d;
            smax = std::max(smax, scores[t]);
        }
        double denom = 0.0;
        for (size_t t = 0; t < m; ++t) {
            scores[t] = std::exp(scores[t] - smax);
            denom += scores[t];
        }
        rows[i].resize(m);
        for (size_t t = 0; t < m; ++t) rows[i][t] = scores[t] / denom;
        for (size_t c = 0; c < d; ++c) {
            double acc = features.at(i, c);  // residual
            for (size_t t = 0; t < m; ++t)
                acc += rows[i][t] * pv.at(patch.neighbors[t], c);
            refined.at(i, c) = acc;
        }
    }
    return {std::move(refined), std::move(rows)};
}

std::vector<double> semantic_scores(const FeatureMatrix& refined) {
    if (refined.d < 2) throw FeatureDimTooSmall("semantic_scores: need d >= 2");
    std::vector<double> s(refined.n, 0.0);
    for (size_t i = 0; i < refined.n; ++i) {
        double mean = 0.0;
        for (size_t c = 0; c < refined.d; ++c) mean += refined.at(i, c);
        mean /= static_cast<double>(refined.d);
        double var = 0.0;
        for (size_t c = 0; c < refined.d; ++c) {
            const double dev = refined.at(i, c) - mean;
            var += dev * dev;
        }
        s[i] = std::sqrt(var / static_cast<double>(refined.d));
    }
    const double mx = *std::max_element(s.begin(), s.end());
    if (mx > 0.0)
        for (double& x : s) x /= mx;
    return s;
}

std::vector<uint32_t> top_m_select(const std::vector<double>& scores, size_t m) {
    const size_t n = scores.size();
    if (m < 1 || m > n) throw InsufficientPoints("top_m_select: M out of range");
    std::vector<uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::nth_element(idx.begin(), idx.begin() + (m - 1), idx.end(),
                     [&](uint32_t a, uint32_t b) {
                         return scores[a] > scores[b] ||
                                (scores[a] == scores[b] && a < b);
                     });
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

SampleResult sample_semantic(const PointCloud& cloud, double ratio,
                             const SamplerWeights& weights, size_t k,
                             size_t iterations) {
    const size_t n = cloud.count();
    if (n == 0) throw EmptyCloud("sample_semantic: empty cloud");
    if (!(ratio > 0.0 && ratio <= 1.0))
        throw InvalidParameter("sample_semantic: ratio must be in (0,1]");
    if (iterations < 1) throw InvalidParameter("sample_semantic: iterations must be >= 1");
    const size_t m_final = static_cast<size_t>(std::llround(ratio * double(n)));
    if (m_final < 1) throw InvalidParameter("sample_semantic: round(ratio*N) must be >= 1");

    SemanticMap map;
    map.original_n = n;
    map.ratio = ratio;
    map.m = m_final;

    std::vector<uint32_t> cur(n);
    std::iota(cur.begin(), cur.end(), 0u);
    const double keep = std::pow(ratio, 1.0 / static_cast<double>(iterations));
    std::vector<double> last_scores;

    for (size_t it = 0; it < iterations; ++it) {
        PointCloud sub;
        sub.positions.reserve(cur.size());
        for (uint32_t i : cur) sub.positions.push_back(cloud.positions[i]);

        const FeatureMatrix f = embed_points(sub, weights);
        const std::vector<Patch> patches = build_patches(sub, k);
        auto [refined, rows] = local_attention(f, patches, weights);
        const std::vector<double> scores = semantic_scores(refined);

        size_t target;
        if (it + 1 == iterations) {
            target = m_final;
        } else {
            target = static_cast<size_t>(std::llround(double(cur.size()) * keep));
            target = std::max(target, m_final);
            target = std::max<size_t>(target, 1);
        }
        const std::vector<uint32_t> local = top_m_select(scores, target);

        map.iterations.push_back({scores, local});
        last_scores.clear();
        for (uint32_t li : local) last_scores.push_back(scores[li]);

        std::vector<uint32_t> next;
        next.reserve(local.size());
        for (uint32_t li : local) next.push_back(cur[li]);
        cur.swap(next);
    }

    SampleResult res;
    res.indices = cur;  // ascending: top_m_select sorts, cur stays sorted
    res.cloud.positions.reserve(cur.size());
    for (uint32_t i : cur) res.cloud.positions.push_back(cloud.positions[i]);
    if (cloud.colors) {
        res.cloud.colors.emplace();
        for (uint32_t i : cur) res.cloud.colors->push_back((*cloud.colors)[i]);
    }
    map.selected_original = cur;
    map.selected_scores = last_scores;
    res.map = std::move(map);
    return res;
}

std::vector<uint32_t> sample_fps(const PointCloud& cloud, size_t m, uint32_t start) {
    const size_t n = cloud.count();
    if (m < 1 || m > n) throw InsufficientPoints("sample_fps: M out of range");
    if (start >= n) throw InvalidParameter("sample_fps: start out of range");
    std::vector<uint32_t> sel;
    sel.reserve(m);
    sel.push_back(start);
    std::vector<double> dist(n);
    for (size_t i = 0; i < n; ++i) dist[i] = dist2(cloud.positions[i], cloud.positions[start]);
    while (sel.size() < m) {
        uint32_t best = 0;
        double bestd = -1.0;
        for (uint32_t i = 0; i < n; ++i) {
            if (dist[i] > bestd) {  // strict > keeps the lower index on ties
                bestd = dist[i];
                best = i;
            }
        }
        sel.push_back(best);
        for (size_t i = 0; i < n; ++i)
            dist[i] = std::min(dist[i], dist2(cloud.positions[i], cloud.positions[best]));
    }
    return sel;
}

std::vector<uint32_t> sample_random(const PointCloud& cloud, size_t m, uint64_t seed) {
    const size_t n = cloud.count();
    if (m > n) throw InsufficientPoints("sample_random: M > N");
    Rng rng(seed);
    std::vector<uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (size_t i = 0; i < m; ++i) {
        const size_t j = i + static_cast<size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

namespace {

struct CellKey {
    int64_t x, y, z;
    bool operator==(const CellKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct CellHash {
    size_t operator()(const CellKey& k) const {
        return splitmix64(uint64_t(k.x) * 0x9e3779b97f4a7c15ULL ^
                          splitmix64(uint64_t(k.y)) ^
                          splitmix64(uint64_t(k.z) ^ 0xda942042e4dd58b5ULL));
    }
};

}  // namespace

std::vector<uint32_t> sample_poisson(const PointCloud& cloud, double r, uint64_t seed) {
    const size_t n = cloud.count();
    if (n == 0) throw EmptyCloud("sample_poisson: empty cloud");
    if (!(r > 0.0)) throw InvalidParameter("sample_poisson: radius must be > 0");

    Rng rng(seed);
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    for (size_t i = 0; i + 1 < n; ++i) {
        const size_t j = i + static_cast<size_t>(rng.below(n - i));
        std::swap(order[i], order[j]);
    }

    const double r2 = r * r;
    const double inv = 1.0 / r;
    auto cell_of = [&](const Vec3& p) {
        return CellKey{static_cast<int64_t>(std::floor(p.x * inv)),
                       static_cast<int64_t>(std::floor(p.y * inv)),
                       static_cast<int64_t>(std::floor(p.z * inv))};
    };
    std::unordered_map<CellKey, std::vector<uint32_t>, CellHash> grid;
    std::vector<uint32_t> accepted;
    for (uint32_t i : order) {
        const Vec3& p = cloud.positions[i];
        const CellKey c = cell_of(p);
        bool ok = true;
        for (int64_t dx = -1; dx <= 1 && ok; ++dx)
            for (int64_t dy = -1; dy <= 1 && ok; ++dy)
                for (int64_t dz = -1; dz <= 1 && ok; ++dz) {
                    const auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == grid.end()) continue;
                    for (uint32_t j : it->second)
                        if (dist2(p, cloud.positions[j]) < r2) {
                            ok = false;
                            break;
                        }
                }
        if (ok) {
            grid[c].push_back(i);
            accepted.push_back(i);
        }
    }
    std::sort(accepted.begin(), accepted.end());
    return accepted;
}

PointCloud reconstruct_upsample(const PointCloud& sampled, const std::vector<double>& scores,
                                size_t target_n, uint64_t seed) {
    const size_t m = sampled.count();
    if (m == 0) throw EmptyCloud("reconstruct_upsample: empty cloud");
    if (target_n < m) throw TargetTooSmall("reconstruct_upsample: targetN < M");
    if (scores.size() != m)
        throw InvalidParameter("reconstruct_upsample: score count mismatch");

    const size_t extra = target_n - m;
    PointCloud out = sampled;
    out.colors.reset();
    if (extra == 0) return out;

    // largest-remainder apportionment proportional to scores (uniform if all 0)
    double total = 0.0;
    for (double s : scores) total += s;
    std::vector<double> quota(m);
    for (size_t i = 0; i < m; ++i)
        quota[i] = total > 0.0 ? double(extra) * scores[i] / total
                               : double(extra) / double(m);
    std::vector<size_t> budget(m);
    size_t assigned = 0;
    for (size_t i = 0; i < m; ++i) {
        budget[i] = static_cast<size_t>(std::floor(quota[i]));
        assigned += budget[i];
    }
    std::vector<uint32_t> by_rem(m);
    std::iota(by_rem.begin(), by_rem.end(), 0u);
    std::sort(by_rem.begin(), by_rem.end(), [&](uint32_t a, uint32_t b) {
        const double fa = quota[a] - std::floor(quota[a]);
        const double fb = quota[b] - std::floor(quota[b]);
        return fa > fb || (fa == fb && a < b);
    });
    for (size_t t = 0; assigned < extra; ++t, ++assigned) budget[by_rem[t % m]] += 1;

    // jitter frame per parent: tangent plane of the sampled cloud's normals,
    // radius = half the nearest-sampled-neighbor distance
    std::vector<Vec3> normals;
    if (m >= 3)
        normals = estimate_normals(sampled, std::min<size_t>(16, m)).normals;
    else
        normals.assign(m, Vec3{0.0, 0.0, 1.0});
    std::vector<double> radius(m, 0.0);
    if (m >= 2) {
        NeighborIndex index(sampled);
        for (size_t i = 0; i < m; ++i) {
            const auto nb = index.knn(sampled.positions[i], 2);
            radius[i] = 0.5 * std::sqrt(nb[1].second);
        }
    }

    Rng rng(seed);
    out.positions.reserve(target_n);
    for (size_t i = 0; i < m; ++i) {
        const Vec3& n = normals[i];
        // tangent basis: cross the normal with its smallest-magnitude axis
        int a = 0;
        for (int t = 1; t < 3; ++t)
            if (std::abs(n[t]) < std::abs(n[a])) a = t;
        Vec3 e{};
        e[a] = 1.0;
        Vec3 t1{n.y * e.z - n.z * e.y, n.z * e.x - n.x * e.z, n.x * e.y - n.y * e.x};
        t1 = t1 / t1.norm();
        const Vec3 t2{n.y * t1.z - n.z * t1.y, n.z * t1.x - n.x * t1.z,
                      n.x * t1.y - n.y * t1.x};
        for (size_t c = 0; c < budget[i]; ++c) {
            const double rad = radius[i] * std::sqrt(rng.uniform());
            const double ang = rng.uniform() * 6.283185307179586476925286766559;
            out.positions.push_back(sampled.positions[i] + t1 * (rad * std::cos(ang)) +
                                    t2 * (rad * std::sin(ang)));
        }
    }
    return out;
}

}  // namespace hvc
