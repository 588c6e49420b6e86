#include "hvc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "hvc/io.hpp"
#include "hvc/metrics.hpp"
#include "hvc/rng.hpp"
#include "json.hpp"

namespace hvc {

namespace {

using nlohmann::json;

const std::set<std::string> kSamplingMethods = {"random", "fps", "poisson", "semantic"};
const std::set<std::string> kSchemes = {"separated", "joint"};

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

void check_sorted(const std::vector<double>& grid, const char* name) {
    for (size_t i = 1; i < grid.size(); ++i)
        require(grid[i] >= grid[i - 1], std::string(name) + " grid must be sorted");
}

void parallel_for(size_t n, size_t threads, const std::function<void(size_t)>& fn) {
    if (threads == 0) threads = std::thread::hardware_concurrency();
    threads = std::max<size_t>(1, std::min(threads, n));
    if (threads <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

void sort_rows(std::vector<SweepRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.method != b.method) return a.method < b.method;
        if (a.param != b.param) return a.param < b.param;
        return a.seed < b.seed;
    });
}

}  // namespace

// ----------------------------------------------------------------- config

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("load_config: invalid JSON: ") + e.what());
    }
    require(j.is_object(), "load_config: top level must be an object");

    static const std::set<std::string> known = {
        "kind",          "dataset",       "methods",       "ratios",
        "snrs_db",       "seeds",         "octree_depth",  "mcs_table",
        "sampler_weights", "jscc_weights", "output_dir",   "corpus_clouds",
        "corpus_points", "corpus_seed",   "upsample"};
    for (const auto& [key, value] : j.items())
        require(known.count(key) > 0, "load_config: unknown key '" + key + "'");

    ExperimentConfig cfg;
    try {
        cfg.kind = j.at("kind").get<std::string>();
        if (j.contains("dataset")) cfg.dataset = j["dataset"].get<std::vector<std::string>>();
        if (j.contains("methods")) cfg.methods = j["methods"].get<std::vector<std::string>>();
        if (j.contains("ratios")) cfg.ratios = j["ratios"].get<std::vector<double>>();
        if (j.contains("snrs_db")) cfg.snrs_db = j["snrs_db"].get<std::vector<double>>();
        if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
        if (j.contains("octree_depth")) cfg.octree_depth = j["octree_depth"].get<uint32_t>();
        if (j.contains("mcs_table")) cfg.mcs_table = j["mcs_table"].get<std::string>();
        if (j.contains("sampler_weights"))
            cfg.sampler_weights = j["sampler_weights"].get<std::string>();
        if (j.contains("jscc_weights"))
            cfg.jscc_weights = j["jscc_weights"].get<std::string>();
        if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("corpus_clouds"))
            cfg.corpus_clouds = j["corpus_clouds"].get<size_t>();
        if (j.contains("corpus_points"))
            cfg.corpus_points = j["corpus_points"].get<size_t>();
        if (j.contains("corpus_seed")) cfg.corpus_seed = j["corpus_seed"].get<uint64_t>();
        if (j.contains("upsample")) cfg.upsample = j["upsample"].get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("load_config: bad field type: ") + e.what());
    }
    validate_config(cfg);
    return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
    require(cfg.kind == "sampling_sweep" || cfg.kind == "snr_sweep" ||
                cfg.kind == "requirements_check",
            "config: kind must be sampling_sweep, snr_sweep or requirements_check");
    if (cfg.kind == "requirements_check") return;

    require(!cfg.seeds.empty(), "config: seeds must be nonempty");
    require(!cfg.methods.empty(), "config: methods must be nonempty");
    if (cfg.kind == "sampling_sweep") {
        require(!cfg.ratios.empty(), "config: ratios must be nonempty");
        check_sorted(cfg.ratios, "ratios");
        for (double r : cfg.ratios)
            require(r > 0.0 && r <= 1.0, "config: ratios must be in (0, 1]");
        for (const auto& m : cfg.methods)
            require(kSamplingMethods.count(m) > 0, "config: unknown method '" + m + "'");
    } else {
        require(!cfg.snrs_db.empty(), "config: snrs_db must be nonempty");
        check_sorted(cfg.snrs_db, "snrs_db");
        for (const auto& m : cfg.methods)
            require(kSchemes.count(m) > 0, "config: unknown scheme '" + m + "'");
        bool has0 = false, has15 = false;
        for (double s : cfg.snrs_db) {
            if (s == 0.0) has0 = true;
            if (s == 15.0) has15 = true;
        }
        require(has0 && has15, "config: snrs_db must include 0 and 15");
        require(cfg.octree_depth >= 1 && cfg.octree_depth <= 16,
                "config: octree_depth must be in 1..16");
    }
    if (cfg.dataset.empty()) {
        require(cfg.corpus_clouds >= 1 && cfg.corpus_points >= 8,
                "config: corpus must have >= 1 cloud of >= 8 points");
    }
    for (const auto& p : cfg.dataset)
        require(std::filesystem::exists(p), "config: dataset file missing: " + p);
    for (const std::string& p :
         {cfg.mcs_table, cfg.sampler_weights, cfg.jscc_weights})
        if (!p.empty())
            require(std::filesystem::exists(p), "config: referenced file missing: " + p);
}

// ----------------------------------------------------------------- corpus

namespace {

PointCloud corpus_cube(size_t n, Rng& rng) {
    PointCloud c;
    c.positions.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const auto face = static_cast<uint32_t>(rng.below(6));
        const double u = rng.uniform(), v = rng.uniform();
        Vec3 p{};
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

PointCloud corpus_sphere(size_t n, Rng& rng) {
    PointCloud c;
    c.positions.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Vec3 d{rng.normal(), rng.normal(), rng.normal()};
        const double len = d.norm();
        if (len < 1e-12) {
            d = {0.0, 0.0, 1.0};
        } else {
            d = d / len;
        }
        c.positions.push_back(Vec3{0.5, 0.5, 0.5} + d * 0.45);
    }
    return c;
}

/// Stepped plane: (x, z) runs along the polyline (0,0.3) -> (0.45,0.3) ->
/// (0.45,0.7) -> (1,0.7), uniform by arc length; y uniform. Two 90-degree
/// edges.
PointCloud corpus_steps(size_t n, Rng& rng) {
    PointCloud c;
    c.positions.reserve(n);
    const double l1 = 0.45, l2 = 0.4, l3 = 0.55;
    const double total = l1 + l2 + l3;
    for (size_t i = 0; i < n; ++i) {
        double t = rng.uniform() * total;
        double x, z;
        if (t < l1) {
            x = t;
            z = 0.3;
        } else if (t < l1 + l2) {
            x = 0.45;
            z = 0.3 + (t - l1);
        } else {
            x = 0.45 + (t - l1 - l2);
            z = 0.7;
        }
        c.positions.push_back({x, rng.uniform(), z});
    }
    return c;
}

}  // namespace

std::vector<PointCloud> make_corpus(size_t count, size_t n, uint64_t seed) {
    std::vector<PointCloud> clouds;
    clouds.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, i));
        switch (i % 3) {
            case 0: clouds.push_back(corpus_cube(n, rng)); break;
            case 1: clouds.push_back(corpus_sphere(n, rng)); break;
            default: clouds.push_back(corpus_steps(n, rng)); break;
        }
    }
    return clouds;
}

// ------------------------------------------------------------- joint chain

size_t joint_symbol_count(const JointParams& p, size_t d_fine) {
    const size_t values = 3 * p.n_prime + p.n_prime * d_fine;
    return (values + 1) / 2;
}

namespace {

struct AxisRange {
    double lo, hi;
};

AxisRange constellation_axis_range(const Constellation& c) {
    double lo = 1e300, hi = -1e300;
    for (const cplx& p : c.points) {
        lo = std::min(lo, p.real());
        hi = std::max(hi, p.real());
    }
    return {lo, hi};
}

uint32_t nearest_point(const Constellation& c, const cplx& y) {
    uint32_t best = 0;
    double bestd = 1e300;
    for (uint32_t j = 0; j < c.order; ++j) {
        const double d = std::norm(y - c.points[j]);
        if (d < bestd) {
            bestd = d;
            best = j;
        }
    }
    return best;
}

/// Flattened transmit values: mapped coordinates first, then fine features.
std::vector<double> joint_values(const FeatureCode& code, const AxisRange& ax) {
    std::vector<double> values;
    values.reserve(3 * code.centroids.count() + code.fine.v.size());
    for (const Vec3& p : code.centroids.positions)
        for (int a = 0; a < 3; ++a)
            values.push_back(ax.lo + p[a] * (ax.hi - ax.lo));
    values.insert(values.end(), code.fine.v.begin(), code.fine.v.end());
    return values;
}

double budget_factor(double snr_db) {
    return std::clamp(0.5 + snr_db / 30.0, 0.5, 1.0);
}

size_t partition_for(const FeatureCode& code, double snr_db, const JointParams& p,
                     size_t d_fine) {
    const size_t total = joint_symbol_count(p, d_fine);
    const size_t coord_symbols = (3 * p.n_prime + 1) / 2;
    PartitionRule rule;
    rule.alpha = p.alpha * budget_factor(snr_db);
    rule.p_min = coord_symbols;
    return compute_partition(code.coarse, total, rule);
}

PipelineOutcome transmit_joint_code(const FeatureCode& code, size_t n,
                                    const JsccWeights& w, double snr_db, uint64_t seed,
                                    const JointParams& params) {
    const Constellation c = build_qam(params.order);
    const AxisRange ax = constellation_axis_range(c);
    const size_t d_fine = w.d_fine();
    const size_t partition = partition_for(code, snr_db, params, d_fine);

    const std::vector<double> values = joint_values(code, ax);
    const auto rows = feature_to_probabilities(values, c, params.temperature);
    SymbolStream tx = probabilistic_modulate(rows, c, mix_seed(seed, 0x6d0d));
    tx = apply_partition(tx, partition);

    const FadedSymbols faded =
        channel_rayleigh(tx.symbols, snr_db, mix_seed(seed, 0xc4a7));
    const EqualizedSymbols eq = equalize_csi(faded.received, faded.gains);

    // nearest-point recovery back to values; untransmitted features are zero
    std::vector<double> recovered(values.size(), 0.0);
    for (size_t i = 0; i < eq.symbols.size(); ++i) {
        const cplx p = c.points[nearest_point(c, eq.symbols[i])];
        recovered[2 * i] = p.real();
        if (2 * i + 1 < recovered.size()) recovered[2 * i + 1] = p.imag();
    }

    FeatureCode rx;
    rx.centroids.positions.reserve(params.n_prime);
    const double span = ax.hi - ax.lo;
    for (size_t i = 0; i < params.n_prime; ++i) {
        Vec3 p{};
        for (int a = 0; a < 3; ++a)
            p[a] = std::clamp((recovered[3 * i + a] - ax.lo) / span, 0.0, 1.0);
        rx.centroids.positions.push_back(p);
    }
    rx.fine = FeatureMatrix(params.n_prime, d_fine);
    std::copy(recovered.begin() + 3 * params.n_prime, recovered.end(),
              rx.fine.v.begin());
    rx.coarse = FeatureMatrix(params.n_prime, w.d_coarse());

    PipelineOutcome out;
    out.decoded = jscc_decode(rx, w, std::max(n, params.n_prime), params.group_k);
    out.symbols = static_cast<double>(partition);
    out.bits = 0.0;
    return out;
}

}  // namespace

size_t joint_partition(const PointCloud& cloud, const JsccWeights& w, double snr_db,
                       const JointParams& p) {
    const FeatureCode code = jscc_encode(cloud, w, p.n_prime, p.group_k);
    return partition_for(code, snr_db, p, w.d_fine());
}

PipelineOutcome transmit_joint(const PointCloud& cloud, const JsccWeights& w,
                               double snr_db, uint64_t seed,
                               const JointParams& params) {
    const FeatureCode code = jscc_encode(cloud, w, params.n_prime, params.group_k);
    return transmit_joint_code(code, cloud.count(), w, snr_db, seed, params);
}

// --------------------------------------------------------- separated chain

std::vector<McsEntry> default_mcs_table() {
    // thresholds from the shipped calibration run (post-FEC BER < 1e-5 over
    // AWGN at threshold, rate-1/2 K=7 code), with a 6 dB fading margin;
    // regenerate with the mcs_calibrate tool
    return {{10.0, 4, 0.5}, {15.0, 16, 0.5}, {19.5, 64, 0.5}, {24.0, 256, 0.5}};
}

PipelineOutcome transmit_separated(const PointCloud& cloud, uint32_t depth_cap,
                                   const std::vector<McsEntry>& table, double snr_db,
                                   uint64_t seed, size_t symbol_budget) {
    const McsEntry mcs = mcs_select(snr_db, table);
    const Constellation c = build_qam(mcs.order);
    const size_t budget_bits = symbol_budget * c.bits_per_symbol;
    if (budget_bits / 2 < 7)
        throw InvalidParameter("transmit_separated: symbol budget too small");
    const size_t info_capacity = budget_bits / 2 - 6;

    std::vector<uint8_t> container;
    for (uint32_t depth = depth_cap; depth >= 1; --depth) {
        const VoxelGrid grid = voxelize(cloud, depth);
        std::vector<uint8_t> packed = octree_pack(octree_encode(grid));
        if (packed.size() * 8 <= info_capacity) {
            container = std::move(packed);
            break;
        }
        if (depth == 1)
            throw InvalidParameter("transmit_separated: budget below depth-1 payload");
    }

    std::vector<uint8_t> info;
    info.reserve(info_capacity);
    for (uint8_t byte : container)
        for (int b = 7; b >= 0; --b) info.push_back((byte >> b) & 1);
    info.resize(info_capacity, 0);  // zero padding up to the exact budget

    const CodedBits coded = fec_encode(info);
    const SymbolStream tx = modulate(coded.bits, c);
    const FadedSymbols faded =
        channel_rayleigh(tx.symbols, snr_db, mix_seed(seed, 0x5e9a));
    const EqualizedSymbols eq = equalize_csi(faded.received, faded.gains);
    const double noise_var = std::pow(10.0, -snr_db / 10.0);
    std::vector<double> llrs = demodulate_soft(eq.symbols, c, noise_var, eq.erased);
    // CSI weighting: after equalization the effective noise on symbol i is
    // noise_var / |h_i|^2, so its bit LLRs scale by |h_i|^2 (erasures stay 0).
    for (size_t i = 0; i < eq.symbols.size(); ++i) {
        const double w2 = std::norm(faded.gains[i]);
        for (uint32_t b = 0; b < c.bits_per_symbol; ++b)
            llrs[i * c.bits_per_symbol + b] *= w2;
    }
    const std::vector<uint8_t> decoded_bits = fec_decode_soft(llrs, info.size());

    std::vector<uint8_t> bytes(decoded_bits.size() / 8, 0);
    for (size_t i = 0; i < bytes.size(); ++i)
        for (int b = 0; b < 8; ++b)
            bytes[i] = static_cast<uint8_t>((bytes[i] << 1) | decoded_bits[8 * i + b]);

    PipelineOutcome out;
    out.symbols = static_cast<double>(tx.symbols.size());
    out.bits = static_cast<double>(container.size() * 8);
    try {
        const OctreeCode code = octree_unpack(bytes);
        const VoxelGrid grid = octree_decode(code);
        out.decoded = voxel_centers(grid);
    } catch (const Error&) {
        out.failed = true;
    }
    return out;
}

// ----------------------------------------------------------------- sweeps

namespace {

std::vector<PointCloud> load_clouds(const ExperimentConfig& cfg) {
    std::vector<PointCloud> clouds;
    if (cfg.dataset.empty()) {
        clouds = make_corpus(cfg.corpus_clouds, cfg.corpus_points, cfg.corpus_seed);
    } else {
        for (const auto& path : cfg.dataset) clouds.push_back(read_ply(path));
    }
    return clouds;
}

bool in_unit_cube(const PointCloud& cloud) {
    for (const Vec3& p : cloud.positions)
        for (int a = 0; a < 3; ++a)
            if (p[a] < 0.0 || p[a] > 1.0) return false;
    return true;
}

void accumulate(SweepRow& row, const QualityReport& rep) {
    row.chamfer += rep.chamfer;
    row.d1_mse += rep.d1_mse;
    row.d1_psnr += rep.d1_psnr_db;
    row.d2_mse += rep.d2_mse;
    row.d2_psnr += rep.d2_psnr_db;
}

void finish_row(SweepRow& row, size_t clouds) {
    const double inv = 1.0 / static_cast<double>(clouds);
    row.chamfer *= inv;
    row.d1_mse *= inv;
    row.d1_psnr *= inv;
    row.d2_mse *= inv;
    row.d2_psnr *= inv;
    row.symbols *= inv;
    row.bits *= inv;
    row.failed *= inv;
}

}  // namespace

SweepResult run_sampling_sweep(const ExperimentConfig& cfg, size_t threads) {
    validate_config(cfg);
    require(cfg.kind == "sampling_sweep", "run_sampling_sweep: wrong config kind");
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<PointCloud> clouds = load_clouds(cfg);
    const SamplerWeights weights = cfg.sampler_weights.empty()
                                       ? make_structured_weights()
                                       : load_sampler_weights(cfg.sampler_weights);

    struct Cell {
        std::string method;
        double ratio;
        uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& m : cfg.methods)
        for (double r : cfg.ratios)
            for (uint64_t s : cfg.seeds) cells.push_back({m, r, s});

    std::vector<SweepRow> rows(cells.size());
    parallel_for(cells.size(), threads, [&](size_t ci) {
        const Cell& cell = cells[ci];
        SweepRow row;
        row.method = cell.method;
        row.param = cell.ratio;
        row.seed = cell.seed;
        for (size_t cloud_idx = 0; cloud_idx < clouds.size(); ++cloud_idx) {
            const PointCloud& cloud = clouds[cloud_idx];
            const size_t n = cloud.count();
            const size_t m =
                std::max<size_t>(1, static_cast<size_t>(std::llround(cell.ratio * n)));
            const uint64_t cell_seed =
                mix_seed(mix_seed(cell.seed, std::hash<std::string>{}(cell.method)),
                         cloud_idx);

            std::vector<uint32_t> idx;
            std::vector<double> scores;
            if (cell.method == "random") {
                idx = sample_random(cloud, m, cell_seed);
            } else if (cell.method == "fps") {
                idx = sample_fps(cloud, m,
                                 static_cast<uint32_t>(mix_seed(cell_seed, 0xF9) % n));
            } else if (cell.method == "poisson") {
                // largest radius whose maximal set still reaches m points
                double lo = 1e-5, hi = 1.8;
                for (int it = 0; it < 22; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (sample_poisson(cloud, mid, cell_seed).size() >= m)
                        lo = mid;
                    else
                        hi = mid;
                }
                idx = sample_poisson(cloud, lo, cell_seed);
                idx.resize(m);
            } else {
                const SampleResult res = sample_semantic(cloud, cell.ratio, weights);
                idx = res.indices;
                scores = res.map.selected_scores;
                if (idx.size() > m) idx.resize(m);
            }

            PointCloud sub;
            sub.positions.reserve(idx.size());
            for (uint32_t i : idx) sub.positions.push_back(cloud.positions[i]);

            PointCloud deg;
            if (cfg.upsample) {
                if (scores.size() != sub.count()) scores.assign(sub.count(), 1.0);
                deg = reconstruct_upsample(sub, scores, n, mix_seed(cell_seed, 0x0b));
            } else {
                deg = sub;
            }
            accumulate(row, quality_report(cloud, deg));
            row.symbols += static_cast<double>(sub.count());
            row.bits += static_cast<double>(sub.count() * 96);
        }
        finish_row(row, clouds.size());
        rows[ci] = std::move(row);
    });

    SweepResult result;
    result.rows = std::move(rows);
    sort_rows(result.rows);
    const auto t1 = std::chrono::steady_clock::now();
    std::cerr << "sampling sweep: " << result.rows.size() << " rows in "
              << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
              << " ms\n";
    return result;
}

SweepResult run_snr_sweep(const ExperimentConfig& cfg, size_t threads) {
    validate_config(cfg);
    require(cfg.kind == "snr_sweep", "run_snr_sweep: wrong config kind");
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<PointCloud> clouds = load_clouds(cfg);
    for (PointCloud& cloud : clouds)
        if (!in_unit_cube(cloud)) cloud = normalize_unit_cube(cloud).first;

    const JsccWeights jw = cfg.jscc_weights.empty()
                               ? make_default_jscc_weights()
                               : load_jscc_weights(cfg.jscc_weights);
    const std::vector<McsEntry> table =
        cfg.mcs_table.empty() ? default_mcs_table() : read_mcs_table(cfg.mcs_table);
    const JointParams jp;

    // jscc_encode is deterministic in (cloud, weights); encode each cloud once
    // and reuse the result for every (snr, seed) cell and for the budgets below
    std::vector<FeatureCode> codes(clouds.size());
    for (size_t i = 0; i < clouds.size(); ++i)
        codes[i] = jscc_encode(clouds[i], jw, jp.n_prime, jp.group_k);

    // per-(cloud, snr) symbol budgets from the joint scheme's partition point
    std::vector<std::vector<size_t>> budgets(clouds.size());
    for (size_t i = 0; i < clouds.size(); ++i)
        for (double snr : cfg.snrs_db)
            budgets[i].push_back(partition_for(codes[i], snr, jp, jw.d_fine()));

    struct Cell {
        std::string scheme;
        size_t snr_idx;
        uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& m : cfg.methods)
        for (size_t si = 0; si < cfg.snrs_db.size(); ++si)
            for (uint64_t s : cfg.seeds) cells.push_back({m, si, s});

    std::vector<SweepRow> rows(cells.size());
    parallel_for(cells.size(), threads, [&](size_t ci) {
        const Cell& cell = cells[ci];
        const double snr = cfg.snrs_db[cell.snr_idx];
        SweepRow row;
        row.method = cell.scheme;
        row.param = snr;
        row.seed = cell.seed;
        for (size_t cloud_idx = 0; cloud_idx < clouds.size(); ++cloud_idx) {
            const PointCloud& cloud = clouds[cloud_idx];
            const uint64_t cell_seed =
                mix_seed(mix_seed(cell.seed, cell.scheme == "joint" ? 1 : 2),
                         mix_seed(cell.snr_idx, cloud_idx));
            PipelineOutcome outcome;
            if (cell.scheme == "joint") {
                outcome = transmit_joint_code(codes[cloud_idx], cloud.count(), jw, snr,
                                              cell_seed, jp);
            } else {
                outcome = transmit_separated(cloud, cfg.octree_depth, table, snr,
                                             cell_seed,
                                             budgets[cloud_idx][cell.snr_idx]);
            }
            if (outcome.failed) {
                // decode failure floors at 0 dB PSNR with zeroed error fields
                row.failed += 1.0;
            } else {
                accumulate(row, quality_report(cloud, outcome.decoded));
            }
            row.symbols += outcome.symbols;
            row.bits += outcome.bits;
        }
        finish_row(row, clouds.size());
        rows[ci] = std::move(row);
    });

    SweepResult result;
    result.rows = std::move(rows);
    sort_rows(result.rows);
    const auto t1 = std::chrono::steady_clock::now();
    std::cerr << "snr sweep: " << result.rows.size() << " rows in "
              << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
              << " ms\n";
    return result;
}

// ------------------------------------------------------- requirements check

ReqReport requirements_check(double points_per_frame, double fps, double bits_per_point,
                             double link_rate_bps, double air_latency_ms,
                             double e2e_latency_ms, double per) {
    if (!(points_per_frame > 0.0) || !(fps > 0.0) || !(bits_per_point > 0.0) ||
        !(link_rate_bps > 0.0) || !(air_latency_ms > 0.0) || !(e2e_latency_ms > 0.0) ||
        !(per >= 0.0))
        throw InvalidParameter("requirements_check: inputs must be positive");
    ReqReport report;
    report.required_bps = points_per_frame * fps * bits_per_point;
    const double r = report.required_bps;
    report.items = {
        {"rate_floor_0.1Tbps", r, 1e11, r <= 1e11},
        {"rate_target_1Tbps", r, 1e12, r <= 1e12},
        {"rate_peak_10Tbps", r, 1e13, r <= 1e13},
        {"link_rate_meets_required", link_rate_bps, r, link_rate_bps >= r},
        {"air_latency_1ms", air_latency_ms, 1.0, air_latency_ms <= 1.0},
        {"e2e_latency_20ms", e2e_latency_ms, 20.0, e2e_latency_ms <= 20.0},
        {"per_1e-7", per, 1e-7, per <= 1e-7},
    };
    return report;
}

// ----------------------------------------------------------------- outputs

void emit_csv(const SweepResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_csv: cannot open " + path);
    out << "method,param,seed,chamfer,d1_mse,d1_psnr,d2_mse,d2_psnr,symbols,bits,"
           "failed,wall_ms\n";
    for (const SweepRow& r : result.rows) {
        out << r.method << ',' << fmt_double(r.param) << ',' << r.seed << ','
            << fmt_double(r.chamfer) << ',' << fmt_double(r.d1_mse) << ','
            << fmt_double(r.d1_psnr) << ',' << fmt_double(r.d2_mse) << ','
            << fmt_double(r.d2_psnr) << ',' << fmt_double(r.symbols) << ','
            << fmt_double(r.bits) << ',' << fmt_double(r.failed) << ','
            << fmt_double(0.0) << '\n';
    }
    if (!out) throw IoError("emit_csv: write failed for " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

void render_svg_plot(const std::string& csv_path, const std::string& x_col,
                     const std::string& y_col, const std::string& group_col,
                     const std::string& out_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("render_svg_plot: cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("render_svg_plot: empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_csv_line(line);
    auto col_of = [&](const std::string& name) {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ColumnError("render_svg_plot: missing column '" + name + "'");
    };
    const size_t xi = col_of(x_col), yi = col_of(y_col), gi = col_of(group_col);

    // group -> x -> (sum, count); groups and xs ordered for determinism
    std::map<std::string, std::map<double, std::pair<double, size_t>>> groups;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() <= std::max({xi, yi, gi}))
            throw ParseError("render_svg_plot: short row at line " +
                             std::to_string(line_no));
        try {
            const double x = std::stod(fields[xi]);
            const double y = std::stod(fields[yi]);
            auto& slot = groups[fields[gi]][x];
            slot.first += y;
            slot.second += 1;
        } catch (const std::exception&) {
            throw ParseError("render_svg_plot: non-numeric cell at line " +
                             std::to_string(line_no));
        }
    }

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& [name, xs] : groups)
        for (const auto& [x, sc] : xs) {
            const double y = sc.first / static_cast<double>(sc.second);
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (groups.empty()) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double xpad = 0.04 * (xmax - xmin), ypad = 0.04 * (ymax - ymin);
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    const double left = 70.0, right = 610.0, top = 20.0, bottom = 430.0;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
    auto sy = [&](double y) {
        return bottom - (y - ymin) / (ymax - ymin) * (bottom - top);
    };

    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                     "#9467bd", "#ff7f0e", "#8c564b"};
    constexpr size_t kPaletteSize = 6;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
           "viewBox=\"0 0 640 480\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << px(left) << "\" y1=\"" << px(bottom) << "\" x2=\""
        << px(right) << "\" y2=\"" << px(bottom)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"" << px(left) << "\" y1=\"" << px(top) << "\" x2=\""
        << px(left) << "\" y2=\"" << px(bottom)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        svg << "<line x1=\"" << px(sx(fx)) << "\" y1=\"" << px(bottom) << "\" x2=\""
            << px(sx(fx)) << "\" y2=\"" << px(bottom + 5.0)
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << px(sx(fx)) << "\" y=\"" << px(bottom + 18.0)
            << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt_double(fx)
            << "</text>\n";
        svg << "<line x1=\"" << px(left - 5.0) << "\" y1=\"" << px(sy(fy))
            << "\" x2=\"" << px(left) << "\" y2=\"" << px(sy(fy))
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << px(left - 8.0) << "\" y=\"" << px(sy(fy) + 4.0)
            << "\" font-size=\"11\" text-anchor=\"end\">" << fmt_double(fy)
            << "</text>\n";
    }
    svg << "<text x=\"" << px((left + right) / 2.0) << "\" y=\"" << px(460.0)
        << "\" font-size=\"13\" text-anchor=\"middle\">" << x_col << "</text>\n";
    svg << "<text x=\"" << px(14.0) << "\" y=\"" << px(14.0)
        << "\" font-size=\"13\">" << y_col << "</text>\n";

    size_t gidx = 0;
    for (const auto& [name, xs] : groups) {
        const char* color = kPalette[gidx % kPaletteSize];
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (const auto& [x, sc] : xs) {
            const double y = sc.first / static_cast<double>(sc.second);
            if (!first) svg << ' ';
            svg << px(sx(x)) << ',' << px(sy(y));
            first = false;
        }
        svg << "\"/>\n";
        svg << "<rect x=\"" << px(right - 130.0) << "\" y=\""
            << px(top + 10.0 + 18.0 * gidx) << "\" width=\"12\" height=\"12\" fill=\""
            << color << "\"/>\n";
        svg << "<text x=\"" << px(right - 112.0) << "\" y=\""
            << px(top + 20.0 + 18.0 * gidx) << "\" font-size=\"12\">" << name
            << "</text>\n";
        ++gidx;
    }
    svg << "</svg>\n";

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("render_svg_plot: cannot open " + out_path);
    out << svg.str();
    if (!out) throw IoError("render_svg_plot: write failed for " + out_path);
}

}  // namespace hvc
