#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "hvc/codec.hpp"
#include "hvc/core.hpp"
#include "hvc/metrics.hpp"
#include "hvc/phy.hpp"
#include "hvc/sampling.hpp"

namespace hvc {

/// JSON-backed experiment description; unknown keys are rejected.
struct ExperimentConfig {
    std::string kind;                   // sampling_sweep | snr_sweep | requirements_check
    std::vector<std::string> dataset;   // PLY paths; empty = synthetic corpus
    std::vector<std::string> methods;   // sampling methods or schemes
    std::vector<double> ratios;         // sampling_sweep grid, sorted ascending
    std::vector<double> snrs_db;        // snr_sweep grid, sorted ascending
    std::vector<uint64_t> seeds;
    uint32_t octree_depth = 10;         // separated-scheme depth cap
    std::string mcs_table;              // path; empty = built-in default table
    std::string sampler_weights;        // path; empty = structured defaults
    std::string jscc_weights;           // path; empty = default initialization
    std::string output_dir = ".";
    size_t corpus_clouds = 20;
    size_t corpus_points = 2048;
    uint64_t corpus_seed = 7;
    bool upsample = false;              // sampling_sweep: reconstruct back to N
};

ExperimentConfig load_config(const std::string& path);
void validate_config(const ExperimentConfig& cfg);

/// Synthetic corpus: cloud i cycles {cube surface, sphere, stepped plane with
/// two straight edges}, n points each, seeded per cloud.
std::vector<PointCloud> make_corpus(size_t count, size_t n, uint64_t seed);

struct SweepRow {
    std::string method;
    double param = 0.0;
    uint64_t seed = 0;
    double chamfer = 0.0;
    double d1_mse = 0.0;
    double d1_psnr = 0.0;
    double d2_mse = 0.0;
    double d2_psnr = 0.0;
    double symbols = 0.0;  // mean transmitted symbols per cloud
    double bits = 0.0;     // mean payload bits per cloud (0 for analog joint)
    double failed = 0.0;   // fraction of cloud decodes that failed
    double wall_ms = 0.0;  // fixed 0 in CSV; timing goes to stderr
};

struct SweepResult {
    std::vector<SweepRow> rows;  // sorted by (method, param, seed)
};

SweepResult run_sampling_sweep(const ExperimentConfig& cfg, size_t threads = 0);
SweepResult run_snr_sweep(const ExperimentConfig& cfg, size_t threads = 0);

// ------------------------------------------------- transmission pipelines

/// Joint-pipeline knobs. Coordinates are mapped onto the constellation axis
/// range and transmitted first (their symbol count is the partition floor);
/// fine features follow and may be cut by the partition point.
struct JointParams {
    size_t n_prime = 512;
    size_t group_k = 8;
    uint32_t order = 256;
    double temperature = 1e-3;
    double alpha = 300.0;      // partition gain; ~full budget at 15 dB with
                               // the default weights' coarse magnitudes
};

/// Pre-partition symbol count of the joint scheme (coords + fine features).
size_t joint_symbol_count(const JointParams& p, size_t d_fine);
/// Partition point for a cloud at a given SNR; deterministic, seed-free.
size_t joint_partition(const PointCloud& cloud, const JsccWeights& w, double snr_db,
                       const JointParams& p);

struct PipelineOutcome {
    PointCloud decoded;
    bool failed = false;
    double symbols = 0.0;
    double bits = 0.0;
};

PipelineOutcome transmit_joint(const PointCloud& cloud, const JsccWeights& w,
                               double snr_db, uint64_t seed,
                               const JointParams& params = {});

/// Octree + entropy + FEC + QAM over Rayleigh fading. Depth starts at
/// depth_cap and is lowered until the coded payload fits symbol_budget
/// symbols at the MCS chosen for snr_db; the payload is zero-padded so
/// exactly symbol_budget symbols are sent. Decode failure (corrupted
/// container) is reported, never thrown.
PipelineOutcome transmit_separated(const PointCloud& cloud, uint32_t depth_cap,
                                   const std::vector<McsEntry>& table, double snr_db,
                                   uint64_t seed, size_t symbol_budget);

std::vector<McsEntry> default_mcs_table();

// ------------------------------------------------------- requirements check

struct ReqItem {
    std::string name;
    double value = 0.0;      // quantity being checked
    double threshold = 0.0;
    bool pass = false;
};

struct ReqReport {
    double required_bps = 0.0;
    std::vector<ReqItem> items;
};

ReqReport requirements_check(double points_per_frame, double fps, double bits_per_point,
                             double link_rate_bps, double air_latency_ms,
                             double e2e_latency_ms, double per);

// ----------------------------------------------------------------- outputs

/// Header: method,param,seed,chamfer,d1_mse,d1_psnr,d2_mse,d2_psnr,symbols,
/// bits,failed,wall_ms. Byte-deterministic.
void emit_csv(const SweepResult& result, const std::string& path);

/// One polyline per group (mean y per x), axes, legend; byte-deterministic.
void render_svg_plot(const std::string& csv_path, const std::string& x_col,
                     const std::string& y_col, const std::string& group_col,
                     const std::string& out_path);

}  // namespace hvc
