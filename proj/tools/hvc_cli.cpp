#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hvc/codec.hpp"
#include "hvc/harness.hpp"
#include "hvc/io.hpp"
#include "hvc/metrics.hpp"
#include "hvc/phy.hpp"
#include "hvc/sampling.hpp"

namespace {

std::vector<uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw hvc::IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw hvc::IoError("cannot open " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw hvc::IoError("write failed for " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic point-cloud transmission toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    uint64_t seed = 0;
    size_t threads = 0;
    app.add_option("--config", config_path, "experiment config (JSON)");
    app.add_option("--seed", seed, "base RNG seed");
    app.add_option("--out", out_path, "output file or directory");
    app.add_option("--threads", threads, "worker threads (0 = hardware)");

    // sample
    auto* sample = app.add_subcommand("sample", "sample a point cloud");
    std::string sample_in, sample_method = "semantic", sample_weights;
    double sample_ratio = 0.25;
    sample->add_option("--in", sample_in, "input PLY")->required();
    sample->add_option("--ratio", sample_ratio, "sampling ratio in (0,1]");
    sample->add_option("--method", sample_method, "random|fps|poisson|semantic");
    sample->add_option("--weights", sample_weights, "sampler weights file");

    // encode / decode
    auto* encode = app.add_subcommand("encode", "octree-encode a cloud");
    std::string encode_in;
    uint32_t encode_depth = 10;
    encode->add_option("--in", encode_in, "input PLY")->required();
    encode->add_option("--depth", encode_depth, "octree depth (1..16)");

    auto* decode = app.add_subcommand("decode", "decode an octree container");
    std::string decode_in;
    decode->add_option("--in", decode_in, "input container")->required();

    // transmit
    auto* transmit = app.add_subcommand("transmit", "run one transmission pipeline");
    std::string tr_in, tr_scheme = "separated", tr_mcs, tr_jscc;
    double tr_snr = 15.0;
    uint32_t tr_depth = 10;
    transmit->add_option("--in", tr_in, "input PLY")->required();
    transmit->add_option("--scheme", tr_scheme, "separated|joint");
    transmit->add_option("--snr", tr_snr, "SNR in dB");
    transmit->add_option("--depth", tr_depth, "separated: octree depth cap");
    transmit->add_option("--mcs-table", tr_mcs, "MCS table file");
    transmit->add_option("--jscc-weights", tr_jscc, "JSCC weights file");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "quality metrics between clouds");
    std::string m_ref, m_deg;
    metrics->add_option("--ref", m_ref, "reference PLY")->required();
    metrics->add_option("--deg", m_deg, "degraded PLY")->required();

    // sweep
    auto* sweep = app.add_subcommand("sweep", "run the configured experiment");

    // reqcheck
    auto* reqcheck = app.add_subcommand("reqcheck", "holographic transport requirements");
    double rq_points = 1e6, rq_fps = 30.0, rq_bpp = 120.0, rq_link = 1e12;
    double rq_air = 0.5, rq_e2e = 10.0, rq_per = 1e-7;
    reqcheck->add_option("--points", rq_points, "points per frame");
    reqcheck->add_option("--fps", rq_fps, "frames per second");
    reqcheck->add_option("--bpp", rq_bpp, "bits per point");
    reqcheck->add_option("--link-bps", rq_link, "link rate (bps)");
    reqcheck->add_option("--air-ms", rq_air, "air-interface latency (ms)");
    reqcheck->add_option("--e2e-ms", rq_e2e, "end-to-end latency (ms)");
    reqcheck->add_option("--per", rq_per, "packet error rate");

    // plot
    auto* plot = app.add_subcommand("plot", "render an SVG curve from a sweep CSV");
    std::string p_csv, p_x = "param", p_y = "d1_psnr", p_group = "method";
    plot->add_option("--csv", p_csv, "input CSV")->required();
    plot->add_option("--x", p_x, "x column");
    plot->add_option("--y", p_y, "y column");
    plot->add_option("--group", p_group, "group column");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sample) {
            const hvc::PointCloud cloud = hvc::read_ply(sample_in);
            const size_t n = cloud.count();
            const size_t m = std::max<size_t>(
                1, static_cast<size_t>(std::llround(sample_ratio * double(n))));
            std::vector<uint32_t> idx;
            if (sample_method == "random") {
                idx = hvc::sample_random(cloud, m, seed);
            } else if (sample_method == "fps") {
                idx = hvc::sample_fps(cloud, m, static_cast<uint32_t>(seed % n));
            } else if (sample_method == "poisson") {
                double lo = 1e-5, hi = 2.0;
                for (int it = 0; it < 22; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (hvc::sample_poisson(cloud, mid, seed).size() >= m)
                        lo = mid;
                    else
                        hi = mid;
                }
                idx = hvc::sample_poisson(cloud, lo, seed);
                idx.resize(m);
            } else if (sample_method == "semantic") {
                const hvc::SamplerWeights w = sample_weights.empty()
                                                  ? hvc::make_structured_weights()
                                                  : hvc::load_sampler_weights(sample_weights);
                idx = hvc::sample_semantic(cloud, sample_ratio, w).indices;
            } else {
                throw hvc::InvalidParameter("unknown method " + sample_method);
            }
            hvc::PointCloud sub;
            for (uint32_t i : idx) sub.positions.push_back(cloud.positions[i]);
            const std::string out = out_path.empty() ? "sampled.ply" : out_path;
            hvc::write_ply(sub, out, hvc::PlyFormat::binary_little_endian);
            std::printf("sampled %zu of %zu points -> %s\n", sub.count(), n, out.c_str());
        } else if (*encode) {
            hvc::PointCloud cloud = hvc::read_ply(encode_in);
            if (!cloud.valid()) throw hvc::EmptyCloud("empty input cloud");
            bool inside = true;
            for (const auto& p : cloud.positions)
                for (int a = 0; a < 3; ++a) inside = inside && p[a] >= 0.0 && p[a] <= 1.0;
            if (!inside) cloud = hvc::normalize_unit_cube(cloud).first;
            const hvc::VoxelGrid grid = hvc::voxelize(cloud, encode_depth);
            const auto bytes = hvc::octree_pack(hvc::octree_encode(grid));
            const std::string out = out_path.empty() ? "cloud.hpoc" : out_path;
            write_bytes(out, bytes);
            std::printf("encoded %zu voxels at depth %u into %zu bytes -> %s\n",
                        grid.voxels.size(), encode_depth, bytes.size(), out.c_str());
        } else if (*decode) {
            const hvc::OctreeCode code = hvc::octree_unpack(read_bytes(decode_in));
            const hvc::PointCloud cloud = hvc::voxel_centers(hvc::octree_decode(code));
            const std::string out = out_path.empty() ? "decoded.ply" : out_path;
            hvc::write_ply(cloud, out, hvc::PlyFormat::binary_little_endian);
            std::printf("decoded %zu voxels -> %s\n", cloud.count(), out.c_str());
        } else if (*transmit) {
            hvc::PointCloud cloud = hvc::read_ply(tr_in);
            bool inside = true;
            for (const auto& p : cloud.positions)
                for (int a = 0; a < 3; ++a) inside = inside && p[a] >= 0.0 && p[a] <= 1.0;
            if (!inside) cloud = hvc::normalize_unit_cube(cloud).first;
            hvc::PipelineOutcome outcome;
            if (tr_scheme == "joint") {
                const hvc::JsccWeights w = tr_jscc.empty()
                                               ? hvc::make_default_jscc_weights()
                                               : hvc::load_jscc_weights(tr_jscc);
                outcome = hvc::transmit_joint(cloud, w, tr_snr, seed);
            } else if (tr_scheme == "separated") {
                const auto table = tr_mcs.empty() ? hvc::default_mcs_table()
                                                  : hvc::read_mcs_table(tr_mcs);
                const hvc::JsccWeights w = tr_jscc.empty()
                                               ? hvc::make_default_jscc_weights()
                                               : hvc::load_jscc_weights(tr_jscc);
                const size_t budget = hvc::joint_partition(cloud, w, tr_snr, {});
                outcome =
                    hvc::transmit_separated(cloud, tr_depth, table, tr_snr, seed, budget);
            } else {
                throw hvc::InvalidParameter("unknown scheme " + tr_scheme);
            }
            if (outcome.failed) {
                std::printf("decode FAILED (symbols=%g)\n", outcome.symbols);
            } else {
                const hvc::QualityReport rep = hvc::quality_report(cloud, outcome.decoded);
                std::printf("symbols=%g bits=%g %s\n", outcome.symbols, outcome.bits,
                            rep.csv_row().c_str());
                if (!out_path.empty())
                    hvc::write_ply(outcome.decoded, out_path,
                                   hvc::PlyFormat::binary_little_endian);
            }
        } else if (*metrics) {
            const hvc::QualityReport rep =
                hvc::quality_report(hvc::read_ply(m_ref), hvc::read_ply(m_deg));
            std::printf("chamfer,d1_mse,d1_psnr,d2_mse,d2_psnr,peak\n%s\n",
                        rep.csv_row().c_str());
        } else if (*sweep) {
            if (config_path.empty())
                throw hvc::ConfigError("sweep requires --config");
            hvc::ExperimentConfig cfg = hvc::load_config(config_path);
            if (!out_path.empty()) cfg.output_dir = out_path;
            std::filesystem::create_directories(cfg.output_dir);
            hvc::SweepResult result;
            if (cfg.kind == "sampling_sweep") {
                result = hvc::run_sampling_sweep(cfg, threads);
            } else if (cfg.kind == "snr_sweep") {
                result = hvc::run_snr_sweep(cfg, threads);
            } else {
                throw hvc::ConfigError("sweep config kind must be a sweep; use reqcheck");
            }
            const std::string csv = cfg.output_dir + "/results.csv";
            const std::string svg = cfg.output_dir + "/results.svg";
            hvc::emit_csv(result, csv);
            hvc::render_svg_plot(csv, "param", "d1_psnr", "method", svg);
            std::printf("wrote %s and %s (%zu rows)\n", csv.c_str(), svg.c_str(),
                        result.rows.size());
        } else if (*reqcheck) {
            const hvc::ReqReport rep = hvc::requirements_check(
                rq_points, rq_fps, rq_bpp, rq_link, rq_air, rq_e2e, rq_per);
            std::printf("required_bps=%s\n", hvc::fmt_double(rep.required_bps).c_str());
            for (const auto& item : rep.items)
                std::printf("%s %s (value %s, threshold %s)\n",
                            item.pass ? "PASS" : "FAIL", item.name.c_str(),
                            hvc::fmt_double(item.value).c_str(),
                            hvc::fmt_double(item.threshold).c_str());
        } else if (*plot) {
            const std::string out = out_path.empty() ? "plot.svg" : out_path;
            hvc::render_svg_plot(p_csv, p_x, p_y, p_group, out);
            std::printf("wrote %s\n", out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
