#pragma once
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "hvc/core.hpp"
#include "hvc/sampling.hpp"

namespace hvc {

using cplx = std::complex<double>;

/// Square QAM with per-axis Gray labels. The label of points[i] is i; the
/// upper half of the label bits Gray-code the in-phase level, the lower half
/// the quadrature level. Unit mean symbol energy.
struct Constellation {
    uint32_t order = 0;
    unsigned bits_per_symbol = 0;
    std::vector<cplx> points;
};

Constellation build_qam(uint32_t order);

struct SymbolStream {
    std::vector<cplx> symbols;
    uint32_t order = 0;
    size_t partition = 0;       // number of transmitted symbols
    size_t original_count = 0;  // pre-partition count
};

/// Bits (0/1 entries, MSB of each label first) -> symbols.
SymbolStream modulate(const std::vector<uint8_t>& bits, const Constellation& c);

/// Nearest constellation point (ties to the lower label).
std::vector<uint8_t> demodulate_hard(const std::vector<cplx>& received,
                                     const Constellation& c);

/// Max-log LLR per bit: (min dist^2 over bit-1 points - min over bit-0
/// points) / noise_var. Positive = bit 0 more likely; erased symbols get 0.
std::vector<double> demodulate_soft(const std::vector<cplx>& received,
                                    const Constellation& c, double noise_var,
                                    const std::vector<uint8_t>& erased = {});

/// Draw each symbol categorically from its probability row (length = order),
/// seed-deterministic.
SymbolStream probabilistic_modulate(const std::vector<std::vector<double>>& rows,
                                    const Constellation& c, uint64_t seed);

/// Consecutive feature pairs map to (re, im); odd tail padded with zero.
/// Row logits = -|feature point - constellation point|^2 / temperature.
std::vector<std::vector<double>> feature_to_probabilities(
    const std::vector<double>& features, const Constellation& c, double temperature);

/// Keep the first p symbols.
SymbolStream apply_partition(const SymbolStream& stream, size_t p);

/// Monotone budget rule: P = clamp(round(alpha * mean|coarse| * count),
/// p_min, count).
struct PartitionRule {
    double alpha = 1.0;
    size_t p_min = 0;
};
size_t compute_partition(const FeatureMatrix& coarse, size_t count,
                         const PartitionRule& rule);

/// y = s + n, total complex noise variance 10^(-snr_db/10).
std::vector<cplx> channel_awgn(const std::vector<cplx>& symbols, double snr_db,
                               uint64_t seed);

struct FadedSymbols {
    std::vector<cplx> received;
    std::vector<cplx> gains;  // per-symbol h, E|h|^2 = 1
};
FadedSymbols channel_rayleigh(const std::vector<cplx>& symbols, double snr_db,
                              uint64_t seed);

/// y/h per symbol; |h| < 1e-12 marks the symbol erased (symbol set to 0).
struct EqualizedSymbols {
    std::vector<cplx> symbols;
    std::vector<uint8_t> erased;
};
EqualizedSymbols equalize_csi(const std::vector<cplx>& received,
                              const std::vector<cplx>& gains);

struct McsEntry {
    double snr_threshold_db = 0.0;
    uint32_t order = 4;
    double code_rate = 0.5;
};

/// Highest-throughput entry whose threshold <= snr_db; below every threshold,
/// the lowest entry. Table must be sorted by threshold.
McsEntry mcs_select(double snr_db, const std::vector<McsEntry>& table);

/// Plain text, one row per entry: "snr_threshold_db order code_rate";
/// '#' starts a comment.
std::vector<McsEntry> read_mcs_table(const std::string& path);

}  // namespace hvc
