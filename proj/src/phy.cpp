#include "hvc/phy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hvc/rng.hpp"

namespace hvc {

namespace {

unsigned gray_to_binary(unsigned g) {
    unsigned b = 0;
    for (; g; g >>= 1) b ^= g;
    return b;
}

}  // namespace

Constellation build_qam(uint32_t order) {
    if (order != 4 && order != 16 && order != 64 && order != 256)
        throw UnsupportedOrder("build_qam: order must be 4, 16, 64 or 256");
    Constellation c;
    c.order = order;
    unsigned bits = 0;
    while ((1u << bits) < order) ++bits;
    c.bits_per_symbol = bits;
    const unsigned axis_bits = bits / 2;
    const unsigned levels = 1u << axis_bits;
    // odd-integer PAM levels, Gray index -> amplitude; two axes
    const double mean_sq = (double(levels) * levels - 1.0) / 3.0;
    const double scale = 1.0 / std::sqrt(2.0 * mean_sq);
    c.points.resize(order);
    for (uint32_t label = 0; label < order; ++label) {
        const unsigned gi = label >> axis_bits;          // in-phase Gray index
        const unsigned gq = label & (levels - 1);        // quadrature Gray index
        const double ai = 2.0 * gray_to_binary(gi) - (levels - 1.0);
        const double aq = 2.0 * gray_to_binary(gq) - (levels - 1.0);
        c.points[label] = cplx(ai * scale, aq * scale);
    }
    return c;
}

SymbolStream modulate(const std::vector<uint8_t>& bits, const Constellation& c) {
    if (bits.size() % c.bits_per_symbol != 0)
        throw LengthError("modulate: bit count not divisible by bits per symbol");
    SymbolStream s;
    s.order = c.order;
    const size_t n = bits.size() / c.bits_per_symbol;
    s.symbols.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        uint32_t label = 0;
        for (unsigned b = 0; b < c.bits_per_symbol; ++b)
            label = (label << 1) | (bits[i * c.bits_per_symbol + b] & 1);
        s.symbols.push_back(c.points[label]);
    }
    s.partition = s.original_count = n;
    return s;
}

std::vector<uint8_t> demodulate_hard(const std::vector<cplx>& received,
                                     const Constellation& c) {
    std::vector<uint8_t> bits;
    bits.reserve(received.size() * c.bits_per_symbol);
    for (const cplx& y : received) {
        uint32_t best = 0;
        double bestd = std::numeric_limits<double>::infinity();
        for (uint32_t label = 0; label < c.order; ++label) {
            const double d = std::norm(y - c.points[label]);
            if (d < bestd) {
                bestd = d;
                best = label;
            }
        }
        for (unsigned b = c.bits_per_symbol; b-- > 0;)
            bits.push_back(static_cast<uint8_t>((best >> b) & 1));
    }
    return bits;
}

std::vector<double> demodulate_soft(const std::vector<cplx>& received,
                                    const Constellation& c, double noise_var,
                                    const std::vector<uint8_t>& erased) {
    if (!(noise_var > 0.0)) throw InvalidParameter("demodulate_soft: noise_var <= 0");
    if (!erased.empty() && erased.size() != received.size())
        throw LengthError("demodulate_soft: erasure mask length mismatch");
    std::vector<double> llrs;
    llrs.reserve(received.size() * c.bits_per_symbol);
    std::vector<double> d0(c.bits_per_symbol), d1(c.bits_per_symbol);
    for (size_t i = 0; i < received.size(); ++i) {
        if (!erased.empty() && erased[i]) {
            for (unsigned b = 0; b < c.bits_per_symbol; ++b) llrs.push_back(0.0);
            continue;
        }
        const cplx y = received[i];
        std::fill(d0.begin(), d0.end(), std::numeric_limits<double>::infinity());
        std::fill(d1.begin(), d1.end(), std::numeric_limits<double>::infinity());
        for (uint32_t label = 0; label < c.order; ++label) {
            const double d = std::norm(y - c.points[label]);
            for (unsigned b = 0; b < c.bits_per_symbol; ++b) {
                // bit position b counted from the MSB of the label
                const bool one = (label >> (c.bits_per_symbol - 1 - b)) & 1;
                double& slot = one ? d1[b] : d0[b];
                slot = std::min(slot, d);
            }
        }
        for (unsigned b = 0; b < c.bits_per_symbol; ++b)
            llrs.push_back((d1[b] - d0[b]) / noise_var);
    }
    return llrs;
}

SymbolStream probabilistic_modulate(const std::vector<std::vector<double>>& rows,
                                    const Constellation& c, uint64_t seed) {
    Rng rng(seed);
    SymbolStream s;
    s.order = c.order;
    s.symbols.reserve(rows.size());
    for (const auto& row : rows) {
        if (row.size() != c.order)
            throw InvalidDistribution("probabilistic_modulate: row length != order");
        double sum = 0.0;
        for (double p : row) {
            if (!(p >= 0.0) || !std::isfinite(p))
                throw InvalidDistribution("probabilistic_modulate: negative or non-finite entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw InvalidDistribution("probabilistic_modulate: row does not sum to 1");
        const double u = rng.uniform() * sum;
        double acc = 0.0;
        uint32_t pick = c.order - 1;
        for (uint32_t j = 0; j < c.order; ++j) {
            acc += row[j];
            if (u < acc) {
                pick = j;
                break;
            }
        }
        s.symbols.push_back(c.points[pick]);
    }
    s.partition = s.original_count = s.symbols.size();
    return s;
}

std::vector<std::vector<double>> feature_to_probabilities(
    const std::vector<double>& features, const Constellation& c, double temperature) {
    if (!(temperature > 0.0))
        throw InvalidParameter("feature_to_probabilities: temperature <= 0");
    for (double f : features)
        if (!std::isfinite(f))
            throw InvalidFeature("feature_to_probabilities: non-finite feature");
    const size_t n_sym = (features.size() + 1) / 2;
    std::vector<std::vector<double>> rows(n_sym);
    std::vector<double> logits(c.order);
    for (size_t i = 0; i < n_sym; ++i) {
        const double re = features[2 * i];
        const double im = 2 * i + 1 < features.size() ? features[2 * i + 1] : 0.0;
        const cplx z(re, im);
        double lmax = -std::numeric_limits<double>::infinity();
        for (uint32_t j = 0; j < c.order; ++j) {
            logits[j] = -std::norm(z - c.points[j]) / temperature;
            lmax = std::max(lmax, logits[j]);
        }
        double denom = 0.0;
        rows[i].resize(c.order);
        for (uint32_t j = 0; j < c.order; ++j) {
            rows[i][j] = std::exp(logits[j] - lmax);
            denom += rows[i][j];
        }
        for (double& p : rows[i]) p /= denom;
    }
    return rows;
}

SymbolStream apply_partition(const SymbolStream& stream, size_t p) {
    if (p > stream.symbols.size())
        throw PartitionError("apply_partition: P exceeds symbol count");
    SymbolStream out;
    out.order = stream.order;
    out.original_count = stream.original_count;
    out.partition = p;
    out.symbols.assign(stream.symbols.begin(), stream.symbols.begin() + p);
    return out;
}

size_t compute_partition(const FeatureMatrix& coarse, size_t count,
                         const PartitionRule& rule) {
    if (rule.p_min > count) throw PartitionError("compute_partition: p_min > count");
    double mean = 0.0;
    if (!coarse.v.empty()) {
        for (double x : coarse.v) mean += std::abs(x);
        mean /= static_cast<double>(coarse.v.size());
    }
    const double raw = rule.alpha * mean * static_cast<double>(count);
    auto p = static_cast<long long>(std::llround(raw));
    p = std::max<long long>(p, static_cast<long long>(rule.p_min));
    p = std::min<long long>(p, static_cast<long long>(count));
    return static_cast<size_t>(p);
}

std::vector<cplx> channel_awgn(const std::vector<cplx>& symbols, double snr_db,
                               uint64_t seed) {
    Rng rng(seed);
    const double sigma = std::sqrt(std::pow(10.0, -snr_db / 10.0) / 2.0);
    std::vector<cplx> out;
    out.reserve(symbols.size());
    for (const cplx& s : symbols)
        out.push_back(s + cplx(sigma * rng.normal(), sigma * rng.normal()));
    return out;
}

FadedSymbols channel_rayleigh(const std::vector<cplx>& symbols, double snr_db,
                              uint64_t seed) {
    Rng rng(seed);
    const double sigma = std::sqrt(std::pow(10.0, -snr_db / 10.0) / 2.0);
    const double hs = std::sqrt(0.5);  // E|h|^2 = 1
    FadedSymbols out;
    out.received.reserve(symbols.size());
    out.gains.reserve(symbols.size());
    for (const cplx& s : symbols) {
        const cplx h(hs * rng.normal(), hs * rng.normal());
        const cplx n(sigma * rng.normal(), sigma * rng.normal());
        out.gains.push_back(h);
        out.received.push_back(h * s + n);
    }
    return out;
}

EqualizedSymbols equalize_csi(const std::vector<cplx>& received,
                              const std::vector<cplx>& gains) {
    if (received.size() != gains.size())
        throw LengthError("equalize_csi: length mismatch");
    EqualizedSymbols out;
    out.symbols.reserve(received.size());
    out.erased.reserve(received.size());
    for (size_t i = 0; i < received.size(); ++i) {
        if (std::abs(gains[i]) < 1e-12) {
            out.symbols.push_back(cplx(0.0, 0.0));
            out.erased.push_back(1);
        } else {
            out.symbols.push_back(received[i] / gains[i]);
            out.erased.push_back(0);
        }
    }
    return out;
}

McsEntry mcs_select(double snr_db, const std::vector<McsEntry>& table) {
    if (table.empty()) throw EmptyTable("mcs_select: empty table");
    for (size_t i = 1; i < table.size(); ++i)
        if (table[i].snr_threshold_db < table[i - 1].snr_threshold_db)
            throw InvalidParameter("mcs_select: table not sorted by threshold");
    const McsEntry* best = nullptr;
    double best_eff = -1.0;
    for (const McsEntry& e : table) {
        if (e.snr_threshold_db > snr_db) continue;
        const double eff = std::log2(double(e.order)) * e.code_rate;
        if (eff > best_eff) {
            best_eff = eff;
            best = &e;
        }
    }
    return best ? *best : table.front();
}

std::vector<McsEntry> read_mcs_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_mcs_table: cannot open " + path);
    std::vector<McsEntry> table;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t comment = line.find('#');
        if (comment != std::string::npos) line.resize(comment);
        std::istringstream row(line);
        McsEntry e;
        if (!(row >> e.snr_threshold_db)) continue;  // blank line
        if (!(row >> e.order >> e.code_rate))
            throw ParseError("read_mcs_table: malformed row at line " +
                             std::to_string(line_no));
        table.push_back(e);
    }
    if (table.empty()) throw EmptyTable("read_mcs_table: no entries in " + path);
    return table;
}

}  // namespace hvc
