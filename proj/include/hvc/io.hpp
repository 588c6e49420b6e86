#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "hvc/core.hpp"
#include "hvc/error.hpp"

namespace hvc {

/// Shortest decimal representation that parses back to the same value
/// (std::to_chars); used everywhere text output must be byte-deterministic.
std::string fmt_double(double v);
std::string fmt_float(float v);

// ---------------------------------------------------------------- bitstream

/// Bit-exact payload with MSB-first packing and an explicit bit length.
struct Bitstream {
    std::vector<uint8_t> bytes;
    uint64_t bit_length = 0;
};

class BitWriter {
  public:
    /// Append `width` (1..64) low bits of `value`, MSB first.
    void write_bits(uint64_t value, unsigned width);
    void write_byte(uint8_t b) { write_bits(b, 8); }
    Bitstream finish() const { return stream_; }
    uint64_t bit_length() const { return stream_.bit_length; }

  private:
    Bitstream stream_;
};

class BitReader {
  public:
    explicit BitReader(const Bitstream& s) : stream_(s) {}
    /// Read `width` (1..64) bits, MSB first. Throws EndOfStream past the end.
    uint64_t read_bits(unsigned width);
    uint64_t bits_left() const { return stream_.bit_length - cursor_; }

  private:
    const Bitstream& stream_;
    uint64_t cursor_ = 0;
};

/// Container file: magic "HPBS0001", 8-byte little-endian bit length, payload.
void save_bitstream(const std::string& path, const Bitstream& s);
Bitstream load_bitstream(const std::string& path);

// ---------------------------------------------------------------- PLY

enum class PlyFormat { ascii, binary_little_endian };

/// Reads x,y,z float32 (+ optional red,green,blue uint8) vertices.
/// Unsupported fixed-size properties are skipped with a stderr warning.
PointCloud read_ply(const std::string& path);

void write_ply(const PointCloud& cloud, const std::string& path, PlyFormat format);

// ------------------------------------------------------------- weight files

/// One affine layer (or bare matrix with empty bias): y = W x + b,
/// W row-major rows x cols.
struct DenseLayer {
    uint32_t rows = 0, cols = 0;
    std::vector<float> w;
    std::vector<float> b;
};

/// y = W x + b into `out` (length rows); `in` must have `cols` entries.
void apply_layer(const DenseLayer& l, const double* in, double* out);

/// Weights container: magic "HPSW0001", u32 total layer count, u32 count of
/// leading layers that form the MLP (the rest are attention projections),
/// then per layer: u32 rows, u32 cols, row-major float32 weights, float32
/// bias[rows]. All little-endian.
void write_weights_file(const std::string& path, uint32_t mlp_layers,
                        const std::vector<DenseLayer>& layers);
std::pair<uint32_t, std::vector<DenseLayer>> read_weights_file(const std::string& path);

}  // namespace hvc
