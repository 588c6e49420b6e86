#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "hvc/io.hpp"
#include "hvc/rng.hpp"

using namespace hvc;

namespace {

std::string temp_path(const std::string& name) {
    return std::string("io_test_") + name;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
}

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(bool(is));
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(is),
                                std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("fmt_double round trips") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        double v = 0.0;
        switch (i % 4) {
            case 0: v = rng.uniform(-1.0, 1.0); break;
            case 1: v = rng.normal() * 1e6; break;
            case 2: v = rng.normal() * 1e-6; break;
            case 3: v = double(int64_t(rng.next_u64() % 2000001)) - 1000000.0; break;
        }
        const std::string s = fmt_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(fmt_double(0.0) == "0");
    CHECK(fmt_double(1.0) == "1");
    CHECK(fmt_double(0.5) == "0.5");
    CHECK(fmt_float(0.25f) == "0.25");
}

TEST_CASE("bit writer packs MSB first") {
    BitWriter w;
    w.write_bits(0b101, 3);
    const Bitstream s = w.finish();
    CHECK(s.bit_length == 3);
    REQUIRE(s.bytes.size() == 1);
    CHECK(s.bytes[0] == 0xA0);  // 101 padded with zeros

    BitWriter w2;
    w2.write_bits(1, 1);
    CHECK(w2.finish().bytes[0] == 0x80);
}

TEST_CASE("bit round trip over random widths") {
    Rng rng(9);
    std::vector<std::pair<uint64_t, unsigned>> items;
    BitWriter w;
    for (int i = 0; i < 10000; ++i) {
        const unsigned width = 1 + unsigned(rng.below(64));
        const uint64_t value =
            width == 64 ? rng.next_u64() : (rng.next_u64() & ((1ULL << width) - 1));
        items.push_back({value, width});
        w.write_bits(value, width);
    }
    const Bitstream s = w.finish();
    BitReader r(s);
    for (const auto& [value, width] : items) CHECK(r.read_bits(width) == value);
    CHECK(r.bits_left() == 0);
    CHECK_THROWS_AS(r.read_bits(1), EndOfStream);
}

TEST_CASE("reading an empty stream throws") {
    const Bitstream empty;
    BitReader r(empty);
    CHECK_THROWS_AS(r.read_bits(1), EndOfStream);
}

TEST_CASE("bitstream file round trip") {
    BitWriter w;
    w.write_bits(0xDEADBEEF, 32);
    w.write_bits(0x3, 2);
    const Bitstream s = w.finish();
    const std::string path = temp_path("stream.bin");
    save_bitstream(path, s);
    const Bitstream back = load_bitstream(path);
    CHECK(back.bit_length == s.bit_length);
    CHECK(back.bytes == s.bytes);

    write_text(path, "XXXX0001garbage");
    CHECK_THROWS_AS(load_bitstream(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("ascii ply with one vertex") {
    const std::string path = temp_path("one.ply");
    write_text(path,
               "ply\nformat ascii 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n0 0 0\n");
    const PointCloud c = read_ply(path);
    REQUIRE(c.count() == 1);
    CHECK(c.positions[0].x == 0.0);
    CHECK_FALSE(c.has_colors());
    std::remove(path.c_str());
}

TEST_CASE("ply round trip is bit exact in both formats") {
    Rng rng(11);
    PointCloud c;
    c.colors.emplace();
    for (int i = 0; i < 2048; ++i) {
        // float-representable coordinates so the float32 file is lossless
        c.positions.push_back({double(float(rng.uniform())), double(float(rng.uniform())),
                               double(float(rng.uniform(-3.0, 3.0)))});
        c.colors->push_back({uint8_t(rng.below(256)), uint8_t(rng.below(256)),
                             uint8_t(rng.below(256))});
    }
    for (const PlyFormat fmt : {PlyFormat::ascii, PlyFormat::binary_little_endian}) {
        const std::string path = temp_path("rt.ply");
        write_ply(c, path, fmt);
        const PointCloud back = read_ply(path);
        REQUIRE(back.count() == c.count());
        REQUIRE(back.has_colors());
        for (size_t i = 0; i < c.count(); ++i) {
            for (int a = 0; a < 3; ++a) CHECK(back.positions[i][a] == c.positions[i][a]);
            CHECK((*back.colors)[i] == (*c.colors)[i]);
        }
        std::remove(path.c_str());
    }
}

TEST_CASE("binary ply has the exact expected size") {
    PointCloud c;
    for (int i = 0; i < 10; ++i) c.positions.push_back({0.1 * i, 0.0, 0.0});
    const std::string path = temp_path("size.ply");
    write_ply(c, path, PlyFormat::binary_little_endian);
    const auto bytes = slurp(path);
    const std::string text(bytes.begin(), bytes.end());
    const size_t header_end = text.find("end_header\n");
    REQUIRE(header_end != std::string::npos);
    CHECK(bytes.size() == header_end + 11 + 12 * c.count());
    std::remove(path.c_str());
}

TEST_CASE("truncated ply body is rejected") {
    const std::string path = temp_path("trunc.ply");
    write_text(path,
               "ply\nformat ascii 1.0\nelement vertex 10\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n"
               "0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n");
    CHECK_THROWS_AS(read_ply(path), TruncatedBody);
    std::remove(path.c_str());
}

TEST_CASE("unsupported format tags are rejected, extra properties are skipped") {
    const std::string path = temp_path("odd.ply");
    write_text(path,
               "ply\nformat binary_big_endian 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n");
    CHECK_THROWS_AS(read_ply(path), UnsupportedFormat);

    write_text(path,
               "ply\nformat ascii 1.0\nelement vertex 2\n"
               "property float x\nproperty float y\nproperty float z\n"
               "property float intensity\n"
               "end_header\n1 2 3 9\n4 5 6 9\n");
    const PointCloud c = read_ply(path);
    REQUIRE(c.count() == 2);
    CHECK(c.positions[1].y == 5.0);
    std::remove(path.c_str());
}

TEST_CASE("ply header vertex count must match the body") {
    const std::string path = temp_path("missing.ply");
    CHECK_THROWS_AS(read_ply(path + ".nonexistent"), IoError);
    write_text(path, "notply\n");
    CHECK_THROWS_AS(read_ply(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("apply_layer computes W x + b") {
    DenseLayer l;
    l.rows = 2;
    l.cols = 3;
    l.w = {1, 2, 3, 4, 5, 6};
    l.b = {0.5f, -1.0f};
    const double in[3] = {1.0, 0.0, 2.0};
    double out[2] = {0, 0};
    apply_layer(l, in, out);
    CHECK(out[0] == doctest::Approx(1 + 6 + 0.5));
    CHECK(out[1] == doctest::Approx(4 + 12 - 1.0));
}

TEST_CASE("weights file round trip") {
    Rng rng(13);
    std::vector<DenseLayer> layers;
    for (const auto [rows, cols] : {std::pair{8u, 3u}, {8u, 8u}, {4u, 8u}}) {
        DenseLayer l;
        l.rows = rows;
        l.cols = cols;
        for (uint32_t i = 0; i < rows * cols; ++i)
            l.w.push_back(float(rng.uniform(-1.0, 1.0)));
        for (uint32_t i = 0; i < rows; ++i) l.b.push_back(float(rng.uniform(-1.0, 1.0)));
        layers.push_back(std::move(l));
    }
    const std::string path = temp_path("weights.bin");
    write_weights_file(path, 2, layers);
    const auto [mlp, back] = read_weights_file(path);
    CHECK(mlp == 2);
    REQUIRE(back.size() == layers.size());
    for (size_t i = 0; i < layers.size(); ++i) {
        CHECK(back[i].rows == layers[i].rows);
        CHECK(back[i].cols == layers[i].cols);
        CHECK(back[i].w == layers[i].w);  // float32 storage: bitwise identical
        CHECK(back[i].b == layers[i].b);
    }

    write_text(path, "XXXXXXXXjunkjunkjunk");
    CHECK_THROWS_AS(read_weights_file(path), ParseError);
    CHECK_THROWS_AS(write_weights_file(path, 5, layers), InvalidParameter);
    std::remove(path.c_str());
}
