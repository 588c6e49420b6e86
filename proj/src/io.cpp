#include "hvc/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hvc {

std::string fmt_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_float(float v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- bitstream

void BitWriter::write_bits(uint64_t value, unsigned width) {
    if (width < 1 || width > 64) throw InvalidParameter("write_bits: width must be 1..64");
    if (width < 64) value &= (uint64_t{1} << width) - 1;
    for (unsigned i = width; i-- > 0;) {
        const unsigned bit = (value >> i) & 1u;
        const uint64_t pos = stream_.bit_length;
        if (pos % 8 == 0) stream_.bytes.push_back(0);
        if (bit) stream_.bytes[pos / 8] |= static_cast<uint8_t>(0x80u >> (pos % 8));
        ++stream_.bit_length;
    }
}

uint64_t BitReader::read_bits(unsigned width) {
    if (width < 1 || width > 64) throw InvalidParameter("read_bits: width must be 1..64");
    if (cursor_ + width > stream_.bit_length) throw EndOfStream("read_bits: past end");
    uint64_t value = 0;
    for (unsigned i = 0; i < width; ++i) {
        const uint64_t pos = cursor_++;
        const unsigned bit = (stream_.bytes[pos / 8] >> (7 - pos % 8)) & 1u;
        value = (value << 1) | bit;
    }
    return value;
}

namespace {

constexpr char kBitstreamMagic[8] = {'H', 'P', 'B', 'S', '0', '0', '0', '1'};

void put_u64_le(std::ostream& os, uint64_t v) {
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64_le(std::istream& is) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        const int c = is.get();
        if (c < 0) throw TruncatedBody("container: truncated length");
        v |= static_cast<uint64_t>(c) << (8 * i);
    }
    return v;
}

void put_u32_le(std::ostream& os, uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32_le(std::istream& is) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const int c = is.get();
        if (c < 0) throw TruncatedBody("container: truncated u32");
        v |= static_cast<uint32_t>(c) << (8 * i);
    }
    return v;
}

}  // namespace

void save_bitstream(const std::string& path, const Bitstream& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write(kBitstreamMagic, 8);
    put_u64_le(os, s.bit_length);
    os.write(reinterpret_cast<const char*>(s.bytes.data()),
             static_cast<std::streamsize>(s.bytes.size()));
    if (!os) throw IoError("write failed: " + path);
}

Bitstream load_bitstream(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kBitstreamMagic, 8) != 0)
        throw ParseError("bad bitstream magic in " + path);
    Bitstream s;
    s.bit_length = get_u64_le(is);
    const uint64_t nbytes = (s.bit_length + 7) / 8;
    s.bytes.resize(nbytes);
    is.read(reinterpret_cast<char*>(s.bytes.data()),
            static_cast<std::streamsize>(nbytes));
    if (static_cast<uint64_t>(is.gcount()) != nbytes)
        throw TruncatedBody("bitstream payload short in " + path);
    return s;
}

// ---------------------------------------------------------------- PLY

namespace {

struct PlyProp {
    std::string name;
    std::string type;
    unsigned size = 0;  // bytes, 0 = unsupported/list
};

unsigned ply_type_size(const std::string& t) {
    if (t == "float" || t == "float32" || t == "int" || t == "int32" ||
        t == "uint" || t == "uint32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    if (t == "uchar" || t == "uint8" || t == "char" || t == "int8") return 1;
    if (t == "ushort" || t == "uint16" || t == "short" || t == "int16") return 2;
    return 0;
}

float get_f32_le(std::istream& is) {
    uint32_t u = get_u32_le(is);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

void put_f32_le(std::ostream& os, float f) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32_le(os, u);
}

}  // namespace

PointCloud read_ply(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);

    std::string line;
    int lineno = 0;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(is, line)) throw ParseError("unexpected end of header at line " +
                                                      std::to_string(lineno + 1));
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    next_line();
    if (line != "ply") throw ParseError("line 1: missing 'ply' magic");

    bool binary = false;
    bool have_format = false;
    struct Element {
        std::string name;
        uint64_t count = 0;
        std::vector<PlyProp> props;
    };
    std::vector<Element> elements;

    for (;;) {
        next_line();
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "comment" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt, ver;
            ss >> fmt >> ver;
            if (ver != "1.0")
                throw UnsupportedFormat("line " + std::to_string(lineno) +
                                        ": unsupported PLY version " + ver);
            if (fmt == "ascii") binary = false;
            else if (fmt == "binary_little_endian") binary = true;
            else throw UnsupportedFormat("line " + std::to_string(lineno) +
                                         ": unsupported format " + fmt);
            have_format = true;
        } else if (tok == "element") {
            Element e;
            if (!(ss >> e.name >> e.count))
                throw ParseError("line " + std::to_string(lineno) + ": bad element");
            elements.push_back(e);
        } else if (tok == "property") {
            if (elements.empty())
                throw ParseError("line " + std::to_string(lineno) + ": property before element");
            PlyProp p;
            ss >> p.type;
            if (p.type == "list") {
                // variable-length; only tolerated in elements after vertex
                p.size = 0;
                std::string rest;
                std::getline(ss, rest);
                p.name = "(list)";
            } else {
                if (!(ss >> p.name))
                    throw ParseError("line " + std::to_string(lineno) + ": bad property");
                p.size = ply_type_size(p.type);
                if (p.size == 0)
                    throw UnsupportedFormat("line " + std::to_string(lineno) +
                                            ": unsupported property type " + p.type);
            }
            elements.back().props.push_back(p);
        } else if (tok == "end_header") {
            break;
        } else {
            throw ParseError("line " + std::to_string(lineno) + ": unknown keyword " + tok);
        }
    }
    if (!have_format) throw ParseError("header missing format line");

    // locate the vertex element
    size_t vi = elements.size();
    for (size_t i = 0; i < elements.size(); ++i)
        if (elements[i].name == "vertex") vi = i;
    if (vi == elements.size()) throw ParseError("no vertex element in header");
    for (size_t i = 0; i < vi; ++i)
        for (const PlyProp& p : elements[i].props)
            if (p.size == 0)
                throw UnsupportedFormat("cannot skip list property before vertex element");

    const Element& vert = elements[vi];
    int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
    for (size_t i = 0; i < vert.props.size(); ++i) {
        const PlyProp& p = vert.props[i];
        const int idx = static_cast<int>(i);
        if (p.name == "x") ix = idx;
        else if (p.name == "y") iy = idx;
        else if (p.name == "z") iz = idx;
        else if (p.name == "red") ir = idx;
        else if (p.name == "green") ig = idx;
        else if (p.name == "blue") ib = idx;
        else std::fprintf(stderr, "read_ply: skipping property '%s'\n", p.name.c_str());
    }
    if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z");
    const bool with_color = ir >= 0 && ig >= 0 && ib >= 0;

    PointCloud cloud;
    cloud.positions.reserve(vert.count);
    if (with_color) cloud.colors.emplace();

    if (binary) {
        // skip earlier elements' bodies (fixed-size properties only)
        for (size_t i = 0; i < vi; ++i) {
            uint64_t row = 0;
            for (const PlyProp& p : elements[i].props) row += p.size;
            is.seekg(static_cast<std::streamoff>(row * elements[i].count), std::ios::cur);
        }
        for (uint64_t v = 0; v < vert.count; ++v) {
            Vec3 pos{};
            Color col{};
            for (size_t i = 0; i < vert.props.size(); ++i) {
                const PlyProp& p = vert.props[i];
                const int idx = static_cast<int>(i);
                if (idx == ix || idx == iy || idx == iz) {
                    if (p.type != "float" && p.type != "float32")
                        throw UnsupportedFormat("coordinate property must be float32");
                    const float f = get_f32_le(is);
                    if (idx == ix) pos.x = f;
                    else if (idx == iy) pos.y = f;
                    else pos.z = f;
                } else if (with_color && (idx == ir || idx == ig || idx == ib)) {
                    const int c = is.get();
                    if (c < 0) throw TruncatedBody("vertex body short");
                    if (idx == ir) col[0] = static_cast<uint8_t>(c);
                    else if (idx == ig) col[1] = static_cast<uint8_t>(c);
                    else col[2] = static_cast<uint8_t>(c);
                } else {
                    is.seekg(p.size, std::ios::cur);
                }
                if (!is) throw TruncatedBody("vertex body short");
            }
            cloud.positions.push_back(pos);
            if (with_color) cloud.colors->push_back(col);
        }
    } else {
        // skip earlier elements' bodies line by line
        for (size_t i = 0; i < vi; ++i)
            for (uint64_t r = 0; r < elements[i].count; ++r)
                if (!std::getline(is, line)) throw TruncatedBody("element body short");
        for (uint64_t v = 0; v < vert.count; ++v) {
            if (!std::getline(is, line)) throw TruncatedBody("vertex body short");
            std::istringstream ss(line);
            std::vector<std::string> toks;
            std::string t;
            while (ss >> t) toks.push_back(t);
            if (toks.size() < vert.props.size()) throw TruncatedBody("vertex line short");
            auto parse_f = [&](int idx) {
                float f;
                const std::string& s = toks[static_cast<size_t>(idx)];
                const auto r = std::from_chars(s.data(), s.data() + s.size(), f);
                if (r.ec != std::errc()) throw ParseError("bad float '" + s + "'");
                return f;
            };
            cloud.positions.push_back({parse_f(ix), parse_f(iy), parse_f(iz)});
            if (with_color) {
                auto parse_u8 = [&](int idx) {
                    int val = 0;
                    const std::string& s = toks[static_cast<size_t>(idx)];
                    const auto r = std::from_chars(s.data(), s.data() + s.size(), val);
                    if (r.ec != std::errc() || val < 0 || val > 255)
                        throw ParseError("bad color '" + s + "'");
                    return static_cast<uint8_t>(val);
                };
                cloud.colors->push_back({parse_u8(ir), parse_u8(ig), parse_u8(ib)});
            }
        }
    }
    return cloud;
}

void write_ply(const PointCloud& cloud, const std::string& path, PlyFormat format) {
    if (!cloud.valid()) throw InvalidParameter("write_ply: invalid cloud");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);

    os << "ply\n";
    os << (format == PlyFormat::ascii ? "format ascii 1.0\n"
                                      : "format binary_little_endian 1.0\n");
    os << "element vertex " << cloud.count() << "\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    if (cloud.has_colors())
        os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    os << "end_header\n";

    for (size_t i = 0; i < cloud.count(); ++i) {
        const Vec3& p = cloud.positions[i];
        const float fx = static_cast<float>(p.x);
        const float fy = static_cast<float>(p.y);
        const float fz = static_cast<float>(p.z);
        if (format == PlyFormat::ascii) {
            os << fmt_float(fx) << ' ' << fmt_float(fy) << ' ' << fmt_float(fz);
            if (cloud.has_colors()) {
                const Color& c = (*cloud.colors)[i];
                os << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2]);
            }
            os << '\n';
        } else {
            put_f32_le(os, fx);
            put_f32_le(os, fy);
            put_f32_le(os, fz);
            if (cloud.has_colors()) {
                const Color& c = (*cloud.colors)[i];
                os.put(static_cast<char>(c[0]));
                os.put(static_cast<char>(c[1]));
                os.put(static_cast<char>(c[2]));
            }
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

// ------------------------------------------------------------- weight files

namespace {
constexpr char kWeightsMagic[8] = {'H', 'P', 'S', 'W', '0', '0', '0', '1'};
}

void apply_layer(const DenseLayer& l, const double* in, double* out) {
    for (uint32_t r = 0; r < l.rows; ++r) {
        double acc = r < l.b.size() ? double(l.b[r]) : 0.0;
        const float* wrow = l.w.data() + size_t(r) * l.cols;
        for (uint32_t c = 0; c < l.cols; ++c) acc += double(wrow[c]) * in[c];
        out[r] = acc;
    }
}

void write_weights_file(const std::string& path, uint32_t mlp_layers,
                        const std::vector<DenseLayer>& layers) {
    if (mlp_layers > layers.size())
        throw InvalidParameter("write_weights_file: mlp_layers > layer count");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write(kWeightsMagic, 8);
    put_u32_le(os, static_cast<uint32_t>(layers.size()));
    put_u32_le(os, mlp_layers);
    for (const DenseLayer& l : layers) {
        if (l.w.size() != size_t(l.rows) * l.cols || l.b.size() != l.rows)
            throw WeightShapeError("write_weights_file: inconsistent layer shape");
        put_u32_le(os, l.rows);
        put_u32_le(os, l.cols);
        for (float f : l.w) put_f32_le(os, f);
        for (float f : l.b) put_f32_le(os, f);
    }
    if (!os) throw IoError("write failed: " + path);
}

std::pair<uint32_t, std::vector<DenseLayer>> read_weights_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kWeightsMagic, 8) != 0)
        throw ParseError("bad weights magic in " + path);
    const uint32_t total = get_u32_le(is);
    const uint32_t mlp = get_u32_le(is);
    if (mlp > total) throw ParseError("weights: mlp layer count exceeds total");
    std::vector<DenseLayer> layers(total);
    for (DenseLayer& l : layers) {
        l.rows = get_u32_le(is);
        l.cols = get_u32_le(is);
        if (l.rows == 0 || l.cols == 0 || uint64_t(l.rows) * l.cols > (1u << 26))
            throw ParseError("weights: implausible layer shape");
        l.w.resize(size_t(l.rows) * l.cols);
        for (float& f : l.w) f = get_f32_le(is);
        l.b.resize(l.rows);
        for (float& f : l.b) f = get_f32_le(is);
    }
    return {mlp, std::move(layers)};
}

}  // namespace hvc
