#include "freak/frk_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "freak/error.hpp"

namespace freak::frk {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                                static_cast<unsigned char>((v >> 8) & 0xFF),
                                static_cast<unsigned char>((v >> 16) & 0xFF),
                                static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& origin) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("truncated file: " + origin);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    put_u32(os, std::bit_cast<uint32_t>(v));
}

std::string get_string(std::istream& is, const std::string& origin) {
    const uint32_t len = get_u32(is, origin);
    std::string s(len, '\0');
    if (len && !is.read(s.data(), len)) throw FormatError("truncated file: " + origin);
    return s;
}

void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace

void write_array(std::ostream& os, const Tensor<float>& t) {
    os.write("FRK1", 4);
    put_u32(os, static_cast<uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) put_u32(os, static_cast<uint32_t>(t.dim(i)));
    for (int64_t i = 0; i < t.numel(); ++i) put_f32(os, t[i]);
}

Tensor<float> read_array(std::istream& is, const std::string& origin) {
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("truncated file: " + origin);
    if (std::memcmp(magic, "FRK1", 4) != 0)
        throw FormatError("bad magic (expected FRK1): " + origin);
    const uint32_t rank = get_u32(is, origin);
    if (rank > 8) throw FormatError("implausible rank " + std::to_string(rank) + ": " + origin);
    std::vector<int> dims(rank);
    int64_t n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        const uint32_t d = get_u32(is, origin);
        if (d > static_cast<uint32_t>(std::numeric_limits<int>::max()))
            throw FormatError("dimension overflow: " + origin);
        dims[i] = static_cast<int>(d);
        n *= dims[i];
    }
    Tensor<float> t(dims);
    for (int64_t i = 0; i < n; ++i) t[i] = std::bit_cast<float>(get_u32(is, origin));
    return t;
}

void save_array_file(const std::string& path, const Tensor<float>& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    write_array(os, t);
    if (!os) throw IoError("write failed: " + path);
}

Tensor<float> load_array_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    return read_array(is, path);
}

void save_checkpoint(const std::string& path, const std::string& config_text,
                     const std::vector<NamedArray>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os.write("FRKC", 4);
    put_u32(os, 1);  // container version
    put_string(os, config_text);
    put_u32(os, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
        put_string(os, p.name);
        write_array(os, p.data);
    }
    if (!os) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("truncated file: " + path);
    if (std::memcmp(magic, "FRKC", 4) != 0)
        throw FormatError("bad magic (expected FRKC): " + path);
    const uint32_t version = get_u32(is, path);
    if (version != 1) throw FormatError("unsupported checkpoint version: " + path);
    Checkpoint ckpt;
    ckpt.config_text = get_string(is, path);
    const uint32_t count = get_u32(is, path);
    ckpt.params.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = get_string(is, path);
        a.data = read_array(is, path);
        ckpt.params.push_back(std::move(a));
    }
    return ckpt;
}

}  // namespace freak::frk
