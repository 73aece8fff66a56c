#pragma once
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "cfcml/errors.hpp"

namespace cfcml {

// Dense nd-array, row-major, double precision in memory. On disk it is a
// TensorBlob (float32), see below.
struct NdArray {
    std::vector<int> dims;
    std::vector<double> v;

    NdArray() = default;
    explicit NdArray(std::vector<int> d) : dims(std::move(d)) {
        v.assign(count(), 0.0);
    }

    std::size_t count() const {
        std::size_t n = 1;
        for (int d : dims) n *= static_cast<std::size_t>(d);
        return n;
    }
    int rank() const { return static_cast<int>(dims.size()); }
    bool same_dims(const NdArray& o) const { return dims == o.dims; }
};

// TensorBlob binary format:
//   bytes 0..3   magic "CFT1"
//   byte  4      dtype code, 1 = float32 little-endian
//   byte  5      rank
//   then rank * uint32 little-endian dims
//   then product(dims) float32 little-endian values, row-major
namespace blob {

inline constexpr char kMagic[4] = {'C', 'F', 'T', '1'};
inline constexpr std::uint8_t kDtypeF32 = 1;

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
    out.push_back(static_cast<std::uint8_t>(x & 0xff));
    out.push_back(static_cast<std::uint8_t>((x >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((x >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((x >> 24) & 0xff));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::vector<std::uint8_t> encode(const NdArray& t) {
    if (t.dims.empty()) throw CorruptBlob("tensor blob requires rank >= 1");
    std::vector<std::uint8_t> out;
    out.reserve(6 + 4 * t.dims.size() + 4 * t.count());
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kDtypeF32);
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (int d : t.dims) {
        if (d <= 0) throw CorruptBlob("tensor blob dims must be positive");
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (double x : t.v) {
        float f = static_cast<float>(x);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
    return out;
}

inline NdArray decode(const std::vector<std::uint8_t>& bytes, const std::string& what = "blob") {
    if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw CorruptBlob(what + ": bad magic");
    if (bytes[4] != kDtypeF32) throw CorruptBlob(what + ": unsupported dtype code");
    const int rank = bytes[5];
    if (rank < 1) throw CorruptBlob(what + ": rank must be >= 1");
    if (bytes.size() < 6 + 4 * static_cast<std::size_t>(rank))
        throw CorruptBlob(what + ": truncated header");
    NdArray t;
    std::size_t n = 1;
    for (int i = 0; i < rank; ++i) {
        std::uint32_t d = get_u32(bytes.data() + 6 + 4 * i);
        if (d == 0) throw CorruptBlob(what + ": zero dimension");
        t.dims.push_back(static_cast<int>(d));
        n *= d;
    }
    const std::size_t expect = 6 + 4 * static_cast<std::size_t>(rank) + 4 * n;
    if (bytes.size() != expect) throw CorruptBlob(what + ": payload length mismatch");
    t.v.resize(n);
    const std::uint8_t* p = bytes.data() + 6 + 4 * rank;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = get_u32(p + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        t.v[i] = static_cast<double>(f);
    }
    return t;
}

inline void write_file(const std::filesystem::path& path, const NdArray& t) {
    auto bytes = encode(t);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

inline NdArray read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for read: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    return decode(bytes, path.filename().string());
}

}  // namespace blob
}  // namespace cfcml
