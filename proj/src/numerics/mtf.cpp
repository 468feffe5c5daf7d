// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/numerics/mtf.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace MONOSPLAT_NS {

static_assert(std::endian::native == std::endian::little, "MTF I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'S', 'T', 'F'};

template <typename T> void put(std::vector<std::uint8_t> &out, T v) {
    const auto *p = reinterpret_cast<const std::uint8_t *>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T> T get(std::span<const std::uint8_t> bytes, std::size_t &off) {
    if (off + sizeof(T) > bytes.size()) {
        throw FormatError("MTF: truncated header");
    }
    T v;
    std::memcpy(&v, bytes.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

} // namespace

std::vector<std::uint8_t> encode_mtf(const Tensor &t) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + 8 * t.shape().size() + 4 * static_cast<std::size_t>(t.size()));
    out.insert(out.end(), kMagic, kMagic + 4);
    put<std::uint32_t>(out, kMtfVersion);
    put<std::uint32_t>(out, kMtfDtypeF32);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) {
        put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    }
    const std::vector<float> narrow(t.data(), t.data() + t.size());
    const auto *p = reinterpret_cast<const std::uint8_t *>(narrow.data());
    out.insert(out.end(), p, p + narrow.size() * sizeof(float));
    return out;
}

Tensor decode_mtf(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("MTF: bad magic");
    }
    std::size_t off = 4;
    const auto version = get<std::uint32_t>(bytes, off);
    if (version != kMtfVersion) {
        throw FormatError("MTF: unsupported version " + std::to_string(version));
    }
    const auto dtype = get<std::uint32_t>(bytes, off);
    if (dtype != kMtfDtypeF32) {
        throw FormatError("MTF: unsupported dtype " + std::to_string(dtype));
    }
    const auto rank = get<std::uint32_t>(bytes, off);
    if (rank > 16) {
        throw FormatError("MTF: implausible rank " + std::to_string(rank));
    }
    Shape shape;
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const auto d = get<std::uint64_t>(bytes, off);
        if (d > (1ull << 40)) {
            throw FormatError("MTF: implausible extent");
        }
        shape.push_back(static_cast<std::int64_t>(d));
        count *= d;
    }
    if (bytes.size() - off != count * sizeof(float)) {
        throw FormatError("MTF: payload length does not match shape " + to_string(shape));
    }
    std::vector<float> data(count);
    std::memcpy(data.data(), bytes.data() + off, count * sizeof(float));
    return Tensor(std::move(shape), std::vector<Real>(data.begin(), data.end()));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_mtf(const std::filesystem::path &path, const Tensor &t) { write_file_bytes(path, encode_mtf(t)); }

Tensor read_mtf(const std::filesystem::path &path) { return decode_mtf(read_file_bytes(path)); }

} // namespace monosplat
