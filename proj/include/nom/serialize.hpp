#pragma once

#include "nom/network.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nom {

/// Model file format, version 1. All integers and floats are little-endian;
/// floats are IEEE-754 binary64 stored bit-for-bit.
///
///   magic        8 bytes  "NOMNET\0\0"
///   version      u32
///   layer count  u32
///   per layer:
///     in_dim, out_dim           u64, u64
///     connectivity              str ("dense" | "diagonal")
///     per neuron: activation    str (e.g. "tanh"), c as f64
///     parameters                f64 x (out*in + out)
///     trainable flags           u8  x (out*in + out)
///
/// `str` is a u32 byte length followed by the bytes.
inline constexpr std::uint32_t network_format_version = 1;

std::vector<std::uint8_t> save(const Network& net);
/// Throws FormatError on a bad magic, version mismatch, truncation,
/// trailing bytes or an unknown activation / connectivity name.
Network load(std::span<const std::uint8_t> bytes);

/// Little-endian byte sink shared by the container formats.
class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void str(std::string_view s);
    void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Little-endian byte source; every read throws FormatError when the payload
/// is exhausted.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string str();
    std::span<const std::uint8_t> raw(std::size_t n);
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const;
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace nom
