#include "nom/serialize.hpp"

#include "nom/error.hpp"

#include <bit>
#include <cstring>

namespace nom {

namespace {

constexpr char network_magic[8] = {'N', 'O', 'M', 'N', 'E', 'T', '\0', '\0'};

std::string_view connectivity_name(Connectivity c)
{
    return c == Connectivity::diagonal ? "diagonal" : "dense";
}

Connectivity connectivity_from_name(const std::string& name)
{
    if (name == "dense") return Connectivity::dense;
    if (name == "diagonal") return Connectivity::diagonal;
    throw FormatError("unknown connectivity '" + name + "'");
}

} // namespace

void ByteWriter::u32(std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s)
{
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) const
{
    if (bytes_.size() - pos_ < n) throw FormatError("truncated payload");
}

std::uint8_t ByteReader::u8()
{
    need(1);
    return bytes_[pos_++];
}

std::uint32_t ByteReader::u32()
{
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

std::uint64_t ByteReader::u64()
{
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str()
{
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n)
{
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
}

std::vector<std::uint8_t> save(const Network& net)
{
    ByteWriter w;
    for (char c : network_magic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(network_format_version);
    w.u32(static_cast<std::uint32_t>(net.layer_count()));
    for (const Layer& l : net.layers()) {
        w.u64(l.in_dim());
        w.u64(l.out_dim());
        w.str(connectivity_name(l.connectivity()));
        for (const Activation& a : l.activations()) {
            w.str(to_string(a.kind));
            w.f64(a.c);
        }
        for (double p : l.parameters()) w.f64(p);
        for (std::uint8_t t : l.trainable_mask()) w.u8(t);
    }
    return w.take();
}

Network load(std::span<const std::uint8_t> bytes)
{
    ByteReader r(bytes);
    const auto magic = r.raw(sizeof network_magic);
    if (std::memcmp(magic.data(), network_magic, sizeof network_magic) != 0) {
        throw FormatError("not a network model file");
    }
    const std::uint32_t version = r.u32();
    if (version != network_format_version) {
        throw FormatError("unsupported network format version " + std::to_string(version));
    }
    const std::uint32_t n_layers = r.u32();
    std::vector<Layer> layers;
    layers.reserve(n_layers);
    for (std::uint32_t k = 0; k < n_layers; ++k) {
        const std::uint64_t in = r.u64();
        const std::uint64_t out = r.u64();
        // Guard against absurd sizes before allocating.
        if (in == 0 || out == 0 || in > (1u << 20) || out > (1u << 20)) {
            throw FormatError("invalid layer shape");
        }
        const Connectivity conn = connectivity_from_name(r.str());
        std::vector<Activation> acts;
        acts.reserve(out);
        for (std::uint64_t o = 0; o < out; ++o) {
            const std::string name = r.str();
            Activation a;
            a.kind = activation_kind_from_string(name);
            a.c = r.f64();
            acts.push_back(a);
        }
        const std::size_t n = out * in + out;
        std::vector<double> params(n);
        for (auto& p : params) p = r.f64();
        std::vector<std::uint8_t> mask(n);
        for (auto& t : mask) {
            t = r.u8();
            if (t > 1) throw FormatError("invalid trainable flag");
        }
        try {
            layers.emplace_back(in, out, conn, std::move(params), std::move(mask), std::move(acts));
        } catch (const FormatError&) {
            throw;
        } catch (const Error& e) {
            throw FormatError(e.what());
        }
    }
    if (!r.done()) throw FormatError("trailing bytes after network payload");
    try {
        return Network(std::move(layers));
    } catch (const Error& e) {
        throw FormatError(e.what());
    }
}

} // namespace nom
