// SPDX-License-Identifier: Apache-2.0
#include "augal/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "augal/errors.hpp"

namespace augal {

namespace {

constexpr std::uint8_t kMagic[4] = {'A', 'G', 'A', 'L'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + 4);
}

void put_f64(std::vector<std::uint8_t>& out, const double* v, std::size_t n) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v);
    out.insert(out.end(), p, p + 8 * n);
}

struct Reader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    std::uint32_t u32() {
        if (pos + 4 > bytes.size())
            throw FormatError("checkpoint truncated at byte offset " +
                              std::to_string(pos));
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return v;
    }
    void f64s(double* dst, std::size_t n) {
        if (pos + 8 * n > bytes.size())
            throw FormatError("checkpoint truncated at byte offset " +
                              std::to_string(pos));
        std::memcpy(dst, bytes.data() + pos, 8 * n);
        pos += 8 * n;
    }
};

}  // namespace

std::vector<std::uint8_t> serialize_tensors(const std::vector<Tensor>& tensors) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor& t : tensors) {
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        put_f64(out, t.data().data(), t.size());
    }
    return out;
}

std::vector<std::pair<std::vector<std::size_t>, std::vector<double>>> parse_checkpoint(
    const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic at byte offset 0");
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version " +
                          std::to_string(version) + " at byte offset 4");
    const std::uint32_t count = r.u32();
    std::vector<std::pair<std::vector<std::size_t>, std::vector<double>>> out;
    out.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint32_t rank = r.u32();
        std::vector<std::size_t> shape(rank);
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = r.u32();
            n *= shape[d];
        }
        std::vector<double> data(n);
        r.f64s(data.data(), n);
        out.emplace_back(std::move(shape), std::move(data));
    }
    if (r.pos != bytes.size())
        throw FormatError("checkpoint: " + std::to_string(bytes.size() - r.pos) +
                          " trailing bytes at byte offset " + std::to_string(r.pos));
    return out;
}

void restore_tensors(std::vector<Tensor>& tensors,
                     const std::vector<std::uint8_t>& bytes) {
    auto parsed = parse_checkpoint(bytes);
    if (parsed.size() != tensors.size())
        throw FormatError("checkpoint: tensor count " + std::to_string(parsed.size()) +
                          " does not match target " + std::to_string(tensors.size()));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (parsed[i].first != tensors[i].shape())
            throw FormatError("checkpoint: tensor " + std::to_string(i) + " shape " +
                              shape_str(parsed[i].first) + " does not match target " +
                              shape_str(tensors[i].shape()));
        tensors[i].data() = std::move(parsed[i].second);
    }
}

}  // namespace augal
