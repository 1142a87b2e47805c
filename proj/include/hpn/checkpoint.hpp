#pragma once

// Flat parameter container: named tensors (shape + row-major 64-bit values)
// plus one free-form text block, typically the JSON model/train config.
//
// Byte layout, version 1, little-endian:
//   magic   8 bytes  "HPNTNSR1"
//   u64     config text length, then that many bytes
//   u64     entry count
//   entry:  u64 name length, name bytes,
//           u32 ndims, ndims x u64 dims,
//           product(dims) x f64 values

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hpn/tensor.hpp"

namespace hpn {

struct CheckpointEntry {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> values;
};

struct Checkpoint {
    std::string config_text;
    std::vector<CheckpointEntry> entries;

    const CheckpointEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'H', 'P', 'N', 'T', 'N', 'S', 'R', '1'};

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(os, bits);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline double read_f64(std::istream& is) {
    const std::uint64_t bits = read_u64(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    os.write(detail::kCheckpointMagic, 8);
    detail::write_u64(os, ck.config_text.size());
    os.write(ck.config_text.data(), static_cast<std::streamsize>(ck.config_text.size()));
    detail::write_u64(os, ck.entries.size());
    for (const auto& e : ck.entries) {
        detail::write_u64(os, e.name.size());
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        detail::write_u32(os, static_cast<std::uint32_t>(e.dims.size()));
        std::uint64_t count = 1;
        for (std::uint64_t d : e.dims) {
            detail::write_u64(os, d);
            count *= d;
        }
        if (count != e.values.size())
            throw std::invalid_argument("checkpoint: entry '" + e.name +
                                        "' has dims inconsistent with value count");
        for (double v : e.values) detail::write_f64(os, v);
    }
    if (!os) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
        throw std::runtime_error("checkpoint: '" + path + "' is not a version-1 parameter file");
    Checkpoint ck;
    const std::uint64_t cfg_len = detail::read_u64(is);
    ck.config_text.resize(cfg_len);
    if (cfg_len > 0) {
        is.read(ck.config_text.data(), static_cast<std::streamsize>(cfg_len));
        if (!is) throw std::runtime_error("checkpoint: truncated config block");
    }
    const std::uint64_t n_entries = detail::read_u64(is);
    ck.entries.reserve(n_entries);
    for (std::uint64_t i = 0; i < n_entries; ++i) {
        CheckpointEntry e;
        const std::uint64_t name_len = detail::read_u64(is);
        e.name.resize(name_len);
        is.read(e.name.data(), static_cast<std::streamsize>(name_len));
        if (!is) throw std::runtime_error("checkpoint: truncated entry name");
        const std::uint32_t ndims = detail::read_u32(is);
        std::uint64_t count = 1;
        for (std::uint32_t d = 0; d < ndims; ++d) {
            e.dims.push_back(detail::read_u64(is));
            count *= e.dims.back();
        }
        e.values.resize(count);
        for (std::uint64_t k = 0; k < count; ++k) e.values[k] = detail::read_f64(is);
        ck.entries.push_back(std::move(e));
    }
    return ck;
}

inline CheckpointEntry entry_from_tensor(const std::string& name, const Tensor& t) {
    return CheckpointEntry{name,
                           {static_cast<std::uint64_t>(t.rows()), static_cast<std::uint64_t>(t.cols())},
                           t.values()};
}

inline CheckpointEntry entry_from_values(const std::string& name, const std::vector<double>& v) {
    return CheckpointEntry{name, {static_cast<std::uint64_t>(v.size())}, v};
}

}  // namespace hpn
