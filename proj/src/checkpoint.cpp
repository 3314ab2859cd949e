// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ctxtrack {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
  public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

  private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated");
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const NamedTensors& entries) {
    std::vector<std::uint8_t> out{'L', 'M', 'T', 'K'};
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put<std::uint8_t>(out, 0);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
        for (Scalar v : t.data()) put<float>(out, static_cast<float>(v));
    }
    return out;
}

NamedTensors decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.str(4) != "LMTK") throw IoError("checkpoint: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>();
    NamedTensors entries;
    for (std::uint32_t e = 0; e < count; ++e) {
        const auto len = r.get<std::uint32_t>();
        std::string name = r.str(len);
        const auto dtype = r.get<std::uint8_t>();
        const auto rank = r.get<std::uint32_t>();
        Shape shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::int64_t>(r.get<std::uint64_t>()));
        const auto n = numel_of(shape);
        std::vector<Scalar> data(static_cast<std::size_t>(n));
        if (dtype == 0) {
            for (auto& v : data) v = static_cast<Scalar>(r.get<float>());
        } else if (dtype == 1) {
            for (auto& v : data) v = static_cast<Scalar>(r.get<double>());
        } else {
            throw IoError("checkpoint: unknown dtype code " + std::to_string(dtype) + " for " + name);
        }
        entries.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (!r.done()) throw IoError("checkpoint: trailing bytes");
    return entries;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& entries) {
    const auto bytes = encode_checkpoint(entries);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace ctxtrack
