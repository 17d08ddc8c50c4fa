#pragma once

// Little-endian primitives shared by the NACT and NEMB formats, plus the
// temp-file + rename helper used for every artifact write.

#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <unistd.h>

#include "neuronscope/error.hpp"

namespace neuronscope::binio {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_big(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

class Writer {
public:
    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T v) {
        v = byteswap_if_big(v);
        buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    void put_string(std::string_view s) {
        put(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }

    void put_raw(std::string_view s) { buf_.append(s); }

    const std::string& bytes() const { return buf_; }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return byteswap_if_big(v);
    }

    std::string get_string() {
        const auto n = get<std::uint32_t>();
        return std::string(get_raw(n));
    }

    std::string_view get_raw(std::size_t n) {
        need(n);
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n)
            throw DataError(what_ + ": truncated at byte " + std::to_string(pos_) + " (need " +
                            std::to_string(n) + ", have " + std::to_string(bytes_.size() - pos_) + ")");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

// Writes to a unique sibling temp file then renames over path.
inline void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
    static std::atomic<std::uint64_t> counter{0};
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw DataError("rename failed for " + path.string());
    }
}

} // namespace neuronscope::binio
