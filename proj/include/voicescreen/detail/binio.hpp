#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <string>
#include <vector>

#include "voicescreen/error.hpp"

namespace voicescreen::detail {

// Explicit little-endian primitives; file formats are LE by contract
// regardless of host order.

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size)
        : data_(data), size_(size) {}

    std::size_t remaining() const { return size_ - pos_; }
    std::size_t position() const { return pos_; }

    void require(std::size_t n, const char* what) const {
        if (remaining() < n)
            throw DataError(std::string("truncated input while reading ") + what);
    }

    std::uint32_t u32(const char* what = "u32") {
        require(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64(const char* what = "u64") {
        require(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64(const char* what = "f64") {
        return std::bit_cast<double>(u64(what));
    }

    void bytes(void* dst, std::size_t n, const char* what = "bytes") {
        require(n, what);
        std::memcpy(dst, data_ + pos_, n);
        pos_ += n;
    }

    void skip(std::size_t n, const char* what = "skip") {
        require(n, what);
        pos_ += n;
    }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

} // namespace voicescreen::detail
