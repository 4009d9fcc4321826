#pragma once

// Little-endian byte writer/reader shared by every on-disk and wire format.
// The reader is bounds-checked and reports truncation as FormatError.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tdx/errors.hpp"
#include "tdx/field.hpp"
#include "tdx/hash.hpp"

namespace tdx {

using Bytes = std::vector<uint8_t>;

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v) { le(v, 2); }
    void u32(uint32_t v) { le(v, 4); }
    void u64(uint64_t v) { le(v, 8); }
    void i32(int32_t v) { le(static_cast<uint32_t>(v), 4); }
    void bytes(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void tag(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void digest(const Digest& d) { bytes(d); }
    void fp(Fp x) { u64(x.value()); }
    void fp2(Fp2 x) {
        fp(x.c0());
        fp(x.c1());
    }
    /// u32 length prefix followed by the raw bytes.
    void blob(std::span<const uint8_t> b) {
        u32(static_cast<uint32_t>(b.size()));
        bytes(b);
    }

    const Bytes& data() const& { return buf_; }
    Bytes take() && { return std::move(buf_); }
    size_t size() const { return buf_.size(); }

private:
    void le(uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    Bytes buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> b) : b_(b) {}

    uint8_t u8() { return static_cast<uint8_t>(le(1)); }
    uint16_t u16() { return static_cast<uint16_t>(le(2)); }
    uint32_t u32() { return static_cast<uint32_t>(le(4)); }
    uint64_t u64() { return le(8); }
    int32_t i32() { return static_cast<int32_t>(static_cast<uint32_t>(le(4))); }

    std::span<const uint8_t> bytes(size_t n) {
        need(n);
        auto s = b_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    void expect_tag(std::string_view s, const char* what) {
        auto got = bytes(s.size());
        if (!std::equal(got.begin(), got.end(), s.begin())) throw FormatError(std::string(what) + ": bad magic");
    }
    Digest digest() {
        Digest d{};
        auto s = bytes(32);
        std::copy(s.begin(), s.end(), d.begin());
        return d;
    }
    Fp fp() {
        const uint64_t v = u64();
        if (v >= Fp::kModulus) throw FormatError("non-canonical field element");
        return Fp(v);
    }
    Fp2 fp2() {
        const Fp a = fp();
        return {a, fp()};
    }
    std::span<const uint8_t> blob() { return bytes(u32()); }

    /// Reads a u32 count and checks it against a caller-supplied ceiling
    /// and the bytes still available (each element needs at least min_elem bytes).
    size_t count(size_t max, size_t min_elem = 1) {
        const size_t n = u32();
        if (n > max || n * min_elem > remaining()) throw FormatError("count out of range");
        return n;
    }

    size_t remaining() const { return b_.size() - pos_; }
    size_t position() const { return pos_; }
    void expect_end(const char* what) const {
        if (remaining() != 0) throw FormatError(std::string(what) + ": trailing bytes");
    }

private:
    void need(size_t n) const {
        if (n > remaining()) throw FormatError("truncated input");
    }
    uint64_t le(int n) {
        need(static_cast<size_t>(n));
        uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += static_cast<size_t>(n);
        return v;
    }

    std::span<const uint8_t> b_;
    size_t pos_ = 0;
};

} // namespace tdx
