#pragma once

// SHA-256 (OpenSSL backed), digests, and the keyed counter PRNG used for all
// deterministic randomness (synthetic weights, test frames, blinding rows).

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "tdx/errors.hpp"

namespace tdx {

using Digest = std::array<uint8_t, 32>;

/// Identifier written into key and proof headers for the transcript hash.
inline constexpr uint8_t kHashIdSha256 = 0x01;

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw Error("sha256: EVP init failed");
    }

    Sha256& update(std::span<const uint8_t> data) {
        if (!data.empty()) EVP_DigestUpdate(ctx_.get(), data.data(), data.size());
        return *this;
    }
    Sha256& update(std::string_view s) {
        return update(std::span(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
    }
    Sha256& update_u64(uint64_t v) {
        std::array<uint8_t, 8> b{};
        for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
        return update(b);
    }

    Digest finish() {
        Digest out{};
        unsigned len = 0;
        EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Digest sha256(std::span<const uint8_t> data) {
    Digest out{};
    unsigned len = 0;
    EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr);
    return out;
}

/// Two-to-one compression for Merkle nodes.
inline Digest hash_pair(const Digest& l, const Digest& r) {
    std::array<uint8_t, 64> buf{};
    std::copy(l.begin(), l.end(), buf.begin());
    std::copy(r.begin(), r.end(), buf.begin() + 32);
    return sha256(buf);
}

inline std::string to_hex(std::span<const uint8_t> d) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    s.reserve(d.size() * 2);
    for (uint8_t b : d) {
        s.push_back(kDigits[b >> 4]);
        s.push_back(kDigits[b & 15]);
    }
    return s;
}

/// Keyed counter PRNG: block i = SHA-256(domain || key || i), consumed as
/// little-endian 64-bit words. Output depends only on (domain, key).
class CounterRng {
public:
    CounterRng(std::string_view domain, uint64_t key) : domain_(domain), key_(key) {}

    uint64_t next_u64() {
        if (pos_ == 4) refill();
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(block_[pos_ * 8 + i]) << (8 * i);
        ++pos_;
        return v;
    }

    /// Uniform integer in [lo, hi] by rejection.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<int64_t>(next_u64());
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v;
        do v = next_u64(); while (v >= limit);
        return lo + static_cast<int64_t>(v % span);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    void refill() {
        block_ = Sha256().update(domain_).update_u64(key_).update_u64(counter_++).finish();
        pos_ = 0;
    }

    std::string domain_;
    uint64_t key_;
    uint64_t counter_ = 0;
    Digest block_{};
    unsigned pos_ = 4;
};

} // namespace tdx
