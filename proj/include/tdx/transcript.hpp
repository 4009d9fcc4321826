#pragma once

// Fiat-Shamir transcript: a SHA-256 hash chain. Every absorb and every
// squeeze replaces the state, so each challenge depends on the full history.
//
//   absorb:  state = H(0x01 | state | u64 |label| | label | u64 |data| | data)
//   squeeze: state = H(0x02 | state | u64 |label| | label | u64 counter)
//            candidate = first 8 bytes of state (LE), rejected if >= p

#include <span>
#include <string_view>
#include <vector>

#include "tdx/bytes.hpp"
#include "tdx/field.hpp"
#include "tdx/hash.hpp"

namespace tdx {

class Transcript {
public:
    explicit Transcript(std::string_view domain) { absorb("domain", std::span(reinterpret_cast<const uint8_t*>(domain.data()), domain.size())); }

    void absorb(std::string_view label, std::span<const uint8_t> data) {
        Sha256 h;
        const uint8_t op = 0x01;
        h.update(std::span(&op, 1));
        h.update(state_);
        h.update_u64(label.size());
        h.update(label);
        h.update_u64(data.size());
        h.update(data);
        state_ = h.finish();
    }
    void absorb(std::string_view label, const Digest& d) { absorb(label, std::span<const uint8_t>(d)); }
    void absorb(std::string_view label, std::span<const Fp2> xs) {
        ByteWriter w;
        for (const auto& x : xs) w.fp2(x);
        absorb(label, std::span<const uint8_t>(w.data()));
    }
    void absorb(std::string_view label, Fp2 x) { absorb(label, std::span<const Fp2>(&x, 1)); }

    Fp challenge_fp(std::string_view label) {
        for (;;) {
            const uint64_t v = squeeze(label);
            if (v < Fp::kModulus) return Fp(v);
        }
    }
    Fp2 challenge_ext(std::string_view label) {
        const Fp a = challenge_fp(label);
        return {a, challenge_fp(label)};
    }
    std::vector<Fp2> challenge_point(std::string_view label, size_t n) {
        std::vector<Fp2> p(n);
        for (auto& x : p) x = challenge_ext(label);
        return p;
    }
    /// Uniform index in [0, n).
    uint64_t challenge_index(std::string_view label, uint64_t n) {
        const uint64_t limit = n ? UINT64_MAX - (UINT64_MAX % n) : 0;
        for (;;) {
            const uint64_t v = squeeze(label);
            if (v < limit) return v % n;
        }
    }

    const Digest& state() const { return state_; }

private:
    uint64_t squeeze(std::string_view label) {
        Sha256 h;
        const uint8_t op = 0x02;
        h.update(std::span(&op, 1));
        h.update(state_);
        h.update_u64(label.size());
        h.update(label);
        h.update_u64(counter_++);
        state_ = h.finish();
        uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | state_[static_cast<size_t>(i)];
        return v;
    }

    Digest state_{};
    uint64_t counter_ = 0;
};

} // namespace tdx
