#pragma once

// TDXP wire messages.
//
// frame: "TDXP" | u8 version | u8 type | u32 payload length (big-endian) | payload
// Payload fields are little-endian like every other format in the library.
//
//   1 HELLO          u8 proto_version | model digest
//   2 HELLO_ACK      u8 accepted | vk digest
//   3 VK_REQUEST     (empty)
//   4 VK_RESPONSE    vk bytes
//   5 PROOF_SUBMIT   u64 frame_id | u32 statement length | statement | proof
//   6 VERIFY_RESULT  u64 frame_id | u8 accepted | u64 verify_micros
//   7 ERROR          u16 code | UTF-8 detail

#include <array>
#include <string>
#include <variant>

#include "tdx/bytes.hpp"
#include "tdx/errors.hpp"
#include "tdx/hash.hpp"

namespace tdx {

inline constexpr uint8_t kProtoVersion = 1;
inline constexpr size_t kHeaderSize = 10;
inline constexpr size_t kMaxPayload = size_t{16} << 20;

enum class MsgType : uint8_t { Hello = 1, HelloAck, VkRequest, VkResponse, ProofSubmit, VerifyResult, Error };

enum class ErrorCode : uint16_t { BadMessage = 1, Unexpected = 2, Replay = 3, Version = 4, DigestMismatch = 5 };

struct Hello {
    uint8_t proto_version = kProtoVersion;
    Digest model_digest{};
    friend bool operator==(const Hello&, const Hello&) = default;
};
struct HelloAck {
    bool accepted = false;
    Digest vk_digest{};
    friend bool operator==(const HelloAck&, const HelloAck&) = default;
};
struct VkRequest {
    friend bool operator==(const VkRequest&, const VkRequest&) = default;
};
struct VkResponse {
    Bytes vk;
    friend bool operator==(const VkResponse&, const VkResponse&) = default;
};
struct ProofSubmit {
    uint64_t frame_id = 0;
    Bytes statement, proof;
    friend bool operator==(const ProofSubmit&, const ProofSubmit&) = default;
};
struct VerifyResult {
    uint64_t frame_id = 0;
    bool accepted = false;
    uint64_t verify_micros = 0;
    friend bool operator==(const VerifyResult&, const VerifyResult&) = default;
};
struct ErrorMsg {
    uint16_t code = 0;
    std::string detail;
    friend bool operator==(const ErrorMsg&, const ErrorMsg&) = default;
};

// Alternative order matches MsgType - 1.
using Message = std::variant<Hello, HelloAck, VkRequest, VkResponse, ProofSubmit, VerifyResult, ErrorMsg>;

inline MsgType type_of(const Message& m) { return static_cast<MsgType>(m.index() + 1); }

inline const char* type_name(MsgType t) {
    static constexpr std::array<const char*, 7> names{"HELLO", "HELLO_ACK", "VK_REQUEST", "VK_RESPONSE", "PROOF_SUBMIT", "VERIFY_RESULT", "ERROR"};
    const auto i = static_cast<size_t>(t);
    return i >= 1 && i <= names.size() ? names[i - 1] : "UNKNOWN";
}

inline bool valid_utf8(std::string_view s) {
    size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<uint8_t>(s[i]);
        size_t n;
        uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            n = 1;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            n = 2;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            n = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + n >= s.size()) return false;
        for (size_t k = 1; k <= n; ++k) {
            const auto d = static_cast<uint8_t>(s[i + k]);
            if ((d & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (d & 0x3f);
        }
        static constexpr uint32_t min_cp[] = {0, 0x80, 0x800, 0x10000};
        if (cp < min_cp[n] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
        i += n + 1;
    }
    return true;
}

inline Bytes encode_payload(const Message& m) {
    ByteWriter w;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Hello>) {
                w.u8(v.proto_version);
                w.digest(v.model_digest);
            } else if constexpr (std::is_same_v<T, HelloAck>) {
                w.u8(v.accepted ? 1 : 0);
                w.digest(v.vk_digest);
            } else if constexpr (std::is_same_v<T, VkResponse>) {
                w.bytes(v.vk);
            } else if constexpr (std::is_same_v<T, ProofSubmit>) {
                w.u64(v.frame_id);
                w.u32(static_cast<uint32_t>(v.statement.size()));
                w.bytes(v.statement);
                w.bytes(v.proof);
            } else if constexpr (std::is_same_v<T, VerifyResult>) {
                w.u64(v.frame_id);
                w.u8(v.accepted ? 1 : 0);
                w.u64(v.verify_micros);
            } else if constexpr (std::is_same_v<T, ErrorMsg>) {
                w.u16(v.code);
                w.bytes(std::span(reinterpret_cast<const uint8_t*>(v.detail.data()), v.detail.size()));
            }
        },
        m);
    return std::move(w).take();
}

inline Bytes encode_message(const Message& m) {
    const Bytes payload = encode_payload(m);
    if (payload.size() > kMaxPayload) throw FormatError("message: payload exceeds 16 MiB");
    Bytes out{'T', 'D', 'X', 'P', kProtoVersion, static_cast<uint8_t>(type_of(m))};
    const auto n = static_cast<uint32_t>(payload.size());
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<uint8_t>(n >> (8 * i)));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

struct Header {
    MsgType type;
    uint32_t length;
};

/// Validates a 10-byte frame header before any payload is read.
inline Header decode_header(std::span<const uint8_t> h) {
    if (h.size() < kHeaderSize) throw FormatError("message: truncated header");
    if (!(h[0] == 'T' && h[1] == 'D' && h[2] == 'X' && h[3] == 'P')) throw FormatError("message: bad magic");
    if (h[4] != kProtoVersion) throw FormatError("message: unsupported framing version");
    if (h[5] < 1 || h[5] > 7) throw FormatError("message: unknown type");
    const uint32_t n = (uint32_t{h[6]} << 24) | (uint32_t{h[7]} << 16) | (uint32_t{h[8]} << 8) | uint32_t{h[9]};
    if (n > kMaxPayload) throw FormatError("message: payload exceeds 16 MiB");
    return {static_cast<MsgType>(h[5]), n};
}

inline Message decode_payload(MsgType t, std::span<const uint8_t> p) {
    ByteReader r(p);
    auto rest = [&] {
        const auto s = r.bytes(r.remaining());
        return Bytes(s.begin(), s.end());
    };
    Message m;
    switch (t) {
    case MsgType::Hello: {
        Hello v;
        v.proto_version = r.u8();
        v.model_digest = r.digest();
        m = v;
        break;
    }
    case MsgType::HelloAck: {
        HelloAck v;
        const uint8_t a = r.u8();
        if (a > 1) throw FormatError("HELLO_ACK: accepted must be 0 or 1");
        v.accepted = a == 1;
        v.vk_digest = r.digest();
        m = v;
        break;
    }
    case MsgType::VkRequest:
        m = VkRequest{};
        break;
    case MsgType::VkResponse:
        m = VkResponse{rest()};
        break;
    case MsgType::ProofSubmit: {
        ProofSubmit v;
        v.frame_id = r.u64();
        const auto s = r.blob();
        v.statement.assign(s.begin(), s.end());
        v.proof = rest();
        m = std::move(v);
        break;
    }
    case MsgType::VerifyResult: {
        VerifyResult v;
        v.frame_id = r.u64();
        const uint8_t a = r.u8();
        if (a > 1) throw FormatError("VERIFY_RESULT: accepted must be 0 or 1");
        v.accepted = a == 1;
        v.verify_micros = r.u64();
        m = v;
        break;
    }
    case MsgType::Error: {
        ErrorMsg v;
        v.code = r.u16();
        const auto d = rest();
        v.detail.assign(d.begin(), d.end());
        if (!valid_utf8(v.detail)) throw FormatError("ERROR: detail is not UTF-8");
        m = std::move(v);
        break;
    }
    default:
        throw FormatError("message: unknown type");
    }
    r.expect_end(type_name(t));
    return m;
}

/// Total over arbitrary bytes: returns a message or throws FormatError.
inline Message decode_message(std::span<const uint8_t> bytes) {
    const Header h = decode_header(bytes);
    if (bytes.size() - kHeaderSize != h.length) throw FormatError("message: length mismatch");
    return decode_payload(h.type, bytes.subspan(kHeaderSize));
}

} // namespace tdx
