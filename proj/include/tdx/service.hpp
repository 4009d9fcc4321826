#pragma once

// Verifier service and streaming client over TDXP.
//
// Session: HELLO (model digest must match the vk) -> HELLO_ACK, then any
// number of VK_REQUEST and PROOF_SUBMIT. frame_ids must strictly increase.
// A failed verification is a VERIFY_RESULT with accepted = 0 and an audit
// record; protocol violations get an ERROR and the connection is closed.

#include <chrono>
#include <fstream>
#include <functional>
#include <future>
#include <list>
#include <random>
#include <thread>

#include <json.hpp>

#include "tdx/net.hpp"
#include "tdx/snark.hpp"

namespace tdx {

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min,
                  tm.tm_sec, static_cast<int>(ms));
    return buf;
}

/// Append-only JSON-lines log of frames lacking a valid proof. Each record is
/// written with a single call under a lock, so concurrent sessions never
/// interleave within a line.
class AuditLog {
public:
    AuditLog() = default;
    explicit AuditLog(std::string path) : path_(std::move(path)) {
        if (!path_.empty()) {
            out_.open(path_, std::ios::app | std::ios::binary);
            if (!out_) throw ProtocolError("cannot open audit log " + path_);
        }
    }

    void record(uint64_t frame_id, bool accepted, std::string_view reason) {
        const nlohmann::json j{{"ts", utc_timestamp()}, {"frame_id", frame_id}, {"accepted", accepted}, {"reason", reason}};
        const std::string line = j.dump() + "\n";
        std::lock_guard lk(m_);
        ++records_;
        if (out_.is_open()) {
            out_.write(line.data(), static_cast<std::streamsize>(line.size()));
            out_.flush();
        }
    }
    size_t records() const {
        std::lock_guard lk(m_);
        return records_;
    }

private:
    std::string path_;
    std::ofstream out_;
    mutable std::mutex m_;
    size_t records_ = 0;
};

struct SessionStats {
    size_t verified = 0, accepted = 0;
    std::optional<ErrorCode> error;
};

/// Serves one connection until the peer disconnects or violates the protocol.
inline SessionStats serve_session(ByteStream& s, const VerificationKey& vk, const Bytes& vk_bytes, AuditLog& audit) {
    SessionStats st;
    bool hello = false;
    std::optional<uint64_t> last_frame;
    auto fail = [&](ErrorCode code, const std::string& detail) {
        st.error = code;
        try {
            send_message(s, ErrorMsg{static_cast<uint16_t>(code), detail});
        } catch (const Error&) {
        }
    };
    try {
        for (;;) {
            std::optional<Message> m;
            try {
                m = recv_message(s);
            } catch (const FormatError& e) {
                fail(ErrorCode::BadMessage, e.what());
                break;
            }
            if (!m) break;
            if (auto* h = std::get_if<Hello>(&*m)) {
                if (hello) {
                    fail(ErrorCode::Unexpected, "duplicate HELLO");
                    break;
                }
                if (h->proto_version != kProtoVersion) {
                    fail(ErrorCode::Version, "unsupported protocol version " + std::to_string(h->proto_version));
                    break;
                }
                if (h->model_digest != vk.model_digest) {
                    send_message(s, HelloAck{false, vk.digest});
                    fail(ErrorCode::DigestMismatch, "model digest does not match the verification key");
                    break;
                }
                hello = true;
                send_message(s, HelloAck{true, vk.digest});
            } else if (!hello) {
                fail(ErrorCode::Unexpected, std::string("expected HELLO, got ") + type_name(type_of(*m)));
                break;
            } else if (std::holds_alternative<VkRequest>(*m)) {
                send_message(s, VkResponse{vk_bytes});
            } else if (auto* p = std::get_if<ProofSubmit>(&*m)) {
                if (last_frame && p->frame_id <= *last_frame) {
                    audit.record(p->frame_id, false, "replayed frame_id");
                    fail(ErrorCode::Replay, "frame_id " + std::to_string(p->frame_id) + " is not greater than " + std::to_string(*last_frame));
                    break;
                }
                last_frame = p->frame_id;
                const auto t0 = std::chrono::steady_clock::now();
                const bool ok = verify_bytes(vk, p->statement, p->proof);
                const auto us = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count();
                ++st.verified;
                if (ok)
                    ++st.accepted;
                else
                    audit.record(p->frame_id, false, "invalid proof");
                send_message(s, VerifyResult{p->frame_id, ok, static_cast<uint64_t>(us)});
            } else {
                fail(ErrorCode::Unexpected, std::string("unexpected ") + type_name(type_of(*m)));
                break;
            }
        }
    } catch (const ProtocolError&) {
        // transport loss: nothing left to tell the peer
    }
    s.close();
    return st;
}

/// Concurrent TCP verifier. The vk is parsed once and shared read-only.
class VerifierService {
public:
    VerifierService(const VerificationKey& vk, const Endpoint& bind, const std::string& audit_path = {})
        : vk_(vk), vk_bytes_(serialize_vk(vk)), audit_(audit_path), listener_(bind) {}
    ~VerifierService() { stop(); }

    uint16_t port() const { return listener_.port(); }
    AuditLog& audit() { return audit_; }

    /// Accept loop; returns after stop().
    void serve() {
        while (auto conn = listener_.accept()) {
            std::lock_guard lk(m_);
            if (stopping_) break;
            std::shared_ptr<TcpStream> c(std::move(conn));
            auto it = live_.insert(live_.end(), c);
            workers_.emplace_back([this, c, it] {
                serve_session(*c, vk_, vk_bytes_, audit_);
                std::lock_guard lk2(m_);
                live_.erase(it);
            });
        }
    }
    void start() {
        acceptor_ = std::thread([this] { serve(); });
    }
    void stop() {
        {
            std::lock_guard lk(m_);
            if (stopping_) return;
            stopping_ = true;
            for (auto& c : live_) c->shutdown();
        }
        listener_.shutdown();
        if (acceptor_.joinable()) acceptor_.join();
        for (auto& w : workers_)
            if (w.joinable()) w.join();
    }

private:
    VerificationKey vk_;
    Bytes vk_bytes_;
    AuditLog audit_;
    TcpListener listener_;
    std::mutex m_;
    bool stopping_ = false;
    std::list<std::shared_ptr<TcpStream>> live_;
    std::vector<std::thread> workers_;
    std::thread acceptor_;
};

/// Blocking entry point for the CLI: serves forever.
[[noreturn]] inline void run_verifier_service(const VerificationKey& vk, const Endpoint& bind, const std::string& audit_path,
                                              const std::function<void(uint16_t)>& on_ready = {}) {
    VerifierService svc(vk, bind, audit_path);
    if (on_ready) on_ready(svc.port());
    svc.serve();
    throw ProtocolError("listener closed");
}

struct FrameInput {
    std::string name;
    Bytes rgb; // planar 8-bit RGB
};

struct FrameReport {
    uint64_t frame_id = 0;
    std::string name;
    int verdict = 0;
    bool accepted = false;
    double prove_seconds = 0;
    uint64_t verify_micros = 0;
    size_t proof_bytes = 0;
};

struct SessionReport {
    std::vector<FrameReport> frames;
    bool complete = false;
    std::string error;

    size_t accepted() const {
        size_t n = 0;
        for (const auto& f : frames) n += f.accepted;
        return n;
    }
    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& f : frames)
            rows.push_back({{"frame_id", f.frame_id},
                            {"name", f.name},
                            {"verdict", f.verdict},
                            {"accepted", f.accepted},
                            {"prove_s", f.prove_seconds},
                            {"verify_us", f.verify_micros},
                            {"proof_bytes", f.proof_bytes}});
        return {{"frames", rows}, {"accepted", accepted()}, {"complete", complete}, {"error", error}};
    }
};

struct ClientOptions {
    std::optional<uint64_t> blind_seed; // deterministic blinding for tests; random otherwise
    bool fetch_vk = true;               // request the vk and check it against the pk
    uint64_t first_frame_id = 1;
};

/// Proves and submits every frame. Frames are checked against the model
/// geometry before anything is sent; proving frame k+1 overlaps the wait
/// for frame k's result.
inline SessionReport run_client(const std::vector<FrameInput>& frames, const ProvingKey& pk, ByteStream& s, const ClientOptions& opt = {}) {
    const auto& spec = pk.circuit.model.spec;
    std::vector<QuantTensor> qs;
    for (const auto& f : frames) qs.push_back(quantize_frame(f.rgb, spec));

    SessionReport rep;
    std::random_device rd;
    auto seed_for = [&](size_t k) {
        if (opt.blind_seed) return *opt.blind_seed + k;
        return (uint64_t{rd()} << 32) ^ rd();
    };
    struct Job {
        Statement x;
        Bytes proof;
        double seconds;
    };
    auto prove_job = [&pk, &qs](size_t k, uint64_t seed) {
        const auto t0 = std::chrono::steady_clock::now();
        auto prep = prepare(pk, qs[k], seed);
        Job j{prep.statement, serialize_proof(prove(pk, prep.statement, prep.witness)), 0};
        j.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return j;
    };

    std::future<Job> next;
    if (!qs.empty()) next = std::async(std::launch::async, prove_job, 0, seed_for(0));
    try {
        send_message(s, Hello{kProtoVersion, pk.vk.model_digest});
        auto ack = recv_message(s);
        if (!ack || !std::holds_alternative<HelloAck>(*ack)) throw ProtocolError("expected HELLO_ACK");
        const auto& a = std::get<HelloAck>(*ack);
        if (!a.accepted) throw ProtocolError("verifier rejected HELLO: model digest mismatch");
        if (a.vk_digest != pk.vk.digest) throw ProtocolError("verifier uses a different verification key");
        if (opt.fetch_vk) {
            send_message(s, VkRequest{});
            auto r = recv_message(s);
            if (!r || !std::holds_alternative<VkResponse>(*r)) throw ProtocolError("expected VK_RESPONSE");
            if (sha256(std::get<VkResponse>(*r).vk) != pk.vk.digest) throw ProtocolError("served vk does not match its digest");
        }
        for (size_t k = 0; k < qs.size(); ++k) {
            Job j = next.get();
            if (k + 1 < qs.size()) next = std::async(std::launch::async, prove_job, k + 1, seed_for(k + 1));
            FrameReport fr;
            fr.frame_id = opt.first_frame_id + k;
            fr.name = frames[k].name;
            fr.verdict = j.x.verdict;
            fr.prove_seconds = j.seconds;
            fr.proof_bytes = j.proof.size();
            send_message(s, ProofSubmit{fr.frame_id, serialize_statement(j.x), std::move(j.proof)});
            auto r = recv_message(s);
            if (!r) throw ProtocolError("verifier closed the connection");
            if (auto* e = std::get_if<ErrorMsg>(&*r)) throw ProtocolError("verifier error " + std::to_string(e->code) + ": " + e->detail);
            auto* vr = std::get_if<VerifyResult>(&*r);
            if (!vr || vr->frame_id != fr.frame_id) throw ProtocolError("expected VERIFY_RESULT for frame " + std::to_string(fr.frame_id));
            fr.accepted = vr->accepted;
            fr.verify_micros = vr->verify_micros;
            rep.frames.push_back(std::move(fr));
        }
        rep.complete = true;
    } catch (const Error& e) {
        rep.error = e.what();
    }
    if (next.valid()) next.wait();
    s.close();
    return rep;
}

} // namespace tdx
