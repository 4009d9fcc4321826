#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tdx/acceptance.hpp"

using namespace tdx;

namespace {

struct Toy {
    Model model = synth_model(42, ModelSpec::toy());
    ProvingKey pk = setup(compile(model));

    std::vector<FrameInput> frames(size_t n, uint64_t first = 100) const {
        std::vector<FrameInput> out;
        for (size_t i = 0; i < n; ++i) out.push_back({"f" + std::to_string(i), synth_frame(first + i, model.spec)});
        return out;
    }
};

const Toy& toy() {
    static const Toy t;
    return t;
}

std::vector<Message> samples() {
    Digest d{};
    for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<uint8_t>(i * 7);
    return {Hello{1, d},
            HelloAck{true, d},
            HelloAck{false, {}},
            VkRequest{},
            VkResponse{Bytes{1, 2, 3, 4}},
            ProofSubmit{77, Bytes(kStatementSize, 9), Bytes(1000, 3)},
            ProofSubmit{0, {}, {}},
            VerifyResult{77, true, 12345},
            ErrorMsg{3, "frame_id 4 is not greater than 7"},
            ErrorMsg{1, "caf\xc3\xa9"}};
}

/// Stream that fails the test if anything is written.
class NoSendStream : public ByteStream {
public:
    size_t read_some(uint8_t*, size_t) override { return 0; }
    void write_all(std::span<const uint8_t>) override { ADD_FAILURE() << "client sent bytes"; }
};

std::string read_file(const std::string& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("tdx_test_" + std::to_string(::getpid()) + "_" + name)).string();
}

} // namespace

TEST(Wire, MessagesRoundTrip) {
    for (const auto& m : samples()) {
        const auto b = encode_message(m);
        EXPECT_EQ(decode_message(b), m) << type_name(type_of(m));
        EXPECT_EQ(b.size(), kHeaderSize + encode_payload(m).size());
    }
}

TEST(Wire, HelloFramingIsBitExact) {
    Digest d{};
    d.fill(0xab);
    const auto b = encode_message(Hello{1, d});
    ASSERT_EQ(b.size(), 10u + 33u);
    const Bytes head{'T', 'D', 'X', 'P', 1, 1, 0, 0, 0, 33, 1};
    EXPECT_TRUE(std::equal(head.begin(), head.end(), b.begin()));
}

TEST(Wire, MalformedFramesAreFormatErrors) {
    auto good = encode_message(VerifyResult{1, true, 2});
    auto expect_bad = [](Bytes b) { EXPECT_THROW(decode_message(b), FormatError); };
    auto b = good;
    b[0] = 'X';
    expect_bad(b);
    b = good;
    b[4] = 2;
    expect_bad(b);
    b = good;
    b[5] = 0;
    expect_bad(b);
    b = good;
    b[5] = 8;
    expect_bad(b);
    b = good;
    b.push_back(0);
    expect_bad(b);
    expect_bad(Bytes(good.begin(), good.end() - 1));
    expect_bad(Bytes(good.begin(), good.begin() + 5));
    b = good;
    b[10 + 8] = 2; // accepted byte must be a bit
    expect_bad(b);
    b = good;
    b[6] = 0x01; // length 16 MiB + ...
    b[7] = 0x00;
    b[8] = 0x00;
    b[9] = 0x12;
    EXPECT_THROW(decode_header(b), FormatError);
    expect_bad(encode_message(ErrorMsg{1, "\xff"}));
    // A statement length pointing past the payload.
    auto ps = encode_message(ProofSubmit{1, Bytes(4), Bytes(4)});
    ps[10 + 8] = 200;
    expect_bad(ps);
}

TEST(Wire, RandomBytesNeverCrashTheDecoder) {
    CounterRng rng("test/wirefuzz", 0);
    const auto seeds = samples();
    size_t ok = 0;
    for (int i = 0; i < 20000; ++i) {
        Bytes b;
        if (i % 2 == 0) {
            b = encode_message(seeds[static_cast<size_t>(i / 2) % seeds.size()]);
            const int flips = 1 + static_cast<int>(rng.uniform_int(0, 3));
            for (int k = 0; k < flips; ++k) b[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(b.size()) - 1))] ^= static_cast<uint8_t>(rng.next_u64());
            if (rng.uniform_int(0, 3) == 0) b.resize(static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(b.size()))));
        } else {
            b.resize(static_cast<size_t>(rng.uniform_int(0, 64)));
            for (auto& x : b) x = static_cast<uint8_t>(rng.next_u64());
        }
        try {
            const auto m = decode_message(b);
            EXPECT_EQ(encode_message(m), b);
            ++ok;
        } catch (const FormatError&) {
        }
    }
    EXPECT_GT(ok, 0u);
}

TEST(Wire, EndpointsAndEnvOverrides) {
    EXPECT_EQ(parse_endpoint("10.0.0.1:8080").str(), "10.0.0.1:8080");
    EXPECT_EQ(parse_endpoint(":9000").str(), "127.0.0.1:9000");
    EXPECT_EQ(parse_endpoint("9001").port, 9001);
    EXPECT_THROW(parse_endpoint("host:"), FormatError);
    EXPECT_THROW(parse_endpoint("host:70000"), FormatError);
    ::setenv("TDX_CONNECT", "127.0.0.1:4242", 1);
    EXPECT_EQ(endpoint_from("127.0.0.1:1", "TDX_CONNECT").port, 4242);
    ::unsetenv("TDX_CONNECT");
    EXPECT_EQ(endpoint_from("127.0.0.1:1", "TDX_CONNECT").port, 1);
}

TEST(Service, LoopbackSessionAcceptsEveryFrame) {
    const auto& t = toy();
    VerifierService svc(t.pk.vk, parse_endpoint("127.0.0.1:0"));
    svc.start();
    auto conn = TcpStream::connect({"127.0.0.1", svc.port()});
    CapturingStream cap(*conn);
    const auto frames = t.frames(10);
    const auto rep = run_client(frames, t.pk, cap, {.blind_seed = 5});
    ASSERT_TRUE(rep.complete) << rep.error;
    EXPECT_EQ(rep.frames.size(), 10u);
    EXPECT_EQ(rep.accepted(), 10u);
    for (size_t i = 0; i < frames.size(); ++i) {
        const auto trace = infer_quantized(t.model, quantize_frame(frames[i].rgb, t.model.spec));
        EXPECT_EQ(rep.frames[i].verdict, trace.verdict);
        EXPECT_EQ(rep.frames[i].proof_bytes, proof_size(t.pk.vk));
    }
    EXPECT_EQ(svc.audit().records(), 0u);

    // No 64-byte window of any raw frame crosses the wire.
    Bytes wire = cap.sent();
    wire.insert(wire.end(), cap.received().begin(), cap.received().end());
    std::vector<Bytes> raws;
    for (const auto& f : frames) raws.push_back(f.rgb);
    EXPECT_FALSE(acceptance::shares_window(wire, raws, 64));
    // The scan itself finds a planted window.
    Bytes planted = wire;
    planted.insert(planted.begin() + 1000, raws[3].begin() + 100, raws[3].begin() + 164);
    EXPECT_TRUE(acceptance::shares_window(planted, raws, 64));
    svc.stop();
}

TEST(Service, ReplayedFrameIdIsAnError) {
    const auto& t = toy();
    const auto audit_path = temp_path("replay.jsonl");
    std::filesystem::remove(audit_path);
    VerifierService svc(t.pk.vk, parse_endpoint("127.0.0.1:0"), audit_path);
    svc.start();
    auto c = TcpStream::connect({"127.0.0.1", svc.port()});
    send_message(*c, Hello{kProtoVersion, t.pk.vk.model_digest});
    ASSERT_TRUE(std::get<HelloAck>(*recv_message(*c)).accepted);
    const auto prep = prepare(t.pk, quantize_frame(synth_frame(1, t.model.spec), t.model.spec), 1);
    const ProofSubmit sub{5, serialize_statement(prep.statement), serialize_proof(prove(t.pk, prep.statement, prep.witness))};
    send_message(*c, sub);
    EXPECT_TRUE(std::get<VerifyResult>(*recv_message(*c)).accepted);
    send_message(*c, sub);
    const auto e = recv_message(*c);
    ASSERT_TRUE(e && std::holds_alternative<ErrorMsg>(*e));
    EXPECT_EQ(std::get<ErrorMsg>(*e).code, static_cast<uint16_t>(ErrorCode::Replay));
    EXPECT_FALSE(recv_message(*c)); // closed
    svc.stop();
    const auto log = read_file(audit_path);
    EXPECT_NE(log.find("\"reason\":\"replayed frame_id\""), std::string::npos);
    std::filesystem::remove(audit_path);
}

TEST(Service, TamperedProofIsRejectedAndAudited) {
    const auto& t = toy();
    const auto audit_path = temp_path("tamper.jsonl");
    std::filesystem::remove(audit_path);
    VerifierService svc(t.pk.vk, parse_endpoint("127.0.0.1:0"), audit_path);
    svc.start();
    auto c = TcpStream::connect({"127.0.0.1", svc.port()});
    send_message(*c, Hello{kProtoVersion, t.pk.vk.model_digest});
    ASSERT_TRUE(std::get<HelloAck>(*recv_message(*c)).accepted);
    const auto prep = prepare(t.pk, quantize_frame(synth_frame(2, t.model.spec), t.model.spec), 2);
    auto proof = serialize_proof(prove(t.pk, prep.statement, prep.witness));
    proof[proof.size() / 2] ^= 0x10;
    send_message(*c, ProofSubmit{1, serialize_statement(prep.statement), proof});
    const auto r = std::get<VerifyResult>(*recv_message(*c));
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.frame_id, 1u);
    // The session continues after a failed verification.
    send_message(*c, ProofSubmit{2, Bytes{1, 2, 3}, Bytes{}});
    EXPECT_FALSE(std::get<VerifyResult>(*recv_message(*c)).accepted);
    c->close();
    svc.stop();
    const auto log = read_file(audit_path);
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
    for (const auto& line : {log.substr(0, log.find('\n'))}) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j["frame_id"], 1);
        EXPECT_EQ(j["accepted"], false);
        EXPECT_TRUE(j.contains("ts"));
        EXPECT_TRUE(j.contains("reason"));
    }
    std::filesystem::remove(audit_path);
}

TEST(Service, ProtocolViolationsCloseTheSession) {
    const auto& t = toy();
    VerifierService svc(t.pk.vk, parse_endpoint("127.0.0.1:0"));
    svc.start();
    auto expect_error = [&](const std::vector<Bytes>& sends, ErrorCode code) {
        auto c = TcpStream::connect({"127.0.0.1", svc.port()});
        std::optional<Message> last;
        for (const auto& b : sends) c->write_all(b);
        while (auto m = recv_message(*c)) last = m;
        ASSERT_TRUE(last && std::holds_alternative<ErrorMsg>(*last));
        EXPECT_EQ(std::get<ErrorMsg>(*last).code, static_cast<uint16_t>(code));
    };
    const auto hello = encode_message(Hello{kProtoVersion, t.pk.vk.model_digest});
    expect_error({encode_message(VkRequest{})}, ErrorCode::Unexpected);
    expect_error({encode_message(Hello{9, t.pk.vk.model_digest})}, ErrorCode::Version);
    expect_error({encode_message(Hello{kProtoVersion, Digest{}})}, ErrorCode::DigestMismatch);
    expect_error({hello, hello}, ErrorCode::Unexpected);
    expect_error({hello, encode_message(VerifyResult{})}, ErrorCode::Unexpected);
    expect_error({Bytes{'J', 'U', 'N', 'K', 1, 1, 0, 0, 0, 0}}, ErrorCode::BadMessage);
    expect_error({Bytes{'T', 'D', 'X', 'P', 1, 5, 0xff, 0, 0, 0}}, ErrorCode::BadMessage);
    svc.stop();
}

TEST(Service, ConcurrentSessionsAreIndependent) {
    const auto& t = toy();
    VerifierService svc(t.pk.vk, parse_endpoint("127.0.0.1:0"));
    svc.start();
    std::vector<std::future<SessionReport>> runs;
    for (int k = 0; k < 3; ++k)
        runs.push_back(std::async(std::launch::async, [&, k] {
            auto c = TcpStream::connect({"127.0.0.1", svc.port()});
            return run_client(t.frames(2, 500 + 10 * k), t.pk, *c, {.blind_seed = static_cast<uint64_t>(k)});
        }));
    for (auto& r : runs) {
        const auto rep = r.get();
        EXPECT_TRUE(rep.complete) << rep.error;
        EXPECT_EQ(rep.accepted(), 2u);
    }
    svc.stop();
}

TEST(Service, WrongFrameDimensionsFailBeforeSending) {
    const auto& t = toy();
    NoSendStream s;
    std::vector<FrameInput> frames{{"bad", Bytes(3 * 32 * 32, 0)}};
    EXPECT_THROW(run_client(frames, t.pk, s), ShapeError);
}

TEST(Service, ClientReportsMismatchedVerifier) {
    const auto& t = toy();
    const auto other = setup(compile(synth_model(7, ModelSpec::toy())));
    VerifierService svc(other.vk, parse_endpoint("127.0.0.1:0"));
    svc.start();
    auto c = TcpStream::connect({"127.0.0.1", svc.port()});
    const auto rep = run_client(t.frames(1), t.pk, *c, {.blind_seed = 1});
    EXPECT_FALSE(rep.complete);
    EXPECT_NE(rep.error.find("digest"), std::string::npos);
    EXPECT_TRUE(rep.frames.empty());
    svc.stop();
}

TEST(Service, ProofSubmitSizeDoesNotDependOnPixels) {
    const auto& t = toy();
    std::set<size_t> sizes;
    for (uint64_t seed = 0; seed < 6; ++seed) {
        const auto prep = prepare(t.pk, quantize_frame(synth_frame(seed, t.model.spec), t.model.spec), seed);
        sizes.insert(encode_message(ProofSubmit{seed + 1, serialize_statement(prep.statement),
                                                serialize_proof(prove(t.pk, prep.statement, prep.witness))})
                         .size());
    }
    EXPECT_EQ(sizes.size(), 1u);
    EXPECT_LT(*sizes.begin(), kMaxPayload);
}
