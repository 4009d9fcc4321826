#pragma once

// Acceptance suites shared by the `acceptance` test binary and `tdx selftest`.
// Each suite returns one pass/fail result with a short measured summary.

#include <functional>
#include <set>
#include <string_view>
#include <unordered_set>

#include "tdx/bench.hpp"
#include "tdx/service.hpp"

namespace tdx::acceptance {

struct Result {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0;
};

struct Options {
    int completeness_runs = 200;
    int soundness_per_kind = 90;
    int fidelity_frames = 1000;
    int sumcheck_polys = 1000;
    int pcs_vectors = 100;
    size_t fuzz_cases = 1000000;
    int timing_runs = 5;
    double fidelity_margin = 0.05;
    /// Produces `bench --toy` JSON. Defaults to running the bench in process.
    std::function<std::string()> bench_json;
};

struct Fixture {
    Model model = synth_model(42, ModelSpec::toy());
    ProvingKey pk = setup(compile(model));

    Bytes raw(uint64_t seed) const { return synth_frame(seed, model.spec); }
    QuantTensor frame(uint64_t seed) const { return quantize_frame(raw(seed), model.spec); }
};

inline const Fixture& fixture() {
    static const Fixture f;
    return f;
}

namespace detail {

inline std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

/// Direct Lagrange-basis evaluation, independent of the eq-table code.
inline Fp2 lagrange_oracle(std::span<const Fp> v, std::span<const Fp2> r) {
    Fp2 acc = Fp2::zero();
    for (size_t i = 0; i < v.size(); ++i) {
        Fp2 w = v[i];
        for (size_t k = 0; k < r.size(); ++k) w *= ((i >> k) & 1) ? r[k] : Fp2::one() - r[k];
        acc += w;
    }
    return acc;
}

inline Fp2 random_ext(CounterRng& rng) { return {random_fp(rng), random_fp(rng)}; }

inline Fp random_nonzero(CounterRng& rng) {
    for (;;) {
        const Fp x = random_fp(rng);
        if (!x.is_zero()) return x;
    }
}

/// Flat index of a uniformly random real (non-padding) wire of a region.
inline uint64_t random_wire(const Region& r, CounterRng& rng) {
    std::vector<uint32_t> coord;
    for (const auto& a : r.axes) coord.push_back(static_cast<uint32_t>(rng.uniform_int(0, a.extent - 1)));
    return r.index(coord);
}

} // namespace detail

/// True if any w-byte window of any needle occurs in `hay`.
inline bool shares_window(std::span<const uint8_t> hay, const std::vector<Bytes>& needles, size_t w) {
    std::unordered_set<std::string_view> windows;
    for (const auto& n : needles)
        for (size_t i = 0; i + w <= n.size(); ++i) windows.emplace(reinterpret_cast<const char*>(n.data() + i), w);
    for (size_t i = 0; i + w <= hay.size(); ++i)
        if (windows.count(std::string_view(reinterpret_cast<const char*>(hay.data() + i), w))) return true;
    return false;
}

/// Splits a captured byte stream into TDXP messages.
inline std::vector<std::pair<MsgType, size_t>> split_frames(std::span<const uint8_t> wire) {
    std::vector<std::pair<MsgType, size_t>> out;
    size_t off = 0;
    while (off + kHeaderSize <= wire.size()) {
        const auto h = decode_header(wire.subspan(off, kHeaderSize));
        out.emplace_back(h.type, kHeaderSize + h.length);
        off += kHeaderSize + h.length;
    }
    if (off != wire.size()) throw FormatError("capture: trailing partial frame");
    return out;
}

inline Result completeness(const Options& o) {
    const auto& f = fixture();
    int accepted = 0;
    for (int i = 0; i < o.completeness_runs; ++i) {
        const auto prep = prepare(f.pk, f.frame(static_cast<uint64_t>(i)), static_cast<uint64_t>(i) + 1);
        const auto proof = serialize_proof(prove(f.pk, prep.statement, prep.witness));
        accepted += verify_bytes(f.pk.vk, serialize_statement(prep.statement), proof);
    }
    return {"completeness", accepted == o.completeness_runs, detail::fmt("%d/%d honest proofs accepted", accepted, o.completeness_runs)};
}

inline Result soundness(const Options& o) {
    const auto& f = fixture();
    const auto& pk = f.pk;
    const auto other = setup(compile(synth_model(43, ModelSpec::toy())));
    CounterRng rng("tdx/acceptance/soundness", 0);
    const int n = o.soundness_per_kind;
    std::vector<std::pair<std::string, int>> tally; // kind -> accepts
    int total = 0, accepts = 0;
    auto run = [&](const std::string& kind, auto&& trial) {
        int acc = 0;
        for (int t = 0; t < n; ++t) acc += trial(t) ? 1 : 0;
        tally.emplace_back(kind, acc);
        total += n;
        accepts += acc;
    };
    auto seed_of = [](int kind, int t) { return 20000 + 1000 * static_cast<uint64_t>(kind) + static_cast<uint64_t>(t); };

    run("flipped_verdict", [&](int t) {
        const auto prep = prepare(pk, f.frame(seed_of(0, t)), seed_of(0, t));
        auto x = prep.statement;
        x.verdict = 1 - x.verdict;
        return verify(pk.vk, x, prove_unchecked(pk, x, prep.witness));
    });
    run("witness_wire", [&](int t) {
        const auto prep = prepare(pk, f.frame(seed_of(1, t)), seed_of(1, t));
        auto layers = prep.witness.layers;
        // Intermediate layers only: the output layer never reaches the proof,
        // the verifier rebuilds it as [verdict, 0, ..., 0].
        const size_t li = static_cast<size_t>(rng.uniform_int(1, static_cast<int64_t>(layers.size()) - 2));
        const size_t wi = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(layers[li].size()) - 1));
        layers[li][wi] += detail::random_nonzero(rng);
        const auto st = pcs_commit(layers[0], prep.witness.blind_seed, pk.vk.pcs);
        return verify(pk.vk, prep.statement, tdx::detail::prove_core(pk, prep.statement, layers, st));
    });
    const auto names = advice_regions(pk.circuit);
    run("advice_bit", [&](int t) {
        const auto prep = prepare(pk, f.frame(seed_of(2, t)), seed_of(2, t));
        auto input = prep.witness.layers[0];
        const auto& r = pk.circuit.input().region(names[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(names.size()) - 1))]);
        const uint64_t idx = detail::random_wire(r, rng);
        const Fp v = input[idx];
        input[idx] = v == Fp::one() ? Fp::zero() : v + Fp::one();
        auto bad = evaluate_input(pk.circuit, pk.gates, std::move(input));
        bad.blind_seed = prep.witness.blind_seed;
        auto x = prep.statement;
        x.commitment = pcs_commit(bad.layers[0], bad.blind_seed, pk.vk.pcs).root();
        return verify(pk.vk, x, prove_unchecked(pk, x, bad));
    });
    run("post_commit_input", [&](int t) {
        const uint64_t s = seed_of(3, t);
        const auto prep = prepare(pk, f.frame(s), s);
        auto raw = f.raw(s);
        const auto before = quantize_frame(raw, f.model.spec);
        do {
            const size_t px = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(raw.size()) - 1));
            raw[px] = static_cast<uint8_t>(raw[px] + 1 + rng.uniform_int(0, 254));
        } while (quantize_frame(raw, f.model.spec).data == before.data);
        const auto moved = prepare(pk, quantize_frame(raw, f.model.spec), s);
        auto x = prep.statement;
        x.verdict = moved.statement.verdict;
        // Alternate between opening the stale commitment and a fresh one.
        const Proof p = t % 2 == 0 ? tdx::detail::prove_core(pk, x, moved.witness.layers, pcs_commit(prep.witness.layers[0], s, pk.vk.pcs))
                                   : prove_unchecked(pk, x, moved.witness);
        return verify(pk.vk, x, p);
    });
    std::vector<std::pair<Bytes, Bytes>> honest;
    for (int k = 0; k < 10; ++k) {
        const auto prep = prepare(pk, f.frame(seed_of(4, k)), seed_of(4, k));
        honest.emplace_back(serialize_statement(prep.statement), serialize_proof(prove(pk, prep.statement, prep.witness)));
    }
    run("proof_byte", [&](int t) {
        auto [stmt, proof] = honest[static_cast<size_t>(t) % honest.size()];
        const size_t at = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(proof.size()) - 1));
        proof[at] ^= static_cast<uint8_t>(rng.uniform_int(1, 255));
        return verify_bytes(pk.vk, stmt, proof);
    });
    run("digest_mismatch", [&](int t) {
        const auto& [stmt, proof] = honest[static_cast<size_t>(t) % honest.size()];
        if (t % 2 == 0) {
            auto x = deserialize_statement(stmt);
            x.model_digest = other.vk.model_digest;
            return verify_bytes(pk.vk, serialize_statement(x), proof);
        }
        return verify_bytes(other.vk, stmt, proof);
    });

    std::string d = detail::fmt("%d trials, %d accepted;", total, accepts);
    for (const auto& [k, a] : tally) d += detail::fmt(" %s=%d/%d", k.c_str(), a, n);
    return {"soundness", accepts == 0 && total >= 500, d};
}

inline Result succinctness(const Options& o) {
    struct M {
        size_t bytes;
        double verify;
        size_t gates;
    };
    auto measure = [&](uint32_t side) {
        const auto model = synth_model(42, ModelSpec::toy(side));
        const auto pk = setup(compile(model));
        const auto prep = prepare(pk, quantize_frame(synth_frame(1, model.spec), model.spec), 1);
        const auto proof = serialize_proof(prove(pk, prep.statement, prep.witness));
        const auto stmt = serialize_statement(prep.statement);
        std::vector<double> t;
        for (int i = 0; i < o.timing_runs; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            if (!verify_bytes(pk.vk, stmt, proof)) return M{0, 0, 0};
            t.push_back(seconds_since(t0));
        }
        return M{proof.size(), median(t), circuit_stats(pk.circuit).gates};
    };
    const auto a = measure(16), b = measure(32);
    if (a.bytes == 0 || b.bytes == 0) return {"succinctness", false, "honest proof rejected"};
    const double rb = static_cast<double>(b.bytes) / static_cast<double>(a.bytes), rt = b.verify / a.verify;
    const double rg = static_cast<double>(b.gates) / static_cast<double>(a.gates);
    return {"succinctness", rb < 2.0 && rt < 2.0,
            detail::fmt("16->32: gates x%.2f, proof %zu->%zu B (x%.2f), verify %.2f->%.2f ms (x%.2f, median of %d)", rg, a.bytes, b.bytes, rb,
                        a.verify * 1e3, b.verify * 1e3, rt, o.timing_runs)};
}

inline Result fidelity(const Options& o) {
    const auto& f = fixture();
    const auto fw = dequantize_weights(f.model.weights);
    int counted = 0, agree = 0, excluded = 0, fake = 0;
    for (int i = 0; i < o.fidelity_frames; ++i) {
        const auto raw = synth_frame(50000 + static_cast<uint64_t>(i), f.model.spec);
        const auto ref = infer_reference(f.model.spec, fw, frame_from_rgb(raw, f.model.spec));
        if (std::abs(ref.logit) < o.fidelity_margin) {
            ++excluded;
            continue;
        }
        const auto q = infer_quantized(f.model, quantize_frame(raw, f.model.spec));
        ++counted;
        agree += q.verdict == ref.verdict;
        fake += ref.verdict;
    }
    const double rate = counted ? static_cast<double>(agree) / counted : 0.0;
    return {"quantization_fidelity", counted >= o.fidelity_frames / 2 && rate >= 0.99,
            detail::fmt("%d/%d agree (%.2f%%), %d inside the %.2f margin, %d float-fake", agree, counted, 100 * rate, excluded, o.fidelity_margin,
                        fake)};
}

inline Result sumcheck_oracle(const Options& o) {
    CounterRng rng("tdx/acceptance/sumcheck", 0);
    int ok = 0;
    for (int i = 0; i < o.sumcheck_polys; ++i) {
        const size_t vars = static_cast<size_t>(rng.uniform_int(1, 10));
        const size_t deg = static_cast<size_t>(rng.uniform_int(1, 3));
        std::vector<std::vector<Fp2>> fs(deg, std::vector<Fp2>(size_t{1} << vars));
        for (auto& t : fs)
            for (auto& x : t) x = detail::random_ext(rng);
        Fp2 brute = Fp2::zero();
        for (size_t x = 0; x < fs[0].size(); ++x) {
            Fp2 p = Fp2::one();
            for (const auto& t : fs) p *= t[x];
            brute += p;
        }
        Transcript tp("acceptance/sumcheck");
        const auto out = sumcheck_prove(fs, tp);
        // The protocol's implied sum is p_1(0) + p_1(1).
        const auto& c = out.proof.rounds[0];
        Fp2 implied = c[0];
        for (const auto& x : c) implied += x;
        Transcript tv("acceptance/sumcheck"), tw("acceptance/sumcheck");
        const auto good = sumcheck_verify(out.proof, brute, vars, deg, tv);
        bool final_ok = false;
        if (good) {
            Fp2 prod = Fp2::one();
            for (const auto& t : fs) prod *= mle_eval(std::span<const Fp2>(t), std::span<const Fp2>(good->point));
            final_ok = prod == good->value;
        }
        const bool bad_rejected = !sumcheck_verify(out.proof, brute + detail::random_nonzero(rng), vars, deg, tw);
        ok += implied == brute && good && final_ok && bad_rejected;
    }
    return {"sumcheck_oracle", ok == o.sumcheck_polys, detail::fmt("%d/%d polynomials (k<=10, degree<=3) match the hypercube sum", ok, o.sumcheck_polys)};
}

inline Result pcs_consistency(const Options& o) {
    CounterRng rng("tdx/acceptance/pcs", 0);
    int ok = 0, mutations = 0, mutation_accepts = 0;
    for (int i = 0; i < o.pcs_vectors; ++i) {
        const unsigned vars = static_cast<unsigned>(i % 11);
        std::vector<Fp> v(size_t{1} << vars);
        for (auto& x : v) x = random_fp(rng);
        const auto st = pcs_commit(v, rng.next_u64());
        std::vector<Fp2> r(vars);
        for (auto& x : r) x = detail::random_ext(rng);
        const Fp2 oracle = detail::lagrange_oracle(v, r);
        Transcript tp("acceptance/pcs"), tv("acceptance/pcs");
        const auto pf = pcs_open(st, r, tp);
        // The certified value is what <c_eval, eq(r_lo)> evaluates to.
        const auto lo = eq_table(std::span<const Fp2>(r).first(st.shape.col_bits));
        Fp2 certified = Fp2::zero();
        for (size_t j = 0; j < lo.size(); ++j) certified += pf.c_eval[j] * lo[j];
        ok += certified == oracle && pcs_verify(st.root(), st.shape, st.params, r, oracle, pf, tv);

        // Single-entry mutations after commitment, against the original root.
        const size_t tries = std::min<size_t>(v.size(), 8);
        for (size_t k = 0; k < tries; ++k) {
            auto w = v;
            const size_t at = v.size() <= 8 ? k : static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(v.size()) - 1));
            w[at] += detail::random_nonzero(rng);
            const Fp2 claimed = detail::lagrange_oracle(w, r);
            // (a) honest opening of the new vector, (b) old opening with the new value.
            const auto st2 = pcs_commit(w, rng.next_u64());
            Transcript ta("acceptance/pcs"), va("acceptance/pcs"), vb("acceptance/pcs");
            const auto pa = pcs_open(st2, r, ta);
            mutation_accepts += pcs_verify(st.root(), st.shape, st.params, r, claimed, pa, va);
            mutation_accepts += pcs_verify(st.root(), st.shape, st.params, r, claimed, pf, vb);
            mutations += 2;
        }
    }
    return {"pcs_consistency", ok == o.pcs_vectors && mutation_accepts == 0,
            detail::fmt("%d/%d openings equal the Lagrange oracle; %d/%d post-commit mutations accepted", ok, o.pcs_vectors, mutation_accepts,
                        mutations)};
}

inline Result transport_privacy(const Options&) {
    const auto& f = fixture();
    VerifierService svc(f.pk.vk, parse_endpoint("127.0.0.1:0"));
    svc.start();
    std::vector<FrameInput> frames;
    std::vector<Bytes> raws;
    for (uint64_t i = 0; i < 10; ++i) {
        frames.push_back({"frame" + std::to_string(i), f.raw(70000 + i)});
        raws.push_back(frames.back().rgb);
    }
    auto conn = TcpStream::connect({"127.0.0.1", svc.port()});
    CapturingStream cap(*conn);
    const auto rep = run_client(frames, f.pk, cap);
    svc.stop();
    if (!rep.complete) return {"transport_privacy", false, "session failed: " + rep.error};
    Bytes wire = cap.sent();
    wire.insert(wire.end(), cap.received().begin(), cap.received().end());
    const bool leak = shares_window(wire, raws, 64);
    std::set<size_t> submit_sizes;
    for (const auto& [type, size] : split_frames(cap.sent()))
        if (type == MsgType::ProofSubmit) submit_sizes.insert(size);
    return {"transport_privacy", !leak && submit_sizes.size() == 1 && rep.accepted() == 10,
            detail::fmt("%zu bytes captured, 64-byte frame window %s, %zu distinct PROOF_SUBMIT size(s) (%zu B), %zu/10 accepted", wire.size(),
                        leak ? "FOUND" : "absent", submit_sizes.size(), submit_sizes.empty() ? size_t{0} : *submit_sizes.begin(), rep.accepted())};
}

inline Result fuzz(const Options& o) {
    const auto& f = fixture();
    CounterRng rng("tdx/acceptance/fuzz", 0);
    const auto prep = prepare(f.pk, f.frame(1), 1);
    Bytes proof = serialize_proof(prove(f.pk, prep.statement, prep.witness));
    const Bytes stmt = serialize_statement(prep.statement);
    std::vector<Bytes> seeds;
    Digest d{};
    seeds.push_back(encode_message(Hello{1, f.pk.vk.model_digest}));
    seeds.push_back(encode_message(HelloAck{true, d}));
    seeds.push_back(encode_message(VkRequest{}));
    seeds.push_back(encode_message(VkResponse{Bytes(100, 1)}));
    seeds.push_back(encode_message(ProofSubmit{3, stmt, Bytes(64, 2)}));
    seeds.push_back(encode_message(VerifyResult{3, false, 99}));
    seeds.push_back(encode_message(ErrorMsg{2, "unexpected"}));

    size_t crashes = 0, decoded = 0, parsed = 0, verified = 0;
    std::string first_crash;
    auto guard = [&](auto&& fn) {
        try {
            fn();
        } catch (const FormatError&) {
        } catch (const std::exception& e) {
            if (!crashes++) first_crash = e.what();
        } catch (...) {
            if (!crashes++) first_crash = "non-standard exception";
        }
    };
    auto random_bytes = [&](size_t n) {
        Bytes b(n);
        for (auto& x : b) x = static_cast<uint8_t>(rng.next_u64());
        return b;
    };
    const size_t half = o.fuzz_cases / 2;
    for (size_t i = 0; i < half; ++i) {
        Bytes b;
        switch (i % 4) {
        case 0:
            b = random_bytes(static_cast<size_t>(rng.uniform_int(0, 80)));
            break;
        case 1: // valid header, random payload
            b = random_bytes(static_cast<size_t>(rng.uniform_int(0, 80)));
            {
                const Bytes h{'T', 'D', 'X', 'P', 1, static_cast<uint8_t>(rng.uniform_int(1, 7)), 0, 0, 0, static_cast<uint8_t>(b.size())};
                b.insert(b.begin(), h.begin(), h.end());
            }
            break;
        default: // mutated valid message
            b = seeds[i % seeds.size()];
            for (int k = 0, n = static_cast<int>(rng.uniform_int(1, 4)); k < n; ++k)
                b[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(b.size()) - 1))] ^= static_cast<uint8_t>(rng.uniform_int(1, 255));
            if (i % 8 == 3) b.resize(static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(b.size()))));
        }
        guard([&] {
            decode_message(b);
            ++decoded;
        });
    }
    for (size_t i = 0; i < o.fuzz_cases - half; ++i) {
        if (i % 4 == 0) {
            const Bytes b = random_bytes(static_cast<size_t>(rng.uniform_int(0, 256)));
            guard([&] { deserialize_proof(f.pk.vk, b); });
            continue;
        }
        if (i % 4 == 1) {
            const size_t n = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(proof.size()) + 64));
            Bytes b(proof.begin(), proof.begin() + static_cast<long>(std::min(n, proof.size())));
            b.resize(n, 0);
            guard([&] { deserialize_proof(f.pk.vk, b); });
            continue;
        }
        // In-place byte flips of an honest proof, undone afterwards.
        std::vector<std::pair<size_t, uint8_t>> undo;
        for (int k = 0, n = static_cast<int>(rng.uniform_int(1, 4)); k < n; ++k) {
            const size_t at = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(proof.size()) - 1));
            undo.emplace_back(at, proof[at]);
            proof[at] ^= static_cast<uint8_t>(rng.uniform_int(1, 255));
        }
        guard([&] {
            const auto p = deserialize_proof(f.pk.vk, proof);
            ++parsed;
            if (verified < 500 && i % 64 == 2) {
                ++verified;
                if (verify(f.pk.vk, prep.statement, p)) throw std::runtime_error("mutated proof accepted");
            }
        });
        for (auto it = undo.rbegin(); it != undo.rend(); ++it) proof[it->first] = it->second;
    }
    return {"wire_format_totality", crashes == 0,
            detail::fmt("%zu cases: %zu crashes%s%s; %zu messages decoded, %zu mutated proofs parsed, %zu fully verified (all rejected)",
                        o.fuzz_cases, crashes, crashes ? ", first: " : "", first_crash.c_str(), decoded, parsed, verified)};
}

inline Result bench_report(const Options& o) {
    std::string text;
    if (o.bench_json) {
        text = o.bench_json();
    } else {
        const auto& f = fixture();
        text = nlohmann::json{{"rows", bench_json({bench_model(f.model, "toy-16", o.timing_runs)})}}.dump();
    }
    try {
        const auto j = nlohmann::json::parse(text);
        const auto& rows = j.at("rows");
        if (rows.empty()) return {"bench_report", false, "no rows"};
        const auto& r = rows.at(0);
        static constexpr const char* metrics[] = {"prove_time_s", "verify_time_s", "proof_size_bytes", "pk_size_bytes", "vk_size_bytes"};
        bool ok = true;
        std::string d;
        for (const char* m : metrics) {
            const double v = r.at(m).get<double>();
            ok = ok && v > 0;
            d += detail::fmt("%s=%g ", m, v);
        }
        const auto gates = r.at("circuit_gates").get<size_t>(), layers = r.at("layers").get<size_t>();
        ok = ok && gates > 0 && layers > 0;
        d += detail::fmt("gates=%zu layers=%zu", gates, layers);
        return {"bench_report", ok, d};
    } catch (const std::exception& e) {
        return {"bench_report", false, std::string("unparseable bench output: ") + e.what()};
    }
}

using Suite = std::pair<const char*, Result (*)(const Options&)>;

inline const std::vector<Suite>& suites() {
    static const std::vector<Suite> s{{"completeness", completeness},
                                      {"soundness", soundness},
                                      {"succinctness", succinctness},
                                      {"quantization_fidelity", fidelity},
                                      {"sumcheck_oracle", sumcheck_oracle},
                                      {"pcs_consistency", pcs_consistency},
                                      {"transport_privacy", transport_privacy},
                                      {"wire_format_totality", fuzz},
                                      {"bench_report", bench_report}};
    return s;
}

/// Runs every suite (or those named in `only`), reporting each as it ends.
inline std::vector<Result> run_all(const Options& o, const std::function<void(const Result&)>& on_result, const std::vector<std::string>& only = {}) {
    std::vector<Result> out;
    for (const auto& [name, fn] : suites()) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = fn(o);
        } catch (const std::exception& e) {
            r = {name, false, std::string("exception: ") + e.what()};
        }
        r.seconds = seconds_since(t0);
        on_result(r);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string format_line(const Result& r) {
    return detail::fmt("[%s] %-22s %s (%.1fs)", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
}

} // namespace tdx::acceptance
