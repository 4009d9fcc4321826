// tdx: command-line entry point for the verifiable detector pipeline.
//
// Exit codes: 0 success or accept, 1 verification reject, 2 usage error,
// 3 format error (malformed or mismatched input file), 4 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdx/acceptance.hpp"

namespace fs = std::filesystem;
using namespace tdx;

namespace {

enum Exit { kOk = 0, kReject = 1, kUsage = 2, kFormat = 3, kRuntime = 4 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, std::span<const uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw UsageError("write failed: " + path);
}

void write_text(const std::string& path, const std::string& s) { write_file(path, std::span(reinterpret_cast<const uint8_t*>(s.data()), s.size())); }

ModelSpec geometry(bool full, uint32_t side) { return full ? ModelSpec::full() : ModelSpec::toy(side); }

/// Checks optional --width/--height flags against the model before reading pixels.
void check_dims(const ModelSpec& spec, uint32_t width, uint32_t height) {
    if ((width && width != spec.width) || (height && height != spec.height))
        throw ShapeError("frame is " + std::to_string(width ? width : spec.width) + "x" + std::to_string(height ? height : spec.height) +
                         " but the model expects " + std::to_string(spec.width) + "x" + std::to_string(spec.height));
}

bool json_out(const std::string& format) { return format == "json"; }

nlohmann::json stats_json(const LayeredCircuit& c) {
    const auto s = circuit_stats(c);
    return {{"depth", s.depth}, {"layer_bits", s.layer_bits}, {"gates", s.gates}, {"constraints", s.constraints}, {"input_wires", s.input_wires},
            {"terms", s.terms}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tdx: verifiable fixed-point deepfake detector inference"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string format = "text";
    app.add_option("--format", format, "Report format")->check(CLI::IsMember({"text", "json"}));

    // synth
    auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic model (and optionally frames)");
    uint64_t seed = 42;
    bool toy_flag = false, full_flag = false;
    uint32_t side = 16, frame_count = 0;
    std::string out_path, frames_dir;
    synth->add_option("--seed", seed, "Model seed");
    synth->add_flag("--toy", toy_flag, "Toy geometry (default)");
    synth->add_flag("--full", full_flag, "Full 224x224 geometry");
    synth->add_option("--side", side, "Toy input side (multiple of 16)");
    synth->add_option("--out", out_path, "Output .tdxw path")->required();
    synth->add_option("--frames", frames_dir, "Also write synthetic .rgb frames into this directory");
    synth->add_option("--count", frame_count, "Number of frames to write with --frames");

    // compile
    auto* compile_cmd = app.add_subcommand("compile", "Compile a model to its circuit and print statistics");
    std::string model_path, digest_path;
    bool dump = false;
    compile_cmd->add_option("--model", model_path, "Model .tdxw");
    compile_cmd->add_flag("--toy", toy_flag, "Use the seed-42 toy model when --model is absent");
    compile_cmd->add_option("--digest-out", digest_path, "Circuit digest file (default <model>.digest)");
    compile_cmd->add_flag("--layout", dump, "Print the wire layout");

    // keygen
    auto* keygen = app.add_subcommand("keygen", "Derive proving and verification keys");
    std::string pk_path, vk_path;
    keygen->add_option("--model", model_path, "Model .tdxw")->required();
    keygen->add_option("--out-pk", pk_path, "Proving key output")->required();
    keygen->add_option("--out-vk", vk_path, "Verification key output")->required();

    // prove
    auto* prove_cmd = app.add_subcommand("prove", "Run the detector on a frame and prove the verdict");
    std::string frame_path, proof_path, stmt_path;
    uint32_t width = 0, height = 0;
    std::optional<uint64_t> blind;
    prove_cmd->add_option("--pk", pk_path, "Proving key")->required();
    prove_cmd->add_option("--frame", frame_path, "Raw planar 8-bit RGB frame")->required();
    prove_cmd->add_option("--width", width, "Frame width (checked against the model)");
    prove_cmd->add_option("--height", height, "Frame height (checked against the model)");
    prove_cmd->add_option("--out", proof_path, "Proof output")->required();
    prove_cmd->add_option("--out-statement", stmt_path, "Statement output (default <out>.statement)");
    prove_cmd->add_option("--blind-seed", blind, "Deterministic commitment blinding (random if absent)");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "Verify a proof; exit 0 accept, 1 reject");
    verify_cmd->add_option("--vk", vk_path, "Verification key")->required();
    verify_cmd->add_option("--statement", stmt_path, "Statement")->required();
    verify_cmd->add_option("--proof", proof_path, "Proof")->required();

    // serve
    auto* serve = app.add_subcommand("serve", "Run the verifier service");
    std::string bind = "127.0.0.1:7878", audit_path = "tdx-audit.jsonl";
    serve->add_option("--vk", vk_path, "Verification key")->required();
    serve->add_option("--bind", bind, "Listen address host:port (env TDX_BIND overrides)");
    serve->add_option("--audit-log", audit_path, "Append-only JSON-lines audit log");

    // stream
    auto* stream = app.add_subcommand("stream", "Prove a directory of frames and submit them to a verifier");
    std::string connect = "127.0.0.1:7878", report_path;
    stream->add_option("--pk", pk_path, "Proving key")->required();
    stream->add_option("--frames", frames_dir, "Directory of .rgb frames (sorted by name)")->required();
    stream->add_option("--connect", connect, "Verifier address host:port (env TDX_CONNECT overrides)");
    stream->add_option("--width", width, "Frame width (checked against the model)");
    stream->add_option("--height", height, "Frame height (checked against the model)");
    stream->add_option("--report", report_path, "Write the session report as JSON");

    // bench
    auto* bench = app.add_subcommand("bench", "Measure prove/verify time and proof/key sizes");
    int runs = 5;
    std::string bench_json_path;
    bench->add_flag("--toy", toy_flag, "Toy geometry at 16x16 and 32x32 (default)");
    bench->add_flag("--full", full_flag, "Full 224x224 geometry (slow, memory hungry)");
    bench->add_option("--runs", runs, "Runs per row (median reported)")->check(CLI::Range(1, 1000));
    bench->add_option("--json-out", bench_json_path, "Also write the JSON report here");

    // selftest
    auto* selftest = app.add_subcommand("selftest", "Run the acceptance suites");
    bool quick = false;
    std::vector<std::string> only;
    selftest->add_flag("--quick", quick, "Reduced trial counts (not a substitute for the full run)");
    selftest->add_option("--only", only, "Run only these suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    if (toy_flag && full_flag) {
        std::cerr << "error: usage: --toy and --full are exclusive\n";
        return kUsage;
    }

    try {
        if (*synth) {
            const auto spec = geometry(full_flag, side);
            const auto model = synth_model(seed, spec);
            write_file(out_path, save_weights(model.spec, model.weights));
            nlohmann::json j{{"model", out_path}, {"digest", to_hex(model_digest(model))}, {"height", spec.height}, {"width", spec.width}};
            if (!frames_dir.empty()) {
                fs::create_directories(frames_dir);
                for (uint32_t i = 0; i < frame_count; ++i) {
                    char name[32];
                    std::snprintf(name, sizeof name, "frame_%05u.rgb", i);
                    write_file((fs::path(frames_dir) / name).string(), synth_frame(i, spec));
                }
                j["frames"] = frame_count;
            }
            if (json_out(format))
                std::cout << j.dump() << "\n";
            else
                std::cout << "wrote " << out_path << " (" << spec.height << "x" << spec.width << ", digest " << to_hex(model_digest(model)) << ")\n";
            return kOk;
        }

        if (*compile_cmd) {
            Model model;
            if (!model_path.empty())
                model = load_weights(read_file(model_path));
            else if (toy_flag)
                model = synth_model(42, ModelSpec::toy());
            else
                throw UsageError("compile needs --model or --toy");
            const auto circuit = compile(model);
            const auto gates = materialize(circuit);
            const auto digest = to_hex(circuit_digest(circuit, gates));
            if (digest_path.empty()) digest_path = (model_path.empty() ? std::string("toy") : model_path) + ".digest";
            write_text(digest_path, digest + "\n");
            auto j = stats_json(circuit);
            j["circuit_digest"] = digest;
            j["model_digest"] = to_hex(model_digest(model));
            if (json_out(format)) {
                std::cout << j.dump() << "\n";
            } else {
                const auto s = circuit_stats(circuit);
                std::cout << "layers        " << s.depth << "\n"
                          << "gates         " << s.gates << "\n"
                          << "constraints   " << s.constraints << "\n"
                          << "input wires   " << s.input_wires << "\n"
                          << "wiring terms  " << s.terms << "\n"
                          << "layer bits   ";
                for (auto b : s.layer_bits) std::cout << " " << b;
                std::cout << "\ncircuit digest " << digest << " (written to " << digest_path << ")\n";
                if (dump) std::cout << dump_layout(circuit);
            }
            return kOk;
        }

        if (*keygen) {
            const auto model = load_weights(read_file(model_path));
            const auto pk = setup(compile(model));
            const auto pkb = serialize_pk(pk), vkb = serialize_vk(pk.vk);
            write_file(pk_path, pkb);
            write_file(vk_path, vkb);
            const double bits = pcs_soundness_bits(pk.vk.pcs_shape(), pk.vk.pcs);
            nlohmann::json j{{"pk", pk_path},         {"vk", vk_path},         {"pk_bytes", pkb.size()},
                             {"vk_bytes", vkb.size()}, {"vk_digest", to_hex(pk.vk.digest)}, {"pcs_soundness_bits", bits}};
            if (json_out(format))
                std::cout << j.dump() << "\n";
            else
                std::cout << "pk " << pk_path << " (" << pkb.size() << " B), vk " << vk_path << " (" << vkb.size() << " B)\nvk digest "
                          << to_hex(pk.vk.digest) << "\ncommitment soundness ~" << static_cast<int>(bits) << " bits\n";
            return kOk;
        }

        if (*prove_cmd) {
            const auto pk = deserialize_pk(read_file(pk_path));
            const auto& spec = pk.circuit.model.spec;
            check_dims(spec, width, height);
            const auto frame = quantize_frame(read_file(frame_path), spec);
            std::random_device rd;
            const uint64_t bs = blind ? *blind : (uint64_t{rd()} << 32) ^ rd();
            const auto t0 = std::chrono::steady_clock::now();
            const auto prep = prepare(pk, frame, bs);
            const auto proof = serialize_proof(prove(pk, prep.statement, prep.witness));
            const double secs = seconds_since(t0);
            if (stmt_path.empty()) stmt_path = proof_path + ".statement";
            write_file(proof_path, proof);
            write_file(stmt_path, serialize_statement(prep.statement));
            nlohmann::json j{{"verdict", prep.statement.verdict}, {"label", prep.statement.verdict ? "fake" : "real"}, {"prove_time_s", secs},
                             {"proof_bytes", proof.size()},     {"proof", proof_path},                               {"statement", stmt_path}};
            if (json_out(format))
                std::cout << j.dump() << "\n";
            else
                std::cout << "verdict " << prep.statement.verdict << " (" << (prep.statement.verdict ? "fake" : "real") << ")\nprove time "
                          << secs << " s, proof " << proof.size() << " B -> " << proof_path << ", statement -> " << stmt_path << "\n";
            return kOk;
        }

        if (*verify_cmd) {
            const auto vk = deserialize_vk(read_file(vk_path));
            const auto stmt = read_file(stmt_path), proof = read_file(proof_path);
            const auto t0 = std::chrono::steady_clock::now();
            const bool ok = verify_bytes(vk, stmt, proof);
            const double secs = seconds_since(t0);
            int verdict = -1;
            try {
                verdict = deserialize_statement(stmt).verdict;
            } catch (const FormatError&) {
            }
            if (json_out(format))
                std::cout << nlohmann::json{{"accepted", ok}, {"verdict", verdict}, {"verify_time_s", secs}}.dump() << "\n";
            else
                std::cout << (ok ? "ACCEPT" : "REJECT") << " verdict " << verdict << " (" << secs * 1e3 << " ms)\n";
            return ok ? kOk : kReject;
        }

        if (*serve) {
            const auto vk = deserialize_vk(read_file(vk_path));
            const auto ep = endpoint_from(bind, "TDX_BIND");
            run_verifier_service(vk, ep, audit_path, [&](uint16_t port) {
                std::cout << "listening on " << ep.host << ":" << port << " (vk " << to_hex(vk.digest) << ")" << std::endl;
            });
        }

        if (*stream) {
            const auto pk = deserialize_pk(read_file(pk_path));
            check_dims(pk.circuit.model.spec, width, height);
            std::vector<FrameInput> frames;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(frames_dir))
                if (e.is_regular_file() && e.path().extension() == ".rgb") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            if (files.empty()) throw UsageError("no .rgb frames in " + frames_dir);
            for (const auto& p : files) frames.push_back({p.filename().string(), read_file(p.string())});
            // Geometry is checked before connecting.
            for (const auto& f : frames) quantize_frame(f.rgb, pk.circuit.model.spec);
            auto conn = TcpStream::connect(endpoint_from(connect, "TDX_CONNECT"));
            const auto rep = run_client(frames, pk, *conn);
            const auto j = rep.to_json();
            if (!report_path.empty()) write_text(report_path, j.dump(2) + "\n");
            if (json_out(format)) {
                std::cout << j.dump() << "\n";
            } else {
                for (const auto& f : rep.frames)
                    std::cout << f.frame_id << " " << f.name << " verdict " << f.verdict << " " << (f.accepted ? "accepted" : "REJECTED") << " prove "
                              << f.prove_seconds << " s verify " << f.verify_micros << " us proof " << f.proof_bytes << " B\n";
                std::cout << rep.accepted() << "/" << frames.size() << " accepted\n";
            }
            if (!rep.complete) {
                std::cerr << "error: ProtocolError: " << rep.error << "\n";
                return kRuntime;
            }
            return rep.accepted() == frames.size() ? kOk : kReject;
        }

        if (*bench) {
            std::vector<BenchRow> rows;
            if (full_flag) {
                rows.push_back(bench_model(synth_model(42, ModelSpec::full()), "full-224", runs));
            } else {
                rows.push_back(bench_model(synth_model(42, ModelSpec::toy(16)), "toy-16", runs));
                rows.push_back(bench_model(synth_model(42, ModelSpec::toy(32)), "toy-32", runs));
            }
            const nlohmann::json j{{"rows", bench_json(rows)}};
            if (!bench_json_path.empty()) write_text(bench_json_path, j.dump(2) + "\n");
            if (json_out(format))
                std::cout << j.dump() << "\n";
            else
                std::cout << bench_text(rows);
            return kOk;
        }

        if (*selftest) {
            acceptance::Options o;
            if (quick) {
                o.completeness_runs = 20;
                o.soundness_per_kind = 10;
                o.fidelity_frames = 200;
                o.sumcheck_polys = 100;
                o.pcs_vectors = 22;
                o.fuzz_cases = 20000;
                o.timing_runs = 3;
            }
            const auto results = acceptance::run_all(
                o, [&](const acceptance::Result& r) {
                    if (!json_out(format)) std::cout << acceptance::format_line(r) << std::endl;
                },
                only);
            size_t passed = 0;
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& r : results) {
                passed += r.passed;
                arr.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
            }
            if (json_out(format))
                std::cout << nlohmann::json{{"results", arr}, {"passed", passed}, {"total", results.size()}}.dump() << "\n";
            else
                std::cout << passed << "/" << results.size() << " criteria passed" << (quick ? " (quick mode)" : "") << "\n";
            return passed == results.size() && !results.empty() ? kOk : kReject;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return kUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: FormatError: " << e.what() << "\n";
        return kFormat;
    } catch (const ShapeError& e) {
        std::cerr << "error: ShapeError: " << e.what() << "\n";
        return kFormat;
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
