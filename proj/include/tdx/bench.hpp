#pragma once

// Performance report: prove/verify wall time (medians), proof and key sizes
// from serialized bytes, and the circuit size they were measured on.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdx/snark.hpp"

namespace tdx {

struct BenchRow {
    std::string label;
    double prove_s = 0, verify_s = 0;
    size_t proof_bytes = 0, pk_bytes = 0, vk_bytes = 0;
    size_t gates = 0, layers = 0, input_wires = 0;
    int runs = 0;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Prove time covers witness generation, commitment and proof; verify time
/// covers parsing and checking the serialized statement and proof.
inline BenchRow bench_model(const Model& model, const std::string& label, int runs = 5) {
    BenchRow row;
    row.label = label;
    row.runs = runs;
    const auto pk = setup(compile(model));
    row.pk_bytes = serialize_pk(pk).size();
    row.vk_bytes = serialize_vk(pk.vk).size();
    const auto stats = circuit_stats(pk.circuit);
    row.gates = stats.gates;
    row.layers = pk.circuit.depth();
    row.input_wires = stats.input_wires;

    std::vector<double> pt, vt;
    for (int i = 0; i < runs; ++i) {
        const auto frame = quantize_frame(synth_frame(1000 + static_cast<uint64_t>(i), model.spec), model.spec);
        auto t0 = std::chrono::steady_clock::now();
        const auto prep = prepare(pk, frame, static_cast<uint64_t>(i));
        const auto proof = serialize_proof(prove(pk, prep.statement, prep.witness));
        pt.push_back(seconds_since(t0));
        const auto stmt = serialize_statement(prep.statement);
        t0 = std::chrono::steady_clock::now();
        if (!verify_bytes(pk.vk, stmt, proof)) throw WitnessInvalid("bench: honest proof rejected");
        vt.push_back(seconds_since(t0));
        row.proof_bytes = proof.size();
    }
    row.prove_s = median(pt);
    row.verify_s = median(vt);
    return row;
}

inline nlohmann::json bench_json(const std::vector<BenchRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows)
        out.push_back({{"model", r.label},
                       {"prove_time_s", r.prove_s},
                       {"verify_time_s", r.verify_s},
                       {"proof_size_bytes", r.proof_bytes},
                       {"pk_size_bytes", r.pk_bytes},
                       {"vk_size_bytes", r.vk_bytes},
                       {"circuit_gates", r.gates},
                       {"layers", r.layers},
                       {"input_wires", r.input_wires},
                       {"runs", r.runs}});
    return out;
}

inline std::string bench_text(const std::vector<BenchRow>& rows) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %12s %12s %12s %12s %12s %12s %7s\n", "Model", "Prove Time", "Verify Time", "Proof Size",
                  "PK Size", "VK Size", "Gates", "Layers");
    out += line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-12s %11.3fs %11.4fs %10.1fKB %10.1fKB %10.1fKB %12zu %7zu\n", r.label.c_str(), r.prove_s,
                      r.verify_s, r.proof_bytes / 1024.0, r.pk_bytes / 1024.0, r.vk_bytes / 1024.0, r.gates, r.layers);
        out += line;
    }
    return out;
}

} // namespace tdx
