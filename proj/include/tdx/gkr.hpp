#pragma once

// Layer-by-layer reduction of the output claim to one evaluation of the
// input layer's multilinear extension.
//
// For layer i with claims at points z1 (and z2), weights w(g) = eq(z1,g) +
// beta * eq(z2,g). The prover shows
//   claim - K(w) = sum_x V(x) * [ L(w,x) + sum_y M(w,x,y) V(y) ]
// in two sumchecks: over x (giving u and V(u)), then over y (giving v and
// V(v)). The verifier evaluates K, L and M itself from the structured
// wiring. Two input-layer claims are finally merged by one more sumcheck.

#include <optional>
#include <vector>

#include "tdx/mle.hpp"
#include "tdx/sumcheck.hpp"
#include "tdx/wiring.hpp"

namespace tdx {

struct GkrLayerProof {
    SumcheckProof phase1;
    Fp2 vu;
    SumcheckProof phase2;
    Fp2 vv;
};

struct GkrProof {
    std::vector<GkrLayerProof> layers; // output layer first
    SumcheckProof merge;
    Fp2 v_star;
};

struct InputClaim {
    std::vector<Fp2> point;
    Fp2 value;
};

namespace detail {

struct ClaimPoints {
    std::vector<Fp2> z1, z2;
    Fp2 beta;
    bool two = false;
};

inline std::vector<Fp2> claim_weights(const ClaimPoints& c) {
    auto w = eq_table(c.z1);
    if (c.two) {
        const auto e2 = eq_table(c.z2);
        for (size_t i = 0; i < w.size(); ++i) w[i] += c.beta * e2[i];
    }
    return w;
}

/// sum over terms of `kind` of the wiring MLE, combined over the claim points.
inline Fp2 wiring_eval(const StructuredLayer& layer, const LayerLayout& prev, TermKind kind, const ClaimPoints& c,
                       std::span<const Fp2> x, std::span<const Fp2> y) {
    Fp2 acc = Fp2::zero();
    for (const auto& t : layer.terms) {
        if (t.kind != kind) continue;
        acc += eval_term(t, layer.layout, &prev, c.z1, x, y);
        if (c.two) acc += c.beta * eval_term(t, layer.layout, &prev, c.z2, x, y);
    }
    return acc;
}

inline Fp2 output_claim(int verdict, std::span<const Fp2> r) {
    Fp2 acc = Fp(static_cast<uint64_t>(verdict));
    for (const auto& x : r) acc *= Fp2::one() - x;
    return acc;
}

} // namespace detail

/// `layers` holds every layer's values (input first); `ex[i]` wires layer i to i-1.
inline std::pair<GkrProof, InputClaim> gkr_prove(const std::vector<StructuredLayer>& structure, const std::vector<ExplicitLayer>& ex,
                                                 const std::vector<std::vector<Fp>>& layers, Transcript& tr) {
    const size_t depth = structure.size();
    GkrProof proof;
    detail::ClaimPoints cp;
    cp.z1 = tr.challenge_point("gkr/output", structure.back().layout.bits);

    for (size_t i = depth - 1; i >= 1; --i) {
        const auto& e = ex[i];
        const auto& prev = layers[i - 1];
        const size_t n_prev = prev.size();
        const auto w = detail::claim_weights(cp);

        // Phase 1: h(x) = sum_g w(g) [L(g,x) + sum_y M(g,x,y) V(y)]
        std::vector<Fp2> h(n_prev, Fp2::zero());
        for (const auto& l : e.lin) h[l.in] += w[l.out] * l.coef;
        for (const auto& m : e.mul) h[m.in1] += w[m.out] * (m.coef * prev[m.in2]);
        std::vector<Fp2> v(prev.begin(), prev.end());
        auto p1 = sumcheck_prove({v, std::move(h)}, tr);
        GkrLayerProof lp;
        lp.phase1 = std::move(p1.proof);
        lp.vu = p1.finals[0];
        tr.absorb("gkr/vu", lp.vu);

        // Phase 2: V(u) * sum_y [sum_g,x w(g) eq(u,x) M(g,x,y)] V(y)
        const auto equ = eq_table(p1.point);
        std::vector<Fp2> h2(n_prev, Fp2::zero());
        for (const auto& m : e.mul) h2[m.in2] += w[m.out] * equ[m.in1] * m.coef;
        for (auto& x : h2) x *= lp.vu;
        auto p2 = sumcheck_prove({std::move(v), std::move(h2)}, tr);
        lp.phase2 = std::move(p2.proof);
        lp.vv = p2.finals[0];
        tr.absorb("gkr/vv", lp.vv);
        proof.layers.push_back(std::move(lp));

        cp.z1 = std::move(p1.point);
        cp.z2 = std::move(p2.point);
        cp.two = true;
        cp.beta = tr.challenge_ext("gkr/beta");
    }

    // Merge the two input-layer claims.
    auto w = detail::claim_weights(cp);
    std::vector<Fp2> v(layers[0].begin(), layers[0].end());
    auto pm = sumcheck_prove({std::move(v), std::move(w)}, tr);
    proof.merge = std::move(pm.proof);
    proof.v_star = pm.finals[0];
    tr.absorb("gkr/vstar", proof.v_star);
    InputClaim claim{std::move(pm.point), proof.v_star};
    return {std::move(proof), std::move(claim)};
}

/// Returns the input-layer claim (r*, v*) the commitment must certify, or nullopt.
inline std::optional<InputClaim> gkr_verify(const std::vector<StructuredLayer>& structure, int verdict, const GkrProof& proof,
                                            Transcript& tr) {
    const size_t depth = structure.size();
    if (proof.layers.size() != depth - 1) return std::nullopt;
    detail::ClaimPoints cp;
    cp.z1 = tr.challenge_point("gkr/output", structure.back().layout.bits);
    Fp2 claim = detail::output_claim(verdict, cp.z1);

    for (size_t i = depth - 1, k = 0; i >= 1; --i, ++k) {
        const auto& layer = structure[i];
        const auto& prev = structure[i - 1].layout;
        const auto& lp = proof.layers[k];
        const Fp2 kc = detail::wiring_eval(layer, prev, TermKind::Const, cp, {}, {});
        auto r1 = sumcheck_verify(lp.phase1, claim - kc, prev.bits, 2, tr);
        if (!r1) return std::nullopt;
        tr.absorb("gkr/vu", lp.vu);
        const Fp2 lw = detail::wiring_eval(layer, prev, TermKind::Linear, cp, r1->point, {});
        auto r2 = sumcheck_verify(lp.phase2, r1->value - lp.vu * lw, prev.bits, 2, tr);
        if (!r2) return std::nullopt;
        tr.absorb("gkr/vv", lp.vv);
        const Fp2 mw = detail::wiring_eval(layer, prev, TermKind::Mul, cp, r1->point, r2->point);
        if (!(r2->value == lp.vu * mw * lp.vv)) return std::nullopt;

        cp.z1 = std::move(r1->point);
        cp.z2 = std::move(r2->point);
        cp.two = true;
        cp.beta = tr.challenge_ext("gkr/beta");
        claim = lp.vu + cp.beta * lp.vv;
    }

    auto rm = sumcheck_verify(proof.merge, claim, structure[0].layout.bits, 2, tr);
    if (!rm) return std::nullopt;
    tr.absorb("gkr/vstar", proof.v_star);
    const Fp2 weight = eq_eval(cp.z1, rm->point) + cp.beta * eq_eval(cp.z2, rm->point);
    if (!(rm->value == proof.v_star * weight)) return std::nullopt;
    return InputClaim{std::move(rm->point), proof.v_star};
}

} // namespace tdx
