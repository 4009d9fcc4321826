#pragma once

// Structured description of a layered circuit.
//
// A layer is a set of aligned regions; each region is a tensor whose axes are
// padded to powers of two (axis 0 most significant). A gate value is
//     V_i(g) = sum_t coef_t * T_t(g, x[, y]) * V_{i-1}(x) [* V_{i-1}(y)]  (+ constants)
// where each term T_t relates an output region to one or two input regions
// through per-axis maps: affine (x_k = m * g_j + a), fixed (x_k = v) or
// table-driven (a small dense coefficient table over a few axes).
//
// The same description is (a) materialized into explicit sparse gate lists
// for evaluation and proving and (b) evaluated as a multilinear extension in
// time independent of the region sizes, which is what keeps verification
// succinct. Affine/extent relations are evaluated with a bit-serial carry
// automaton, LSB first.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tdx/bytes.hpp"
#include "tdx/errors.hpp"
#include "tdx/field.hpp"

namespace tdx {

struct Axis {
    uint32_t extent = 1;
    uint8_t bits = 0; // 2^bits >= extent

    static Axis of(uint32_t extent) {
        return {extent, static_cast<uint8_t>(extent <= 1 ? 0 : std::bit_width(extent - 1))};
    }
    friend bool operator==(const Axis&, const Axis&) = default;
};

struct Region {
    std::string name;
    std::vector<Axis> axes;
    uint64_t offset = 0;
    int bound_bits = 0; // magnitude bound of values held here (0 = boolean/unbounded info)

    unsigned bits() const {
        unsigned b = 0;
        for (const auto& a : axes) b += a.bits;
        return b;
    }
    uint64_t padded_size() const { return uint64_t{1} << bits(); }
    uint64_t real_size() const {
        uint64_t n = 1;
        for (const auto& a : axes) n *= a.extent;
        return n;
    }
    /// Lowest bit position of axis k inside the region-local index.
    unsigned axis_lo(size_t k) const {
        unsigned lo = 0;
        for (size_t j = k + 1; j < axes.size(); ++j) lo += axes[j].bits;
        return lo;
    }
    uint64_t index(std::span<const uint32_t> coord) const {
        uint64_t idx = 0;
        for (size_t k = 0; k < axes.size(); ++k) idx = (idx << axes[k].bits) | coord[k];
        return offset + idx;
    }
    friend bool operator==(const Region&, const Region&) = default;
};

struct LayerLayout {
    unsigned bits = 0;
    std::vector<Region> regions;

    uint64_t width() const { return uint64_t{1} << bits; }
    size_t find(const std::string& name) const {
        for (size_t i = 0; i < regions.size(); ++i)
            if (regions[i].name == name) return i;
        throw LayoutError("no region named " + name);
    }
    const Region& region(const std::string& name) const { return regions[find(name)]; }
    friend bool operator==(const LayerLayout&, const LayerLayout&) = default;
};

/// Assigns aligned offsets. Regions are packed from the top of the address
/// space downward in decreasing size; `pinned` (if any) sits at offset 0.
inline void allocate(LayerLayout& layout, const std::string& pinned = {}) {
    std::vector<size_t> order;
    uint64_t total = 0, pinned_size = 0;
    for (size_t i = 0; i < layout.regions.size(); ++i) {
        if (layout.regions[i].name == pinned) {
            pinned_size = layout.regions[i].padded_size();
            layout.regions[i].offset = 0;
            continue;
        }
        order.push_back(i);
        total += layout.regions[i].padded_size();
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return layout.regions[a].padded_size() > layout.regions[b].padded_size();
    });
    unsigned bits = 0;
    while ((uint64_t{1} << bits) < total + pinned_size ||
           (pinned_size && (uint64_t{1} << bits) - total < pinned_size))
        ++bits;
    if (bits > 32) throw LayoutError("layer wider than 2^32 wires");
    uint64_t top = uint64_t{1} << bits;
    for (size_t i : order) {
        top -= layout.regions[i].padded_size();
        layout.regions[i].offset = top;
    }
    layout.bits = bits;
}

// ---------------------------------------------------------------------------
// Terms

enum class TermKind : uint8_t { Const = 0, Linear = 1, Mul = 2 };
enum class Role : uint8_t { Out = 0, In1 = 1, In2 = 2 };

struct AxisMap {
    enum class Kind : uint8_t { Affine = 0, Fixed = 1, Table = 2 };
    Kind kind = Kind::Affine;
    uint8_t out_axis = 0; // Affine
    int8_t mult = 1;      // Affine
    int32_t add = 0;      // Affine
    uint32_t value = 0;   // Fixed

    static AxisMap same(uint8_t k) { return {Kind::Affine, k, 1, 0, 0}; }
    static AxisMap affine(uint8_t k, int8_t m, int32_t a) { return {Kind::Affine, k, m, a, 0}; }
    static AxisMap fixed(uint32_t v) { return {Kind::Fixed, 0, 0, 0, v}; }
    static AxisMap table() { return {Kind::Table, 0, 0, 0, 0}; }
    friend bool operator==(const AxisMap&, const AxisMap&) = default;
};

struct TableDim {
    Role role = Role::Out;
    uint8_t axis = 0;
    friend bool operator==(const TableDim&, const TableDim&) = default;
};

/// Dense coefficient table, row-major over the dims' extents.
struct CoefTable {
    std::vector<TableDim> dims;
    std::vector<int64_t> values;
    bool empty() const { return dims.empty(); }
    friend bool operator==(const CoefTable&, const CoefTable&) = default;
};

struct Term {
    TermKind kind = TermKind::Linear;
    int64_t coef = 1;
    uint32_t out = 0, in1 = 0, in2 = 0; // region indices
    std::vector<AxisMap> map1, map2;
    CoefTable table;
    friend bool operator==(const Term&, const Term&) = default;
};

struct StructuredLayer {
    LayerLayout layout;
    std::vector<Term> terms; // reference regions of this layer (out) and of the previous layer (in)
    friend bool operator==(const StructuredLayer&, const StructuredLayer&) = default;
};

// ---------------------------------------------------------------------------
// Explicit gates

struct LinearEntry {
    uint32_t out, in;
    Fp coef;
};
struct MulEntry {
    uint32_t out, in1, in2;
    Fp coef;
};
struct ConstEntry {
    uint32_t out;
    Fp coef;
};

struct ExplicitLayer {
    std::vector<LinearEntry> lin;
    std::vector<MulEntry> mul;
    std::vector<ConstEntry> cst;
    size_t entries() const { return lin.size() + mul.size() + cst.size(); }
};

namespace detail {

inline uint32_t table_extent(const TableDim& d, const Region& out, const Region& in1, const Region& in2) {
    const Region& r = d.role == Role::Out ? out : d.role == Role::In1 ? in1 : in2;
    return r.axes.at(d.axis).extent;
}

} // namespace detail

/// Structural checks for a term against its layouts. Throws LayoutError.
inline void validate_term(const Term& t, const LayerLayout& out_layout, const LayerLayout* in_layout) {
    if (t.out >= out_layout.regions.size()) throw LayoutError("term: output region out of range");
    const Region& out = out_layout.regions[t.out];
    std::vector<int> out_refs(out.axes.size(), 0);
    size_t table_refs = 0;
    auto check_map = [&](const std::vector<AxisMap>& map, uint32_t region) {
        if (!in_layout || region >= in_layout->regions.size()) throw LayoutError("term: input region out of range");
        const Region& in = in_layout->regions[region];
        if (map.size() != in.axes.size()) throw LayoutError("term: axis map arity mismatch");
        for (size_t k = 0; k < map.size(); ++k) {
            const auto& m = map[k];
            switch (m.kind) {
            case AxisMap::Kind::Affine:
                if (m.out_axis >= out.axes.size()) throw LayoutError("term: affine map references missing axis");
                if (m.mult < 1 || m.mult > 2) throw LayoutError("term: affine multiplier out of range");
                if (m.add < -8 || m.add > 8) throw LayoutError("term: affine offset out of range");
                out_refs[m.out_axis] = 1;
                break;
            case AxisMap::Kind::Fixed:
                if (m.value >= in.axes[k].extent) throw LayoutError("term: fixed coordinate outside extent");
                break;
            case AxisMap::Kind::Table: ++table_refs; break;
            default: throw LayoutError("term: unknown axis map kind");
            }
        }
    };
    if (t.kind != TermKind::Const) check_map(t.map1, t.in1);
    if (t.kind == TermKind::Mul) check_map(t.map2, t.in2);
    if (t.kind == TermKind::Const && (!t.map1.empty() || !t.map2.empty())) throw LayoutError("term: const with inputs");
    if (t.kind == TermKind::Linear && !t.map2.empty()) throw LayoutError("term: linear with second input");

    size_t table_in = 0;
    uint64_t table_size = 1;
    for (const auto& d : t.table.dims) {
        if (d.role == Role::Out) {
            if (d.axis >= out.axes.size()) throw LayoutError("term: table references missing output axis");
            if (out_refs[d.axis]) throw LayoutError("term: output axis both mapped and tabled");
            out_refs[d.axis] = 2;
            table_size *= out.axes[d.axis].extent;
        } else {
            const auto& map = d.role == Role::In1 ? t.map1 : t.map2;
            const uint32_t reg = d.role == Role::In1 ? t.in1 : t.in2;
            if ((d.role == Role::In2 && t.kind != TermKind::Mul) || (d.role == Role::In1 && t.kind == TermKind::Const))
                throw LayoutError("term: table references absent input");
            if (d.axis >= map.size() || map[d.axis].kind != AxisMap::Kind::Table)
                throw LayoutError("term: table dim does not match a tabled axis");
            ++table_in;
            table_size *= in_layout->regions[reg].axes[d.axis].extent;
        }
        if (table_size > (uint64_t{1} << 26)) throw LayoutError("term: coefficient table too large");
    }
    if (table_in != table_refs) throw LayoutError("term: tabled axes and table dims disagree");
    if (t.table.values.size() != (t.table.dims.empty() ? 0 : table_size)) throw LayoutError("term: table size mismatch");
    for (size_t a = 0; a < t.table.dims.size(); ++a)
        for (size_t b = a + 1; b < t.table.dims.size(); ++b)
            if (t.table.dims[a] == t.table.dims[b]) throw LayoutError("term: duplicate table dim");
}

/// Expands a term into explicit gate entries, appended to `out`.
inline void materialize_term(const Term& t, const LayerLayout& out_layout, const LayerLayout* in_layout, ExplicitLayer& dst) {
    const Region& out = out_layout.regions[t.out];
    static const Region kEmpty;
    const Region& r1 = t.kind != TermKind::Const ? in_layout->regions[t.in1] : kEmpty;
    const Region& r2 = t.kind == TermKind::Mul ? in_layout->regions[t.in2] : kEmpty;

    std::vector<uint8_t> out_tabled(out.axes.size(), 0);
    for (const auto& d : t.table.dims)
        if (d.role == Role::Out) out_tabled[d.axis] = 1;
    std::vector<size_t> free_axes;
    for (size_t k = 0; k < out.axes.size(); ++k)
        if (!out_tabled[k]) free_axes.push_back(k);

    std::vector<uint32_t> tdims_ext;
    for (const auto& d : t.table.dims) tdims_ext.push_back(detail::table_extent(d, out, r1, r2));
    const size_t n_entries = t.table.empty() ? 1 : t.table.values.size();

    std::vector<uint32_t> g(out.axes.size(), 0), c1(r1.axes.size(), 0), c2(r2.axes.size(), 0), tidx(tdims_ext.size(), 0);
    auto resolve = [&](const std::vector<AxisMap>& map, const Region& reg, Role role, std::vector<uint32_t>& coord) {
        for (size_t k = 0; k < map.size(); ++k) {
            int64_t v = 0;
            switch (map[k].kind) {
            case AxisMap::Kind::Affine: v = int64_t{map[k].mult} * g[map[k].out_axis] + map[k].add; break;
            case AxisMap::Kind::Fixed: v = map[k].value; break;
            case AxisMap::Kind::Table:
                for (size_t d = 0; d < t.table.dims.size(); ++d)
                    if (t.table.dims[d].role == role && t.table.dims[d].axis == k) v = tidx[d];
                break;
            }
            if (v < 0 || v >= reg.axes[k].extent) return false;
            coord[k] = static_cast<uint32_t>(v);
        }
        return true;
    };

    const Fp coef = Fp::from_signed(t.coef);
    std::vector<uint32_t> odo(free_axes.size(), 0);
    for (bool more = true; more;) {
        for (size_t i = 0; i < free_axes.size(); ++i) g[free_axes[i]] = odo[i];
        for (size_t e = 0; e < n_entries; ++e) {
            int64_t tv = 1;
            if (!t.table.empty()) {
                tv = t.table.values[e];
                if (tv == 0) continue;
                size_t rem = e;
                for (size_t d = tdims_ext.size(); d-- > 0;) {
                    tidx[d] = static_cast<uint32_t>(rem % tdims_ext[d]);
                    rem /= tdims_ext[d];
                }
                for (size_t d = 0; d < t.table.dims.size(); ++d)
                    if (t.table.dims[d].role == Role::Out) g[t.table.dims[d].axis] = tidx[d];
            }
            const Fp c = coef * Fp::from_signed(tv);
            const auto go = static_cast<uint32_t>(out.index(g));
            if (t.kind == TermKind::Const) {
                dst.cst.push_back({go, c});
                continue;
            }
            if (!resolve(t.map1, r1, Role::In1, c1)) continue;
            const auto x = static_cast<uint32_t>(r1.index(c1));
            if (t.kind == TermKind::Linear) {
                dst.lin.push_back({go, x, c});
                continue;
            }
            if (!resolve(t.map2, r2, Role::In2, c2)) continue;
            dst.mul.push_back({go, x, static_cast<uint32_t>(r2.index(c2)), c});
        }
        more = false;
        for (size_t i = free_axes.size(); i-- > 0;) {
            if (++odo[i] < out.axes[free_axes[i]].extent) {
                more = true;
                break;
            }
            odo[i] = 0;
        }
    }
}

inline ExplicitLayer materialize(const StructuredLayer& layer, const LayerLayout& prev) {
    ExplicitLayer out;
    for (const auto& t : layer.terms) materialize_term(t, layer.layout, &prev, out);
    return out;
}

// ---------------------------------------------------------------------------
// Multilinear extension of a term

namespace detail {

inline Fp2 eq_bit(Fp2 r, unsigned bit) { return bit ? r : Fp2::one() - r; }

/// prod_k eq(pt[lo + k], bit k of value) over `count` bits.
inline Fp2 eq_const(std::span<const Fp2> pt, unsigned lo, unsigned count, uint64_t value) {
    Fp2 acc = Fp2::one();
    for (unsigned k = 0; k < count; ++k) acc *= eq_bit(pt[lo + k], (value >> k) & 1);
    return acc;
}

/// eq(pt[lo..lo+bits), i) for every i < extent.
inline std::vector<Fp2> eq_table(std::span<const Fp2> pt, unsigned lo, unsigned bits, uint32_t extent) {
    std::vector<Fp2> t(size_t{1} << bits);
    t[0] = Fp2::one();
    for (unsigned k = 0; k < bits; ++k) {
        const Fp2 r = pt[lo + k];
        const size_t half = size_t{1} << k;
        for (size_t i = 0; i < half; ++i) {
            t[i + half] = t[i] * r;
            t[i] = t[i] - t[i + half];
        }
    }
    t.resize(extent);
    return t;
}

/// One participant of an affine group: its coordinate equals mult * g + add
/// (for the output participant: mult = 1, add = 0) and must be < extent.
struct Participant {
    std::span<const Fp2> pt;
    unsigned lo = 0, bits = 0;
    uint32_t extent = 1;
    int mult = 1, add = 0;
    bool is_out = false;
};

/// Sum over all boolean assignments of the participants' coordinates of
/// prod eq(pt, coord) * [every relation and extent holds].
inline Fp2 affine_group(const std::vector<Participant>& ps) {
    // ps[0] is the output axis; the rest are inputs tied to it.
    const size_t n = ps.size();
    unsigned len = 0;
    for (const auto& p : ps) len = std::max(len, p.bits);
    for (const auto& p : ps)
        if (p.mult > 2 || p.add > 8 || p.add < -8) throw LayoutError("affine group: relation out of range");
    len += 6; // room for carries to settle

    // State: carries of inputs (offset by 16, 5 bits each) and lt flags (1 bit each).
    std::map<uint64_t, Fp2> cur, nxt;
    auto pack = [&](const std::vector<int>& carry, const std::vector<uint8_t>& lt) {
        uint64_t s = 0;
        for (size_t i = 1; i < n; ++i) s = (s << 5) | static_cast<uint64_t>(carry[i] + 16);
        for (size_t i = 0; i < n; ++i) s = (s << 1) | lt[i];
        return s;
    };
    auto unpack = [&](uint64_t s, std::vector<int>& carry, std::vector<uint8_t>& lt) {
        for (size_t i = n; i-- > 0;) {
            lt[i] = s & 1;
            s >>= 1;
        }
        for (size_t i = n; i-- > 1;) {
            carry[i] = static_cast<int>(s & 31) - 16;
            s >>= 5;
        }
    };
    std::vector<int> carry(n, 0);
    std::vector<uint8_t> lt(n, 0);
    std::vector<uint8_t> bounded(n, 0);
    for (size_t i = 0; i < n; ++i) {
        bounded[i] = ps[i].extent < (uint64_t{1} << ps[i].bits);
        if (!bounded[i]) lt[i] = 1;
        if (i) carry[i] = ps[i].add;
    }
    cur[pack(carry, lt)] = Fp2::one();

    std::vector<int> c2(n);
    std::vector<uint8_t> lt2(n);
    for (unsigned k = 0; k < len; ++k) {
        nxt.clear();
        // Variables present at this bit position.
        std::vector<size_t> vars;
        for (size_t i = 0; i < n; ++i)
            if (k < ps[i].bits) vars.push_back(i);
        const unsigned combos = 1u << vars.size();
        for (const auto& [state, weight] : cur) {
            unpack(state, carry, lt);
            for (unsigned m = 0; m < combos; ++m) {
                std::vector<unsigned> bit(n, 0);
                Fp2 w = weight;
                for (size_t v = 0; v < vars.size(); ++v) {
                    bit[vars[v]] = (m >> v) & 1;
                    w *= eq_bit(ps[vars[v]].pt[ps[vars[v]].lo + k], bit[vars[v]]);
                }
                bool ok = true;
                for (size_t i = 1; i < n && ok; ++i) {
                    const int tsum = carry[i] + ps[i].mult * static_cast<int>(bit[0]) - static_cast<int>(bit[i]);
                    if (tsum & 1) ok = false;
                    c2[i] = tsum >> 1; // exact: tsum is even
                }
                if (!ok) continue;
                for (size_t i = 0; i < n; ++i) {
                    lt2[i] = lt[i];
                    if (bounded[i] && k < ps[i].bits) {
                        const unsigned e = (ps[i].extent >> k) & 1;
                        if (bit[i] != e) lt2[i] = bit[i] < e;
                    }
                }
                nxt[pack(c2, lt2)] += w;
            }
        }
        std::swap(cur, nxt);
    }
    Fp2 total = Fp2::zero();
    for (const auto& [state, weight] : cur) {
        unpack(state, carry, lt);
        bool ok = true;
        for (size_t i = 1; i < n; ++i) ok = ok && carry[i] == 0;
        for (size_t i = 0; i < n; ++i) ok = ok && lt[i];
        if (ok) total += weight;
    }
    return total;
}

} // namespace detail

/// MLE of a term's predicate at (z, x, y); x/y are ignored for kinds that lack them.
inline Fp2 eval_term(const Term& t, const LayerLayout& out_layout, const LayerLayout* in_layout,
                     std::span<const Fp2> z, std::span<const Fp2> x, std::span<const Fp2> y) {
    const Region& out = out_layout.regions[t.out];
    Fp2 acc = Fp::from_signed(t.coef);
    acc *= detail::eq_const(z, out.bits(), out_layout.bits - out.bits(), out.offset >> out.bits());

    const Region* r1 = t.kind != TermKind::Const ? &in_layout->regions[t.in1] : nullptr;
    const Region* r2 = t.kind == TermKind::Mul ? &in_layout->regions[t.in2] : nullptr;
    if (r1) acc *= detail::eq_const(x, r1->bits(), in_layout->bits - r1->bits(), r1->offset >> r1->bits());
    if (r2) acc *= detail::eq_const(y, r2->bits(), in_layout->bits - r2->bits(), r2->offset >> r2->bits());
    if (acc.is_zero()) return acc;

    // Affine groups, one per output axis that is not tabled.
    std::vector<uint8_t> out_tabled(out.axes.size(), 0);
    for (const auto& d : t.table.dims)
        if (d.role == Role::Out) out_tabled[d.axis] = 1;
    for (size_t k = 0; k < out.axes.size(); ++k) {
        if (out_tabled[k]) continue;
        std::vector<detail::Participant> ps;
        ps.push_back({z, out.axis_lo(k), out.axes[k].bits, out.axes[k].extent, 1, 0, true});
        auto collect = [&](const std::vector<AxisMap>& map, const Region* reg, std::span<const Fp2> pt) {
            for (size_t j = 0; j < map.size(); ++j)
                if (map[j].kind == AxisMap::Kind::Affine && map[j].out_axis == k)
                    ps.push_back({pt, reg->axis_lo(j), reg->axes[j].bits, reg->axes[j].extent, map[j].mult, map[j].add, false});
        };
        if (r1) collect(t.map1, r1, x);
        if (r2) collect(t.map2, r2, y);
        acc *= detail::affine_group(ps);
    }
    // Fixed input coordinates.
    auto fixed = [&](const std::vector<AxisMap>& map, const Region* reg, std::span<const Fp2> pt) {
        for (size_t j = 0; j < map.size(); ++j)
            if (map[j].kind == AxisMap::Kind::Fixed) acc *= detail::eq_const(pt, reg->axis_lo(j), reg->axes[j].bits, map[j].value);
    };
    if (r1) fixed(t.map1, r1, x);
    if (r2) fixed(t.map2, r2, y);

    if (!t.table.empty()) {
        std::vector<std::vector<Fp2>> eqs;
        std::vector<uint32_t> ext;
        for (const auto& d : t.table.dims) {
            const Region& reg = d.role == Role::Out ? out : d.role == Role::In1 ? *r1 : *r2;
            const auto pt = d.role == Role::Out ? z : d.role == Role::In1 ? x : y;
            eqs.push_back(detail::eq_table(pt, reg.axis_lo(d.axis), reg.axes[d.axis].bits, reg.axes[d.axis].extent));
            ext.push_back(reg.axes[d.axis].extent);
        }
        // Nested contraction, innermost dim first.
        std::vector<Fp2> partial(t.table.values.size());
        for (size_t e = 0; e < partial.size(); ++e) partial[e] = Fp::from_signed(t.table.values[e]);
        for (size_t d = ext.size(); d-- > 0;) {
            const size_t outer = partial.size() / ext[d];
            std::vector<Fp2> next(outer);
            for (size_t o = 0; o < outer; ++o) {
                Fp2 s = Fp2::zero();
                for (size_t i = 0; i < ext[d]; ++i) s += partial[o * ext[d] + i] * eqs[d][i];
                next[o] = s;
            }
            partial = std::move(next);
        }
        acc *= partial[0];
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Serialization (part of the verification key)

inline void write_layout(ByteWriter& w, const LayerLayout& l) {
    w.u8(static_cast<uint8_t>(l.bits));
    w.u32(static_cast<uint32_t>(l.regions.size()));
    for (const auto& r : l.regions) {
        w.blob(std::span(reinterpret_cast<const uint8_t*>(r.name.data()), r.name.size()));
        w.u64(r.offset);
        w.u8(static_cast<uint8_t>(r.bound_bits));
        w.u32(static_cast<uint32_t>(r.axes.size()));
        for (const auto& a : r.axes) w.u32(a.extent);
    }
}

inline LayerLayout read_layout(ByteReader& r) {
    LayerLayout l;
    l.bits = r.u8();
    if (l.bits > 32) throw FormatError("layout: width exceeds 2^32");
    const size_t n = r.count(4096, 14);
    for (size_t i = 0; i < n; ++i) {
        Region g;
        auto name = r.blob();
        if (name.size() > 64) throw FormatError("layout: region name too long");
        g.name.assign(name.begin(), name.end());
        g.offset = r.u64();
        g.bound_bits = r.u8();
        const size_t na = r.count(8, 4);
        for (size_t k = 0; k < na; ++k) {
            const uint32_t e = r.u32();
            if (e == 0 || e > (1u << 30)) throw FormatError("layout: axis extent out of range");
            g.axes.push_back(Axis::of(e));
        }
        if (g.bits() > l.bits || g.offset % g.padded_size() || g.offset + g.padded_size() > l.width())
            throw FormatError("layout: misaligned region");
        l.regions.push_back(std::move(g));
    }
    return l;
}

inline void write_term(ByteWriter& w, const Term& t) {
    w.u8(static_cast<uint8_t>(t.kind));
    w.u64(static_cast<uint64_t>(t.coef));
    w.u32(t.out);
    w.u32(t.in1);
    w.u32(t.in2);
    for (const auto* map : {&t.map1, &t.map2}) {
        w.u32(static_cast<uint32_t>(map->size()));
        for (const auto& m : *map) {
            w.u8(static_cast<uint8_t>(m.kind));
            w.u8(m.out_axis);
            w.u8(static_cast<uint8_t>(m.mult));
            w.i32(m.add);
            w.u32(m.value);
        }
    }
    w.u32(static_cast<uint32_t>(t.table.dims.size()));
    for (const auto& d : t.table.dims) {
        w.u8(static_cast<uint8_t>(d.role));
        w.u8(d.axis);
    }
    w.u32(static_cast<uint32_t>(t.table.values.size()));
    for (int64_t v : t.table.values) w.u64(static_cast<uint64_t>(v));
}

inline Term read_term(ByteReader& r) {
    Term t;
    const uint8_t kind = r.u8();
    if (kind > 2) throw FormatError("term: bad kind");
    t.kind = static_cast<TermKind>(kind);
    t.coef = static_cast<int64_t>(r.u64());
    t.out = r.u32();
    t.in1 = r.u32();
    t.in2 = r.u32();
    for (auto* map : {&t.map1, &t.map2}) {
        const size_t n = r.count(8, 11);
        for (size_t i = 0; i < n; ++i) {
            AxisMap m;
            const uint8_t k = r.u8();
            if (k > 2) throw FormatError("term: bad axis map kind");
            m.kind = static_cast<AxisMap::Kind>(k);
            m.out_axis = r.u8();
            m.mult = static_cast<int8_t>(r.u8());
            m.add = r.i32();
            m.value = r.u32();
            map->push_back(m);
        }
    }
    const size_t nd = r.count(8, 2);
    for (size_t i = 0; i < nd; ++i) {
        TableDim d;
        const uint8_t role = r.u8();
        if (role > 2) throw FormatError("term: bad table role");
        d.role = static_cast<Role>(role);
        d.axis = r.u8();
        t.table.dims.push_back(d);
    }
    const size_t nv = r.count(size_t{1} << 26, 8);
    t.table.values.resize(nv);
    for (auto& v : t.table.values) v = static_cast<int64_t>(r.u64());
    return t;
}

} // namespace tdx
