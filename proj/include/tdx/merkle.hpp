#pragma once

// Binary SHA-256 Merkle tree over a power-of-two number of leaves.
// leaf = H(0x00 | data), node = H(0x01 | left | right).

#include <bit>
#include <span>
#include <vector>

#include "tdx/errors.hpp"
#include "tdx/hash.hpp"

namespace tdx {

inline Digest merkle_leaf(std::span<const uint8_t> data) {
    const uint8_t tag = 0x00;
    return Sha256().update(std::span(&tag, 1)).update(data).finish();
}

inline Digest merkle_node(const Digest& l, const Digest& r) {
    const uint8_t tag = 0x01;
    return Sha256().update(std::span(&tag, 1)).update(l).update(r).finish();
}

class MerkleTree {
public:
    MerkleTree() = default;
    explicit MerkleTree(std::vector<Digest> leaves) {
        if (leaves.empty() || !std::has_single_bit(leaves.size())) throw LengthError("merkle: leaf count must be a power of two");
        n_ = leaves.size();
        nodes_.resize(2 * n_);
        std::copy(leaves.begin(), leaves.end(), nodes_.begin() + static_cast<long>(n_));
        for (size_t i = n_ - 1; i >= 1; --i) nodes_[i] = merkle_node(nodes_[2 * i], nodes_[2 * i + 1]);
    }

    Digest root() const { return nodes_.at(1); }
    size_t leaves() const { return n_; }
    size_t depth() const { return static_cast<size_t>(std::countr_zero(n_)); }

    /// Sibling hashes from the leaf level upward.
    std::vector<Digest> path(size_t index) const {
        if (index >= n_) throw LengthError("merkle: leaf index out of range");
        std::vector<Digest> p;
        for (size_t i = index + n_; i > 1; i >>= 1) p.push_back(nodes_[i ^ 1]);
        return p;
    }

private:
    size_t n_ = 0;
    std::vector<Digest> nodes_;
};

inline bool merkle_verify(const Digest& root, size_t index, size_t n_leaves, const Digest& leaf, std::span<const Digest> path) {
    if (!std::has_single_bit(n_leaves) || index >= n_leaves) return false;
    if (path.size() != static_cast<size_t>(std::countr_zero(n_leaves))) return false;
    Digest cur = leaf;
    for (const auto& sib : path) {
        cur = (index & 1) ? merkle_node(sib, cur) : merkle_node(cur, sib);
        index >>= 1;
    }
    return cur == root;
}

} // namespace tdx
