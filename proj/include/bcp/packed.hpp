#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "bcp/factors.hpp"
#include "bcp/triple.hpp"

namespace bcp {

inline int popcount64(std::uint64_t x) { return std::popcount(x); }

// Branch-free SWAR popcount, kept as a reference implementation to check the
// builtin against on any new platform.
inline int popcount64_portable(std::uint64_t x) {
    x = x - ((x >> 1) & 0x5555555555555555ull);
    x = (x & 0x3333333333333333ull) + ((x >> 2) & 0x3333333333333333ull);
    x = (x + (x >> 4)) & 0x0f0f0f0f0f0f0f0full;
    return static_cast<int>((x * 0x0101010101010101ull) >> 56);
}

// Rows of sign bits packed little-endian into 64-bit words: bit d of a row
// lives in word d/64 at position d%64. Padding bits past the logical width
// are kept at zero so whole-word operations stay well defined.
class BitMatrix {
public:
    BitMatrix() = default;
    BitMatrix(std::size_t rows, std::size_t bits)
        : rows_(rows), bits_(bits), words_per_row_((bits + 63) / 64),
          words_(rows * words_per_row_, 0) {}

    std::size_t rows() const { return rows_; }
    std::size_t bits() const { return bits_; }
    std::size_t words_per_row() const { return words_per_row_; }

    std::span<std::uint64_t> row(std::size_t r) {
        return {words_.data() + r * words_per_row_, words_per_row_};
    }
    std::span<const std::uint64_t> row(std::size_t r) const {
        return {words_.data() + r * words_per_row_, words_per_row_};
    }

    bool get(std::size_t r, std::size_t d) const {
        return (row(r)[d / 64] >> (d % 64)) & 1u;
    }
    void set(std::size_t r, std::size_t d, bool v) {
        std::uint64_t& w = row(r)[d / 64];
        const std::uint64_t m = 1ull << (d % 64);
        w = v ? (w | m) : (w & ~m);
    }

    // Mask selecting the valid bits of the final word of a row.
    static std::uint64_t tail_mask(std::size_t bits) {
        const std::size_t r = bits % 64;
        return r == 0 ? ~0ull : (~0ull >> (64 - r));
    }

    // Clears padding bits; useful after filling rows with raw random words.
    void zero_padding() {
        if (words_per_row_ == 0) return;
        const std::uint64_t m = tail_mask(bits_);
        for (std::size_t r = 0; r < rows_; ++r) row(r)[words_per_row_ - 1] &= m;
    }

    bool padding_clear() const {
        if (words_per_row_ == 0) return true;
        const std::uint64_t m = tail_mask(bits_);
        for (std::size_t r = 0; r < rows_; ++r)
            if (row(r)[words_per_row_ - 1] & ~m) return false;
        return true;
    }

    friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t bits_ = 0;
    std::size_t words_per_row_ = 0;
    std::vector<std::uint64_t> words_;
};

// Two-level quantizer: +delta for x >= 0 (zero included), -delta otherwise.
inline double quantize(double x, double delta) {
    return x >= 0.0 ? delta : -delta;
}

// Binarized CP factors: sign planes of the dense factors plus the shared
// step size delta. Bit 1 stands for +delta, bit 0 for -delta.
struct PackedFactors {
    BitMatrix subjects;
    BitMatrix objects;
    BitMatrix relations;
    double delta = 0.0;
    std::size_t dim = 0;

    std::size_t num_entities() const { return subjects.rows(); }
    std::size_t num_relation_rows() const { return relations.rows(); }
    std::size_t num_original_relations() const { return relations.rows() / 2; }

    // delta^3 as actually multiplied at score time, cached once.
    double delta_cubed() const { return (delta * delta) * delta; }
};

inline BitMatrix sign_plane(const RowMatrix& m) {
    BitMatrix bits(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::span<const double> src = m.row(r);
        for (std::size_t d = 0; d < src.size(); ++d)
            if (src[d] >= 0.0) bits.set(r, d, true);
    }
    return bits;
}

// Snapshot of the quantized model: keeps the sign of every entry and the
// given delta. The dense factors are left untouched.
inline PackedFactors binarize_factors(const DenseFactors& f, double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw std::invalid_argument("delta must be positive and finite");
    PackedFactors p;
    p.subjects = sign_plane(f.subjects);
    p.objects = sign_plane(f.objects);
    p.relations = sign_plane(f.relations);
    p.delta = delta;
    p.dim = f.dim;
    return p;
}

// Expands sign planes back to explicit +/-delta rows.
inline DenseFactors unpack_factors(const PackedFactors& p) {
    DenseFactors f = make_dense_factors(p.num_entities(), p.num_original_relations(), p.dim);
    auto expand = [&](const BitMatrix& bits, RowMatrix& out) {
        for (std::size_t r = 0; r < bits.rows(); ++r) {
            std::span<double> dst = out.row(r);
            for (std::size_t d = 0; d < p.dim; ++d)
                dst[d] = bits.get(r, d) ? p.delta : -p.delta;
        }
    };
    expand(p.subjects, f.subjects);
    expand(p.objects, f.objects);
    expand(p.relations, f.relations);
    return f;
}

// Popcount of XNOR(XNOR(u,v),w) over the first `bits` positions, which per
// bit reduces to u^v^w. A set result bit marks a position where an even
// number of the three sign bits is 0, i.e. where the +/-1 product is +1.
inline std::int64_t hamming_kernel(std::span<const std::uint64_t> u,
                                   std::span<const std::uint64_t> v,
                                   std::span<const std::uint64_t> w,
                                   std::size_t bits) {
    const std::size_t words = (bits + 63) / 64;
    std::int64_t count = 0;
    for (std::size_t t = 0; t + 1 < words; ++t)
        count += popcount64(u[t] ^ v[t] ^ w[t]);
    if (words > 0) {
        const std::size_t t = words - 1;
        count += popcount64((u[t] ^ v[t] ^ w[t]) & BitMatrix::tail_mask(bits));
    }
    return count;
}

// Packed CP score: delta^3 * (2 * positives - dim), where positives is the
// hamming_kernel count of +1 products. Bit identity makes this equal to the
// dense score of the unpacked +/-delta rows; the float results match exactly
// whenever delta^3 and its needed multiples are exactly representable (any
// power of two, and generally deltas with short mantissas).
inline double score_packed(const PackedFactors& p, const Triple& t) {
    if (t.subject < 0 || static_cast<std::size_t>(t.subject) >= p.num_entities() ||
        t.object < 0 || static_cast<std::size_t>(t.object) >= p.num_entities())
        throw std::out_of_range("entity id out of range");
    if (t.relation < 0 || static_cast<std::size_t>(t.relation) >= p.num_relation_rows())
        throw std::out_of_range("relation id out of range");
    const std::int64_t positives = hamming_kernel(
        p.subjects.row(static_cast<std::size_t>(t.subject)),
        p.objects.row(static_cast<std::size_t>(t.object)),
        p.relations.row(static_cast<std::size_t>(t.relation)), p.dim);
    return p.delta_cubed() *
           static_cast<double>(2 * positives - static_cast<std::int64_t>(p.dim));
}

// Sign planes with one scale per factor matrix instead of a shared delta.
struct VqFactors {
    BitMatrix subjects;
    BitMatrix objects;
    BitMatrix relations;
    double alpha_subject = 0.0;
    double alpha_object = 0.0;
    double alpha_relation = 0.0;
    std::size_t dim = 0;

    std::size_t num_entities() const { return subjects.rows(); }
    std::size_t num_relation_rows() const { return relations.rows(); }
    std::size_t num_original_relations() const { return relations.rows() / 2; }

    double coefficient() const {
        return (alpha_subject * alpha_object) * alpha_relation;
    }
};

inline double score_vq(const VqFactors& p, const Triple& t) {
    if (t.subject < 0 || static_cast<std::size_t>(t.subject) >= p.num_entities() ||
        t.object < 0 || static_cast<std::size_t>(t.object) >= p.num_entities())
        throw std::out_of_range("entity id out of range");
    if (t.relation < 0 || static_cast<std::size_t>(t.relation) >= p.num_relation_rows())
        throw std::out_of_range("relation id out of range");
    const std::int64_t positives = hamming_kernel(
        p.subjects.row(static_cast<std::size_t>(t.subject)),
        p.objects.row(static_cast<std::size_t>(t.object)),
        p.relations.row(static_cast<std::size_t>(t.relation)), p.dim);
    return p.coefficient() *
           static_cast<double>(2 * positives - static_cast<std::int64_t>(p.dim));
}

}  // namespace bcp
