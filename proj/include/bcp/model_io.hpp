#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcp/factors.hpp"
#include "bcp/packed.hpp"

namespace bcp {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind { dense, packed, vq };

// On-disk layout, all integers and floats little-endian:
//   dense  "CPKG": magic[4] u32 version u64 entities u64 relations u64 dim,
//          then subjects, objects, relations row-major as f32
//   packed "BCPK": magic[4] u32 version u64 entities u64 relations u64 dim
//          f64 delta, then the three sign planes as rows of ceil(dim/64)
//          u64 words (padding bits zero)
//   vq     "VQCP": like BCPK but with three f64 scales instead of delta
// "relations" counts original relations; the relation matrix holds twice
// that many rows. Payload length is exactly determined by the header.

namespace detail {

inline constexpr char kMagicDense[4] = {'C', 'P', 'K', 'G'};
inline constexpr char kMagicPacked[4] = {'B', 'C', 'P', 'K'};
inline constexpr char kMagicVq[4] = {'V', 'Q', 'C', 'P'};
inline constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
public:
    explicit ByteWriter(std::ostream& os) : os_(os) {}

    void bytes(const char* p, std::size_t n) {
        os_.write(p, static_cast<std::streamsize>(n));
    }
    void u32(std::uint32_t v) {
        char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        bytes(b, 8);
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    bool ok() const { return os_.good(); }

private:
    std::ostream& os_;
};

class ByteReader {
public:
    explicit ByteReader(std::istream& is, const std::string& path)
        : is_(is), path_(path) {}

    void bytes(char* p, std::size_t n) {
        is_.read(p, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n)
            throw io_error(path_ + ": unexpected end of file");
    }
    std::uint32_t u32() {
        char b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        char b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

private:
    std::istream& is_;
    const std::string& path_;
};

// Writes through a temp file in the same directory and renames into place,
// so a crash mid-write never leaves a half-written model at `path`.
template <typename Fn>
void atomic_write(const std::string& path, Fn&& fill) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw io_error(tmp + ": cannot open for writing");
        ByteWriter w(os);
        fill(w);
        os.flush();
        if (!os.good()) {
            os.close();
            std::remove(tmp.c_str());
            throw io_error(tmp + ": write failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw io_error(path + ": rename failed: " + ec.message());
    }
}

inline void check_file_size(const std::string& path, std::uint64_t expected) {
    std::error_code ec;
    const std::uintmax_t actual = std::filesystem::file_size(path, ec);
    if (ec) throw io_error(path + ": " + ec.message());
    if (actual != expected)
        throw io_error(path + ": file size " + std::to_string(actual) +
                       " does not match header (expected " + std::to_string(expected) + ")");
}

inline void check_magic(ByteReader& r, const char (&magic)[4], const std::string& path,
                        const char* kind) {
    char m[4];
    r.bytes(m, 4);
    if (!std::equal(m, m + 4, magic))
        throw io_error(path + ": not a " + kind + " model file");
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw io_error(path + ": unsupported format version " + std::to_string(version));
}

struct Shape {
    std::uint64_t entities = 0;
    std::uint64_t relations = 0;  // original relations
    std::uint64_t dim = 0;
};

inline Shape read_shape(ByteReader& r, const std::string& path) {
    Shape s{r.u64(), r.u64(), r.u64()};
    if (s.entities == 0 || s.relations == 0 || s.dim == 0)
        throw io_error(path + ": degenerate model shape in header");
    // Guards the allocation below against absurd headers; any real model
    // several times larger than the largest published benchmarks stays
    // far under this.
    if (s.entities > (1ull << 32) || s.relations > (1ull << 24) || s.dim > (1ull << 24))
        throw io_error(path + ": implausible model shape in header");
    return s;
}

inline void write_plane(ByteWriter& w, const BitMatrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::uint64_t word : m.row(r)) w.u64(word);
}

inline void read_plane(ByteReader& r, BitMatrix& m, const std::string& path) {
    for (std::size_t row = 0; row < m.rows(); ++row)
        for (std::uint64_t& word : m.row(row)) word = r.u64();
    if (!m.padding_clear())
        throw io_error(path + ": nonzero padding bits in packed rows");
}

inline void write_rows_f32(ByteWriter& w, const RowMatrix& m) {
    const double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i)
        w.f32(static_cast<float>(p[i]));
}

inline void read_rows_f32(ByteReader& r, RowMatrix& m, const std::string& path) {
    double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
        const float v = r.f32();
        if (!std::isfinite(v))
            throw io_error(path + ": non-finite factor entry");
        p[i] = static_cast<double>(v);
    }
}

}  // namespace detail

inline std::uint64_t dense_file_bytes(std::uint64_t entities, std::uint64_t relations,
                                      std::uint64_t dim) {
    return 32 + 4 * dim * (2 * entities + 2 * relations);
}

inline std::uint64_t packed_file_bytes(std::uint64_t entities, std::uint64_t relations,
                                       std::uint64_t dim) {
    return 40 + 8 * ((dim + 63) / 64) * (2 * entities + 2 * relations);
}

inline std::uint64_t vq_file_bytes(std::uint64_t entities, std::uint64_t relations,
                                   std::uint64_t dim) {
    return 56 + 8 * ((dim + 63) / 64) * (2 * entities + 2 * relations);
}

// Saves real factors as f32; values outside float range become infinities
// and are rejected, since the file would fail its own load check.
inline void save_dense(const DenseFactors& f, const std::string& path) {
    for (const RowMatrix* m : {&f.subjects, &f.objects, &f.relations}) {
        const double* p = m->data();
        for (std::size_t i = 0; i < m->size(); ++i)
            if (!std::isfinite(static_cast<float>(p[i])))
                throw io_error(path + ": factor entry not storable as finite f32");
    }
    detail::atomic_write(path, [&](detail::ByteWriter& w) {
        w.bytes(detail::kMagicDense, 4);
        w.u32(detail::kFormatVersion);
        w.u64(f.num_entities());
        w.u64(f.num_original_relations());
        w.u64(f.dim);
        detail::write_rows_f32(w, f.subjects);
        detail::write_rows_f32(w, f.objects);
        detail::write_rows_f32(w, f.relations);
    });
}

inline DenseFactors load_dense(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error(path + ": cannot open");
    detail::ByteReader r(is, path);
    detail::check_magic(r, detail::kMagicDense, path, "dense");
    const detail::Shape s = detail::read_shape(r, path);
    detail::check_file_size(path, dense_file_bytes(s.entities, s.relations, s.dim));
    DenseFactors f = make_dense_factors(s.entities, s.relations, s.dim);
    detail::read_rows_f32(r, f.subjects, path);
    detail::read_rows_f32(r, f.objects, path);
    detail::read_rows_f32(r, f.relations, path);
    return f;
}

inline void save_packed(const PackedFactors& p, const std::string& path) {
    detail::atomic_write(path, [&](detail::ByteWriter& w) {
        w.bytes(detail::kMagicPacked, 4);
        w.u32(detail::kFormatVersion);
        w.u64(p.num_entities());
        w.u64(p.num_original_relations());
        w.u64(p.dim);
        w.f64(p.delta);
        detail::write_plane(w, p.subjects);
        detail::write_plane(w, p.objects);
        detail::write_plane(w, p.relations);
    });
}

inline PackedFactors load_packed(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error(path + ": cannot open");
    detail::ByteReader r(is, path);
    detail::check_magic(r, detail::kMagicPacked, path, "packed");
    const detail::Shape s = detail::read_shape(r, path);
    detail::check_file_size(path, packed_file_bytes(s.entities, s.relations, s.dim));
    PackedFactors p;
    p.delta = r.f64();
    if (!(p.delta > 0.0) || !std::isfinite(p.delta))
        throw io_error(path + ": delta must be positive and finite");
    p.dim = s.dim;
    p.subjects = BitMatrix(s.entities, s.dim);
    p.objects = BitMatrix(s.entities, s.dim);
    p.relations = BitMatrix(2 * s.relations, s.dim);
    detail::read_plane(r, p.subjects, path);
    detail::read_plane(r, p.objects, path);
    detail::read_plane(r, p.relations, path);
    return p;
}

inline void save_vq(const VqFactors& p, const std::string& path) {
    detail::atomic_write(path, [&](detail::ByteWriter& w) {
        w.bytes(detail::kMagicVq, 4);
        w.u32(detail::kFormatVersion);
        w.u64(p.num_entities());
        w.u64(p.num_original_relations());
        w.u64(p.dim);
        w.f64(p.alpha_subject);
        w.f64(p.alpha_object);
        w.f64(p.alpha_relation);
        detail::write_plane(w, p.subjects);
        detail::write_plane(w, p.objects);
        detail::write_plane(w, p.relations);
    });
}

inline VqFactors load_vq(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error(path + ": cannot open");
    detail::ByteReader r(is, path);
    detail::check_magic(r, detail::kMagicVq, path, "vq");
    const detail::Shape s = detail::read_shape(r, path);
    detail::check_file_size(path, vq_file_bytes(s.entities, s.relations, s.dim));
    VqFactors p;
    p.alpha_subject = r.f64();
    p.alpha_object = r.f64();
    p.alpha_relation = r.f64();
    for (double a : {p.alpha_subject, p.alpha_object, p.alpha_relation})
        if (!(a > 0.0) || !std::isfinite(a))
            throw io_error(path + ": scale must be positive and finite");
    p.dim = s.dim;
    p.subjects = BitMatrix(s.entities, s.dim);
    p.objects = BitMatrix(s.entities, s.dim);
    p.relations = BitMatrix(2 * s.relations, s.dim);
    detail::read_plane(r, p.subjects, path);
    detail::read_plane(r, p.objects, path);
    detail::read_plane(r, p.relations, path);
    return p;
}

// Identifies a model file by its magic without loading the payload.
inline ModelKind sniff_model_kind(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error(path + ": cannot open");
    char m[4] = {};
    is.read(m, 4);
    if (is.gcount() != 4) throw io_error(path + ": not a model file (too short)");
    if (std::equal(m, m + 4, detail::kMagicDense)) return ModelKind::dense;
    if (std::equal(m, m + 4, detail::kMagicPacked)) return ModelKind::packed;
    if (std::equal(m, m + 4, detail::kMagicVq)) return ModelKind::vq;
    throw io_error(path + ": unknown model file magic");
}

// Storage accounting for one model. Bit counts are logical (padding bits in
// packed rows excluded); row_bytes and file_bytes are physical on-disk
// sizes. For dense models the stored precision is f32, and the *_wide
// fields restate the per-item costs at 64 bits per weight; for bit-packed
// models the wide fields equal the stored ones.
struct SizeReport {
    ModelKind kind = ModelKind::dense;
    std::uint64_t num_entities = 0;
    std::uint64_t num_original_relations = 0;
    std::uint64_t dim = 0;
    std::uint64_t bits_per_entity = 0;             // subject row + object row
    std::uint64_t bits_per_relation_vector = 0;    // one relation row
    std::uint64_t bits_per_original_relation = 0;  // relation row + inverse row
    std::uint64_t bits_per_entity_wide = 0;
    std::uint64_t bits_per_relation_vector_wide = 0;
    std::uint64_t row_bytes = 0;
    std::uint64_t file_bytes = 0;
};

inline SizeReport size_report(const DenseFactors& f) {
    SizeReport s;
    s.kind = ModelKind::dense;
    s.num_entities = f.num_entities();
    s.num_original_relations = f.num_original_relations();
    s.dim = f.dim;
    s.bits_per_entity = 2 * 32 * s.dim;
    s.bits_per_relation_vector = 32 * s.dim;
    s.bits_per_original_relation = 2 * s.bits_per_relation_vector;
    s.bits_per_entity_wide = 2 * 64 * s.dim;
    s.bits_per_relation_vector_wide = 64 * s.dim;
    s.row_bytes = 4 * s.dim;
    s.file_bytes = dense_file_bytes(s.num_entities, s.num_original_relations, s.dim);
    return s;
}

namespace detail {

template <typename Planes>
SizeReport packed_size_report(const Planes& p, ModelKind kind, std::uint64_t file_bytes) {
    SizeReport s;
    s.kind = kind;
    s.num_entities = p.num_entities();
    s.num_original_relations = p.num_original_relations();
    s.dim = p.dim;
    s.bits_per_entity = 2 * s.dim;
    s.bits_per_relation_vector = s.dim;
    s.bits_per_original_relation = 2 * s.dim;
    s.bits_per_entity_wide = s.bits_per_entity;
    s.bits_per_relation_vector_wide = s.bits_per_relation_vector;
    s.row_bytes = 8 * ((s.dim + 63) / 64);
    s.file_bytes = file_bytes;
    return s;
}

}  // namespace detail

inline SizeReport size_report(const PackedFactors& p) {
    return detail::packed_size_report(
        p, ModelKind::packed,
        packed_file_bytes(p.num_entities(), p.num_original_relations(), p.dim));
}

inline SizeReport size_report(const VqFactors& p) {
    return detail::packed_size_report(
        p, ModelKind::vq,
        vq_file_bytes(p.num_entities(), p.num_original_relations(), p.dim));
}

}  // namespace bcp
