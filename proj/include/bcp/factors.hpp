#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "bcp/random.hpp"
#include "bcp/triple.hpp"

namespace bcp {

// Row-major dense matrix of doubles. Rows are the unit of access everywhere
// (one embedding per row), so only row views are exposed.
class RowMatrix {
public:
    RowMatrix() = default;
    RowMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::span<double> row(std::size_t r) {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Real-valued CP factors. subjects and objects each hold one row per entity;
// relations holds 2*N_r rows, the second half being the inverse relations.
struct DenseFactors {
    RowMatrix subjects;
    RowMatrix objects;
    RowMatrix relations;
    std::size_t dim = 0;

    std::size_t num_entities() const { return subjects.rows(); }
    std::size_t num_relation_rows() const { return relations.rows(); }
    std::size_t num_original_relations() const { return relations.rows() / 2; }
};

inline DenseFactors make_dense_factors(std::size_t num_entities,
                                       std::size_t num_original_relations,
                                       std::size_t dim) {
    if (num_entities == 0 || num_original_relations == 0 || dim == 0)
        throw std::invalid_argument("factor shape must be nonzero");
    DenseFactors f;
    f.subjects = RowMatrix(num_entities, dim);
    f.objects = RowMatrix(num_entities, dim);
    f.relations = RowMatrix(2 * num_original_relations, dim);
    f.dim = dim;
    return f;
}

// Half-width of the uniform init interval, sqrt(6) / sqrt(2 * dim).
inline double embedding_init_bound(std::size_t dim) {
    return std::sqrt(6.0) / std::sqrt(2.0 * static_cast<double>(dim));
}

// Fills all three factor matrices with U(-bound, +bound) draws in a fixed
// order (subjects, objects, relations; row by row), so a seed pins the model.
inline DenseFactors init_factors(std::size_t num_entities,
                                 std::size_t num_original_relations,
                                 std::size_t dim, std::mt19937_64& rng) {
    DenseFactors f = make_dense_factors(num_entities, num_original_relations, dim);
    const double bound = embedding_init_bound(dim);
    for (RowMatrix* m : {&f.subjects, &f.objects, &f.relations}) {
        double* p = m->data();
        for (std::size_t i = 0; i < m->size(); ++i)
            p[i] = uniform_real(rng, -bound, bound);
    }
    return f;
}

// Trilinear dot product, accumulated left to right in doubles.
inline double score_rows(std::span<const double> a, std::span<const double> b,
                         std::span<const double> c) {
    double acc = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) acc += a[d] * b[d] * c[d];
    return acc;
}

// CP score of one fact: sum_d A[i,d] * B[j,d] * C[k,d].
inline double score_dense(const DenseFactors& f, const Triple& t) {
    if (t.subject < 0 || static_cast<std::size_t>(t.subject) >= f.num_entities() ||
        t.object < 0 || static_cast<std::size_t>(t.object) >= f.num_entities())
        throw std::out_of_range("entity id out of range");
    if (t.relation < 0 || static_cast<std::size_t>(t.relation) >= f.num_relation_rows())
        throw std::out_of_range("relation id out of range");
    return score_rows(f.subjects.row(static_cast<std::size_t>(t.subject)),
                      f.objects.row(static_cast<std::size_t>(t.object)),
                      f.relations.row(static_cast<std::size_t>(t.relation)));
}

// Knobs for training. The defaults are the configuration that works well on
// WN18RR-sized graphs; small synthetic graphs want fewer epochs and dims.
struct Hyperparams {
    std::size_t dim = 400;
    double learning_rate = 0.05;
    double l2_subject = 1e-4;
    double l2_object = 1e-4;
    double l2_relation = 1e-4;
    double delta = 0.5;
    std::size_t negatives_per_positive = 5;
    std::size_t max_epochs = 1000;
    std::uint64_t seed = 1;
    std::size_t eval_every = 50;

    void validate() const {
        if (dim == 0) throw std::invalid_argument("dim must be positive");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw std::invalid_argument("learning rate must be positive and finite");
        for (double l2 : {l2_subject, l2_object, l2_relation})
            if (l2 < 0.0 || !std::isfinite(l2))
                throw std::invalid_argument("l2 weight must be nonnegative and finite");
        if (!(delta > 0.0) || !std::isfinite(delta))
            throw std::invalid_argument("delta must be positive and finite");
        if (negatives_per_positive == 0)
            throw std::invalid_argument("negatives_per_positive must be positive");
        if (eval_every == 0)
            throw std::invalid_argument("eval_every must be positive");
    }
};

}  // namespace bcp
