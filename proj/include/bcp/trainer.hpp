#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcp/evaluator.hpp"
#include "bcp/factors.hpp"
#include "bcp/knowledge_graph.hpp"
#include "bcp/packed.hpp"
#include "bcp/random.hpp"
#include "bcp/triple.hpp"

namespace bcp {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + e^x) evaluated without overflow for large |x|.
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Cross-entropy of sigmoid(theta) against a {0,1} label:
// -log sigmoid(theta) for label 1, -log(1 - sigmoid(theta)) for label 0.
inline double logistic_loss(double theta, int label) {
    return label ? softplus(-theta) : softplus(theta);
}

// Per-matrix L2 penalty weights (lambda_A, lambda_B, lambda_C).
struct L2Weights {
    double subject = 0.0;
    double object = 0.0;
    double relation = 0.0;
};

// Gradient of one example's loss with respect to the three touched rows.
struct RowGradients {
    std::vector<double> subject;
    std::vector<double> object;
    std::vector<double> relation;
};

// Gradient of logistic_loss(score, label) + L2 of the touched rows for the
// real-valued model. The loss-term coefficient collapses to
// sigmoid(theta) - label for labels in {0,1}.
inline RowGradients grad_rows_dense(const DenseFactors& f, const Triple& t,
                                    int label, const L2Weights& l2) {
    std::span<const double> a = f.subjects.row(static_cast<std::size_t>(t.subject));
    std::span<const double> b = f.objects.row(static_cast<std::size_t>(t.object));
    std::span<const double> c = f.relations.row(static_cast<std::size_t>(t.relation));
    const double g = sigmoid(score_rows(a, b, c)) - static_cast<double>(label);
    RowGradients out;
    const std::size_t dim = f.dim;
    out.subject.resize(dim);
    out.object.resize(dim);
    out.relation.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        out.subject[d] = g * b[d] * c[d] + 2.0 * l2.subject * a[d];
        out.object[d] = g * a[d] * c[d] + 2.0 * l2.object * b[d];
        out.relation[d] = g * a[d] * b[d] + 2.0 * l2.relation * c[d];
    }
    return out;
}

// Straight-through gradient for the binarized model: the score and the
// loss-term companion rows are the quantized +/-delta versions, while the
// L2 term keeps the real rows. The result applies to the real parameters.
inline RowGradients grad_rows_bcp(const DenseFactors& f, const Triple& t,
                                  int label, double delta, const L2Weights& l2) {
    std::span<const double> a = f.subjects.row(static_cast<std::size_t>(t.subject));
    std::span<const double> b = f.objects.row(static_cast<std::size_t>(t.object));
    std::span<const double> c = f.relations.row(static_cast<std::size_t>(t.relation));
    const std::size_t dim = f.dim;
    std::vector<double> qa(dim), qb(dim), qc(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        qa[d] = quantize(a[d], delta);
        qb[d] = quantize(b[d], delta);
        qc[d] = quantize(c[d], delta);
    }
    const double g = sigmoid(score_rows(qa, qb, qc)) - static_cast<double>(label);
    RowGradients out;
    out.subject.resize(dim);
    out.object.resize(dim);
    out.relation.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        out.subject[d] = g * qb[d] * qc[d] + 2.0 * l2.subject * a[d];
        out.object[d] = g * qa[d] * qc[d] + 2.0 * l2.object * b[d];
        out.relation[d] = g * qa[d] * qb[d] + 2.0 * l2.relation * c[d];
    }
    return out;
}

// n corruptions of the object slot, drawn uniformly over all entities.
// Draws are not filtered, so a "negative" can coincide with a true fact;
// subject-side corruption is covered by the inverse-augmented training set.
inline std::vector<Triple> sample_negatives(const Triple& t, std::size_t n,
                                            std::size_t num_entities,
                                            std::mt19937_64& rng) {
    std::vector<Triple> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        Triple neg = t;
        neg.object = static_cast<std::int32_t>(uniform_index(rng, num_entities));
        out.push_back(neg);
    }
    return out;
}

enum class TrainMode { dense, binarized };

struct TrainConfig {
    Hyperparams hyper;
    TrainMode mode = TrainMode::binarized;
    std::size_t eval_threads = 1;
    // When set, receives one "epoch<TAB>loss[<TAB>val_mrr]" line per epoch.
    std::ostream* progress = nullptr;
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    std::optional<double> validation_mrr;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    double best_validation_mrr = 0.0;
    bool validated = false;
    double wall_seconds = 0.0;
};

struct TrainResult {
    // Real-valued factors at the kept checkpoint (the latent parameters in
    // binarized mode).
    DenseFactors factors;
    // Quantized model at the kept checkpoint; present in binarized mode.
    std::optional<PackedFactors> packed;
    TrainLog log;
};

namespace detail {

// One SGD step on a single labeled example. Reads the three touched rows
// into scratch first so the three updates see a consistent pre-step state,
// then writes all of them; returns the example's loss at the pre-step
// parameters. In binarized mode the loss and loss-gradient go through the
// quantized rows while the L2 pull and the update target stay real.
struct SgdStepper {
    double learning_rate;
    L2Weights l2;
    double delta;
    bool binarized;
    std::vector<double> a0, b0, c0, qa, qb, qc;

    void resize(std::size_t dim) {
        a0.resize(dim);
        b0.resize(dim);
        c0.resize(dim);
        if (binarized) {
            qa.resize(dim);
            qb.resize(dim);
            qc.resize(dim);
        }
    }

    double step(DenseFactors& f, const Triple& t, int label) {
        std::span<double> a = f.subjects.row(static_cast<std::size_t>(t.subject));
        std::span<double> b = f.objects.row(static_cast<std::size_t>(t.object));
        std::span<double> c = f.relations.row(static_cast<std::size_t>(t.relation));
        const std::size_t dim = a.size();

        double norm_a = 0.0, norm_b = 0.0, norm_c = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            a0[d] = a[d];
            b0[d] = b[d];
            c0[d] = c[d];
            norm_a += a0[d] * a0[d];
            norm_b += b0[d] * b0[d];
            norm_c += c0[d] * c0[d];
        }

        const double* la = a0.data();
        const double* lb = b0.data();
        const double* lc = c0.data();
        if (binarized) {
            for (std::size_t d = 0; d < dim; ++d) {
                qa[d] = quantize(a0[d], delta);
                qb[d] = quantize(b0[d], delta);
                qc[d] = quantize(c0[d], delta);
            }
            la = qa.data();
            lb = qb.data();
            lc = qc.data();
        }

        double theta = 0.0;
        for (std::size_t d = 0; d < dim; ++d) theta += la[d] * lb[d] * lc[d];
        const double g = sigmoid(theta) - static_cast<double>(label);
        const double eta = learning_rate;
        for (std::size_t d = 0; d < dim; ++d) {
            a[d] = a0[d] - eta * (g * lb[d] * lc[d] + 2.0 * l2.subject * a0[d]);
            b[d] = b0[d] - eta * (g * la[d] * lc[d] + 2.0 * l2.object * b0[d]);
            c[d] = c0[d] - eta * (g * la[d] * lb[d] + 2.0 * l2.relation * c0[d]);
        }
        return logistic_loss(theta, label) + l2.subject * norm_a +
               l2.object * norm_b + l2.relation * norm_c;
    }
};

inline void emit_progress(std::ostream* os, const EpochStats& e) {
    if (!os) return;
    char buf[96];
    if (e.validation_mrr)
        std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9g", e.epoch, e.loss, *e.validation_mrr);
    else
        std::snprintf(buf, sizeof buf, "%zu\t%.9g", e.epoch, e.loss);
    *os << buf << '\n' << std::flush;
}

}  // namespace detail

// Logistic-loss SGD over the augmented training split, with uniformly drawn
// object corruptions as negatives (resampled every epoch) and a constant
// learning rate. Every eval_every epochs (and at the final epoch) the
// current model is scored on the validation split by filtered MRR, in
// binarized mode after quantization, and the best checkpoint is kept. With
// no validation split the final epoch is kept. A fixed seed fixes the
// result exactly.
inline TrainResult train(const TrainConfig& config, const KnowledgeGraph& graph) {
    config.hyper.validate();
    if (!graph.augmented())
        throw std::invalid_argument("training expects an inverse-augmented graph");
    if (graph.train.empty()) throw std::invalid_argument("training split is empty");

    const Hyperparams& hp = config.hyper;
    const auto t_start = std::chrono::steady_clock::now();

    std::mt19937_64 rng(hp.seed);
    DenseFactors factors =
        init_factors(static_cast<std::size_t>(graph.num_entities()),
                     static_cast<std::size_t>(graph.num_relations()), hp.dim, rng);

    TrainResult result;
    result.log.best_epoch = 0;
    double best_mrr = -1.0;
    DenseFactors best = factors;
    const bool has_validation = !graph.valid.empty();

    detail::SgdStepper stepper{hp.learning_rate,
                               L2Weights{hp.l2_subject, hp.l2_object, hp.l2_relation},
                               hp.delta,
                               config.mode == TrainMode::binarized,
                               {}, {}, {}, {}, {}, {}};
    stepper.resize(hp.dim);

    std::vector<std::uint32_t> order(graph.train.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = static_cast<std::uint32_t>(i);

    const std::size_t num_entities = static_cast<std::size_t>(graph.num_entities());

    for (std::size_t epoch = 1; epoch <= hp.max_epochs; ++epoch) {
        shuffle_values(order, rng);
        double epoch_loss = 0.0;
        for (std::uint32_t idx : order) {
            const Triple& pos = graph.train[idx];
            epoch_loss += stepper.step(factors, pos, 1);
            Triple neg = pos;
            for (std::size_t s = 0; s < hp.negatives_per_positive; ++s) {
                neg.object = static_cast<std::int32_t>(uniform_index(rng, num_entities));
                epoch_loss += stepper.step(factors, neg, 0);
            }
        }
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error(
                "training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                "; lower the learning rate or raise the L2 weights");

        EpochStats stats{epoch, epoch_loss, std::nullopt};
        if (has_validation && (epoch % hp.eval_every == 0 || epoch == hp.max_epochs)) {
            double mrr;
            if (config.mode == TrainMode::binarized) {
                const PackedFactors packed = binarize_factors(factors, hp.delta);
                mrr = evaluate(Scorer(packed), graph.valid, graph, config.eval_threads).mrr;
            } else {
                mrr = evaluate(Scorer(factors), graph.valid, graph, config.eval_threads).mrr;
            }
            stats.validation_mrr = mrr;
            result.log.validated = true;
            if (mrr > best_mrr) {
                best_mrr = mrr;
                best = factors;
                result.log.best_epoch = epoch;
            }
        }
        detail::emit_progress(config.progress, stats);
        result.log.epochs.push_back(std::move(stats));
    }

    if (!result.log.validated) {
        // Nothing to select on; keep the final state (or the init when
        // max_epochs is 0).
        best = std::move(factors);
        result.log.best_epoch = hp.max_epochs;
    }
    result.log.best_validation_mrr = result.log.validated ? best_mrr : 0.0;
    result.factors = std::move(best);
    if (config.mode == TrainMode::binarized)
        result.packed = binarize_factors(result.factors, hp.delta);

    result.log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

// Sign plane plus the scale minimizing Frobenius error for fixed signs,
// which is the mean absolute value of the entries.
struct VqPlane {
    BitMatrix signs;
    double alpha = 0.0;
};

inline VqPlane vq_quantize(const RowMatrix& m) {
    if (m.size() == 0) throw std::domain_error("cannot quantize an empty matrix");
    double abs_sum = 0.0;
    const double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) abs_sum += std::fabs(p[i]);
    const double alpha = abs_sum / static_cast<double>(m.size());
    if (alpha == 0.0) throw std::domain_error("cannot quantize an all-zero matrix");
    VqPlane plane;
    plane.alpha = alpha;
    plane.signs = BitMatrix(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::span<const double> row = m.row(r);
        for (std::size_t d = 0; d < row.size(); ++d)
            if (row[d] >= 0.0) plane.signs.set(r, d, true);
    }
    return plane;
}

// Quantizes all three factor matrices independently.
inline VqFactors vq_quantize_model(const DenseFactors& f) {
    VqPlane a = vq_quantize(f.subjects);
    VqPlane b = vq_quantize(f.objects);
    VqPlane c = vq_quantize(f.relations);
    VqFactors out;
    out.subjects = std::move(a.signs);
    out.objects = std::move(b.signs);
    out.relations = std::move(c.signs);
    out.alpha_subject = a.alpha;
    out.alpha_object = b.alpha;
    out.alpha_relation = c.alpha;
    out.dim = f.dim;
    return out;
}

}  // namespace bcp
