#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "bcp/evaluator.hpp"
#include "bcp/knowledge_graph.hpp"
#include "bcp/trainer.hpp"
#include "testkit.hpp"

using bcp::build_graph;
using bcp::DenseFactors;
using bcp::grad_rows_bcp;
using bcp::grad_rows_dense;
using bcp::Hyperparams;
using bcp::KnowledgeGraph;
using bcp::L2Weights;
using bcp::logistic_loss;
using bcp::RowGradients;
using bcp::sigmoid;
using bcp::softplus;
using bcp::TrainConfig;
using bcp::TrainMode;
using bcp::TrainResult;
using bcp::Triple;

namespace {

KnowledgeGraph tiny_graph(std::uint64_t seed, int entities = 12, int relations = 2,
                          bool with_valid = true) {
    std::mt19937_64 rng(seed);
    testkit::Dataset d = testkit::random_dataset(rng, entities, relations, 0.12);
    if (!with_valid) d.valid.clear();
    return build_graph(d.train, d.valid, d.test, true);
}

Hyperparams tiny_hyper() {
    Hyperparams hp;
    hp.dim = 8;
    hp.learning_rate = 0.05;
    hp.l2_subject = hp.l2_object = hp.l2_relation = 1e-4;
    hp.delta = 0.5;
    hp.negatives_per_positive = 2;
    hp.max_epochs = 4;
    hp.seed = 9;
    hp.eval_every = 2;
    return hp;
}

}  // namespace

TEST_CASE("sigmoid hits its anchor points") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(50.0) == 1.0);  // saturates to 1 within double precision
    CHECK(sigmoid(-50.0) < 2e-22);
    CHECK(sigmoid(-50.0) > 0.0);
    for (double x : {-3.0, -0.5, 0.1, 2.0})
        CHECK(std::fabs(sigmoid(x) + sigmoid(-x) - 1.0) < 1e-15);
}

TEST_CASE("softplus is stable and matches the reference value") {
    CHECK_THAT(softplus(2.0),
               Catch::Matchers::WithinAbs(2.1269280110429727, 1e-15));
    CHECK(softplus(1000.0) == 1000.0);
    CHECK(softplus(-1000.0) == 0.0);
    CHECK(softplus(0.0) == std::log(2.0));
}

TEST_CASE("logistic loss is the softplus of the signed score") {
    CHECK(logistic_loss(2.0, 1) == softplus(-2.0));
    CHECK(logistic_loss(2.0, 0) == softplus(2.0));
    CHECK(logistic_loss(0.0, 1) == logistic_loss(0.0, 0));
    for (double theta : {-30.0, -1.0, 0.0, 4.0, 30.0})
        for (int label : {0, 1}) CHECK(logistic_loss(theta, label) >= 0.0);
}

TEST_CASE("dense gradient matches central finite differences") {
    std::mt19937_64 rng(21);
    for (int round = 0; round < 50; ++round) {
        const std::size_t dim = 1 + bcp::uniform_index(rng, 5);
        DenseFactors f = bcp::make_dense_factors(3, 2, dim);
        for (bcp::RowMatrix* m : {&f.subjects, &f.objects, &f.relations}) {
            double* p = m->data();
            for (std::size_t i = 0; i < m->size(); ++i)
                p[i] = bcp::uniform_real(rng, -1.0, 1.0);
        }
        const Triple t{static_cast<std::int32_t>(bcp::uniform_index(rng, 3)),
                       static_cast<std::int32_t>(bcp::uniform_index(rng, 4)),
                       static_cast<std::int32_t>(bcp::uniform_index(rng, 3))};
        const int label = static_cast<int>(bcp::uniform_index(rng, 2));
        const L2Weights l2{0.01, 0.0, 1e-4};

        auto loss_at = [&] {
            const double theta = bcp::score_dense(f, t);
            double reg = 0.0;
            auto add = [&](const bcp::RowMatrix& m, std::size_t row, double lambda) {
                double n = 0.0;
                for (double v : m.row(row)) n += v * v;
                reg += lambda * n;
            };
            add(f.subjects, t.subject, l2.subject);
            add(f.objects, t.object, l2.object);
            add(f.relations, t.relation, l2.relation);
            return logistic_loss(theta, label) + reg;
        };

        const RowGradients g = grad_rows_dense(f, t, label, l2);
        const double h = 1e-6;
        auto check_row = [&](bcp::RowMatrix& m, std::size_t row,
                             const std::vector<double>& grad) {
            for (std::size_t d = 0; d < dim; ++d) {
                double& x = m.row(row)[d];
                const double saved = x;
                x = saved + h;
                const double up = loss_at();
                x = saved - h;
                const double down = loss_at();
                x = saved;
                const double fd = (up - down) / (2.0 * h);
                CHECK_THAT(grad[d], Catch::Matchers::WithinAbs(fd, 1e-5));
            }
        };
        check_row(f.subjects, t.subject, g.subject);
        check_row(f.objects, t.object, g.object);
        check_row(f.relations, t.relation, g.relation);
    }
}

TEST_CASE("straight-through gradient uses quantized companions and real L2") {
    DenseFactors f = bcp::make_dense_factors(1, 1, 2);
    f.subjects.row(0)[0] = 0.3;
    f.subjects.row(0)[1] = -0.2;
    f.objects.row(0)[0] = 0.4;
    f.objects.row(0)[1] = 0.1;
    f.relations.row(0)[0] = -0.5;
    f.relations.row(0)[1] = 0.6;
    const double delta = 0.5;
    const L2Weights l2{0.01, 0.01, 0.01};
    const Triple t{0, 0, 0};

    // Quantized rows: (+.5,-.5), (+.5,+.5), (-.5,+.5); score -0.25.
    const double theta = 0.5 * 0.5 * -0.5 + -0.5 * 0.5 * 0.5;
    REQUIRE(theta == -0.25);
    const double g = sigmoid(theta) - 1.0;

    const RowGradients grads = grad_rows_bcp(f, t, 1, delta, l2);
    CHECK_THAT(grads.subject[0],
               Catch::Matchers::WithinAbs(g * 0.5 * -0.5 + 2.0 * 0.01 * 0.3, 1e-15));
    CHECK_THAT(grads.subject[1],
               Catch::Matchers::WithinAbs(g * 0.5 * 0.5 + 2.0 * 0.01 * -0.2, 1e-15));
    CHECK_THAT(grads.object[0],
               Catch::Matchers::WithinAbs(g * 0.5 * -0.5 + 2.0 * 0.01 * 0.4, 1e-15));
    CHECK_THAT(grads.relation[1],
               Catch::Matchers::WithinAbs(g * -0.5 * 0.5 + 2.0 * 0.01 * 0.6, 1e-15));
}

TEST_CASE("negative sampling corrupts only the object and is uniform") {
    std::mt19937_64 rng(31);
    const Triple t{4, 1, 7};
    const auto negs = bcp::sample_negatives(t, 1000, 50, rng);
    REQUIRE(negs.size() == 1000);
    for (const Triple& n : negs) {
        CHECK(n.subject == 4);
        CHECK(n.relation == 1);
        CHECK(n.object >= 0);
        CHECK(n.object < 50);
    }

    // Chi-square uniformity over 100 entities; df = 99, so the statistic
    // should stay within a few standard deviations of 99.
    std::mt19937_64 rng2(32);
    std::vector<std::size_t> counts(100, 0);
    const std::size_t draws = 1000000;
    for (std::size_t i = 0; i < draws; i += 1000)
        for (const Triple& n : bcp::sample_negatives(t, 1000, 100, rng2))
            ++counts[static_cast<std::size_t>(n.object)];
    const double expected = static_cast<double>(draws) / 100.0;
    double chi2 = 0.0;
    for (std::size_t c : counts) {
        const double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    CHECK(chi2 < 170.0);  // mean + 5 sigma
    CHECK(chi2 > 28.0);   // mean - 5 sigma

    // Same seed, same negatives.
    std::mt19937_64 ra(33), rb(33);
    const auto na = bcp::sample_negatives(t, 20, 50, ra);
    const auto nb = bcp::sample_negatives(t, 20, 50, rb);
    CHECK(na.size() == nb.size());
    for (std::size_t i = 0; i < na.size(); ++i) CHECK(na[i] == nb[i]);
}

TEST_CASE("hyperparameter validation rejects nonsense") {
    Hyperparams hp;
    hp.dim = 0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = Hyperparams{};
    hp.learning_rate = 0.0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = Hyperparams{};
    hp.l2_object = -1e-4;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = Hyperparams{};
    hp.delta = 0.0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = Hyperparams{};
    hp.negatives_per_positive = 0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = Hyperparams{};
    hp.eval_every = 0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    CHECK_NOTHROW(Hyperparams{}.validate());
}

TEST_CASE("training requires an augmented graph with a train split") {
    std::mt19937_64 rng(41);
    const testkit::Dataset d = testkit::random_dataset(rng, 10, 2, 0.1);
    const KnowledgeGraph plain = build_graph(d.train, d.valid, d.test, false);
    TrainConfig config;
    config.hyper = tiny_hyper();
    CHECK_THROWS_AS(bcp::train(config, plain), std::invalid_argument);

    const KnowledgeGraph empty = build_graph({}, d.valid, d.test, true);
    CHECK_THROWS_AS(bcp::train(config, empty), std::invalid_argument);
}

TEST_CASE("one training epoch equals hand-applied row gradients") {
    // Single training fact, so after augmentation the epoch processes two
    // positives (fact and inverse) plus one sampled negative for each.
    const KnowledgeGraph g = build_graph({{"A", "r", "B"}, {"C", "r", "A"}}, {}, {}, true);
    Hyperparams hp = tiny_hyper();
    hp.dim = 4;
    hp.max_epochs = 1;
    hp.negatives_per_positive = 1;
    hp.seed = 77;

    for (const TrainMode mode : {TrainMode::dense, TrainMode::binarized}) {
        TrainConfig config;
        config.hyper = hp;
        config.mode = mode;
        const TrainResult result = bcp::train(config, g);

        // Replay the epoch with the public pieces: same rng stream, same
        // shuffle, fresh negatives, gradients applied to a consistent
        // pre-step snapshot.
        std::mt19937_64 rng(hp.seed);
        DenseFactors f = bcp::init_factors(static_cast<std::size_t>(g.num_entities()),
                                           static_cast<std::size_t>(g.num_relations()),
                                           hp.dim, rng);
        const L2Weights l2{hp.l2_subject, hp.l2_object, hp.l2_relation};
        std::vector<std::uint32_t> order(g.train.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = static_cast<std::uint32_t>(i);
        bcp::shuffle_values(order, rng);

        auto apply = [&](const Triple& t, int label) {
            const RowGradients grads =
                mode == TrainMode::binarized
                    ? grad_rows_bcp(f, t, label, hp.delta, l2)
                    : grad_rows_dense(f, t, label, l2);
            auto axpy = [&](bcp::RowMatrix& m, std::size_t row,
                            const std::vector<double>& grad) {
                std::span<double> x = m.row(row);
                for (std::size_t d = 0; d < x.size(); ++d)
                    x[d] = x[d] - hp.learning_rate * grad[d];
            };
            axpy(f.subjects, static_cast<std::size_t>(t.subject), grads.subject);
            axpy(f.objects, static_cast<std::size_t>(t.object), grads.object);
            axpy(f.relations, static_cast<std::size_t>(t.relation), grads.relation);
        };

        for (std::uint32_t idx : order) {
            const Triple& pos = g.train[idx];
            apply(pos, 1);
            Triple neg = pos;
            neg.object = static_cast<std::int32_t>(
                bcp::uniform_index(rng, static_cast<std::size_t>(g.num_entities())));
            apply(neg, 0);
        }

        for (std::size_t r = 0; r < f.subjects.rows(); ++r)
            for (std::size_t d = 0; d < hp.dim; ++d) {
                CHECK(result.factors.subjects.row(r)[d] == f.subjects.row(r)[d]);
                CHECK(result.factors.objects.row(r)[d] == f.objects.row(r)[d]);
            }
        for (std::size_t r = 0; r < f.relations.rows(); ++r)
            for (std::size_t d = 0; d < hp.dim; ++d)
                CHECK(result.factors.relations.row(r)[d] == f.relations.row(r)[d]);

        if (mode == TrainMode::binarized) {
            REQUIRE(result.packed.has_value());
            const bcp::PackedFactors expect = bcp::binarize_factors(f, hp.delta);
            CHECK(result.packed->subjects == expect.subjects);
            CHECK(result.packed->objects == expect.objects);
            CHECK(result.packed->relations == expect.relations);
        } else {
            CHECK_FALSE(result.packed.has_value());
        }
    }
}

TEST_CASE("training is reproducible from the seed") {
    const KnowledgeGraph g = tiny_graph(51);
    TrainConfig config;
    config.hyper = tiny_hyper();
    const TrainResult a = bcp::train(config, g);
    const TrainResult b = bcp::train(config, g);
    REQUIRE(a.log.epochs.size() == b.log.epochs.size());
    for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
        CHECK(a.log.epochs[i].loss == b.log.epochs[i].loss);
        CHECK(a.log.epochs[i].validation_mrr == b.log.epochs[i].validation_mrr);
    }
    CHECK(a.log.best_epoch == b.log.best_epoch);
    for (std::size_t r = 0; r < a.factors.subjects.rows(); ++r)
        for (std::size_t d = 0; d < a.factors.dim; ++d)
            CHECK(a.factors.subjects.row(r)[d] == b.factors.subjects.row(r)[d]);
}

TEST_CASE("checkpointing keeps the best validation epoch") {
    // The same dataset with and without its validation split: the run
    // without validation keeps the final state, which replays the k-epoch
    // prefix of the validated run (the rng streams agree, evaluation draws
    // nothing). That reconstructs the state at every checkpoint.
    std::mt19937_64 rng(61);
    testkit::Dataset d = testkit::random_dataset(rng, 14, 2, 0.12);
    // Keep the vocabulary identical: validation facts reuse train names.
    REQUIRE(d.train.size() >= 4);
    d.valid.assign({d.train[0], d.train[1], d.train[2]});
    const KnowledgeGraph with_valid = build_graph(d.train, d.valid, d.test, true);
    const KnowledgeGraph no_valid = build_graph(d.train, {}, d.test, true);
    REQUIRE(with_valid.num_entities() == no_valid.num_entities());
    REQUIRE(with_valid.num_relations() == no_valid.num_relations());

    Hyperparams hp = tiny_hyper();
    hp.max_epochs = 3;
    hp.eval_every = 1;
    TrainConfig config;
    config.hyper = hp;
    config.mode = TrainMode::binarized;

    const TrainResult main_run = bcp::train(config, with_valid);
    REQUIRE(main_run.log.validated);
    REQUIRE(main_run.log.epochs.size() == 3);

    double best = -1.0;
    std::size_t best_epoch = 0;
    for (const bcp::EpochStats& e : main_run.log.epochs) {
        REQUIRE(e.validation_mrr.has_value());
        if (*e.validation_mrr > best) {
            best = *e.validation_mrr;
            best_epoch = e.epoch;
        }
    }
    CHECK(main_run.log.best_epoch == best_epoch);
    CHECK(main_run.log.best_validation_mrr == best);

    for (std::size_t k = 1; k <= 3; ++k) {
        TrainConfig prefix = config;
        prefix.hyper.max_epochs = k;
        const TrainResult state_k = bcp::train(prefix, no_valid);
        // The logged validation MRR is computed on the binarized model.
        const bcp::PackedFactors packed = bcp::binarize_factors(state_k.factors, hp.delta);
        const double mrr =
            bcp::evaluate(bcp::Scorer(packed), with_valid.valid, with_valid).mrr;
        CHECK(mrr == *main_run.log.epochs[k - 1].validation_mrr);
        if (k == best_epoch) {
            for (std::size_t r = 0; r < state_k.factors.subjects.rows(); ++r)
                for (std::size_t dd = 0; dd < state_k.factors.dim; ++dd)
                    CHECK(main_run.factors.subjects.row(r)[dd] ==
                          state_k.factors.subjects.row(r)[dd]);
        }
    }
}

TEST_CASE("zero epochs returns the seeded initialization") {
    const KnowledgeGraph g = tiny_graph(71);
    TrainConfig config;
    config.hyper = tiny_hyper();
    config.hyper.max_epochs = 0;
    const TrainResult result = bcp::train(config, g);
    CHECK(result.log.epochs.empty());
    CHECK_FALSE(result.log.validated);
    REQUIRE(result.packed.has_value());

    std::mt19937_64 rng(config.hyper.seed);
    const DenseFactors init = bcp::init_factors(
        static_cast<std::size_t>(g.num_entities()),
        static_cast<std::size_t>(g.num_relations()), config.hyper.dim, rng);
    CHECK(result.factors.subjects.row(3)[2] == init.subjects.row(3)[2]);
    CHECK(result.factors.relations.row(1)[7] == init.relations.row(1)[7]);
}

TEST_CASE("a divergent learning rate aborts with a diagnostic") {
    const KnowledgeGraph g = tiny_graph(81);
    TrainConfig config;
    config.hyper = tiny_hyper();
    config.hyper.learning_rate = 1e300;
    config.hyper.max_epochs = 3;
    CHECK_THROWS_AS(bcp::train(config, g), std::runtime_error);
}

TEST_CASE("progress lines carry epoch, loss, and validation columns") {
    const KnowledgeGraph g = tiny_graph(91);
    std::ostringstream progress;
    TrainConfig config;
    config.hyper = tiny_hyper();
    config.hyper.max_epochs = 2;
    config.hyper.eval_every = 2;
    config.progress = &progress;
    const TrainResult result = bcp::train(config, g);

    std::istringstream lines(progress.str());
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line.rfind("1\t", 0) == 0);
    CHECK(line.find('\t', 2) == std::string::npos);  // no validation column
    REQUIRE(std::getline(lines, line));
    CHECK(line.rfind("2\t", 0) == 0);
    CHECK(line.find('\t', 2) != std::string::npos);  // validation column
    CHECK_FALSE(std::getline(lines, line));
    CHECK(result.log.epochs[1].validation_mrr.has_value());
}

TEST_CASE("vq quantization returns the mean absolute value and the signs") {
    bcp::RowMatrix x(2, 2);
    x.row(0)[0] = 1.0;
    x.row(0)[1] = -3.0;
    x.row(1)[0] = 2.0;
    x.row(1)[1] = -2.0;
    const bcp::VqPlane plane = bcp::vq_quantize(x);
    CHECK(plane.alpha == 2.0);  // (1 + 3 + 2 + 2) / 4
    CHECK(plane.signs.get(0, 0));
    CHECK_FALSE(plane.signs.get(0, 1));
    CHECK(plane.signs.get(1, 0));
    CHECK_FALSE(plane.signs.get(1, 1));

    bcp::RowMatrix zero(2, 3);
    CHECK_THROWS_AS(bcp::vq_quantize(zero), std::domain_error);
}

TEST_CASE("vq scale beats nearby scales in Frobenius error") {
    std::mt19937_64 rng(101);
    auto frob = [](const bcp::RowMatrix& x, const bcp::BitMatrix& signs, double alpha) {
        double err = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c) {
                const double approx = signs.get(r, c) ? alpha : -alpha;
                const double d = x.row(r)[c] - approx;
                err += d * d;
            }
        return err;
    };
    for (int round = 0; round < 100; ++round) {
        const std::size_t rows = 1 + bcp::uniform_index(rng, 6);
        const std::size_t cols = 1 + bcp::uniform_index(rng, 6);
        bcp::RowMatrix x(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                x.row(r)[c] = bcp::uniform_real(rng, -2.0, 2.0);
        const bcp::VqPlane plane = bcp::vq_quantize(x);
        const double base = frob(x, plane.signs, plane.alpha);
        for (double factor : {0.5, 0.9, 1.1, 2.0})
            CHECK(base <= frob(x, plane.signs, plane.alpha * factor));
    }
}

TEST_CASE("vq model quantization scales each matrix independently") {
    DenseFactors f = bcp::make_dense_factors(1, 1, 2);
    f.subjects.row(0)[0] = 1.0;
    f.subjects.row(0)[1] = -1.0;
    f.objects.row(0)[0] = 2.0;
    f.objects.row(0)[1] = 2.0;
    f.relations.row(0)[0] = 4.0;
    f.relations.row(0)[1] = -4.0;
    f.relations.row(1)[0] = 0.0;
    f.relations.row(1)[1] = 8.0;
    const bcp::VqFactors vq = bcp::vq_quantize_model(f);
    CHECK(vq.alpha_subject == 1.0);
    CHECK(vq.alpha_object == 2.0);
    CHECK(vq.alpha_relation == 4.0);
    CHECK(vq.coefficient() == 8.0);
    CHECK(vq.subjects.get(0, 0));
    CHECK_FALSE(vq.subjects.get(0, 1));
    CHECK(vq.relations.get(1, 0));  // zero quantizes to the positive sign
}
