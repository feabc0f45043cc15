#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <thread>
#include <variant>
#include <vector>

#include "bcp/factors.hpp"
#include "bcp/knowledge_graph.hpp"
#include "bcp/packed.hpp"
#include "bcp/triple.hpp"

namespace bcp {

// Scores triples against one model or an ensemble (sum of member scores).
// Members may mix dense, packed, and vq models and may differ in dim, but
// must agree on entity and relation counts. Holds non-owning pointers; the
// referenced models must outlive the scorer. Stateless after construction,
// so one instance can be shared across evaluation threads.
class Scorer {
public:
    using ModelRef = std::variant<const DenseFactors*, const PackedFactors*, const VqFactors*>;

    explicit Scorer(const DenseFactors& f) { add(ModelRef(&f)); }
    explicit Scorer(const PackedFactors& p) { add(ModelRef(&p)); }
    explicit Scorer(const VqFactors& p) { add(ModelRef(&p)); }

    explicit Scorer(const std::vector<ModelRef>& members) {
        if (members.empty()) throw std::invalid_argument("ensemble has no members");
        for (const ModelRef& m : members) add(m);
    }

    std::size_t num_entities() const { return num_entities_; }
    std::size_t num_relation_rows() const { return num_relation_rows_; }
    std::size_t num_members() const { return members_.size(); }

    double score(const Triple& t) const {
        double acc = 0.0;
        for (const ModelRef& m : members_)
            acc += std::visit([&](const auto* model) { return score_one(*model, t); }, m);
        return acc;
    }

    // Scores (subject, relation, e) for every entity e in one pass. The
    // subject/relation parts are combined once per member, so the per-entity
    // cost is a single dot product (dense) or xor+popcount sweep (packed).
    // Per-entity results are identical to score() on the same triple.
    void score_objects(std::int32_t subject, std::int32_t relation,
                       std::vector<double>& out) const {
        if (subject < 0 || static_cast<std::size_t>(subject) >= num_entities_)
            throw std::out_of_range("entity id out of range");
        if (relation < 0 || static_cast<std::size_t>(relation) >= num_relation_rows_)
            throw std::out_of_range("relation id out of range");
        out.assign(num_entities_, 0.0);
        for (const ModelRef& m : members_)
            std::visit([&](const auto* model) {
                accumulate_objects(*model, static_cast<std::size_t>(subject),
                                   static_cast<std::size_t>(relation), out);
            }, m);
    }

private:
    void add(const ModelRef& m) {
        const std::size_t ne = std::visit([](const auto* p) { return p->num_entities(); }, m);
        const std::size_t nr = std::visit([](const auto* p) { return p->num_relation_rows(); }, m);
        if (members_.empty()) {
            num_entities_ = ne;
            num_relation_rows_ = nr;
        } else if (ne != num_entities_ || nr != num_relation_rows_) {
            throw std::invalid_argument("ensemble members disagree on vocabulary size");
        }
        members_.push_back(m);
    }

    static double score_one(const DenseFactors& f, const Triple& t) { return score_dense(f, t); }
    static double score_one(const PackedFactors& p, const Triple& t) { return score_packed(p, t); }
    static double score_one(const VqFactors& p, const Triple& t) { return score_vq(p, t); }

    static void accumulate_objects(const DenseFactors& f, std::size_t subject,
                                   std::size_t relation, std::vector<double>& out) {
        std::span<const double> a = f.subjects.row(subject);
        std::span<const double> c = f.relations.row(relation);
        // Keeps score_rows' per-term multiply order (a*b)*c; hoisting a*c
        // out of the entity loop would change rounding and break the exact
        // agreement between batched and single-triple scores.
        for (std::size_t e = 0; e < f.num_entities(); ++e) {
            std::span<const double> b = f.objects.row(e);
            double acc = 0.0;
            for (std::size_t d = 0; d < f.dim; ++d) acc += a[d] * b[d] * c[d];
            out[e] += acc;
        }
    }

    template <typename Planes>
    static void accumulate_planes(const Planes& p, double coef, std::size_t subject,
                                  std::size_t relation, std::vector<double>& out) {
        const std::size_t words = p.subjects.words_per_row();
        std::span<const std::uint64_t> a = p.subjects.row(subject);
        std::span<const std::uint64_t> c = p.relations.row(relation);
        std::vector<std::uint64_t> ac(words);
        for (std::size_t t = 0; t < words; ++t) ac[t] = a[t] ^ c[t];
        const std::uint64_t mask = BitMatrix::tail_mask(p.dim);
        const std::int64_t dim = static_cast<std::int64_t>(p.dim);
        for (std::size_t e = 0; e < p.num_entities(); ++e) {
            std::span<const std::uint64_t> b = p.objects.row(e);
            std::int64_t positives = 0;
            for (std::size_t t = 0; t + 1 < words; ++t)
                positives += popcount64(ac[t] ^ b[t]);
            if (words > 0)
                positives += popcount64((ac[words - 1] ^ b[words - 1]) & mask);
            out[e] += coef * static_cast<double>(2 * positives - dim);
        }
    }

    static void accumulate_objects(const PackedFactors& p, std::size_t subject,
                                   std::size_t relation, std::vector<double>& out) {
        accumulate_planes(p, p.delta_cubed(), subject, relation, out);
    }
    static void accumulate_objects(const VqFactors& p, std::size_t subject,
                                   std::size_t relation, std::vector<double>& out) {
        accumulate_planes(p, p.coefficient(), subject, relation, out);
    }

    std::vector<ModelRef> members_;
    std::size_t num_entities_ = 0;
    std::size_t num_relation_rows_ = 0;
};

enum class Direction { object_side, subject_side };

// Filtered fractional rank of the true completion among all entities.
// Candidates that form a known fact are skipped (the true entity always
// stays in); ties with the true score contribute half a rank each. The
// subject side is realized as the object side of the inverse relation.
inline double rank_triple(const Scorer& scorer, const Triple& t,
                          const KnowledgeGraph& graph, Direction direction,
                          std::vector<double>& scratch) {
    Triple q = direction == Direction::object_side
                   ? t
                   : inverse_triple(t, graph.num_relations());
    scorer.score_objects(q.subject, q.relation, scratch);
    const double true_score = scratch[static_cast<std::size_t>(q.object)];
    std::size_t greater = 0;
    std::size_t ties = 0;
    Triple candidate{q.subject, q.relation, 0};
    const std::int32_t ne = graph.num_entities();
    for (std::int32_t e = 0; e < ne; ++e) {
        if (e == q.object) continue;
        candidate.object = e;
        if (graph.is_known(candidate)) continue;
        const double s = scratch[static_cast<std::size_t>(e)];
        if (s > true_score) ++greater;
        else if (s == true_score) ++ties;
    }
    return 1.0 + static_cast<double>(greater) + static_cast<double>(ties) / 2.0;
}

inline double rank_triple(const Scorer& scorer, const Triple& t,
                          const KnowledgeGraph& graph, Direction direction) {
    std::vector<double> scratch;
    return rank_triple(scorer, t, graph, direction, scratch);
}

struct EvalReport {
    double mrr = 0.0;
    // Hits are percentages in [0, 100].
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
    std::size_t queries = 0;
    // Two ranks per triple, object side then subject side, in input order.
    std::vector<double> ranks;
};

// Ranks every triple in both directions and aggregates MRR and Hits@k.
// With threads > 1 the triples are split into contiguous chunks; results
// are written per query slot, so the report is independent of thread count.
inline EvalReport evaluate(const Scorer& scorer, const std::vector<Triple>& triples,
                           const KnowledgeGraph& graph, std::size_t threads = 1) {
    if (triples.empty()) throw std::invalid_argument("no triples to evaluate");
    EvalReport report;
    report.queries = triples.size() * 2;
    report.ranks.assign(report.queries, 0.0);

    auto worker = [&](std::size_t begin, std::size_t end) {
        std::vector<double> scratch;
        for (std::size_t i = begin; i < end; ++i) {
            report.ranks[2 * i] =
                rank_triple(scorer, triples[i], graph, Direction::object_side, scratch);
            report.ranks[2 * i + 1] =
                rank_triple(scorer, triples[i], graph, Direction::subject_side, scratch);
        }
    };

    if (threads <= 1) {
        worker(0, triples.size());
    } else {
        const std::size_t n = triples.size();
        const std::size_t workers = std::min(threads, n);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = n * w / workers;
            const std::size_t end = n * (w + 1) / workers;
            pool.emplace_back(worker, begin, end);
        }
        for (std::thread& th : pool) th.join();
    }

    double mrr_sum = 0.0;
    std::size_t h1 = 0, h3 = 0, h10 = 0;
    for (double r : report.ranks) {
        mrr_sum += 1.0 / r;
        if (r <= 1.0) ++h1;
        if (r <= 3.0) ++h3;
        if (r <= 10.0) ++h10;
    }
    const double q = static_cast<double>(report.queries);
    report.mrr = mrr_sum / q;
    report.hits1 = 100.0 * static_cast<double>(h1) / q;
    report.hits3 = 100.0 * static_cast<double>(h3) / q;
    report.hits10 = 100.0 * static_cast<double>(h10) / q;
    return report;
}

// Sum-of-scores ensemble evaluation over any mix of model kinds.
inline EvalReport evaluate_ensemble(const std::vector<Scorer::ModelRef>& members,
                                    const std::vector<Triple>& triples,
                                    const KnowledgeGraph& graph,
                                    std::size_t threads = 1) {
    return evaluate(Scorer(members), triples, graph, threads);
}

// Picks the decision threshold maximizing accuracy on labeled triples,
// where a triple is predicted positive iff score >= threshold. Considered
// thresholds: the minimum score (everything positive), midpoints between
// adjacent distinct scores, and just above the maximum (everything
// negative). Ties in accuracy resolve to the lowest such threshold.
inline double tune_threshold(const Scorer& scorer,
                             const std::vector<Triple>& positives,
                             const std::vector<Triple>& negatives) {
    if (positives.empty() || negatives.empty())
        throw std::invalid_argument("threshold tuning needs both classes");

    struct Sample { double score; bool positive; };
    std::vector<Sample> samples;
    samples.reserve(positives.size() + negatives.size());
    for (const Triple& t : positives) samples.push_back({scorer.score(t), true});
    for (const Triple& t : negatives) samples.push_back({scorer.score(t), false});
    std::sort(samples.begin(), samples.end(),
              [](const Sample& x, const Sample& y) { return x.score < y.score; });

    // Sweep cut positions over the sorted samples. Predicting positive at
    // score >= samples[i].score classifies everything below index of the
    // first sample with that score as negative; walking distinct values in
    // order updates the negative-prefix / positive-suffix counts in O(n).
    const std::size_t n = samples.size();
    std::size_t pos_remaining = positives.size();
    std::size_t neg_below = 0;

    double best_threshold = samples.front().score;
    std::size_t best_correct = pos_remaining;  // min-score cut: all positive

    std::size_t i = 0;
    while (i < n) {
        const double value = samples[i].score;
        std::size_t j = i;
        while (j < n && samples[j].score == value) {
            if (samples[j].positive) --pos_remaining;
            else ++neg_below;
            ++j;
        }
        // Cut strictly above `value`: threshold is the midpoint to the next
        // distinct score, or just past the maximum for the final cut.
        double threshold;
        if (j < n) {
            const double next = samples[j].score;
            threshold = value + (next - value) / 2.0;
            if (threshold <= value) threshold = next;
        } else {
            threshold = std::nextafter(value, std::numeric_limits<double>::infinity());
        }
        const std::size_t correct = pos_remaining + neg_below;
        if (correct > best_correct) {
            best_correct = correct;
            best_threshold = threshold;
        }
        i = j;
    }
    return best_threshold;
}

// Accuracy (percent) of thresholded scoring on labeled triples.
inline double classify(const Scorer& scorer, const std::vector<Triple>& positives,
                       const std::vector<Triple>& negatives, double threshold) {
    const std::size_t n = positives.size() + negatives.size();
    if (n == 0) throw std::invalid_argument("no triples to classify");
    std::size_t correct = 0;
    for (const Triple& t : positives)
        if (scorer.score(t) >= threshold) ++correct;
    for (const Triple& t : negatives)
        if (scorer.score(t) < threshold) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace bcp
