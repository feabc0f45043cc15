#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#ifdef __linux__
#include <sched.h>
#endif

#include "bcp/factors.hpp"
#include "bcp/packed.hpp"
#include "bcp/random.hpp"
#include "bcp/triple.hpp"

namespace bcp {

// Pins the calling thread to the lowest-numbered CPU it is currently
// allowed to run on. Best effort; returns whether it took.
inline bool pin_to_first_cpu() {
#ifdef __linux__
    cpu_set_t allowed;
    CPU_ZERO(&allowed);
    if (sched_getaffinity(0, sizeof allowed, &allowed) != 0) return false;
    for (int cpu = 0; cpu < CPU_SETSIZE; ++cpu) {
        if (CPU_ISSET(cpu, &allowed)) {
            cpu_set_t one;
            CPU_ZERO(&one);
            CPU_SET(cpu, &one);
            return sched_setaffinity(0, sizeof one, &one) == 0;
        }
    }
    return false;
#else
    return false;
#endif
}

struct BenchPoint {
    std::size_t dim = 0;
    double dense_ns_per_score = 0.0;
    double packed_ns_per_score = 0.0;
    double speedup = 0.0;  // dense over packed
    // Sums of all scores computed in the last trial. Consuming them keeps
    // the optimizer from discarding the measured work, and fixed seeds make
    // them reproducible witnesses.
    double dense_checksum = 0.0;
    double packed_checksum = 0.0;
};

struct BenchResult {
    std::vector<BenchPoint> points;
    // Cost of the timing loop itself (index xor folded into the checksum in
    // place of a score), for judging how much of a reading is harness.
    double overhead_ns_per_score = 0.0;
    std::size_t scores_per_trial = 0;
    std::size_t trials = 0;
    bool pinned = false;
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// Times `scores_per_trial` calls of fn over the triple stream, untimed
// warmup first, and returns the median ns per call across trials.
template <typename Fn>
double time_ns_per_call(const std::vector<Triple>& triples, std::size_t trials,
                        Fn&& fn, double& checksum_out) {
    using clock = std::chrono::steady_clock;
    std::vector<double> ns(trials);
    double checksum = 0.0;
    for (const Triple& t : triples) checksum += fn(t);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        checksum = 0.0;
        const auto t0 = clock::now();
        for (const Triple& t : triples) checksum += fn(t);
        const auto t1 = clock::now();
        ns[trial] = std::chrono::duration<double, std::nano>(t1 - t0).count() /
                    static_cast<double>(triples.size());
    }
    checksum_out = checksum;
    return median(std::move(ns));
}

}  // namespace detail

// Single-thread throughput of dense versus packed scoring at each dim,
// on a synthetic model with random factors and a shared random triple
// stream. Medians over `trials` runs of `scores_per_trial` scores each;
// a warmup pass per kernel is excluded. The floor of 100000 scores per
// trial keeps one trial well above timer resolution and cache warmup.
inline BenchResult bench_scores(const std::vector<std::size_t>& dims,
                                std::size_t scores_per_trial = 100000,
                                std::size_t trials = 5, std::uint64_t seed = 1,
                                bool pin = true) {
    if (dims.empty()) throw std::invalid_argument("no dims to benchmark");
    for (std::size_t d : dims)
        if (d == 0) throw std::invalid_argument("dim must be positive");
    if (scores_per_trial < 100000)
        throw std::invalid_argument("scores_per_trial must be at least 100000");
    if (trials == 0) throw std::invalid_argument("trials must be positive");

    constexpr std::size_t kEntities = 2048;
    constexpr std::size_t kRelations = 32;

    BenchResult result;
    result.scores_per_trial = scores_per_trial;
    result.trials = trials;
    result.pinned = pin && pin_to_first_cpu();

    std::mt19937_64 rng(seed);
    std::vector<Triple> triples(scores_per_trial);
    for (Triple& t : triples) {
        t.subject = static_cast<std::int32_t>(uniform_index(rng, kEntities));
        t.relation = static_cast<std::int32_t>(uniform_index(rng, 2 * kRelations));
        t.object = static_cast<std::int32_t>(uniform_index(rng, kEntities));
    }

    double sink = 0.0;
    result.overhead_ns_per_score = detail::time_ns_per_call(
        triples, trials,
        [](const Triple& t) {
            return static_cast<double>(t.subject ^ t.relation ^ t.object);
        },
        sink);

    for (std::size_t dim : dims) {
        const DenseFactors dense = init_factors(kEntities, kRelations, dim, rng);
        const PackedFactors packed = binarize_factors(dense, 0.5);
        BenchPoint point;
        point.dim = dim;
        point.dense_ns_per_score = detail::time_ns_per_call(
            triples, trials, [&](const Triple& t) { return score_dense(dense, t); },
            point.dense_checksum);
        point.packed_ns_per_score = detail::time_ns_per_call(
            triples, trials, [&](const Triple& t) { return score_packed(packed, t); },
            point.packed_checksum);
        point.speedup = point.dense_ns_per_score / point.packed_ns_per_score;
        result.points.push_back(point);
    }
    return result;
}

}  // namespace bcp
