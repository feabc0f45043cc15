#include <cstddef>
#include <stdexcept>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "bcp/bench.hpp"

TEST_CASE("benchmark arguments are validated") {
    CHECK_THROWS_AS(bcp::bench_scores({}, 100000, 1), std::invalid_argument);
    CHECK_THROWS_AS(bcp::bench_scores({16, 0}, 100000, 1), std::invalid_argument);
    CHECK_THROWS_AS(bcp::bench_scores({16}, 99999, 1), std::invalid_argument);
    CHECK_THROWS_AS(bcp::bench_scores({16}, 100000, 0), std::invalid_argument);
}

TEST_CASE("median of trial timings") {
    CHECK(bcp::detail::median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(bcp::detail::median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK(bcp::detail::median({7.0}) == 7.0);
}

TEST_CASE("benchmark runs produce timings and reproducible checksums") {
    const std::vector<std::size_t> dims = {16, 64};
    const bcp::BenchResult a = bcp::bench_scores(dims, 100000, 2, 7, false);
    const bcp::BenchResult b = bcp::bench_scores(dims, 100000, 2, 7, false);

    REQUIRE(a.points.size() == 2);
    CHECK(a.scores_per_trial == 100000);
    CHECK(a.trials == 2);
    CHECK(a.overhead_ns_per_score > 0.0);

    for (std::size_t i = 0; i < a.points.size(); ++i) {
        const bcp::BenchPoint& p = a.points[i];
        CHECK(p.dim == dims[i]);
        CHECK(p.dense_ns_per_score > 0.0);
        CHECK(p.packed_ns_per_score > 0.0);
        CHECK(p.speedup == p.dense_ns_per_score / p.packed_ns_per_score);
        // The empty timing loop must cost less than a real dense kernel.
        CHECK(a.overhead_ns_per_score < p.dense_ns_per_score);
        // Same seed, same model, same triples: the work is identical even
        // though the timings are not.
        CHECK(p.dense_checksum == b.points[i].dense_checksum);
        CHECK(p.packed_checksum == b.points[i].packed_checksum);
        CHECK(p.dense_checksum != 0.0);
        CHECK(p.packed_checksum != 0.0);
    }
}

TEST_CASE("cpu pinning reports rather than throws") {
    CHECK_NOTHROW(bcp::pin_to_first_cpu());
}
