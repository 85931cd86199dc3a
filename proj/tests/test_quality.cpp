#include "evoembed/error.hpp"
#include "evoembed/quality.hpp"
#include "evoembed/synth.hpp"
#include "helpers.hpp"
#include "rank_oracle.hpp"

#include <doctest.h>

#include <random>

using namespace evoembed;

namespace {

struct Instance {
    std::vector<double> high;
    std::size_t dim = 0;
    std::vector<Vec2> low;
};

// Integer-valued coordinates on a small grid produce many exact distance ties.
Instance random_instance(std::mt19937_64& rng, std::size_t n, bool ties) {
    std::uniform_int_distribution<int> dim_pick(1, 6);
    std::uniform_int_distribution<int> grid(-3, 3);
    std::normal_distribution<double> g(0, 1);
    Instance in;
    in.dim = static_cast<std::size_t>(dim_pick(rng));
    in.high.resize(n * in.dim);
    for (auto& v : in.high) {
        v = ties ? grid(rng) : g(rng);
    }
    in.low.resize(n);
    for (auto& p : in.low) {
        p = ties ? Vec2{static_cast<double>(grid(rng)), static_cast<double>(grid(rng))} : Vec2{g(rng), g(rng)};
    }
    return in;
}

} // namespace

TEST_CASE("rank excess equals the full-sort oracle, with and without ties") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 12 + static_cast<std::size_t>(trial % 30);
        const auto in = random_instance(rng, n, trial % 2 == 0);
        for (std::size_t k : {1UL, 3UL, 7UL}) {
            CHECK(trust_rank_excess(in.high, in.dim, in.low, k) == test::oracle_trust_excess(in.high, in.dim, in.low, k));
            CHECK(continuity_rank_excess(in.high, in.dim, in.low, k) ==
                  test::oracle_cont_excess(in.high, in.dim, in.low, k));
        }
    }
}

TEST_CASE("an isometric embedding scores 1") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 1);
    std::vector<double> high(40);
    std::vector<Vec2> low(20);
    for (std::size_t i = 0; i < 20; ++i) {
        high[2 * i] = g(rng);
        high[2 * i + 1] = g(rng);
        // Rotated by 90 degrees and shifted.
        low[i] = {-high[2 * i + 1] + 5, high[2 * i] - 2};
    }
    CHECK(trustworthiness(high, 2, low) == 1.0);
    CHECK(continuity(high, 2, low) == 1.0);
}

TEST_CASE("scores lie in [0, 1]") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto in = random_instance(rng, 30, false);
        const double t = trustworthiness(in.high, in.dim, in.low);
        const double c = continuity(in.high, in.dim, in.low);
        CHECK(t >= 0);
        CHECK(t <= 1);
        CHECK(c >= 0);
        CHECK(c <= 1);
    }
}

TEST_CASE("scaling factor and its domain") {
    CHECK(rank_scaling_factor(50, 7) == doctest::Approx(2.0 / (50.0 * 7 * (100 - 21 - 1))));
    CHECK_THROWS_AS(rank_scaling_factor(10, 7), ConfigError);
    CHECK_THROWS_AS(rank_scaling_factor(10, 0), ConfigError);
    CHECK(default_quality_k == 7);
}

TEST_CASE("per-iteration report uses each rank's own rows") {
    const auto data = test::random_dataset(20, 3, 4, 2);
    std::vector<Vec2> coords(60);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0, 1);
    for (auto& p : coords) {
        p = {g(rng), g(rng)};
    }
    const auto report = quality_report(data, coords, "mine", 5, 2);
    CHECK(report.baseline_label == "mine");
    CHECK(report.k == 5);
    REQUIRE(report.iterations.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto block = data.iteration_block(k);
        const std::span<const Vec2> low(coords.data() + k * 20, 20);
        CHECK(report.iterations[k].rank == k);
        CHECK(report.iterations[k].iteration_label == data.iteration_labels[k]);
        CHECK(report.iterations[k].trust == trustworthiness(block, 4, low, 5));
        CHECK(report.iterations[k].cont == continuity(block, 4, low, 5));
    }
}

TEST_CASE("vanilla configuration drops the layout terms and keeps the optimizer") {
    auto base = EmbedConfig::defaults(Layout::radial);
    base.seed = 7;
    base.perplexity = 12;
    const auto v = vanilla_config(base);
    CHECK(v.layout == Layout::rectilinear);
    CHECK(v.beta == 0);
    CHECK(v.gamma == 0);
    CHECK(v.alpha == base.alpha);
    CHECK(v.seed == 7);
    CHECK(v.perplexity == 12);
    CHECK(v.opt_iters == base.opt_iters);
}

TEST_CASE("ablation report labels and CSV columns") {
    SynthSpec spec;
    spec.num_instances = 24;
    spec.num_iterations = 3;
    spec.feature_dim = 6;
    const auto data = generate_synthetic(spec).dataset;
    auto c = EmbedConfig::defaults(Layout::rectilinear);
    c.opt_iters = 60;
    c.perplexity = 5;
    auto c0 = c;
    c0.gamma = 0;
    const auto reports = ablation_report(data, {{"rectilinear", c}, {"noalign", c0}}, 7, {.threads = 1});
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].baseline_label == "rectilinear");
    CHECK(reports[1].baseline_label == "noalign");
    CHECK(reports[2].baseline_label == "vanilla");
    const auto csv = quality_csv(reports);
    CHECK(csv.rfind("iteration_label,trust,cont,baseline_label\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}
