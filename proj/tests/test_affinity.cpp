#include "evoembed/affinity.hpp"
#include "evoembed/error.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace evoembed;

namespace {

// Textbook form: normalize exp(-d / 2 sigma^2) directly, no shift.
std::vector<double> naive_row(const std::vector<double>& d, double sigma) {
    std::vector<double> p(d.size());
    double z = 0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        p[j] = std::exp(-d[j] / (2 * sigma * sigma));
        z += p[j];
    }
    for (auto& v : p) {
        v /= z;
    }
    return p;
}

double naive_perplexity(const std::vector<double>& p) {
    double h = 0;
    for (double v : p) {
        if (v > 0) {
            h -= v * std::log2(v);
        }
    }
    return std::exp2(h);
}

} // namespace

TEST_CASE("conditional row matches the unshifted softmax") {
    const std::vector<double> d = {0.5, 1.0, 2.0, 4.5, 0.25};
    for (double sigma : {0.3, 1.0, 2.5}) {
        const auto got = conditional_row(d, sigma);
        const auto want = naive_row(d, sigma);
        for (std::size_t j = 0; j < d.size(); ++j) {
            CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("conditional row survives distances that underflow the unshifted form") {
    const std::vector<double> d = {1e4, 1e4 + 1, 1e4 + 2};
    const auto p = conditional_row(d, 0.5);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
    CHECK(p[0] > p[1]);
    CHECK(p[1] > p[2]);
}

TEST_CASE("conditional row rejects bad input") {
    const std::vector<double> d = {1.0, 2.0};
    CHECK_THROWS_AS(conditional_row(d, 0.0), ConfigError);
    const std::vector<double> inf = {INFINITY, INFINITY};
    CHECK_THROWS_AS(conditional_row(inf, 1.0), DegenerateRowError);
}

TEST_CASE("calibrated sigma reaches the requested perplexity") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 20.0);
    for (double perplexity : {2.0, 5.0, 15.0, 30.0}) {
        std::vector<double> d(60);
        for (auto& v : d) {
            v = u(rng);
        }
        const auto cal = calibrate_sigma(d, perplexity);
        CHECK_FALSE(cal.flagged);
        CHECK(naive_perplexity(naive_row(d, cal.sigma)) == doctest::Approx(perplexity).epsilon(1e-4));
    }
}

TEST_CASE("all-equal distances cannot reach a low perplexity and are flagged") {
    const std::vector<double> d(10, 3.0);
    const auto cal = calibrate_sigma(d, 4.0);
    CHECK(cal.flagged);
}

TEST_CASE("joint affinities match the symmetrized naive construction") {
    const auto data = test::random_dataset(25, 2, 5, 11);
    const double perplexity = 6;
    const auto aff = compute_affinities(data, perplexity);
    REQUIRE(aff.num_iterations() == 2);
    const std::size_t N = data.num_instances;
    for (std::size_t k = 0; k < 2; ++k) {
        std::vector<std::vector<double>> cond(N);
        for (std::size_t i = 0; i < N; ++i) {
            std::vector<double> d;
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i) {
                    continue;
                }
                double acc = 0;
                for (std::size_t c = 0; c < data.feature_dim; ++c) {
                    const double diff = data.row(k, i)[c] - data.row(k, j)[c];
                    acc += diff * diff;
                }
                d.push_back(acc);
            }
            auto p = naive_row(d, aff.sigmas[k * N + i]);
            cond[i].assign(N, 0.0);
            for (std::size_t j = 0, m = 0; j < N; ++j) {
                if (j != i) {
                    cond[i][j] = p[m++];
                }
            }
        }
        double total = 0;
        for (std::size_t i = 0; i < N; ++i) {
            CHECK(aff.at(k, i, i) == 0.0);
            for (std::size_t j = 0; j < N; ++j) {
                total += aff.at(k, i, j);
                CHECK(aff.at(k, i, j) == aff.at(k, j, i));
                if (i != j) {
                    const double want = std::max((cond[i][j] + cond[j][i]) / (2.0 * N), min_joint_probability);
                    CHECK(aff.at(k, i, j) == doctest::Approx(want).epsilon(1e-6));
                }
            }
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("affinities do not depend on the thread count") {
    const auto data = test::random_dataset(40, 3, 6, 3);
    const auto a = compute_affinities(data, 10, 1);
    const auto b = compute_affinities(data, 10, 4);
    CHECK(a.joint == b.joint);
    CHECK(a.sigmas == b.sigmas);
}
