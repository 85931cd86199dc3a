#include "evoembed/affinity.hpp"
#include "evoembed/losses.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace evoembed;

namespace {

std::vector<double> uniform(std::size_t n, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = u(rng);
    }
    return v;
}

// Independent KL of one rank from the joint matrix and Student-t similarities.
double naive_kl(const AffinitySet& aff, std::size_t k, const std::vector<Vec2>& pts) {
    const std::size_t N = aff.num_instances;
    double z = 0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            if (i != j) {
                const Vec2 a = pts[k * N + i];
                const Vec2 b = pts[k * N + j];
                z += 1 / (1 + (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
            }
        }
    }
    double kl = 0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            if (i != j) {
                const Vec2 a = pts[k * N + i];
                const Vec2 b = pts[k * N + j];
                const double q = std::max(1 / (1 + (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)) / z, 1e-12);
                const double p = aff.at(k, i, j);
                kl += p * std::log(p / q);
            }
        }
    }
    return kl;
}

// Checks the optimality conditions of z = argmin 0.5|z - x|^2 + lambda TV(z).
void check_tv_kkt(const std::vector<double>& x, const std::vector<double>& z, double lambda) {
    const double tol = 1e-9 * (1 + lambda);
    double running = 0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        running += x[j] - z[j];
        const double s = -running / lambda;
        CHECK(std::abs(s) <= 1 + 1e-9);
        const double diff = z[j + 1] - z[j];
        if (std::abs(diff) > 1e-9) {
            CHECK(std::abs(s - (diff > 0 ? 1.0 : -1.0)) < 1e-7);
        }
    }
    running += x.back() - z.back();
    CHECK(std::abs(running) < tol * static_cast<double>(x.size()));
}

} // namespace

TEST_CASE("semantic KL total matches the naive sum") {
    const auto data = test::random_dataset(15, 3, 4, 7);
    const auto aff = compute_affinities(data, 4);
    const auto flat = uniform(2 * 45, -3, 3, 9);
    const auto pts = test::to_points(flat, false);
    const auto s = semantic_loss_and_grad(aff, pts);
    double total = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double want = naive_kl(aff, k, pts);
        CHECK(s.kl_per_iteration[k] == doctest::Approx(want).epsilon(1e-10));
        total += want;
    }
    CHECK(s.total == doctest::Approx(total).epsilon(1e-10));
}

TEST_CASE("semantic gradient matches central differences in both coordinate systems") {
    const auto data = test::random_dataset(12, 2, 5, 3);
    const auto aff = compute_affinities(data, 4);
    CHECK(test::check_semantic(aff, uniform(2 * 24, -4, 4, 1), false).max_rel < 1e-3);

    std::vector<double> polar(2 * 24);
    const auto r = uniform(24, 1, 30, 2);
    const auto t = uniform(24, -3, 3, 4);
    for (std::size_t e = 0; e < 24; ++e) {
        polar[2 * e] = r[e];
        polar[2 * e + 1] = t[e];
    }
    CHECK(test::check_semantic(aff, polar, true).max_rel < 1e-3);
}

TEST_CASE("exaggeration scales only the attractive part") {
    const auto data = test::random_dataset(10, 2, 3, 5);
    const auto aff = compute_affinities(data, 3);
    const auto pts = test::to_points(uniform(40, -2, 2, 6), false);
    const auto g1 = semantic_loss_and_grad(aff, pts, 1.0);
    const auto g2 = semantic_loss_and_grad(aff, pts, 2.0);
    const auto g3 = semantic_loss_and_grad(aff, pts, 3.0);
    // Linear in the factor: g(3) - g(2) == g(2) - g(1).
    for (std::size_t e = 0; e < pts.size(); ++e) {
        CHECK(g3.gradient[e].x - g2.gradient[e].x == doctest::Approx(g2.gradient[e].x - g1.gradient[e].x));
        CHECK(g3.gradient[e].y - g2.gradient[e].y == doctest::Approx(g2.gradient[e].y - g1.gradient[e].y));
    }
    CHECK(g2.total == doctest::Approx(g1.total));
}

TEST_CASE("displacement well: value, gradient and pull direction") {
    const std::vector<double> offsets = {0, 20, 40};
    const std::size_t N = 4;
    const auto coord = uniform(12, -10, 50, 8);
    for (double sigma : {20.0, 13.0, 10.0}) {
        CHECK(test::check_displacement(coord, offsets, N, sigma).max_rel < 1e-3);
    }
    const std::vector<double> at = {0, 0, 0, 0, 20, 20, 20, 20, 40, 40, 40, 40};
    const auto centered = displacement_loss_and_grad(at, offsets, N, 10);
    CHECK(centered.cost == doctest::Approx(-12 * gaussian_peak(10)));
    for (double g : centered.gradient) {
        CHECK(g == 0.0);
    }
    // A point right of its offset has a positive gradient, so descent moves it back.
    const std::vector<double> right = {3, 0, 0, 0, 20, 20, 20, 20, 40, 40, 40, 40};
    CHECK(displacement_loss_and_grad(right, offsets, N, 10).gradient[0] > 0);
}

TEST_CASE("rectilinear alignment: path length cost and subgradient") {
    const std::size_t N = 5;
    const auto y = uniform(20, -5, 5, 12);
    CHECK(test::check_alignment_rect(y, N).max_rel < 1e-3);
    const auto a = alignment_loss_and_grad_rect(y, N);
    double want = 0;
    for (std::size_t k = 1; k < 4; ++k) {
        for (std::size_t i = 0; i < N; ++i) {
            want += std::abs(y[k * N + i] - y[(k - 1) * N + i]);
        }
    }
    CHECK(a.cost == doctest::Approx(want));
    const std::vector<double> flat(20, 1.5);
    for (double g : alignment_loss_and_grad_rect(flat, N).gradient) {
        CHECK(g == 0.0);
    }
}

TEST_CASE("radial alignment: cost, gradient and periodicity") {
    const std::size_t N = 6;
    const auto theta = uniform(24, -7, 7, 13);
    CHECK(test::check_alignment_radial(theta, N).max_rel < 1e-3);
    std::mt19937_64 rng(1);
    const auto a = alignment_loss_and_grad_radial(theta, N, rng);
    double want = 0;
    for (std::size_t k = 1; k < 4; ++k) {
        for (std::size_t i = 0; i < N; ++i) {
            want += 1 - std::abs(std::cos((theta[k * N + i] - theta[(k - 1) * N + i]) / 2));
        }
    }
    CHECK(a.cost == doctest::Approx(want));
    auto shifted = theta;
    shifted[N + 2] += 2 * std::numbers::pi;
    const auto b = alignment_loss_and_grad_radial(shifted, N, rng);
    CHECK(b.cost == doctest::Approx(a.cost));
    for (std::size_t e = 0; e < theta.size(); ++e) {
        CHECK(b.gradient[e] == doctest::Approx(a.gradient[e]));
    }
}

TEST_CASE("radial alignment at the unstable equilibrium picks a seeded branch") {
    const std::vector<double> theta = {0.0, std::numbers::pi};
    std::mt19937_64 r1(77);
    std::mt19937_64 r2(77);
    const auto a = alignment_loss_and_grad_radial(theta, 1, r1);
    const auto b = alignment_loss_and_grad_radial(theta, 1, r2);
    CHECK(a.cost == doctest::Approx(1.0));
    CHECK(std::abs(a.gradient[1]) == doctest::Approx(0.5));
    CHECK(a.gradient[0] == -a.gradient[1]);
    CHECK(a.gradient == b.gradient);
}

TEST_CASE("total-variation prox satisfies its optimality conditions") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 9);
        std::vector<double> x(n);
        for (auto& v : x) {
            v = g(rng);
        }
        const double lambda = 0.01 * static_cast<double>(1 + trial % 50);
        auto z = x;
        total_variation_prox(z, lambda);
        if (n > 1) {
            check_tv_kkt(x, z, lambda);
        } else {
            CHECK(z == x);
        }
    }
}

TEST_CASE("total-variation prox edge cases") {
    std::vector<double> flat = {2, 2, 2};
    total_variation_prox(flat, 5);
    CHECK(flat == std::vector<double>{2, 2, 2});
    // A large lambda fuses everything to the mean.
    std::vector<double> x = {1, 5, -3, 9};
    total_variation_prox(x, 1e6);
    for (double v : x) {
        CHECK(v == doctest::Approx(3.0));
    }
    // Two points: each moves lambda toward the other until they meet.
    std::vector<double> two = {0, 10};
    total_variation_prox(two, 2);
    CHECK(two[0] == doctest::Approx(2.0));
    CHECK(two[1] == doctest::Approx(8.0));
    std::vector<double> y = {4, -1, 7};
    total_variation_prox(y, 0);
    CHECK(y == std::vector<double>{4, -1, 7});
}

TEST_CASE("polar chain rule agrees with the Cartesian gradient") {
    const Polar p{3.0, 0.7};
    const Vec2 g{0.4, -1.1};
    const Vec2 pg = cartesian_to_polar_gradient(g, p);
    const Vec2 c = to_cartesian(p);
    CHECK(pg.x == doctest::Approx((g.x * c.x + g.y * c.y) / p.r));
    CHECK(pg.y == doctest::Approx(-g.x * c.y + g.y * c.x));
}
