#ifndef EVOEMBED_LOSSES_HPP
#define EVOEMBED_LOSSES_HPP

#include "evoembed/affinity.hpp"
#include "evoembed/model.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <vector>

/**
 * @file losses.hpp
 *
 * @brief The three cost terms of the evolutionary embedding and their exact gradients.
 *
 * Elements are indexed `rank * N + instance` throughout.
 */

namespace evoembed {

struct SemanticTerms {
    std::vector<double> kl_per_iteration; ///< Empty when the loss was not requested.
    double total = 0;
    std::vector<Vec2> gradient;           ///< Cartesian gradient per element.
};

/**
 * Sum over iterations of KL(P_k || Q_k), where Q_k uses the Student-t kernel `(1 + |l_i - l_j|^2)^-1`
 * normalized within iteration k. Gradient: `4 sum_j (f p_ij - q_ij)(l_i - l_j)(1 + |l_i - l_j|^2)^-1`
 * with exaggeration factor f. The reported KL always uses the unexaggerated P and clamps q at 1e-12.
 */
SemanticTerms semantic_loss_and_grad(const AffinitySet& affinities, std::span<const Vec2> coords,
                                     double exaggeration = 1.0, bool with_loss = true, int threads = 1);

struct AxisTerms {
    double cost = 0;
    std::vector<double> gradient;
};

/// Height of the displacement well, `1 / (sigma sqrt(2 pi))`.
inline double gaussian_peak(double sigma) { return 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi)); }

/**
 * Negative Gaussian well per element around its rank's offset:
 * `C = -exp(-(c - c_k)^2 / (2 sigma^2)) / (sigma sqrt(2 pi))`, `dC/dc = -C (c - c_k) / sigma^2`.
 * `coord` is x (rectilinear) or r (radial) per element.
 */
AxisTerms displacement_loss_and_grad(std::span<const double> coord, std::span<const double> offsets,
                                     std::size_t num_instances, double sigma);

/// Segments with |dy| below this contribute no gradient.
inline constexpr double alignment_kink_width = 1e-9;

/// `sum_i sum_k |y_ik - y_i(k-1)|` with sign subgradients accumulated from both incident segments.
AxisTerms alignment_loss_and_grad_rect(std::span<const double> y, std::size_t num_instances);

/**
 * In-place proximal operator of `lambda * sum_k |x_k - x_(k-1)|`:
 * the minimizer of `0.5 |z - x|^2 + lambda TV(z)`, computed exactly by the taut-string method.
 */
void total_variation_prox(std::span<double> x, double lambda);

/// |sim| below this is treated as the unstable equilibrium and resolved by a random branch.
inline constexpr double alignment_equilibrium_width = 1e-12;

/**
 * `sum_i sum_k 1 - |cos((theta_ik - theta_i(k-1)) / 2)|`. The later endpoint of each segment receives
 * `+sin(d/2)/2` (sim > 0) or `-sin(d/2)/2` (sim < 0), the earlier one the negation; at the
 * equilibrium one branch is drawn from `rng`.
 */
AxisTerms alignment_loss_and_grad_radial(std::span<const double> theta, std::size_t num_instances,
                                         std::mt19937_64& rng);

/// Chain rule from a Cartesian gradient to (dC/dr, dC/dtheta) at polar point `p`.
inline Vec2 cartesian_to_polar_gradient(Vec2 g, Polar p) {
    const double c = std::cos(p.theta);
    const double s = std::sin(p.theta);
    return {c * g.x + s * g.y, p.r * (-s * g.x + c * g.y)};
}

} // namespace evoembed

#endif
