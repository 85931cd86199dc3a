#ifndef EVOEMBED_AFFINITY_HPP
#define EVOEMBED_AFFINITY_HPP

#include "evoembed/model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace evoembed {

/**
 * Conditional neighbor probabilities for one point:
 * `p_j ∝ exp(-d_j / (2 sigma^2))` over the given squared distances (self excluded by the caller).
 * The smallest distance is subtracted before exponentiation.
 * Throws DegenerateRowError if no distance is finite; throws ConfigError if sigma <= 0.
 */
std::vector<double> conditional_row(std::span<const double> sq_distances, double sigma);

/// Shannon entropy (bits) of `conditional_row(sq_distances, sigma)`.
double row_entropy_bits(std::span<const double> sq_distances, double sigma);

struct SigmaCalibration {
    double sigma = 1;
    double entropy_bits = 0;
    /// Set when the target entropy could not be reached within tolerance.
    bool flagged = false;
};

/**
 * Bisection on sigma (with bracket doubling) until the row entropy is within `tol` bits of
 * `log2(perplexity)`. Rows whose target is unreachable (e.g. ties) are flagged and keep the best bracket.
 * Requires `1 < perplexity < sq_distances.size() + 1`.
 */
SigmaCalibration calibrate_sigma(std::span<const double> sq_distances, double perplexity, double tol = 1e-5,
                                 int max_iter = 64);

/// Smallest value stored in a joint probability matrix.
inline constexpr double min_joint_probability = 1e-12;

/**
 * @brief Per-iteration joint probabilities.
 *
 * `joint[k]` is the row-major N x N matrix P_k for iteration rank k: symmetric, zero diagonal,
 * summing to 1 over all off-diagonal entries.
 */
struct AffinitySet {
    std::size_t num_instances = 0;
    double perplexity = 30;
    std::vector<std::vector<double>> joint;
    std::vector<double> sigmas;   ///< Per element (rank * N + instance).
    std::vector<bool> flagged;    ///< Per element; calibration did not converge.

    std::size_t num_iterations() const { return joint.size(); }
    double at(std::size_t rank, std::size_t i, std::size_t j) const { return joint[rank][i * num_instances + j]; }
};

struct IterationAffinity {
    std::vector<double> joint;
    std::vector<double> sigmas;
    std::vector<bool> flagged;
};

/**
 * Joint affinities for one iteration rank from that rank's rows only:
 * `p_ij = (p_{i|j} + p_{j|i}) / (2N)`, clamped below at 1e-12 and renormalized.
 */
IterationAffinity joint_affinities(const EvolutionDataset& dataset, std::size_t rank, double perplexity,
                                   int threads = 1);

/// `joint_affinities` for every rank.
AffinitySet compute_affinities(const EvolutionDataset& dataset, double perplexity, int threads = 1);

} // namespace evoembed

#endif
