#include "evoembed/affinity.hpp"

#include "evoembed/error.hpp"
#include "evoembed/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evoembed {

namespace {

constexpr int max_bracket_doublings = 128;

double min_finite(std::span<const double> values) {
    double best = std::numeric_limits<double>::infinity();
    for (double v : values) {
        if (std::isfinite(v) && v < best) {
            best = v;
        }
    }
    return best;
}

// Entropy in bits computed from the unnormalized, shifted weights.
double entropy_bits_impl(std::span<const double> sq_distances, double sigma, double shift) {
    const double beta = 1.0 / (2.0 * sigma * sigma);
    double total = 0;
    double weighted = 0;
    for (double d : sq_distances) {
        if (!std::isfinite(d)) {
            continue;
        }
        const double delta = d - shift;
        const double w = std::exp(-beta * delta);
        total += w;
        if (w > 0) {
            weighted += w * beta * delta;
        }
    }
    // H = log Z + beta * E[d - shift], in nats.
    return (std::log(total) + weighted / total) / std::log(2.0);
}

} // namespace

std::vector<double> conditional_row(std::span<const double> sq_distances, double sigma) {
    if (!(sigma > 0)) {
        throw ConfigError("conditional_row: sigma must be positive");
    }
    const double shift = min_finite(sq_distances);
    if (!std::isfinite(shift)) {
        throw DegenerateRowError("conditional_row: no finite distance in row");
    }
    const double beta = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> row(sq_distances.size(), 0.0);
    double total = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (std::isfinite(sq_distances[j])) {
            row[j] = std::exp(-beta * (sq_distances[j] - shift));
            total += row[j];
        }
    }
    for (auto& p : row) {
        p /= total;
    }
    return row;
}

double row_entropy_bits(std::span<const double> sq_distances, double sigma) {
    if (!(sigma > 0)) {
        throw ConfigError("row_entropy_bits: sigma must be positive");
    }
    const double shift = min_finite(sq_distances);
    if (!std::isfinite(shift)) {
        throw DegenerateRowError("row_entropy_bits: no finite distance in row");
    }
    return entropy_bits_impl(sq_distances, sigma, shift);
}

SigmaCalibration calibrate_sigma(std::span<const double> sq_distances, double perplexity, double tol, int max_iter) {
    const auto n_points = static_cast<double>(sq_distances.size() + 1);
    if (!(perplexity > 1) || !(perplexity < n_points)) {
        throw ConfigError("calibrate_sigma: perplexity must lie in (1, N), got " + std::to_string(perplexity) +
                          " with N = " + std::to_string(sq_distances.size() + 1));
    }
    const double shift = min_finite(sq_distances);
    if (!std::isfinite(shift)) {
        throw DegenerateRowError("calibrate_sigma: no finite distance in row");
    }
    const double target = std::log2(perplexity);
    auto entropy = [&](double sigma) { return entropy_bits_impl(sq_distances, sigma, shift); };

    // Scale-aware starting point: the root mean finite squared distance.
    double mean_sq = 0;
    std::size_t finite = 0;
    for (double d : sq_distances) {
        if (std::isfinite(d)) {
            mean_sq += d;
            ++finite;
        }
    }
    mean_sq /= static_cast<double>(finite);
    double hi = mean_sq > 0 ? std::sqrt(mean_sq) : 1.0;
    double lo = 0;

    double h_hi = entropy(hi);
    for (int doubling = 0; h_hi < target - tol; ++doubling) {
        if (doubling == max_bracket_doublings) {
            return {hi, h_hi, true};
        }
        lo = hi;
        hi *= 2;
        h_hi = entropy(hi);
    }
    if (std::abs(h_hi - target) <= tol) {
        return {hi, h_hi, false};
    }

    double mid = hi;
    double h_mid = h_hi;
    for (int it = 0; it < max_iter; ++it) {
        mid = 0.5 * (lo + hi);
        h_mid = entropy(mid);
        if (std::abs(h_mid - target) <= tol) {
            return {mid, h_mid, false};
        }
        if (h_mid < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid = lo > 0 ? 0.5 * (lo + hi) : hi;
    return {mid, entropy(mid), true};
}

IterationAffinity joint_affinities(const EvolutionDataset& dataset, std::size_t rank, double perplexity,
                                   int threads) {
    const std::size_t N = dataset.num_instances;
    const std::size_t D = dataset.feature_dim;
    if (N < 3) {
        throw ConfigError("joint_affinities: need at least 3 instances, got " + std::to_string(N));
    }
    if (rank >= dataset.num_iterations()) {
        throw ConfigError("joint_affinities: rank out of range");
    }

    IterationAffinity out;
    out.sigmas.assign(N, 0.0);
    out.flagged.assign(N, false);
    std::vector<double> conditional(N * N, 0.0);
    std::vector<char> flagged(N, 0);

    parallel_for(N, resolve_threads(threads), [&](std::size_t i) {
        const auto xi = dataset.row(rank, i);
        std::vector<double> sq(N - 1);
        for (std::size_t j = 0, slot = 0; j < N; ++j) {
            if (j == i) {
                continue;
            }
            const auto xj = dataset.row(rank, j);
            double acc = 0;
            for (std::size_t d = 0; d < D; ++d) {
                const double diff = xi[d] - xj[d];
                acc += diff * diff;
            }
            sq[slot++] = acc;
        }
        SigmaCalibration cal;
        std::vector<double> row;
        try {
            cal = calibrate_sigma(sq, perplexity);
            row = conditional_row(sq, cal.sigma);
        } catch (const DegenerateRowError& e) {
            throw DegenerateRowError(std::string(e.what()) + " (instance '" + dataset.instances[i].instance_id +
                                     "', rank " + std::to_string(rank) + ")");
        }
        out.sigmas[i] = cal.sigma;
        flagged[i] = cal.flagged ? 1 : 0;
        for (std::size_t j = 0, slot = 0; j < N; ++j) {
            if (j != i) {
                conditional[i * N + j] = row[slot++];
            }
        }
    });
    for (std::size_t i = 0; i < N; ++i) {
        out.flagged[i] = flagged[i] != 0;
    }

    out.joint.assign(N * N, 0.0);
    const double denom = 2.0 * static_cast<double>(N);
    double total = 0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) {
                continue;
            }
            const double p = std::max((conditional[i * N + j] + conditional[j * N + i]) / denom, min_joint_probability);
            out.joint[i * N + j] = p;
            total += p;
        }
    }
    for (auto& p : out.joint) {
        p /= total;
    }
    return out;
}

AffinitySet compute_affinities(const EvolutionDataset& dataset, double perplexity, int threads) {
    AffinitySet set;
    set.num_instances = dataset.num_instances;
    set.perplexity = perplexity;
    const std::size_t T = dataset.num_iterations();
    set.joint.reserve(T);
    set.sigmas.reserve(T * dataset.num_instances);
    set.flagged.reserve(T * dataset.num_instances);
    for (std::size_t k = 0; k < T; ++k) {
        auto it = joint_affinities(dataset, k, perplexity, threads);
        set.joint.push_back(std::move(it.joint));
        set.sigmas.insert(set.sigmas.end(), it.sigmas.begin(), it.sigmas.end());
        set.flagged.insert(set.flagged.end(), it.flagged.begin(), it.flagged.end());
    }
    return set;
}

} // namespace evoembed
