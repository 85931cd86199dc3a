#ifndef EVOEMBED_OPTIMIZER_HPP
#define EVOEMBED_OPTIMIZER_HPP

#include "evoembed/affinity.hpp"
#include "evoembed/model.hpp"

#include <functional>
#include <span>
#include <stop_token>
#include <vector>

/**
 * @file optimizer.hpp
 *
 * @brief Gradient descent on the weighted sum of semantic, displacement and alignment costs for both layouts.
 */

namespace evoembed {

struct LossBreakdown {
    int opt_iter = 0;
    double sigma = 0;
    std::vector<double> semantic_per_iteration;
    double semantic = 0;
    double displacement = 0;
    double alignment = 0;
    double total = 0;
};

/// Weights actually applied to the three terms.
struct TermWeights {
    double semantic = 0;
    double displacement = 0;
    double alignment = 0;
};

/**
 * `alpha`, `penalty_scale * beta` and `penalty_scale * gamma`; the rectilinear alignment weight is further
 * divided by the number of instances, so that it acts on the mean per-instance path length.
 */
TermWeights effective_weights(const EmbedConfig& config, std::size_t num_instances);

/// Band standard deviation, linear from `start` at iteration 0 to `end` at iteration `iters - 1`.
class AnnealSchedule {
public:
    AnnealSchedule(double start, double end, int iters) : start_(start), end_(end), iters_(iters) {}
    explicit AnnealSchedule(const EmbedConfig& config)
        : AnnealSchedule(config.sigma_start, config.sigma_end, config.opt_iters) {}

    double sigma_at(int opt_iter) const;

private:
    double start_;
    double end_;
    int iters_;
};

/**
 * Random start inside each iteration's band.
 * Rectilinear: x ~ U(x_k - s/4, x_k + s/4), y ~ N(0, 0.01 s).
 * Radial: r ~ U(max(0, r_k - s/4), r_k + s/4), theta ~ U(0, 2 pi).
 * Coincident points within an iteration are separated by 1e-8 s.
 */
EmbeddingState initialize(const EvolutionDataset& dataset, const EmbedConfig& config, std::span<const double> offsets);

struct StepGradient {
    /// Gradient in the state's native coordinates: (x, y) or (r, theta).
    std::vector<Vec2> native;
    LossBreakdown losses; ///< Only populated when requested.
};

/**
 * Combined gradient at optimization iteration `opt_iter` (sets sigma and exaggeration).
 * Radial layouts convert the Cartesian semantic gradient to polar by the chain rule.
 * With `alignment_prox` the rectilinear alignment term is left to `step`.
 * Throws NumericError naming the element and loss term if anything is non-finite.
 */
StepGradient evaluate_gradient(const AffinitySet& affinities, EmbeddingState& state, const EmbedConfig& config,
                               int opt_iter, bool with_loss, int threads = 1);

/**
 * One momentum step with per-parameter gains. The theta component of radial layouts is
 * scaled by `1 / max(r, s/4)^2` so that a step moves a point by a comparable arc length at every ring.
 * Radii are clamped at 0. With `alignment_prox`, each instance's y chain then takes an exact
 * total-variation proximal step of size `learning_rate * weight`.
 */
void step(EmbeddingState& state, const StepGradient& gradient, const EmbedConfig& config, int opt_iter);

struct EmbedProgress {
    int opt_iter = 0;
    const LossBreakdown* losses = nullptr;
    double sigma = 0;
};

struct EmbedOptions {
    int threads = 0; ///< < 1: EVOEMBED_THREADS or hardware concurrency.
    std::function<void(const EmbedProgress&)> progress;
    int progress_every = 100;
    std::stop_token stop;
};

struct EmbedResult {
    EmbeddingState state;
    std::vector<LossBreakdown> history;
    /// Features the optimizer consumed (after PCA, when it ran).
    EvolutionDataset features;
    bool cancelled = false;
};

/// Features used for the embedding: PCA-reduced when `config.pca_dims < D`, else a copy.
EvolutionDataset prepare_features(const EvolutionDataset& dataset, const EmbedConfig& config);

/// Full pipeline: validation, optional PCA, affinities, initialization and `opt_iters` steps.
EmbedResult embed(const EvolutionDataset& dataset, const EmbedConfig& config, const EmbedOptions& options = {});

} // namespace evoembed

#endif
