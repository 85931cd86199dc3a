#ifndef EVOEMBED_MODEL_HPP
#define EVOEMBED_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file model.hpp
 *
 * @brief Domain types shared by every stage of the pipeline.
 */

namespace evoembed {

/// Generic 2-vector used for Cartesian points and per-element gradients.
struct Vec2 {
    double x = 0;
    double y = 0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Polar {
    double r = 0;
    double theta = 0;
};

inline Vec2 to_cartesian(Polar p) { return {p.r * std::cos(p.theta), p.r * std::sin(p.theta)}; }
inline Polar to_polar(Vec2 c) { return {std::hypot(c.x, c.y), std::atan2(c.y, c.x)}; }

enum class Layout { rectilinear, radial };

std::string_view to_string(Layout layout);
Layout parse_layout(std::string_view text);

/// Whether feature rows hold the noisy iterate or the final-image estimate.
enum class Representation { noisy, smooth };

std::string_view to_string(Representation kind);
Representation parse_representation(std::string_view text);

struct InstanceMeta {
    std::string instance_id;
    std::string prompt;
    std::vector<std::string> keywords; ///< Sorted, unique.
    std::optional<std::string> thumbnail_dir;
};

/**
 * @brief Feature trajectories of N instances over T sampled iterations.
 *
 * Rows are grouped by iteration rank, then instance:
 * row `rank * num_instances + instance` holds `feature_dim` values.
 * Rank 0 is the noisiest sampled iteration.
 */
struct EvolutionDataset {
    std::size_t num_instances = 0;
    std::size_t feature_dim = 0;
    std::vector<int> iteration_labels;
    std::vector<double> features;
    std::vector<InstanceMeta> instances;
    Representation representation = Representation::noisy;

    std::size_t num_iterations() const { return iteration_labels.size(); }
    std::size_t num_rows() const { return num_iterations() * num_instances; }

    std::span<const double> row(std::size_t rank, std::size_t instance) const {
        return {features.data() + (rank * num_instances + instance) * feature_dim, feature_dim};
    }

    std::span<double> row(std::size_t rank, std::size_t instance) {
        return {features.data() + (rank * num_instances + instance) * feature_dim, feature_dim};
    }

    /// Contiguous block of the N rows belonging to one iteration rank.
    std::span<const double> iteration_block(std::size_t rank) const {
        return {features.data() + rank * num_instances * feature_dim, num_instances * feature_dim};
    }
};

/// Returns one message per violated dataset invariant; empty when the dataset is well-formed.
std::vector<std::string> validate_dataset(const EvolutionDataset& dataset);

/// Throws ValidationError listing every violation, if any.
void require_valid(const EvolutionDataset& dataset);

struct EmbedConfig {
    Layout layout = Layout::rectilinear;
    double alpha = 1;
    double beta = 5;
    double gamma = 0.2;
    double perplexity = 30;

    double sigma_start = 20;
    double sigma_end = 10;
    double spacing = 20;
    int opt_iters = 2000;
    std::optional<std::size_t> pca_dims = 50;
    std::uint64_t seed = 42;

    double learning_rate = 200;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    int momentum_switch_iter = 250;
    double exaggeration_factor = 12;
    int exaggeration_iters = 250;

    // Per-parameter adaptive gains of the reference t-SNE optimizer.
    bool use_gains = true;
    double min_gain = 0.01;

    /// Scale of the displacement and alignment terms relative to the semantic term.
    double penalty_scale = 0.0625;

    /// Rectilinear only: minimize the alignment term by an exact proximal step instead of its subgradient.
    bool alignment_prox = false;

    /// Loss breakdown is recorded every this many optimization iterations (plus the last one).
    int loss_interval = 10;

    /// Layout-specific weights: (1, 5, 0.2) rectilinear, (1, 5, 0.05) radial.
    static EmbedConfig defaults(Layout layout);

    friend bool operator==(const EmbedConfig&, const EmbedConfig&) = default;
};

/// Throws ConfigError if the configuration cannot be used for `num_instances` points per iteration.
void validate_config(const EmbedConfig& config, std::size_t num_instances);

/// Target offsets (x-bar or r-bar) for each iteration rank: `0, s, 2s, ...`.
std::vector<double> iteration_offsets(const EmbedConfig& config, std::size_t num_iterations);

/**
 * @brief Mutable optimizer state for one embedding.
 *
 * `params` holds the native coordinates of each element: (x, y) for the
 * rectilinear layout and (r, theta) for the radial one. Element (rank, instance)
 * lives at index `rank * num_instances + instance`.
 */
struct EmbeddingState {
    Layout layout = Layout::rectilinear;
    std::size_t num_instances = 0;
    std::size_t num_iterations = 0;
    std::vector<double> offsets;
    std::vector<Vec2> params;
    std::vector<Vec2> velocity;
    std::vector<Vec2> gains;
    std::mt19937_64 rng;

    std::size_t size() const { return params.size(); }
    std::size_t index(std::size_t rank, std::size_t instance) const { return rank * num_instances + instance; }

    Vec2 cartesian(std::size_t element) const {
        const auto& p = params[element];
        return layout == Layout::radial ? to_cartesian({p.x, p.y}) : p;
    }

    Polar polar(std::size_t element) const {
        const auto& p = params[element];
        return layout == Layout::radial ? Polar{p.x, p.y} : to_polar(p);
    }

    std::vector<Vec2> cartesian_coords() const;
};

} // namespace evoembed

#endif
