#ifndef EVOEMBED_QUALITY_HPP
#define EVOEMBED_QUALITY_HPP

#include "evoembed/model.hpp"
#include "evoembed/optimizer.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace evoembed {

inline constexpr std::size_t default_quality_k = 7;

/// `2 / (N k (2N - 3k - 1))`. Throws ConfigError unless `1 <= k` and `2N - 3k - 1 > 0`.
double rank_scaling_factor(std::size_t num_points, std::size_t k);

/**
 * Sum over points i of `rank_high(i, j) - k` for embedding neighbors j of i that are not among
 * its k nearest high-dimensional neighbors. Ranks start at 1 and ties are broken by ascending index.
 * `high` is row-major `N x dim`; `low` holds N points.
 */
std::int64_t trust_rank_excess(std::span<const double> high, std::size_t dim, std::span<const Vec2> low,
                               std::size_t k);

/// Mirror of `trust_rank_excess` with the roles of the two spaces swapped.
std::int64_t continuity_rank_excess(std::span<const double> high, std::size_t dim, std::span<const Vec2> low,
                                    std::size_t k);

double trustworthiness(std::span<const double> high, std::size_t dim, std::span<const Vec2> low,
                       std::size_t k = default_quality_k);

double continuity(std::span<const double> high, std::size_t dim, std::span<const Vec2> low,
                  std::size_t k = default_quality_k);

struct IterationQuality {
    std::size_t rank = 0;
    int iteration_label = 0;
    double trust = 0;
    double cont = 0;

    friend bool operator==(const IterationQuality&, const IterationQuality&) = default;
};

struct QualityReport {
    std::string baseline_label;
    std::size_t k = default_quality_k;
    std::vector<IterationQuality> iterations;

    friend bool operator==(const QualityReport&, const QualityReport&) = default;
};

/// Per-iteration trust and continuity of `coords` (Cartesian, `rank * N + instance`) against `features`.
QualityReport quality_report(const EvolutionDataset& features, std::span<const Vec2> coords, std::string label,
                             std::size_t k = default_quality_k, int threads = 1);

/// Independent per-iteration t-SNE: semantic loss only, rectilinear, same seed and optimizer settings.
EmbedConfig vanilla_config(const EmbedConfig& base);

struct AblationEntry {
    std::string label;
    EmbedConfig config;
};

/**
 * Embeds `dataset` once per entry plus once with `vanilla_config(entries.front().config)` (labelled
 * "vanilla") and reports per-iteration quality for each. All entries must share seed and perplexity.
 */
std::vector<QualityReport> ablation_report(const EvolutionDataset& dataset, const std::vector<AblationEntry>& entries,
                                           std::size_t k = default_quality_k, const EmbedOptions& options = {});

/// CSV with columns `iteration_label,trust,cont,baseline_label`.
std::string quality_csv(const std::vector<QualityReport>& reports);

} // namespace evoembed

#endif
