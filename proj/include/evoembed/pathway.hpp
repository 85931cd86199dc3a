#ifndef EVOEMBED_PATHWAY_HPP
#define EVOEMBED_PATHWAY_HPP

#include "evoembed/model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evoembed {

/// Cartesian positions of one instance across iteration ranks, noisiest first.
struct Pathway {
    std::string instance_id;
    std::size_t instance = 0;
    std::vector<std::string> keywords;
    std::vector<Vec2> points;
    double path_length = 0;
    /// Sum of wrapped |dtheta| between consecutive ranks; radial layouts only.
    std::optional<double> angular_length;
};

double polyline_length(std::span<const Vec2> points);

/// Smallest absolute angle equivalent to `delta` modulo 2 pi, in [0, pi].
double wrapped_angle(double delta);

std::vector<Pathway> extract_pathways(const EmbeddingState& state, const EvolutionDataset& dataset);

/// Nearest-rank percentile (1-based rank `ceil(p / 100 * n)`, at least 1) of `values`.
double nearest_rank_percentile(std::vector<double> values, double percentile);

/// Pathways whose length lies in `[P_lo, P_hi]`, in input order. Throws ConfigError unless `0 <= lo <= hi <= 100`.
std::vector<Pathway> filter_by_length_percentile(const std::vector<Pathway>& pathways, double lo_pct, double hi_pct);

/// Label of points that belong to no cluster.
inline constexpr int dbscan_noise = -1;

/**
 * Density-based clustering. A point is core when at least `min_pts` points (itself included) lie within
 * `eps`. Clusters are numbered from 0 in order of their first core point by index; border points join the
 * first cluster that reaches them.
 */
std::vector<int> dbscan(std::span<const Vec2> points, double eps, std::size_t min_pts);

struct ClusterGroup {
    std::size_t rank = 0;
    std::string keyword;
    std::vector<std::size_t> instances; ///< Members of the group (instance indices).
    std::vector<int> labels;            ///< Parallel to `instances`.
    std::vector<Vec2> centroids;        ///< Indexed by cluster id.
};

struct ClusterTable {
    double eps = 5;
    std::size_t min_pts = 4;
    std::vector<ClusterGroup> groups;
};

/// DBSCAN per (iteration rank, keyword) on Cartesian coordinates.
ClusterTable cluster_by_iteration_keyword(const EmbeddingState& state, const EvolutionDataset& dataset, double eps,
                                          std::size_t min_pts);

/**
 * Rendering overlay: each clustered element moves to `(1 - lambda) p + lambda centroid`, using the cluster of
 * its instance's first keyword. Returns Cartesian coordinates per element; the state is not modified.
 */
std::vector<Vec2> interpolate_to_centroids(const EmbeddingState& state, const EvolutionDataset& dataset,
                                           const ClusterTable& clusters, double lambda);

inline constexpr double default_spline_tension = 0.5;

struct SplineControl {
    std::string instance_id;
    std::vector<Vec2> control_points;
    double tension = default_spline_tension;
};

/// Control points for one instance's cardinal spline, from `coords` (state or overlay, `rank * N + instance`).
SplineControl spline_control(std::span<const Vec2> coords, const EvolutionDataset& dataset, std::size_t instance,
                             double tension = default_spline_tension);

} // namespace evoembed

#endif
