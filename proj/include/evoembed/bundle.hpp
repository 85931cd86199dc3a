#ifndef EVOEMBED_BUNDLE_HPP
#define EVOEMBED_BUNDLE_HPP

#include "evoembed/model.hpp"
#include "evoembed/pathway.hpp"
#include "evoembed/quality.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file bundle.hpp
 *
 * @brief The viewer-ready layout bundle and its versioned JSON encoding.
 *
 * See docs/bundle_schema.md for the field-by-field schema.
 */

namespace evoembed {

inline constexpr const char* bundle_format_version = "evoembed/1";

struct BundleElement {
    std::string instance_id;
    std::size_t rank = 0;
    int iteration_label = 0;
    double x = 0;
    double y = 0;
    double r = 0;
    double theta = 0;
    std::string prompt;
    std::vector<std::string> keywords;
    std::optional<std::string> thumbnail_dir; ///< Relative to the bundle directory.

    friend bool operator==(const BundleElement&, const BundleElement&) = default;
};

struct BundlePathway {
    std::string instance_id;
    std::vector<std::string> keywords;
    std::vector<Vec2> control_points;
    double path_length = 0;
    std::optional<double> angular_length;
    /// Whether the path length passes the bundle's percentile range.
    bool in_length_range = true;
    /// Control points after centroid interpolation; empty when the factor is 0.
    std::vector<Vec2> interpolated_points;

    friend bool operator==(const BundlePathway&, const BundlePathway&) = default;
};

struct BundleClusterMember {
    std::string instance_id;
    int cluster = dbscan_noise;

    friend bool operator==(const BundleClusterMember&, const BundleClusterMember&) = default;
};

struct BundleClusterGroup {
    std::size_t rank = 0;
    std::string keyword;
    std::vector<BundleClusterMember> members;
    std::vector<Vec2> centroids;

    friend bool operator==(const BundleClusterGroup&, const BundleClusterGroup&) = default;
};

struct BundleClusters {
    double eps = 5;
    std::size_t min_pts = 4;
    std::vector<BundleClusterGroup> groups;

    friend bool operator==(const BundleClusters&, const BundleClusters&) = default;
};

struct RenderSettings {
    double tension = default_spline_tension;
    double interpolation = 0;
    double length_pct_lo = 0;
    double length_pct_hi = 100;

    friend bool operator==(const RenderSettings&, const RenderSettings&) = default;
};

struct LayoutBundle {
    std::string format_version = bundle_format_version;
    EmbedConfig config;
    std::vector<int> iteration_labels;
    std::vector<double> offsets;
    std::vector<BundleElement> elements; ///< Sorted by (rank, instance_id).
    std::vector<BundlePathway> pathways; ///< Sorted by instance_id.
    std::optional<BundleClusters> clusters;
    RenderSettings render;
    std::vector<QualityReport> quality;

    friend bool operator==(const LayoutBundle&, const LayoutBundle&) = default;
};

/// Elements (both coordinate views), offsets and config echo of a finished embedding.
LayoutBundle make_bundle(const EvolutionDataset& dataset, const EmbedConfig& config, const EmbeddingState& state);

struct PathwayOptions {
    double eps = 5;
    std::size_t min_pts = 4;
    RenderSettings render;
};

/// Default DBSCAN radius for a band spacing: a quarter of the spacing.
inline double default_cluster_eps(double spacing) { return spacing / 4; }

/// Replaces pathways, clusters and render settings of `bundle` from `state`.
void attach_pathways(LayoutBundle& bundle, const EvolutionDataset& dataset, const EmbeddingState& state,
                     const PathwayOptions& options);

/// Rebuilds an embedding state (native coordinates, zero velocity) from a bundle and the dataset it was made from.
/// Throws FormatError if the bundle's elements do not match the dataset's instances and iterations.
EmbeddingState state_from_bundle(const LayoutBundle& bundle, const EvolutionDataset& dataset);

std::string serialize_bundle(const LayoutBundle& bundle);
LayoutBundle parse_bundle(std::string_view text);

void write_bundle(const LayoutBundle& bundle, const std::filesystem::path& path);
LayoutBundle read_bundle(const std::filesystem::path& path);

} // namespace evoembed

#endif
