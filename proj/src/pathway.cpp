#include "evoembed/pathway.hpp"

#include "evoembed/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numbers>

namespace evoembed {

double polyline_length(std::span<const Vec2> points) {
    double total = 0;
    for (std::size_t k = 1; k < points.size(); ++k) {
        total += std::hypot(points[k].x - points[k - 1].x, points[k].y - points[k - 1].y);
    }
    return total;
}

double wrapped_angle(double delta) {
    const double two_pi = 2 * std::numbers::pi;
    double a = std::fmod(std::abs(delta), two_pi);
    return a > std::numbers::pi ? two_pi - a : a;
}

std::vector<Pathway> extract_pathways(const EmbeddingState& state, const EvolutionDataset& dataset) {
    const std::size_t N = state.num_instances;
    const std::size_t T = state.num_iterations;
    if (dataset.num_instances != N || dataset.num_iterations() != T) {
        throw FormatError("extract_pathways: state and dataset shapes differ");
    }
    std::vector<Pathway> out(N);
    for (std::size_t i = 0; i < N; ++i) {
        auto& path = out[i];
        path.instance = i;
        path.instance_id = dataset.instances[i].instance_id;
        path.keywords = dataset.instances[i].keywords;
        path.points.resize(T);
        for (std::size_t k = 0; k < T; ++k) {
            path.points[k] = state.cartesian(state.index(k, i));
        }
        path.path_length = polyline_length(path.points);
        if (state.layout == Layout::radial) {
            double angular = 0;
            for (std::size_t k = 1; k < T; ++k) {
                angular += wrapped_angle(state.params[state.index(k, i)].y - state.params[state.index(k - 1, i)].y);
            }
            path.angular_length = angular;
        }
    }
    return out;
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
    if (values.empty()) {
        throw ConfigError("nearest_rank_percentile: no values");
    }
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

std::vector<Pathway> filter_by_length_percentile(const std::vector<Pathway>& pathways, double lo_pct,
                                                 double hi_pct) {
    if (!(lo_pct >= 0 && lo_pct <= hi_pct && hi_pct <= 100)) {
        throw ConfigError("filter_by_length_percentile: need 0 <= lo <= hi <= 100");
    }
    if (pathways.empty()) {
        return {};
    }
    std::vector<double> lengths;
    lengths.reserve(pathways.size());
    for (const auto& p : pathways) {
        lengths.push_back(p.path_length);
    }
    const double lo = nearest_rank_percentile(lengths, lo_pct);
    const double hi = nearest_rank_percentile(lengths, hi_pct);
    std::vector<Pathway> kept;
    for (const auto& p : pathways) {
        if (p.path_length >= lo && p.path_length <= hi) {
            kept.push_back(p);
        }
    }
    return kept;
}

std::vector<int> dbscan(std::span<const Vec2> points, double eps, std::size_t min_pts) {
    if (!(eps > 0) || min_pts < 1) {
        throw ConfigError("dbscan: need eps > 0 and min_pts >= 1");
    }
    constexpr int unvisited = -2;
    const std::size_t n = points.size();
    const double eps2 = eps * eps;
    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = points[i].x - points[j].x;
            const double dy = points[i].y - points[j].y;
            if (dx * dx + dy * dy <= eps2) {
                out.push_back(j);
            }
        }
        return out;
    };

    std::vector<int> labels(n, unvisited);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != unvisited) {
            continue;
        }
        auto seeds = neighbors(i);
        if (seeds.size() < min_pts) {
            labels[i] = dbscan_noise;
            continue;
        }
        labels[i] = cluster;
        std::deque<std::size_t> queue(seeds.begin(), seeds.end());
        while (!queue.empty()) {
            const std::size_t j = queue.front();
            queue.pop_front();
            if (labels[j] == dbscan_noise) {
                labels[j] = cluster;
            }
            if (labels[j] != unvisited) {
                continue;
            }
            labels[j] = cluster;
            auto more = neighbors(j);
            if (more.size() >= min_pts) {
                queue.insert(queue.end(), more.begin(), more.end());
            }
        }
        ++cluster;
    }
    return labels;
}

ClusterTable cluster_by_iteration_keyword(const EmbeddingState& state, const EvolutionDataset& dataset, double eps,
                                          std::size_t min_pts) {
    ClusterTable table;
    table.eps = eps;
    table.min_pts = min_pts;
    const std::size_t N = state.num_instances;

    std::map<std::string, std::vector<std::size_t>> by_keyword;
    for (std::size_t i = 0; i < N; ++i) {
        for (const auto& kw : dataset.instances[i].keywords) {
            by_keyword[kw].push_back(i);
        }
    }

    for (std::size_t k = 0; k < state.num_iterations; ++k) {
        for (const auto& [keyword, members] : by_keyword) {
            ClusterGroup group;
            group.rank = k;
            group.keyword = keyword;
            group.instances = members;
            std::vector<Vec2> pts;
            pts.reserve(members.size());
            for (std::size_t i : members) {
                pts.push_back(state.cartesian(state.index(k, i)));
            }
            group.labels = dbscan(pts, eps, min_pts);
            const int clusters = group.labels.empty() ? 0 : *std::max_element(group.labels.begin(), group.labels.end()) + 1;
            group.centroids.assign(static_cast<std::size_t>(std::max(clusters, 0)), Vec2{});
            std::vector<std::size_t> counts(group.centroids.size(), 0);
            for (std::size_t m = 0; m < pts.size(); ++m) {
                if (group.labels[m] >= 0) {
                    auto c = static_cast<std::size_t>(group.labels[m]);
                    group.centroids[c].x += pts[m].x;
                    group.centroids[c].y += pts[m].y;
                    ++counts[c];
                }
            }
            for (std::size_t c = 0; c < counts.size(); ++c) {
                group.centroids[c].x /= static_cast<double>(counts[c]);
                group.centroids[c].y /= static_cast<double>(counts[c]);
            }
            table.groups.push_back(std::move(group));
        }
    }
    return table;
}

std::vector<Vec2> interpolate_to_centroids(const EmbeddingState& state, const EvolutionDataset& dataset,
                                           const ClusterTable& clusters, double lambda) {
    if (!(lambda >= 0 && lambda <= 1)) {
        throw ConfigError("interpolate_to_centroids: lambda must lie in [0, 1]");
    }
    auto coords = state.cartesian_coords();
    for (const auto& group : clusters.groups) {
        for (std::size_t m = 0; m < group.instances.size(); ++m) {
            const std::size_t i = group.instances[m];
            const auto& keywords = dataset.instances[i].keywords;
            if (keywords.empty() || keywords.front() != group.keyword || group.labels[m] < 0) {
                continue;
            }
            const auto& c = group.centroids[static_cast<std::size_t>(group.labels[m])];
            auto& p = coords[state.index(group.rank, i)];
            if (lambda == 1) {
                p = c;
            } else {
                p = {(1 - lambda) * p.x + lambda * c.x, (1 - lambda) * p.y + lambda * c.y};
            }
        }
    }
    return coords;
}

SplineControl spline_control(std::span<const Vec2> coords, const EvolutionDataset& dataset, std::size_t instance,
                             double tension) {
    const std::size_t N = dataset.num_instances;
    const std::size_t T = dataset.num_iterations();
    if (instance >= N || coords.size() != N * T) {
        throw ConfigError("spline_control: instance or coordinate count out of range");
    }
    SplineControl out;
    out.instance_id = dataset.instances[instance].instance_id;
    out.tension = tension;
    out.control_points.reserve(T);
    for (std::size_t k = 0; k < T; ++k) {
        out.control_points.push_back(coords[k * N + instance]);
    }
    return out;
}

} // namespace evoembed
