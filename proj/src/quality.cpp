#include "evoembed/quality.hpp"

#include "evoembed/error.hpp"
#include "evoembed/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace evoembed {

namespace {

struct DistanceTable {
    std::size_t n = 0;
    std::vector<double> high;
    std::vector<double> low;
};

DistanceTable squared_distances(std::span<const double> high, std::size_t dim, std::span<const Vec2> low) {
    const std::size_t n = low.size();
    if (dim == 0 || high.size() != n * dim) {
        throw ConfigError("quality: high-dimensional rows do not match the embedding");
    }
    DistanceTable t{n, std::vector<double>(n * n, 0.0), std::vector<double>(n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = high[i * dim + d] - high[j * dim + d];
                acc += diff * diff;
            }
            t.high[i * n + j] = t.high[j * n + i] = acc;
            const double dx = low[i].x - low[j].x;
            const double dy = low[i].y - low[j].y;
            t.low[i * n + j] = t.low[j * n + i] = dx * dx + dy * dy;
        }
    }
    return t;
}

// Neighbors of each point in `source` that are missing from its k-neighborhood in `target`,
// penalized by their rank in `target`.
std::int64_t rank_excess(const std::vector<double>& source, const std::vector<double>& target, std::size_t n,
                         std::size_t k) {
    std::vector<std::int64_t> per_point(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ds = source.data() + i * n;
        const double* dt = target.data() + i * n;
        auto closer = [](const double* d) {
            return [d](std::size_t a, std::size_t b) { return d[a] != d[b] ? d[a] < d[b] : a < b; };
        };

        std::vector<std::size_t> others;
        others.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                others.push_back(j);
            }
        }
        std::vector<std::size_t> source_nn = others;
        std::partial_sort(source_nn.begin(), source_nn.begin() + static_cast<std::ptrdiff_t>(k), source_nn.end(),
                          closer(ds));
        std::vector<std::size_t> target_nn = others;
        std::partial_sort(target_nn.begin(), target_nn.begin() + static_cast<std::ptrdiff_t>(k), target_nn.end(),
                          closer(dt));
        std::vector<char> in_target(n, 0);
        for (std::size_t m = 0; m < k; ++m) {
            in_target[target_nn[m]] = 1;
        }

        const auto before = closer(dt);
        std::int64_t excess = 0;
        for (std::size_t m = 0; m < k; ++m) {
            const std::size_t j = source_nn[m];
            if (in_target[j]) {
                continue;
            }
            std::int64_t rank = 1;
            for (std::size_t other : others) {
                if (before(other, j)) {
                    ++rank;
                }
            }
            excess += rank - static_cast<std::int64_t>(k);
        }
        per_point[i] = excess;
    }
    return std::accumulate(per_point.begin(), per_point.end(), std::int64_t{0});
}

void check_k(std::size_t n, std::size_t k) { (void)rank_scaling_factor(n, k); }

} // namespace

double rank_scaling_factor(std::size_t num_points, std::size_t k) {
    const auto n = static_cast<double>(num_points);
    const auto kk = static_cast<double>(k);
    if (k < 1 || !(2 * n - 3 * kk - 1 > 0)) {
        throw ConfigError("quality: k = " + std::to_string(k) + " is too large for N = " + std::to_string(num_points) +
                          " (need 2N - 3k - 1 > 0)");
    }
    return 2.0 / (n * kk * (2 * n - 3 * kk - 1));
}

std::int64_t trust_rank_excess(std::span<const double> high, std::size_t dim, std::span<const Vec2> low,
                               std::size_t k) {
    check_k(low.size(), k);
    const auto t = squared_distances(high, dim, low);
    return rank_excess(t.low, t.high, t.n, k);
}

std::int64_t continuity_rank_excess(std::span<const double> high, std::size_t dim, std::span<const Vec2> low,
                                    std::size_t k) {
    check_k(low.size(), k);
    const auto t = squared_distances(high, dim, low);
    return rank_excess(t.high, t.low, t.n, k);
}

double trustworthiness(std::span<const double> high, std::size_t dim, std::span<const Vec2> low, std::size_t k) {
    const double scale = rank_scaling_factor(low.size(), k);
    return 1.0 - scale * static_cast<double>(trust_rank_excess(high, dim, low, k));
}

double continuity(std::span<const double> high, std::size_t dim, std::span<const Vec2> low, std::size_t k) {
    const double scale = rank_scaling_factor(low.size(), k);
    return 1.0 - scale * static_cast<double>(continuity_rank_excess(high, dim, low, k));
}

QualityReport quality_report(const EvolutionDataset& features, std::span<const Vec2> coords, std::string label,
                             std::size_t k, int threads) {
    const std::size_t N = features.num_instances;
    const std::size_t T = features.num_iterations();
    if (coords.size() != N * T) {
        throw FormatError("quality: embedding has " + std::to_string(coords.size()) + " elements, dataset has " +
                          std::to_string(N * T));
    }
    check_k(N, k);
    QualityReport report;
    report.baseline_label = std::move(label);
    report.k = k;
    report.iterations.resize(T);
    parallel_for(T, resolve_threads(threads), [&](std::size_t rank) {
        const auto high = features.iteration_block(rank);
        const auto low = coords.subspan(rank * N, N);
        const auto table = squared_distances(high, features.feature_dim, low);
        const double scale = rank_scaling_factor(N, k);
        auto& row = report.iterations[rank];
        row.rank = rank;
        row.iteration_label = features.iteration_labels[rank];
        row.trust = 1.0 - scale * static_cast<double>(rank_excess(table.low, table.high, N, k));
        row.cont = 1.0 - scale * static_cast<double>(rank_excess(table.high, table.low, N, k));
    });
    return report;
}

EmbedConfig vanilla_config(const EmbedConfig& base) {
    EmbedConfig config = base;
    config.layout = Layout::rectilinear;
    config.beta = 0;
    config.gamma = 0;
    return config;
}

std::vector<QualityReport> ablation_report(const EvolutionDataset& dataset, const std::vector<AblationEntry>& entries,
                                           std::size_t k, const EmbedOptions& options) {
    if (entries.empty()) {
        throw ConfigError("ablation_report: need at least one configuration");
    }
    for (const auto& entry : entries) {
        if (entry.config.seed != entries.front().config.seed ||
            entry.config.perplexity != entries.front().config.perplexity) {
            throw ConfigError("ablation_report: configurations must share seed and perplexity");
        }
    }
    std::vector<QualityReport> reports;
    auto run = [&](const std::string& label, const EmbedConfig& config) {
        auto result = embed(dataset, config, options);
        reports.push_back(quality_report(result.features, result.state.cartesian_coords(), label, k, options.threads));
    };
    for (const auto& entry : entries) {
        run(entry.label, entry.config);
    }
    run("vanilla", vanilla_config(entries.front().config));
    return reports;
}

std::string quality_csv(const std::vector<QualityReport>& reports) {
    std::ostringstream out;
    out.precision(17);
    out << "iteration_label,trust,cont,baseline_label\n";
    for (const auto& report : reports) {
        for (const auto& row : report.iterations) {
            out << row.iteration_label << ',' << row.trust << ',' << row.cont << ',' << report.baseline_label << '\n';
        }
    }
    return out.str();
}

} // namespace evoembed
