#include "evoembed/model.hpp"

#include "evoembed/error.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace evoembed {

std::string_view to_string(Layout layout) {
    return layout == Layout::radial ? "radial" : "rectilinear";
}

Layout parse_layout(std::string_view text) {
    if (text == "radial") {
        return Layout::radial;
    }
    if (text == "rectilinear") {
        return Layout::rectilinear;
    }
    throw ConfigError("unknown layout '" + std::string(text) + "' (expected radial or rectilinear)");
}

std::string_view to_string(Representation kind) {
    return kind == Representation::smooth ? "smooth" : "noisy";
}

Representation parse_representation(std::string_view text) {
    if (text == "noisy") {
        return Representation::noisy;
    }
    if (text == "smooth") {
        return Representation::smooth;
    }
    throw FormatError("unknown representation_kind '" + std::string(text) + "' (expected noisy or smooth)");
}

std::vector<std::string> validate_dataset(const EvolutionDataset& dataset) {
    std::vector<std::string> violations;
    const auto T = dataset.num_iterations();
    const auto N = dataset.num_instances;
    const auto D = dataset.feature_dim;

    if (T < 2) {
        violations.push_back("iteration_labels: need at least 2 iterations, got " + std::to_string(T));
    }
    for (std::size_t k = 1; k < T; ++k) {
        if (dataset.iteration_labels[k] >= dataset.iteration_labels[k - 1]) {
            std::ostringstream msg;
            msg << "iteration_labels: not strictly decreasing at rank " << k << " (" << dataset.iteration_labels[k - 1]
                << " then " << dataset.iteration_labels[k] << ")";
            violations.push_back(msg.str());
        }
    }
    if (N < 2) {
        violations.push_back("num_instances: need at least 2, got " + std::to_string(N));
    }
    if (D < 1) {
        violations.push_back("feature_dim: must be at least 1");
    }
    if (dataset.instances.size() != N) {
        violations.push_back("instances: expected " + std::to_string(N) + " records, got " +
                             std::to_string(dataset.instances.size()));
    }

    std::set<std::string> seen;
    for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
        if (!seen.insert(dataset.instances[i].instance_id).second) {
            violations.push_back("instances: duplicate instance_id '" + dataset.instances[i].instance_id + "' at index " +
                                 std::to_string(i));
        }
    }

    if (dataset.features.size() != T * N * D) {
        violations.push_back("features: expected " + std::to_string(T * N * D) + " values, got " +
                             std::to_string(dataset.features.size()));
        return violations;
    }

    for (std::size_t row = 0; row < T * N; ++row) {
        for (std::size_t d = 0; d < D; ++d) {
            if (!std::isfinite(dataset.features[row * D + d])) {
                std::ostringstream msg;
                msg << "features: non-finite value in row " << row << " (rank " << row / N << ", instance "
                    << row % N << ", column " << d << ")";
                violations.push_back(msg.str());
                break;
            }
        }
    }
    return violations;
}

void require_valid(const EvolutionDataset& dataset) {
    auto violations = validate_dataset(dataset);
    if (violations.empty()) {
        return;
    }
    std::string what = "invalid dataset:";
    for (const auto& v : violations) {
        what += "\n  " + v;
    }
    throw ValidationError(what, std::move(violations));
}

EmbedConfig EmbedConfig::defaults(Layout layout) {
    EmbedConfig config;
    config.layout = layout;
    config.gamma = layout == Layout::radial ? 0.05 : 0.2;
    return config;
}

void validate_config(const EmbedConfig& config, std::size_t num_instances) {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (!(config.alpha >= 0) || !(config.beta >= 0) || !(config.gamma >= 0)) {
        fail("alpha, beta and gamma must be non-negative");
    }
    if (!(config.penalty_scale > 0) || !std::isfinite(config.penalty_scale)) {
        fail("penalty_scale must be positive");
    }
    if (!(config.sigma_end > 0) || !(config.sigma_start >= config.sigma_end)) {
        fail("need sigma_start >= sigma_end > 0");
    }
    if (!(config.spacing > 0)) {
        fail("spacing must be positive");
    }
    if (!(config.perplexity > 1) || !(config.perplexity < static_cast<double>(num_instances))) {
        fail("perplexity must lie in (1, N) with N = " + std::to_string(num_instances));
    }
    if (config.opt_iters < 1) {
        fail("opt_iters must be at least 1");
    }
    if (!(config.learning_rate > 0)) {
        fail("learning_rate must be positive");
    }
    for (double m : {config.momentum_initial, config.momentum_final}) {
        if (!(m >= 0 && m < 1)) {
            fail("momentum must lie in [0, 1)");
        }
    }
    if (!(config.exaggeration_factor > 0) || config.exaggeration_iters < 0 || config.momentum_switch_iter < 0) {
        fail("exaggeration and momentum schedule must be non-negative");
    }
    if (config.pca_dims && *config.pca_dims == 0) {
        fail("pca_dims must be positive when set");
    }
    if (config.loss_interval < 1) {
        fail("loss_interval must be at least 1");
    }
    if (!(config.min_gain > 0)) {
        fail("min_gain must be positive");
    }
}

std::vector<double> iteration_offsets(const EmbedConfig& config, std::size_t num_iterations) {
    if (num_iterations < 2) {
        throw ConfigError("iteration_offsets: need at least 2 iterations, got " + std::to_string(num_iterations));
    }
    if (!(config.spacing > 0)) {
        throw ConfigError("iteration_offsets: spacing must be positive");
    }
    std::vector<double> offsets(num_iterations);
    for (std::size_t k = 0; k < num_iterations; ++k) {
        offsets[k] = config.spacing * static_cast<double>(k);
    }
    return offsets;
}

std::vector<Vec2> EmbeddingState::cartesian_coords() const {
    std::vector<Vec2> out(params.size());
    for (std::size_t e = 0; e < params.size(); ++e) {
        out[e] = cartesian(e);
    }
    return out;
}

} // namespace evoembed
