#include "evoembed/optimizer.hpp"

#include "evoembed/error.hpp"
#include "evoembed/losses.hpp"
#include "evoembed/parallel.hpp"
#include "evoembed/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace evoembed {

namespace {

double sign_of(double v) { return v == 0 ? 0.0 : (v < 0 ? -1.0 : 1.0); }

void require_finite(double value, std::size_t element, const EmbeddingState& state, const char* term) {
    if (std::isfinite(value)) {
        return;
    }
    std::ostringstream msg;
    msg << "non-finite " << term << " gradient at element " << element << " (rank " << element / state.num_instances
        << ", instance " << element % state.num_instances << ")";
    throw NumericError(msg.str());
}

void separate_coincident(EmbeddingState& state, double nudge) {
    const std::size_t N = state.num_instances;
    std::vector<std::size_t> order(N);
    for (std::size_t k = 0; k < state.num_iterations; ++k) {
        std::iota(order.begin(), order.end(), k * N);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto& pa = state.params[a];
            const auto& pb = state.params[b];
            return pa.x != pb.x ? pa.x < pb.x : (pa.y != pb.y ? pa.y < pb.y : a < b);
        });
        for (std::size_t n = 1; n < N; ++n) {
            auto& prev = state.params[order[n - 1]];
            auto& cur = state.params[order[n]];
            if (cur == prev) {
                cur.x += nudge;
            }
        }
    }
}

} // namespace

TermWeights effective_weights(const EmbedConfig& config, std::size_t num_instances) {
    TermWeights w;
    w.semantic = config.alpha;
    w.displacement = config.penalty_scale * config.beta;
    w.alignment = config.penalty_scale * config.gamma;
    if (config.layout == Layout::rectilinear && num_instances > 0) {
        w.alignment /= static_cast<double>(num_instances);
    }
    return w;
}

double AnnealSchedule::sigma_at(int opt_iter) const {
    if (iters_ <= 1 || opt_iter <= 0) {
        return start_;
    }
    if (opt_iter >= iters_ - 1) {
        return end_;
    }
    const double t = static_cast<double>(opt_iter) / static_cast<double>(iters_ - 1);
    return start_ + (end_ - start_) * t;
}

EmbeddingState initialize(const EvolutionDataset& dataset, const EmbedConfig& config,
                          std::span<const double> offsets) {
    const std::size_t N = dataset.num_instances;
    const std::size_t T = dataset.num_iterations();
    if (offsets.size() != T) {
        throw ConfigError("initialize: expected " + std::to_string(T) + " offsets, got " +
                          std::to_string(offsets.size()));
    }
    EmbeddingState state;
    state.layout = config.layout;
    state.num_instances = N;
    state.num_iterations = T;
    state.offsets.assign(offsets.begin(), offsets.end());
    state.params.resize(N * T);
    state.velocity.assign(N * T, Vec2{});
    state.gains.assign(N * T, Vec2{1.0, 1.0});
    state.rng.seed(config.seed);

    const double half_band = config.spacing / 4;
    for (std::size_t k = 0; k < T; ++k) {
        for (std::size_t i = 0; i < N; ++i) {
            auto& p = state.params[k * N + i];
            if (config.layout == Layout::rectilinear) {
                std::uniform_real_distribution<double> band(offsets[k] - half_band, offsets[k] + half_band);
                std::normal_distribution<double> vertical(0.0, 1e-2 * config.spacing);
                p.x = band(state.rng);
                p.y = vertical(state.rng);
            } else {
                std::uniform_real_distribution<double> ring(std::max(0.0, offsets[k] - half_band),
                                                            offsets[k] + half_band);
                std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
                p.x = ring(state.rng);
                p.y = angle(state.rng);
            }
        }
    }
    separate_coincident(state, 1e-8 * config.spacing);
    return state;
}

StepGradient evaluate_gradient(const AffinitySet& affinities, EmbeddingState& state, const EmbedConfig& config,
                               int opt_iter, bool with_loss, int threads) {
    const std::size_t E = state.size();
    const std::size_t N = state.num_instances;
    const bool radial = state.layout == Layout::radial;
    const double sigma = AnnealSchedule(config).sigma_at(opt_iter);
    const double exaggeration = opt_iter < config.exaggeration_iters ? config.exaggeration_factor : 1.0;
    const TermWeights w = effective_weights(config, N);

    StepGradient out;
    out.native.assign(E, Vec2{});
    auto& losses = out.losses;
    losses.opt_iter = opt_iter;
    losses.sigma = sigma;

    std::vector<double> radial_axis(E);
    std::vector<double> angular_axis(E);
    for (std::size_t e = 0; e < E; ++e) {
        radial_axis[e] = state.params[e].x;
        angular_axis[e] = state.params[e].y;
    }

    if (config.alpha > 0 || with_loss) {
        const auto coords = state.cartesian_coords();
        auto semantic = semantic_loss_and_grad(affinities, coords, exaggeration, with_loss, threads);
        if (config.alpha > 0) {
            for (std::size_t e = 0; e < E; ++e) {
                Vec2 g = semantic.gradient[e];
                if (radial) {
                    g = cartesian_to_polar_gradient(g, state.polar(e));
                }
                require_finite(g.x, e, state, "semantic");
                require_finite(g.y, e, state, "semantic");
                out.native[e].x += w.semantic * g.x;
                out.native[e].y += w.semantic * g.y;
            }
        }
        losses.semantic = semantic.total;
        losses.semantic_per_iteration = std::move(semantic.kl_per_iteration);
    }

    if (config.beta > 0 || with_loss) {
        auto displacement = displacement_loss_and_grad(radial_axis, state.offsets, N, sigma);
        if (config.beta > 0) {
            for (std::size_t e = 0; e < E; ++e) {
                require_finite(displacement.gradient[e], e, state, "displacement");
                out.native[e].x += w.displacement * displacement.gradient[e];
            }
        }
        losses.displacement = displacement.cost;
    }

    if (config.gamma > 0 || with_loss) {
        // The radial branch draws from the state's generator only at the unstable equilibrium.
        auto alignment = radial ? alignment_loss_and_grad_radial(angular_axis, N, state.rng)
                                : alignment_loss_and_grad_rect(angular_axis, N);
        if (config.gamma > 0 && (radial || !config.alignment_prox)) {
            for (std::size_t e = 0; e < E; ++e) {
                require_finite(alignment.gradient[e], e, state, "alignment");
                out.native[e].y += w.alignment * alignment.gradient[e];
            }
        }
        losses.alignment = alignment.cost;
    }

    losses.total = w.semantic * losses.semantic + w.displacement * losses.displacement + w.alignment * losses.alignment;
    return out;
}

void step(EmbeddingState& state, const StepGradient& gradient, const EmbedConfig& config, int opt_iter) {
    const double momentum = opt_iter < config.momentum_switch_iter ? config.momentum_initial : config.momentum_final;
    const bool radial = state.layout == Layout::radial;
    const double radius_floor = config.spacing / 4;

    auto update = [&](double& param, double& velocity, double& gain, double grad) {
        if (config.use_gains) {
            gain = sign_of(grad) != sign_of(velocity) ? gain + 0.2 : gain * 0.8;
            gain = std::max(gain, config.min_gain);
        }
        velocity = momentum * velocity - config.learning_rate * gain * grad;
        param += velocity;
    };

    for (std::size_t e = 0; e < state.size(); ++e) {
        auto& p = state.params[e];
        auto& v = state.velocity[e];
        auto& g = state.gains[e];
        Vec2 grad = gradient.native[e];
        if (radial) {
            const double r = std::max(p.x, radius_floor);
            grad.y /= r * r;
        }
        update(p.x, v.x, g.x, grad.x);
        update(p.y, v.y, g.y, grad.y);
        if (radial && p.x < 0) {
            p.x = 0;
            v.x = 0;
        }
    }

    if (!radial && config.alignment_prox && config.gamma > 0) {
        // Inertial proximal step: the velocity absorbs the prox correction.
        const std::size_t N = state.num_instances;
        const std::size_t T = state.num_iterations;
        const double weight = effective_weights(config, N).alignment;
        std::vector<double> chain(T);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t k = 0; k < T; ++k) {
                chain[k] = state.params[k * N + i].y;
            }
            total_variation_prox(chain, config.learning_rate * weight);
            for (std::size_t k = 0; k < T; ++k) {
                auto& p = state.params[k * N + i];
                state.velocity[k * N + i].y += chain[k] - p.y;
                p.y = chain[k];
            }
        }
    }
}

EvolutionDataset prepare_features(const EvolutionDataset& dataset, const EmbedConfig& config) {
    if (config.pca_dims && *config.pca_dims < dataset.feature_dim) {
        return pca_reduce(dataset, *config.pca_dims);
    }
    return dataset;
}

EmbedResult embed(const EvolutionDataset& dataset, const EmbedConfig& config, const EmbedOptions& options) {
    require_valid(dataset);
    validate_config(config, dataset.num_instances);
    const int threads = resolve_threads(options.threads);

    EmbedResult result;
    result.features = prepare_features(dataset, config);
    const auto offsets = iteration_offsets(config, dataset.num_iterations());
    const auto affinities = compute_affinities(result.features, config.perplexity, threads);
    result.state = initialize(result.features, config, offsets);

    for (int it = 0; it < config.opt_iters; ++it) {
        if (options.stop.stop_requested()) {
            result.cancelled = true;
            return result;
        }
        const bool report = options.progress && options.progress_every > 0 && it % options.progress_every == 0;
        const bool record = it % config.loss_interval == 0 || report;
        auto gradient = evaluate_gradient(affinities, result.state, config, it, record, threads);
        if (record) {
            result.history.push_back(gradient.losses);
            if (report) {
                options.progress({it, &result.history.back(), gradient.losses.sigma});
            }
        }
        step(result.state, gradient, config, it);
    }

    // Loss of the final configuration, evaluated at the last annealing sigma without exaggeration.
    EmbedConfig final_config = config;
    final_config.exaggeration_iters = 0;
    auto probe = result.state.rng;
    auto final_gradient = evaluate_gradient(affinities, result.state, final_config, config.opt_iters - 1, true, threads);
    result.state.rng = probe;
    final_gradient.losses.opt_iter = config.opt_iters;
    result.history.push_back(final_gradient.losses);
    if (options.progress) {
        options.progress({config.opt_iters, &result.history.back(), final_gradient.losses.sigma});
    }
    return result;
}

} // namespace evoembed
