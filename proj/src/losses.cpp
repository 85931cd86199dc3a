#include "evoembed/losses.hpp"

#include "evoembed/error.hpp"
#include "evoembed/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace evoembed {

SemanticTerms semantic_loss_and_grad(const AffinitySet& affinities, std::span<const Vec2> coords, double exaggeration,
                                     bool with_loss, int threads) {
    const std::size_t N = affinities.num_instances;
    const std::size_t T = affinities.num_iterations();
    if (coords.size() != N * T) {
        throw ConfigError("semantic_loss_and_grad: expected " + std::to_string(N * T) + " coordinates, got " +
                          std::to_string(coords.size()));
    }
    const int workers = resolve_threads(threads);

    SemanticTerms out;
    out.gradient.assign(N * T, Vec2{});
    if (with_loss) {
        out.kl_per_iteration.assign(T, 0.0);
    }

    std::vector<double> kernel(N * N);
    std::vector<double> row_sum(N);
    std::vector<double> row_kl(N);
    for (std::size_t k = 0; k < T; ++k) {
        const Vec2* l = coords.data() + k * N;
        const double* P = affinities.joint[k].data();

        parallel_for(N, workers, [&](std::size_t i) {
            double acc = 0;
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i) {
                    kernel[i * N + j] = 0;
                    continue;
                }
                const double dx = l[i].x - l[j].x;
                const double dy = l[i].y - l[j].y;
                const double w = 1.0 / (1.0 + dx * dx + dy * dy);
                kernel[i * N + j] = w;
                acc += w;
            }
            row_sum[i] = acc;
        });
        double Z = 0;
        for (double s : row_sum) {
            Z += s;
        }

        parallel_for(N, workers, [&](std::size_t i) {
            Vec2 g;
            double kl = 0;
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i) {
                    continue;
                }
                const double w = kernel[i * N + j];
                const double q = w / Z;
                const double p = P[i * N + j];
                const double force = (exaggeration * p - q) * w;
                g.x += force * (l[i].x - l[j].x);
                g.y += force * (l[i].y - l[j].y);
                if (with_loss && p > 0) {
                    kl += p * std::log(p / std::max(q, min_joint_probability));
                }
            }
            out.gradient[k * N + i] = {4.0 * g.x, 4.0 * g.y};
            row_kl[i] = kl;
        });
        if (with_loss) {
            double kl = 0;
            for (double v : row_kl) {
                kl += v;
            }
            out.kl_per_iteration[k] = kl;
            out.total += kl;
        }
    }
    return out;
}

AxisTerms displacement_loss_and_grad(std::span<const double> coord, std::span<const double> offsets,
                                     std::size_t num_instances, double sigma) {
    if (!(sigma > 0)) {
        throw ConfigError("displacement_loss_and_grad: sigma must be positive");
    }
    if (coord.size() != offsets.size() * num_instances) {
        throw ConfigError("displacement_loss_and_grad: coordinate count does not match offsets");
    }
    const double peak = gaussian_peak(sigma);
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    const double inv_var = 1.0 / (sigma * sigma);
    AxisTerms out;
    out.gradient.resize(coord.size());
    for (std::size_t e = 0; e < coord.size(); ++e) {
        const double u = coord[e] - offsets[e / num_instances];
        const double cost = -peak * std::exp(-u * u * inv_two_var);
        out.cost += cost;
        out.gradient[e] = -cost * u * inv_var;
    }
    return out;
}

AxisTerms alignment_loss_and_grad_rect(std::span<const double> y, std::size_t num_instances) {
    const std::size_t N = num_instances;
    if (N == 0 || y.size() % N != 0 || y.size() / N < 2) {
        throw ConfigError("alignment_loss_and_grad_rect: need at least 2 iterations");
    }
    const std::size_t T = y.size() / N;
    AxisTerms out;
    out.gradient.assign(y.size(), 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 1; k < T; ++k) {
            const double delta = y[k * N + i] - y[(k - 1) * N + i];
            out.cost += std::abs(delta);
            if (std::abs(delta) < alignment_kink_width) {
                continue;
            }
            const double s = delta > 0 ? 1.0 : -1.0;
            out.gradient[k * N + i] += s;
            out.gradient[(k - 1) * N + i] -= s;
        }
    }
    return out;
}

void total_variation_prox(std::span<double> x, double lambda) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    if (n < 2 || lambda <= 0) {
        return;
    }
    const std::vector<double> in(x.begin(), x.end());
    // Condat's direct algorithm: grow a segment while a constant value stays feasible,
    // emit it when the running residual leaves [-lambda, lambda].
    std::ptrdiff_t k = 0, k0 = 0, kplus = 0, kminus = 0;
    double umin = lambda, umax = -lambda;
    double vmin = in[0] - lambda, vmax = in[0] + lambda;
    const double twolambda = 2 * lambda;
    for (;;) {
        while (k == n - 1) {
            if (umin < 0) {
                do {
                    x[k0++] = vmin;
                } while (k0 <= kminus);
                k = kminus = k0;
                vmin = in[k];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if (umax > 0) {
                do {
                    x[k0++] = vmax;
                } while (k0 <= kplus);
                k = kplus = k0;
                vmax = in[k];
                umax = -lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / static_cast<double>(k - k0 + 1);
                do {
                    x[k0++] = vmin;
                } while (k0 <= k);
                return;
            }
        }
        if ((umin += in[k + 1] - vmin) < -lambda) {
            do {
                x[k0++] = vmin;
            } while (k0 <= kminus);
            k = kplus = kminus = k0;
            vmin = in[k];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = -lambda;
        } else if ((umax += in[k + 1] - vmax) > lambda) {
            do {
                x[k0++] = vmax;
            } while (k0 <= kplus);
            k = kplus = kminus = k0;
            vmax = in[k];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = -lambda;
        } else {
            ++k;
            if (umin >= lambda) {
                kminus = k;
                vmin += (umin - lambda) / static_cast<double>(kminus - k0 + 1);
                umin = lambda;
            }
            if (umax <= -lambda) {
                kplus = k;
                vmax += (umax + lambda) / static_cast<double>(kplus - k0 + 1);
                umax = -lambda;
            }
        }
    }
}

AxisTerms alignment_loss_and_grad_radial(std::span<const double> theta, std::size_t num_instances,
                                         std::mt19937_64& rng) {
    const std::size_t N = num_instances;
    if (N == 0 || theta.size() % N != 0 || theta.size() / N < 2) {
        throw ConfigError("alignment_loss_and_grad_radial: need at least 2 iterations");
    }
    const std::size_t T = theta.size() / N;
    AxisTerms out;
    out.gradient.assign(theta.size(), 0.0);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 1; k < T; ++k) {
            const double half = 0.5 * (theta[k * N + i] - theta[(k - 1) * N + i]);
            const double sim = std::cos(half);
            out.cost += 1.0 - std::abs(sim);
            double branch = sim > 0 ? 1.0 : -1.0;
            if (std::abs(sim) < alignment_equilibrium_width) {
                branch = coin(rng) ? 1.0 : -1.0;
            }
            const double g = branch * 0.5 * std::sin(half);
            out.gradient[k * N + i] += g;
            out.gradient[(k - 1) * N + i] -= g;
        }
    }
    return out;
}

} // namespace evoembed
