#ifndef EVOEMBED_SYNTH_HPP
#define EVOEMBED_SYNTH_HPP

#include "evoembed/model.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evoembed {

/// At `rank`, every instance currently in `parent` moves to one of `children` (chosen uniformly).
struct BranchEvent {
    std::size_t rank = 0;
    int parent = 0;
    std::vector<int> children;
};

struct SynthSpec {
    std::size_t num_instances = 100;
    std::size_t num_iterations = 6;
    std::size_t feature_dim = 16;
    int num_modes = 1;
    std::vector<BranchEvent> branch_schedule;
    double noise_scale = 0.5;
    std::uint64_t seed = 42;
};

struct SyntheticData {
    EvolutionDataset dataset;
    /// Mode of element (rank, instance) at index `rank * N + instance`.
    std::vector<int> labels;
    /// Row-major `num_modes x feature_dim` mode centers.
    std::vector<double> centers;
};

/// Throws ConfigError unless the schedule is a tree rooted at mode 0 that creates every mode exactly once.
void validate_synth_spec(const SynthSpec& spec);

/**
 * Instance i at rank k gets `(1 - a_k) * eps_i + a_k * mu(mode_ik) + noise_scale * eta`,
 * with `a_k = k / (T - 1)`, a fixed per-instance noise vector eps_i and fresh noise eta.
 * Mode centers follow the tree: a child sits at its parent's center plus an offset that halves per level.
 */
SyntheticData generate_synthetic(const SynthSpec& spec);

/// Binary hierarchical schedule creating `num_modes` modes, one tree level per split rank.
std::vector<BranchEvent> default_branch_schedule(int num_modes, std::size_t num_iterations);

/// Parses `"rank:parent>c1,c2;rank:parent>c1,c2"`. Throws ConfigError on malformed text.
std::vector<BranchEvent> parse_branch_schedule(std::string_view text);

std::string format_branch_schedule(const std::vector<BranchEvent>& schedule);

} // namespace evoembed

#endif
