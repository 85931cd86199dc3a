#include "evoembed/synth.hpp"

#include "evoembed/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

namespace evoembed {

namespace {

// Norm of the per-instance noise vector and of a first-level branch offset.
constexpr double instance_noise_norm = 5.0;
constexpr double first_branch_offset = 20.0;

void random_direction(std::mt19937_64& rng, std::vector<double>& out) {
    std::normal_distribution<double> normal(0.0, 1.0);
    double norm = 0;
    do {
        norm = 0;
        for (auto& v : out) {
            v = normal(rng);
            norm += v * v;
        }
    } while (norm == 0);
    norm = std::sqrt(norm);
    for (auto& v : out) {
        v /= norm;
    }
}

int parse_int(std::string_view text, std::string_view what) {
    try {
        std::size_t used = 0;
        int value = std::stoi(std::string(text), &used);
        if (used != text.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return value;
    } catch (const std::exception&) {
        throw ConfigError("schedule: cannot parse " + std::string(what) + " '" + std::string(text) + "'");
    }
}

} // namespace

void validate_synth_spec(const SynthSpec& spec) {
    auto fail = [](const std::string& msg) { throw ConfigError("synth: " + msg); };
    if (spec.num_instances < 2) {
        fail("need at least 2 instances");
    }
    if (spec.num_iterations < 2) {
        fail("need at least 2 iterations");
    }
    if (spec.feature_dim < 1) {
        fail("feature_dim must be positive");
    }
    if (spec.num_modes < 1) {
        fail("need at least 1 mode");
    }
    if (!(spec.noise_scale >= 0)) {
        fail("noise_scale must be non-negative");
    }

    std::set<int> born = {0};
    std::size_t last_rank = 0;
    for (const auto& event : spec.branch_schedule) {
        if (event.rank < 1 || event.rank >= spec.num_iterations) {
            fail("branch rank " + std::to_string(event.rank) + " outside [1, T-1]");
        }
        if (event.rank < last_rank) {
            fail("branch ranks must be non-decreasing");
        }
        last_rank = event.rank;
        if (!born.count(event.parent)) {
            fail("branch parent " + std::to_string(event.parent) + " does not exist yet");
        }
        if (event.children.empty()) {
            fail("branch from mode " + std::to_string(event.parent) + " has no children");
        }
        std::set<int> distinct(event.children.begin(), event.children.end());
        if (distinct.size() != event.children.size()) {
            fail("duplicate child modes in branch from " + std::to_string(event.parent));
        }
        for (int child : event.children) {
            if (child == event.parent) {
                continue;
            }
            if (child < 0 || child >= spec.num_modes) {
                fail("child mode " + std::to_string(child) + " outside [0, K)");
            }
            if (!born.insert(child).second) {
                fail("mode " + std::to_string(child) + " is created twice");
            }
        }
    }
    if (born.size() != static_cast<std::size_t>(spec.num_modes)) {
        fail("schedule creates " + std::to_string(born.size()) + " modes but K = " + std::to_string(spec.num_modes));
    }
}

SyntheticData generate_synthetic(const SynthSpec& spec) {
    validate_synth_spec(spec);
    const std::size_t N = spec.num_instances;
    const std::size_t T = spec.num_iterations;
    const std::size_t D = spec.feature_dim;
    const auto K = static_cast<std::size_t>(spec.num_modes);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticData out;

    // Mode centers: root at the origin, children offset from their parent.
    out.centers.assign(K * D, 0.0);
    std::vector<int> depth(K, 0);
    std::vector<double> direction(D);
    for (const auto& event : spec.branch_schedule) {
        for (int child : event.children) {
            if (child == event.parent) {
                continue;
            }
            depth[child] = depth[event.parent] + 1;
            const double length = first_branch_offset / std::pow(2.0, depth[child] - 1);
            random_direction(rng, direction);
            for (std::size_t d = 0; d < D; ++d) {
                out.centers[child * D + d] = out.centers[event.parent * D + d] + length * direction[d];
            }
        }
    }

    // Lineage: labels per rank after applying every branch at or before that rank.
    out.labels.assign(T * N, 0);
    std::vector<int> current(N, 0);
    std::size_t next_event = 0;
    for (std::size_t k = 0; k < T; ++k) {
        while (next_event < spec.branch_schedule.size() && spec.branch_schedule[next_event].rank == k) {
            const auto& event = spec.branch_schedule[next_event];
            std::uniform_int_distribution<std::size_t> pick(0, event.children.size() - 1);
            for (std::size_t i = 0; i < N; ++i) {
                if (current[i] == event.parent) {
                    current[i] = event.children[pick(rng)];
                }
            }
            ++next_event;
        }
        for (std::size_t i = 0; i < N; ++i) {
            out.labels[k * N + i] = current[i];
        }
    }

    const double eps_scale = instance_noise_norm / std::sqrt(static_cast<double>(D));
    const double eta_scale = spec.noise_scale / std::sqrt(static_cast<double>(D));
    std::vector<double> eps(N * D);
    for (auto& v : eps) {
        v = eps_scale * normal(rng);
    }

    auto& ds = out.dataset;
    ds.num_instances = N;
    ds.feature_dim = D;
    ds.representation = Representation::smooth;
    ds.iteration_labels.resize(T);
    for (std::size_t k = 0; k < T; ++k) {
        ds.iteration_labels[k] = static_cast<int>((T - 1 - k) * 10);
    }
    ds.features.resize(T * N * D);
    for (std::size_t k = 0; k < T; ++k) {
        const double a = static_cast<double>(k) / static_cast<double>(T - 1);
        for (std::size_t i = 0; i < N; ++i) {
            const auto mode = static_cast<std::size_t>(out.labels[k * N + i]);
            auto row = ds.row(k, i);
            for (std::size_t d = 0; d < D; ++d) {
                const double eta = normal(rng);
                row[d] = (1 - a) * eps[i * D + d] + a * out.centers[mode * D + d] + eta_scale * eta;
            }
        }
    }

    ds.instances.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        std::ostringstream id;
        id << "inst" << std::setw(5) << std::setfill('0') << i;
        const int final_mode = out.labels[(T - 1) * N + i];
        auto& meta = ds.instances[i];
        meta.instance_id = id.str();
        meta.prompt = "synthetic instance of mode " + std::to_string(final_mode);
        meta.keywords = {"mode" + std::to_string(final_mode)};
    }
    return out;
}

std::vector<BranchEvent> default_branch_schedule(int num_modes, std::size_t num_iterations) {
    std::vector<BranchEvent> schedule;
    if (num_modes <= 1 || num_iterations < 2) {
        return schedule;
    }
    // Mode m >= 1 sits at tree level floor(log2 m) + 1 and branches off mode m - 2^(level-1).
    int max_level = 0;
    for (int m = 1; m < num_modes; ++m) {
        max_level = std::max(max_level, static_cast<int>(std::floor(std::log2(m))) + 1);
    }
    const double last = static_cast<double>(num_iterations - 1);
    for (int m = 1; m < num_modes; ++m) {
        const int level = static_cast<int>(std::floor(std::log2(m))) + 1;
        const int parent = m - (1 << (level - 1));
        auto rank = static_cast<std::size_t>(std::lround(level * last / (max_level + 1)));
        rank = std::clamp<std::size_t>(rank, 1, num_iterations - 1);
        schedule.push_back({rank, parent, {parent, m}});
    }
    return schedule;
}

std::vector<BranchEvent> parse_branch_schedule(std::string_view text) {
    std::vector<BranchEvent> schedule;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(';', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto item = text.substr(start, end - start);
        start = end + 1;
        if (item.empty()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        const auto colon = item.find(':');
        const auto arrow = item.find('>');
        if (colon == std::string_view::npos || arrow == std::string_view::npos || arrow < colon) {
            throw ConfigError("schedule: expected 'rank:parent>child,child', got '" + std::string(item) + "'");
        }
        BranchEvent event;
        const int rank = parse_int(item.substr(0, colon), "rank");
        if (rank < 0) {
            throw ConfigError("schedule: negative rank");
        }
        event.rank = static_cast<std::size_t>(rank);
        event.parent = parse_int(item.substr(colon + 1, arrow - colon - 1), "parent");
        auto children = item.substr(arrow + 1);
        std::size_t c = 0;
        while (c <= children.size()) {
            auto comma = children.find(',', c);
            if (comma == std::string_view::npos) {
                comma = children.size();
            }
            event.children.push_back(parse_int(children.substr(c, comma - c), "child"));
            c = comma + 1;
        }
        schedule.push_back(std::move(event));
    }
    return schedule;
}

std::string format_branch_schedule(const std::vector<BranchEvent>& schedule) {
    std::ostringstream out;
    for (std::size_t e = 0; e < schedule.size(); ++e) {
        if (e) {
            out << ';';
        }
        out << schedule[e].rank << ':' << schedule[e].parent << '>';
        for (std::size_t c = 0; c < schedule[e].children.size(); ++c) {
            out << (c ? "," : "") << schedule[e].children[c];
        }
    }
    return out.str();
}

} // namespace evoembed
