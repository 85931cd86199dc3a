#ifndef EVOEMBED_TEST_HELPERS_HPP
#define EVOEMBED_TEST_HELPERS_HPP

#include "evoembed/model.hpp"

#include <random>
#include <string>

namespace evoembed::test {

// Gaussian features with distinct ids; labels run T*10, (T-1)*10, ...
inline EvolutionDataset random_dataset(std::size_t N, std::size_t T, std::size_t D, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    EvolutionDataset d;
    d.num_instances = N;
    d.feature_dim = D;
    for (std::size_t k = 0; k < T; ++k) {
        d.iteration_labels.push_back(static_cast<int>((T - k) * 10));
    }
    d.features.resize(N * T * D);
    for (auto& v : d.features) {
        v = g(rng);
    }
    for (std::size_t i = 0; i < N; ++i) {
        InstanceMeta m;
        m.instance_id = "inst" + std::to_string(i);
        m.prompt = "prompt " + std::to_string(i);
        m.keywords = {i % 2 == 0 ? "even" : "odd"};
        d.instances.push_back(m);
    }
    return d;
}

} // namespace evoembed::test

#endif
