#ifndef EVOEMBED_PCA_HPP
#define EVOEMBED_PCA_HPP

#include "evoembed/model.hpp"

#include <cstddef>
#include <vector>

namespace evoembed {

/**
 * Principal axes fitted on all rows of a dataset (every iteration pooled).
 *
 * `components` is row-major `dims x feature_dim`, ordered by decreasing explained variance;
 * each component's largest-magnitude loading is positive.
 */
struct PcaModel {
    std::size_t feature_dim = 0;
    std::size_t dims = 0;
    std::vector<double> mean;
    std::vector<double> components;
    std::vector<double> explained_variance; ///< Sample variance (n - 1 denominator) along each component.
};

/// Feature dimensions above which the randomized solver replaces the exact covariance eigendecomposition.
inline constexpr std::size_t exact_pca_max_dim = 512;

PcaModel fit_pca(const EvolutionDataset& dataset, std::size_t target_dims);

/// Projects every row onto the model's components (after centering).
EvolutionDataset apply_pca(const EvolutionDataset& dataset, const PcaModel& model);

/// `apply_pca(dataset, fit_pca(dataset, target_dims))`. Throws ConfigError if target_dims > D.
EvolutionDataset pca_reduce(const EvolutionDataset& dataset, std::size_t target_dims);

} // namespace evoembed

#endif
