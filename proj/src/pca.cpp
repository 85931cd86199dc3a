#include "evoembed/pca.hpp"

#include "evoembed/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace evoembed {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Centered copy of all rows; accumulation order is fixed (row by row).
RowMatrix centered_rows(const EvolutionDataset& dataset, Eigen::VectorXd& mean) {
    const auto rows = static_cast<Eigen::Index>(dataset.num_rows());
    const auto cols = static_cast<Eigen::Index>(dataset.feature_dim);
    Eigen::Map<const RowMatrix> X(dataset.features.data(), rows, cols);
    mean = Eigen::VectorXd::Zero(cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        mean += X.row(r).transpose();
    }
    mean /= static_cast<double>(rows);
    RowMatrix centered = X;
    centered.rowwise() -= mean.transpose();
    return centered;
}

// Columns of `basis` are components; returns them ordered with their variances, largest first.
void exact_components(const RowMatrix& centered, std::size_t dims, Eigen::MatrixXd& basis, Eigen::VectorXd& variance) {
    const double denom = std::max<double>(1.0, static_cast<double>(centered.rows()) - 1.0);
    Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw NumericError("pca: covariance eigendecomposition failed");
    }
    const auto D = cov.rows();
    const auto k = static_cast<Eigen::Index>(dims);
    basis.resize(D, k);
    variance.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        // Eigen orders eigenvalues ascending.
        basis.col(c) = solver.eigenvectors().col(D - 1 - c);
        variance(c) = std::max(0.0, solver.eigenvalues()(D - 1 - c));
    }
}

// Randomized range finder with subspace iteration, followed by an exact solve in the subspace.
void randomized_components(const RowMatrix& centered, std::size_t dims, Eigen::MatrixXd& basis,
                           Eigen::VectorXd& variance) {
    const auto D = centered.cols();
    const auto k = static_cast<Eigen::Index>(dims);
    const auto sketch = std::min<Eigen::Index>(D, k + 10);
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd omega(D, sketch);
    for (Eigen::Index c = 0; c < sketch; ++c) {
        for (Eigen::Index r = 0; r < D; ++r) {
            omega(r, c) = normal(rng);
        }
    }

    Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(centered.transpose() * (centered * omega))
                            .householderQ() *
                        Eigen::MatrixXd::Identity(D, sketch);
    for (int pass = 0; pass < 4; ++pass) {
        Eigen::MatrixXd Z = centered.transpose() * (centered * Q);
        Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Z).householderQ() * Eigen::MatrixXd::Identity(D, sketch);
    }

    const double denom = std::max<double>(1.0, static_cast<double>(centered.rows()) - 1.0);
    Eigen::MatrixXd projected = centered * Q;
    Eigen::MatrixXd small = (projected.transpose() * projected) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(small);
    if (solver.info() != Eigen::Success) {
        throw NumericError("pca: subspace eigendecomposition failed");
    }
    basis.resize(D, k);
    variance.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        basis.col(c) = Q * solver.eigenvectors().col(sketch - 1 - c);
        variance(c) = std::max(0.0, solver.eigenvalues()(sketch - 1 - c));
    }
}

} // namespace

PcaModel fit_pca(const EvolutionDataset& dataset, std::size_t target_dims) {
    if (target_dims == 0 || target_dims > dataset.feature_dim) {
        throw ConfigError("pca: target_dims must lie in [1, " + std::to_string(dataset.feature_dim) + "], got " +
                          std::to_string(target_dims));
    }
    if (dataset.num_rows() < 2) {
        throw ConfigError("pca: need at least 2 rows");
    }

    Eigen::VectorXd mean;
    const RowMatrix centered = centered_rows(dataset, mean);
    Eigen::MatrixXd basis;
    Eigen::VectorXd variance;
    if (dataset.feature_dim <= exact_pca_max_dim) {
        exact_components(centered, target_dims, basis, variance);
    } else {
        randomized_components(centered, target_dims, basis, variance);
    }

    PcaModel model;
    model.feature_dim = dataset.feature_dim;
    model.dims = target_dims;
    model.mean.assign(mean.data(), mean.data() + mean.size());
    model.components.resize(target_dims * dataset.feature_dim);
    model.explained_variance.assign(variance.data(), variance.data() + variance.size());
    for (std::size_t c = 0; c < target_dims; ++c) {
        auto column = basis.col(static_cast<Eigen::Index>(c));
        Eigen::Index pivot = 0;
        for (Eigen::Index r = 1; r < column.size(); ++r) {
            if (std::abs(column(r)) > std::abs(column(pivot))) {
                pivot = r;
            }
        }
        const double sign = column(pivot) < 0 ? -1.0 : 1.0;
        for (std::size_t d = 0; d < dataset.feature_dim; ++d) {
            model.components[c * dataset.feature_dim + d] = sign * column(static_cast<Eigen::Index>(d));
        }
    }
    return model;
}

EvolutionDataset apply_pca(const EvolutionDataset& dataset, const PcaModel& model) {
    if (dataset.feature_dim != model.feature_dim) {
        throw ConfigError("pca: model expects " + std::to_string(model.feature_dim) + " features, dataset has " +
                          std::to_string(dataset.feature_dim));
    }
    const auto rows = static_cast<Eigen::Index>(dataset.num_rows());
    const auto D = static_cast<Eigen::Index>(dataset.feature_dim);
    const auto k = static_cast<Eigen::Index>(model.dims);
    Eigen::Map<const RowMatrix> X(dataset.features.data(), rows, D);
    Eigen::Map<const RowMatrix> W(model.components.data(), k, D);
    Eigen::Map<const Eigen::VectorXd> mean(model.mean.data(), D);

    EvolutionDataset out = dataset;
    out.feature_dim = model.dims;
    out.features.assign(static_cast<std::size_t>(rows * k), 0.0);
    Eigen::Map<RowMatrix> Y(out.features.data(), rows, k);
    Y.noalias() = (X.rowwise() - mean.transpose()) * W.transpose();
    return out;
}

EvolutionDataset pca_reduce(const EvolutionDataset& dataset, std::size_t target_dims) {
    return apply_pca(dataset, fit_pca(dataset, target_dims));
}

} // namespace evoembed
