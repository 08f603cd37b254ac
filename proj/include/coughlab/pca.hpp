#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coughlab/common.hpp"

namespace coughlab::pca {

// Fitted principal-component model; immutable after fit().
struct PcaModel {
    Vector mean;                // d
    Matrix components;          // k x d, rows orthonormal
    Vector explained_variance;  // k eigenvalues, descending
    Vector explained_ratio;     // k, fractions of total variance
    double total_variance = 0.0;

    Index input_dim() const { return mean.size(); }
    Index n_components() const { return components.rows(); }
};

// Mean-centered covariance (1/(M-1)) eigendecomposition; top-k eigenvectors
// by descending eigenvalue. Sign convention: the largest-magnitude entry of
// each component is positive, so fits are reproducible. Rank-deficient data
// yields trailing zero variances rather than an error.
PcaModel fit(const Eigen::Ref<const Matrix>& frames, Index k);

// scores = (frames - mean) * components^T
Matrix transform(const PcaModel& model, const Eigen::Ref<const Matrix>& frames);

// CSV of (pc1, pc2, pc3, class label) rows for external plotting; requires a
// 3-component score matrix and one label per row. Row order follows input.
void export_scatter(const Eigen::Ref<const Matrix>& scores, const std::vector<std::string>& labels,
                    const std::filesystem::path& path);

}  // namespace coughlab::pca
