#include "coughlab/pca.hpp"

#include <cmath>
#include <fstream>

#include "coughlab/util.hpp"

namespace coughlab::pca {

PcaModel fit(const Eigen::Ref<const Matrix>& frames, Index k) {
    const Index m = frames.rows();
    const Index d = frames.cols();
    if (m < 2) throw DataError("pca fit needs at least 2 rows");
    if (k < 1 || k > d) throw ConfigError("pca component count must be in [1, dim]");

    PcaModel model;
    model.mean = frames.colwise().mean().transpose();
    const Matrix centered = frames.rowwise() - model.mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(m - 1);

    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("pca eigendecomposition failed");
    // solver returns eigenvalues ascending; take the top k in descending order
    const Vector& eigenvalues = solver.eigenvalues();
    const Matrix& eigenvectors = solver.eigenvectors();

    model.total_variance = cov.trace();
    model.components.resize(k, d);
    model.explained_variance.resize(k);
    model.explained_ratio.resize(k);
    for (Index i = 0; i < k; ++i) {
        const Index src = d - 1 - i;
        Vector v = eigenvectors.col(src);
        Index peak;
        v.cwiseAbs().maxCoeff(&peak);
        if (v[peak] < 0.0) v = -v;
        model.components.row(i) = v.transpose();
        model.explained_variance[i] = std::max(0.0, eigenvalues[src]);
        model.explained_ratio[i] =
            model.total_variance > 0.0 ? model.explained_variance[i] / model.total_variance : 0.0;
    }
    return model;
}

Matrix transform(const PcaModel& model, const Eigen::Ref<const Matrix>& frames) {
    if (frames.cols() != model.input_dim())
        throw ShapeError("pca transform: input has " + std::to_string(frames.cols()) +
                         " dims, model expects " + std::to_string(model.input_dim()));
    return (frames.rowwise() - model.mean.transpose()) * model.components.transpose();
}

void export_scatter(const Eigen::Ref<const Matrix>& scores, const std::vector<std::string>& labels,
                    const std::filesystem::path& path) {
    if (scores.cols() != 3) throw ShapeError("scatter export expects exactly 3 components");
    if (static_cast<Index>(labels.size()) != scores.rows())
        throw ShapeError("scatter export: one label per score row required");

    std::ofstream os(path);
    if (!os) throw DataError("cannot create scatter file: " + path.string());
    os << "pc1,pc2,pc3,label\n";
    for (Index i = 0; i < scores.rows(); ++i) {
        os << util::format_double(scores(i, 0)) << ',' << util::format_double(scores(i, 1)) << ','
           << util::format_double(scores(i, 2)) << ','
           << util::csv_quote(labels[static_cast<std::size_t>(i)]) << "\n";
    }
    if (!os) throw DataError("failed writing scatter file: " + path.string());
}

}  // namespace coughlab::pca
