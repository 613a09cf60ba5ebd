#include "speedcp/latent.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace speedcp {

namespace {

// Successive Projection Algorithm: repeatedly take the row of maximal norm
// and project the rest onto its orthogonal complement.
std::vector<int> spa_vertices(Eigen::MatrixXd rows, int K) {
    const int n = static_cast<int>(rows.rows());
    std::vector<int> picks;
    for (int k = 0; k < K; ++k) {
        int best = -1;
        double best_n = -1.0;
        for (int i = 0; i < n; ++i) {
            double nn = rows.row(i).squaredNorm();
            if (nn > best_n + 1e-15) {
                best_n = nn;
                best = i;
            }
        }
        if (best < 0 || best_n <= 1e-24) break;
        picks.push_back(best);
        Eigen::VectorXd dir = rows.row(best).transpose() / std::sqrt(best_n);
        rows -= (rows * dir) * dir.transpose();
    }
    return picks;
}

Eigen::VectorXd simplex_project(const Eigen::VectorXd& v) {
    Eigen::VectorXd w = v.cwiseMax(0.0).cwiseMin(1.0);
    double s = w.sum();
    if (s <= 0.0)
        w.setConstant(1.0 / static_cast<double>(v.size()));
    else
        w /= s;
    return w;
}

}  // namespace

EmbeddingModel fit_plsi(const Eigen::MatrixXd& X, int K, std::uint64_t seed) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (K < 2) throw InvalidInputError("fit_plsi: K must be at least 2");
    if (n < K || p < K) throw InvalidInputError("fit_plsi: matrix smaller than K");
    if (X.minCoeff() < -1e-12) throw InvalidInputError("fit_plsi: negative entries");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv(K - 1) <= 1e-10 * std::max(1.0, sv(0)))
        throw InvalidInputError("fit_plsi: input rank below K");

    Eigen::MatrixXd xi = svd.matrixU().leftCols(K);  // n x K

    EmbeddingModel model;
    model.kind = EmbeddingKind::Plsi;
    model.rank = K;
    model.fitted_on = n;
    model.input_dim = p;
    model.out_space = Space::Simplex;
    model.basis = svd.matrixV().leftCols(K) * sv.head(K).cwiseInverse().asDiagonal();

    std::mt19937_64 rng(mix_seed(seed));
    for (int attempt = 0; attempt < 2; ++attempt) {
        Eigen::MatrixXd rows = xi;
        if (attempt == 1) {
            std::normal_distribution<double> jitter(0.0, 1e-10);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < K; ++k) rows(i, k) += jitter(rng);
        }
        std::vector<int> picks = spa_vertices(rows, K);
        if (static_cast<int>(picks.size()) < K) continue;
        Eigen::MatrixXd h(K, K);
        for (int k = 0; k < K; ++k) h.row(k) = xi.row(picks[k]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(h);
        lu.setThreshold(1e-10);
        if (!lu.isInvertible()) continue;
        model.h_inv = lu.inverse();
        model.vertex_rows = picks;
        return model;
    }
    throw NumericalError("fit_plsi: vertex hunting found a singular vertex set");
}

EmbeddingModel fit_pca(const Eigen::MatrixXd& X, int K) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (K < 1) throw InvalidInputError("fit_pca: K must be positive");
    if (K > std::min(n, p)) throw InvalidInputError("fit_pca: K exceeds min(n, p)");

    EmbeddingModel model;
    model.kind = EmbeddingKind::Pca;
    model.rank = K;
    model.fitted_on = n;
    model.input_dim = p;
    model.out_space = Space::Euclidean;
    model.mean = X.colwise().mean().transpose();
    Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    model.basis = svd.matrixV().leftCols(K);
    return model;
}

EmbeddingModel identity_embedding(int dim, Space space) {
    if (dim < 1) throw InvalidInputError("identity_embedding: dim must be positive");
    EmbeddingModel model;
    model.kind = EmbeddingKind::Identity;
    model.rank = dim;
    model.input_dim = dim;
    model.out_space = space;
    return model;
}

std::vector<LatentPoint> embed(const EmbeddingModel& model, const Eigen::MatrixXd& X_new,
                               int jobs) {
    const int n = static_cast<int>(X_new.rows());
    if (static_cast<int>(X_new.cols()) != model.input_dim)
        throw InvalidInputError("embed: column count does not match the fitted model");

    std::vector<LatentPoint> out(n);
    parallel_for(n, jobs, [&](int i) {
        switch (model.kind) {
            case EmbeddingKind::Plsi: {
                Eigen::VectorXd xi = model.basis.transpose() * X_new.row(i).transpose();
                Eigen::VectorXd pi = model.h_inv.transpose() * xi;
                out[i] = LatentPoint(simplex_project(pi), Space::Simplex);
                break;
            }
            case EmbeddingKind::Pca: {
                Eigen::VectorXd z =
                    model.basis.transpose() * (X_new.row(i).transpose() - model.mean);
                out[i] = LatentPoint(z, Space::Euclidean);
                break;
            }
            case EmbeddingKind::Identity:
                out[i] = LatentPoint(X_new.row(i).transpose(), model.out_space);
                break;
        }
    });
    return out;
}

}  // namespace speedcp
