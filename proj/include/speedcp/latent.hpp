#pragma once

#include <cstdint>
#include <vector>

#include "speedcp/kernel.hpp"

namespace speedcp {

enum class EmbeddingKind : unsigned char { Plsi, Pca, Identity };

struct EmbeddingModel {
    EmbeddingKind kind = EmbeddingKind::Identity;
    int rank = 0;
    int fitted_on = 0;
    int input_dim = 0;
    // pLSI: projection of a row x is (h_inv^T * (x^T * v_scaled)) clipped to
    // the simplex; PCA: (x - mean) * basis.
    Space out_space = Space::Euclidean;
    Eigen::MatrixXd basis;    // p x K right factor (V for PCA, V Lambda^-1 for pLSI)
    Eigen::MatrixXd h_inv;    // K x K, pLSI only
    Eigen::VectorXd mean;     // p, PCA only
    std::vector<int> vertex_rows;  // SPA picks, pLSI only
};

// Topic-model embedding: rank-K SVD, Successive Projection Algorithm on the
// left singular rows, mixture weights via the vertex matrix inverse.
EmbeddingModel fit_plsi(const Eigen::MatrixXd& X, int K, std::uint64_t seed);

EmbeddingModel fit_pca(const Eigen::MatrixXd& X, int K);

EmbeddingModel identity_embedding(int dim, Space space = Space::Euclidean);

std::vector<LatentPoint> embed(const EmbeddingModel& model, const Eigen::MatrixXd& X_new,
                               int jobs = 1);

}  // namespace speedcp
