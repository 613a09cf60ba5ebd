#pragma once

#include <cstdint>
#include <vector>

#include "speedcp/kernel.hpp"

namespace speedcp {

struct SynthConfig {
    int K = 3;
    int p = 30;
    int m = 1000;
    int n_train = 400;
    int n_calib = 400;
    int n_test = 200;
    std::vector<double> dirichlet{2.0, 1.0, 1.0};
    double noise_sd = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthDataset {
    Eigen::MatrixXd X;       // count proportions, rows sum to 1
    Eigen::MatrixXd W_true;  // simplex rows
    Eigen::VectorXd y;
    Eigen::MatrixXd zeta;  // K x p topic matrix
    Eigen::VectorXd eta;   // K, l2-normalized regression direction
    std::vector<int> train_idx, calib_idx, test_idx;
};

// Admixture generator: mixture weights Dirichlet with a per-sample
// coordinate shuffle on the train/calib splits (test rows unshuffled),
// multinomial counts over mixed topics, Gaussian response.
SynthDataset generate(const SynthConfig& cfg);

// Deterministic portable RNG built on splitmix64 streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix_seed(seed ^ 0x8e1f33a5d2c96b7dULL)) {}

    std::uint64_t next();
    double u01();                 // (0, 1)
    double normal();              // Box-Muller
    double gamma(double shape);   // Marsaglia-Tsang
    int categorical(const std::vector<double>& cdf);  // cdf normalized to 1

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace speedcp
