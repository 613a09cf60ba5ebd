#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speedcp/lambda_path.hpp"

namespace speedcp {

// Kernel ridge regression predictor for the conditional mean, fitted on the
// training split; supplies mu_hat for absolute-residual scores.
struct MuPredictor {
    std::vector<LatentPoint> points;
    KernelConfig config;
    Eigen::VectorXd weights;  // one per training point
    double intercept = 0.0;
    double ridge = 1e-3;
    bool fitted = false;
};

MuPredictor fit_mu(const std::vector<LatentPoint>& points, const Eigen::VectorXd& y,
                   const KernelConfig& cfg, double ridge = 1e-3);

double predict_mu(const MuPredictor& mu, const LatentPoint& x);

// Frozen calibration state: data, selected (gamma, lambda), the
// calibration-only path solution at lambda_hat, and the mean predictor.
struct CalibrationModel {
    double alpha = 0.1;
    KernelConfig kcfg;  // gamma == hyper.gamma_hat
    double lambda_hat = 0.0;
    std::vector<LatentPoint> points;
    Eigen::VectorXd scores;
    Eigen::MatrixXd phi;
    Eigen::MatrixXd kernel;  // Gram matrix over `points` at kcfg
    ElbowPartition fit;      // KKT state at lambda_hat over the n calibration points
    HyperParams hyper;
    MuPredictor mu;
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(scores.size()); }
    int d() const { return static_cast<int>(phi.cols()); }
    ProblemData problem() const { return ProblemData(scores, phi, kernel, alpha); }
};

// Runs hyperparameter selection and freezes the model: kernel at gamma_hat,
// active-set solve at lambda_hat.
CalibrationModel calibrate(const CalibrationInputs& calib, const std::vector<double>& gamma_grid,
                           int k_folds, std::uint64_t seed, int jobs = 1);

// Binary container, magic "SPCP" + u16 version, little-endian payload.
void save_model(const CalibrationModel& model, const std::string& path);
CalibrationModel load_model(const std::string& path);

// JSON sidecar with the CV table and chosen hyperparameters.
std::string hyperparams_json(const HyperParams& hyper);

}  // namespace speedcp
