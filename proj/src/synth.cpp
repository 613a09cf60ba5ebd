#include "speedcp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace speedcp {

std::uint64_t Rng::next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double Rng::u01() {
    double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return std::min(std::max(u, 0x1.0p-53), 1.0 - 0x1.0p-53);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = u01(), u2 = u01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

double Rng::gamma(double shape) {
    if (shape < 1.0) {
        double u = u01();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = u01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

int Rng::categorical(const std::vector<double>& cdf) {
    double u = u01();
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    int idx = static_cast<int>(it - cdf.begin());
    return std::min(idx, static_cast<int>(cdf.size()) - 1);
}

void SynthConfig::validate() const {
    if (K < 2) throw InvalidInputError("SynthConfig: K must be at least 2");
    if (p < K) throw InvalidInputError("SynthConfig: p must be at least K");
    if (m < 1) throw InvalidInputError("SynthConfig: m must be positive");
    if (n_train < 1 || n_calib < 1 || n_test < 1)
        throw InvalidInputError("SynthConfig: split sizes must be positive");
    if (static_cast<int>(dirichlet.size()) != K)
        throw InvalidInputError("SynthConfig: dirichlet length must equal K");
    for (double a : dirichlet)
        if (!(a > 0.0)) throw InvalidInputError("SynthConfig: dirichlet entries must be positive");
    if (noise_sd < 0.0) throw InvalidInputError("SynthConfig: noise_sd must be nonnegative");
}

SynthDataset generate(const SynthConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_train + cfg.n_calib + cfg.n_test;
    Rng rng(derive_seed(cfg.seed, 0x73796e7468ULL));

    SynthDataset ds;
    ds.zeta.resize(cfg.K, cfg.p);
    for (int k = 0; k < cfg.K; ++k) {
        for (int j = 0; j < cfg.p; ++j) ds.zeta(k, j) = rng.u01();
        ds.zeta.row(k) /= ds.zeta.row(k).sum();
    }

    ds.eta.resize(cfg.K);
    for (int k = 0; k < cfg.K; ++k) ds.eta(k) = 1.0 + 9.0 * rng.u01();
    ds.eta /= ds.eta.norm();

    ds.W_true.resize(n, cfg.K);
    ds.X.resize(n, cfg.p);
    ds.y.resize(n);
    const int n_fit = cfg.n_train + cfg.n_calib;

    std::vector<double> cdf(cfg.p);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd w(cfg.K);
        for (int k = 0; k < cfg.K; ++k) w(k) = rng.gamma(cfg.dirichlet[k]);
        w /= w.sum();
        // Fisher-Yates on coordinates for the exchangeable splits; test rows
        // keep the concentrated first coordinate.
        if (i < n_fit) {
            for (int k = cfg.K - 1; k > 0; --k) {
                int j = static_cast<int>(rng.next() % static_cast<std::uint64_t>(k + 1));
                std::swap(w(k), w(j));
            }
        }
        ds.W_true.row(i) = w.transpose();

        Eigen::VectorXd mix = ds.zeta.transpose() * w;
        double acc = 0.0;
        for (int j = 0; j < cfg.p; ++j) {
            acc += mix(j);
            cdf[j] = acc;
        }
        for (int j = 0; j < cfg.p; ++j) cdf[j] /= acc;
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(cfg.p);
        for (int t = 0; t < cfg.m; ++t) counts(rng.categorical(cdf)) += 1.0;
        ds.X.row(i) = counts.transpose() / static_cast<double>(cfg.m);

        double mean = std::sin(2.0 * M_PI * w(0)) + w(1) * w(1) + w.dot(ds.eta);
        ds.y(i) = mean + cfg.noise_sd * rng.normal();
    }

    ds.train_idx.resize(cfg.n_train);
    ds.calib_idx.resize(cfg.n_calib);
    ds.test_idx.resize(cfg.n_test);
    std::iota(ds.train_idx.begin(), ds.train_idx.end(), 0);
    std::iota(ds.calib_idx.begin(), ds.calib_idx.end(), cfg.n_train);
    std::iota(ds.test_idx.begin(), ds.test_idx.end(), n_fit);
    return ds;
}

}  // namespace speedcp
