#pragma once

// Synthetic spike signals, truncated-normal corruption, the windowed
// mean-absolute-difference preprocessing for real series, and error metrics.

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "cqdenoise/core_model.hpp"
#include "cqdenoise/exact.hpp"

namespace cqdenoise {

/// mt19937_64 with the uniform and normal transforms written out, so streams
/// do not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform on [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [lo, hi], by rejection to avoid modulo bias.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        const std::uint64_t span = hi - lo + 1;
        if (span == 0) return lo + eng_();
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
        std::uint64_t r;
        do r = eng_();
        while (r >= limit);
        return lo + r % span;
    }

    /// Standard normal by Box-Muller; the second variate is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do u1 = uniform();
        while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct SyntheticConfig {
    std::size_t n = 1000;
    std::size_t s = 10;
    std::size_t h = 10;
    double sigma = 0.5;
    std::uint64_t seed = 1;

    void validate() const {
        if (n == 0) throw InvalidInput("n must be positive");
        if (s > 0 && h == 0) throw InvalidInput("spike length must be positive");
        if (h * s > n) throw InvalidInput("spikes do not fit: h*s > n");
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be nonnegative");
    }
};

/// Discretized Brownian-bridge covariance, B_ij = i (h + 1 - j) / (h + 1)
/// for 1 <= i <= j <= h.
inline Eigen::MatrixXd bridge_covariance(std::size_t h) {
    const auto H = static_cast<Eigen::Index>(h);
    Eigen::MatrixXd B(H, H);
    for (Eigen::Index a = 0; a < H; ++a)
        for (Eigen::Index b = a; b < H; ++b) {
            const double i = static_cast<double>(a + 1), j = static_cast<double>(b + 1);
            B(a, b) = B(b, a) = i * (static_cast<double>(h) + 1.0 - j) / (static_cast<double>(h) + 1.0);
        }
    return B;
}

/// Sum of s spikes; each is |v| for v ~ N(0, B) placed at a uniform start.
/// Spikes may overlap.
inline std::vector<double> gen_true_signal(const SyntheticConfig& cfg) {
    cfg.validate();
    std::vector<double> y(cfg.n, 0.0);
    if (cfg.s == 0) return y;
    Eigen::MatrixXd B = bridge_covariance(cfg.h);
    B.diagonal().array() += 1e-12;
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) throw InvalidInput("bridge covariance is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    Rng rng(cfg.seed);
    const auto h = static_cast<Eigen::Index>(cfg.h);
    for (std::size_t k = 0; k < cfg.s; ++k) {
        const auto start = static_cast<std::size_t>(rng.uniform_int(0, cfg.n - cfg.h));
        Eigen::VectorXd g(h);
        for (Eigen::Index i = 0; i < h; ++i) g[i] = rng.normal();
        Eigen::VectorXd v = L * g;
        for (Eigen::Index i = 0; i < h; ++i) y[start + static_cast<std::size_t>(i)] += std::abs(v[i]);
    }
    return y;
}

/// Draw from N(mean, sd^2) conditioned on >= lower. Rejection while the
/// acceptance probability is at least 1%, inverse CDF otherwise.
inline double truncated_normal(double mean, double sd, double lower, Rng& rng) {
    if (sd == 0.0) return std::max(mean, lower);
    const double a = (lower - mean) / sd;
    const double accept = 0.5 * std::erfc(a / std::sqrt(2.0));  // P(Z >= a)
    if (accept >= 0.01) {
        for (;;) {
            double v = rng.normal();
            if (v >= a) return mean + sd * v;
        }
    }
    // P(Z >= v) = accept * (1 - u), inverted through erfc
    double u;
    do u = rng.uniform();
    while (u >= 1.0);
    const double tail = accept * (1.0 - u);
    const double v = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * tail);
    return mean + sd * std::max(v, a);
}

struct NoisySignal {
    std::vector<double> y;       // observations, scaled to unit infinity norm
    std::vector<double> y_true;  // true signal under the same scaling
    double scale = 1.0;          // factor applied to both
};

/// y_i = y_hat_i + eps_i with eps_i ~ N(0, sigma^2) truncated at -y_hat_i,
/// then both series are divided by ||y||_inf (skipped when it is zero).
inline NoisySignal add_noise_and_scale(const std::vector<double>& y_hat, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be nonnegative");
    NoisySignal out;
    out.y.resize(y_hat.size());
    Rng rng(seed);
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
        if (y_hat[i] < 0.0) throw InvalidInput("true signal must be nonnegative");
        out.y[i] = std::max(y_hat[i] + truncated_normal(0.0, sigma, -y_hat[i], rng), 0.0);
    }
    out.y_true = y_hat;
    double m = 0.0;
    for (double v : out.y) m = std::max(m, v);
    if (m > 0.0) {
        out.scale = 1.0 / m;
        for (auto& v : out.y) v *= out.scale;
        for (auto& v : out.y_true) v *= out.scale;
    }
    return out;
}

/// Seed of the noise stream paired with a signal seed.
inline std::uint64_t noise_seed(std::uint64_t seed) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Mean |x_{t+1} - x_t| within consecutive windows (a trailing partial
/// window is dropped), scaled to unit infinity norm.
inline std::vector<double> windowed_mad(const std::vector<double>& series, std::size_t window = 10) {
    if (window < 2) throw InvalidInput("window must be at least 2");
    std::vector<double> out;
    for (std::size_t w = 0; (w + 1) * window <= series.size(); ++w) {
        double acc = 0.0;
        for (std::size_t t = w * window; t + 1 < (w + 1) * window; ++t) acc += std::abs(series[t + 1] - series[t]);
        out.push_back(acc / static_cast<double>(window - 1));
    }
    double m = 0.0;
    for (double v : out) m = std::max(m, v);
    if (m > 0.0)
        for (auto& v : out) v /= m;
    return out;
}

/// ||y_true||^2 / ||y_true - y||^2; empty when the two coincide.
inline std::optional<double> snr(const std::vector<double>& y_true, const std::vector<double>& y) {
    if (y_true.size() != y.size()) throw InvalidInput("snr: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += y_true[i] * y_true[i];
        den += (y_true[i] - y[i]) * (y_true[i] - y[i]);
    }
    if (den == 0.0) return std::nullopt;
    return num / den;
}

struct Metrics {
    std::optional<double> snr;    // set only when the observed series is given
    std::optional<double> error;  // empty for an all-zero true signal
    std::size_t false_pos = 0;
    std::size_t false_neg = 0;
    std::size_t sparsity_mismatch = 0;
    std::size_t nnz = 0;
};

inline Metrics metrics(const std::vector<double>& x_star, const std::vector<double>& y_true) {
    if (x_star.size() != y_true.size()) throw InvalidInput("metrics: size mismatch");
    Metrics m;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x_star.size(); ++i) {
        num += (y_true[i] - x_star[i]) * (y_true[i] - x_star[i]);
        den += y_true[i] * y_true[i];
        const bool est = std::abs(x_star[i]) > kNonzeroThreshold;
        const bool tru = std::abs(y_true[i]) > kNonzeroThreshold;
        m.nnz += est;
        m.false_pos += est && !tru;
        m.false_neg += tru && !est;
    }
    if (den > 0.0) m.error = num / den;
    m.sparsity_mismatch = m.false_pos + m.false_neg;
    return m;
}

/// As above, plus the SNR of the observations the estimate was computed from.
inline Metrics metrics(const std::vector<double>& x_star, const std::vector<double>& y_true,
                       const std::vector<double>& y_observed) {
    auto m = metrics(x_star, y_true);
    m.snr = snr(y_true, y_observed);
    return m;
}

}  // namespace cqdenoise
