#include "skelex/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace skelex {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

// Log-determinant via Cholesky. Returns false when the matrix is not
// numerically positive definite.
bool logdet_llt(const Eigen::MatrixXd& m, double& out) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return false;
    const auto& L = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double d = L(i, i);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        s += std::log(d);
    }
    out = 2.0 * s;
    return true;
}

Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& samples,
                                  const Eigen::VectorXd& mean) {
    const Eigen::Index d = mean.size();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& s : samples) {
        const Eigen::VectorXd c = s - mean;
        cov.noalias() += c * c.transpose();
    }
    cov /= static_cast<double>(samples.size() - 1);
    return cov;
}

// Ridge scaled by the mean diagonal magnitude so stationary windows
// (zero variance) and metric-scale windows are both handled.
void regularize(Eigen::MatrixXd& cov, double reg) {
    const double d = static_cast<double>(cov.rows());
    const double ridge = reg * (cov.trace() / d + 1.0);
    cov.diagonal().array() += ridge;
}

}  // namespace

bool ScalarNormal::within_two_sided(double x, double alpha) const {
    const double z = normal_quantile(1.0 - 0.5 * alpha);
    return std::abs(x - mean) <= z * stddev;
}

bool ScalarNormal::within_upper(double x, double alpha) const {
    const double z = normal_quantile(1.0 - alpha);
    return x <= mean + z * stddev;
}

Mvn fit_mvn(const std::vector<Eigen::VectorXd>& samples, double reg) {
    if (samples.size() < 2) throw std::invalid_argument("insufficient samples");
    const Eigen::Index d = samples.front().size();
    for (const auto& s : samples) {
        if (s.size() != d) throw std::invalid_argument("sample dimension mismatch");
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& s : samples) mean += s;
    mean /= static_cast<double>(samples.size());

    Eigen::MatrixXd cov = sample_covariance(samples, mean);
    cov.diagonal().array() += reg;
    return Mvn{std::move(mean), std::move(cov)};
}

Mvn fit_mvn_adaptive(const std::vector<Eigen::VectorXd>& samples, double reg_scale) {
    Mvn m = fit_mvn(samples, 0.0);
    regularize(m.covariance, reg_scale);
    return m;
}

ScalarNormal fit_scalar_normal(std::span<const double> samples, double min_stddev) {
    ScalarNormal n;
    if (samples.empty()) {
        n.mean = 0.0;
        n.stddev = min_stddev;
        return n;
    }
    double sum = 0.0;
    for (double s : samples) sum += s;
    n.mean = sum / static_cast<double>(samples.size());
    double ss = 0.0;
    for (double s : samples) ss += (s - n.mean) * (s - n.mean);
    const double var = samples.size() > 1 ? ss / static_cast<double>(samples.size() - 1) : 0.0;
    n.stddev = std::max(std::sqrt(var), min_stddev);
    return n;
}

double mvn_entropy(const Mvn& m) {
    double ld = 0.0;
    if (!logdet_llt(m.covariance, ld)) throw std::domain_error("singular covariance");
    const double d = static_cast<double>(m.dim());
    return 0.5 * (d * (kLog2Pi + 1.0) + ld);
}

double mvn_logpdf(const Mvn& m, const Eigen::VectorXd& x) {
    if (x.size() != m.mean.size()) throw std::invalid_argument("dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(m.covariance);
    if (llt.info() != Eigen::Success) throw std::domain_error("singular covariance");
    double ld = 0.0;
    for (Eigen::Index i = 0; i < m.covariance.rows(); ++i) {
        ld += std::log(llt.matrixLLT()(i, i));
    }
    ld *= 2.0;
    const Eigen::VectorXd c = x - m.mean;
    const double quad = c.dot(llt.solve(c));
    const double d = static_cast<double>(m.dim());
    return -0.5 * (d * kLog2Pi + ld + quad);
}

double mutual_information(const std::vector<Eigen::VectorXd>& win_i,
                          const std::vector<Eigen::VectorXd>& win_j,
                          double reg) {
    if (win_i.size() != win_j.size()) throw std::invalid_argument("window length mismatch");
    if (win_i.size() < 2) throw std::invalid_argument("insufficient samples");
    const Eigen::Index d = win_i.front().size();
    if (win_j.front().size() != d) throw std::invalid_argument("window dimension mismatch");

    // Canonical argument order makes MI(a, b) bitwise equal to MI(b, a).
    const std::vector<Eigen::VectorXd>* a = &win_i;
    const std::vector<Eigen::VectorXd>* b = &win_j;
    for (std::size_t k = 0; k < a->size(); ++k) {
        bool decided = false;
        for (Eigen::Index c = 0; c < d; ++c) {
            const double x = (*a)[k](c), y = (*b)[k](c);
            if (x < y) { decided = true; break; }
            if (y < x) { std::swap(a, b); decided = true; break; }
        }
        if (decided) break;
    }

    const std::size_t n = a->size();
    std::vector<Eigen::VectorXd> joint(n);
    for (std::size_t k = 0; k < n; ++k) {
        Eigen::VectorXd v(2 * d);
        v.head(d) = (*a)[k];
        v.tail(d) = (*b)[k];
        joint[k] = std::move(v);
    }

    Mvn ma = fit_mvn(*a, 0.0);
    Mvn mb = fit_mvn(*b, 0.0);
    Mvn mj = fit_mvn(joint, 0.0);
    regularize(ma.covariance, reg);
    regularize(mb.covariance, reg);
    regularize(mj.covariance, reg);

    double ld_a = 0.0, ld_b = 0.0, ld_j = 0.0;
    if (!logdet_llt(ma.covariance, ld_a) || !logdet_llt(mb.covariance, ld_b)) {
        return 0.0;  // degenerate marginals carry no signal
    }
    if (!logdet_llt(mj.covariance, ld_j)) {
        return kMiCap;  // singular joint: perfectly dependent
    }
    const double mi = 0.5 * (ld_a + ld_b - ld_j);
    return std::clamp(mi, 0.0, kMiCap);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile argument outside (0,1)");

    // Acklam's coefficients.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};

    const double plow = 0.02425, phigh = 1.0 - plow;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else if (p <= phigh) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }

    // One Halley step against the exact CDF.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

double normal_pdf(double x, double mean, double variance) {
    const double v = std::max(variance, 1e-300);
    const double c = (x - mean);
    return std::exp(-0.5 * c * c / v) / std::sqrt(2.0 * std::numbers::pi * v);
}

double chi2_quantile(double dof, double p) {
    if (dof <= 0) throw std::domain_error("chi2 dof must be positive");
    const double z = normal_quantile(p);
    const double a = 2.0 / (9.0 * dof);
    const double c = 1.0 - a + z * std::sqrt(a);
    return dof * c * c * c;
}

bool mi_significant(double mi, int n_samples, int dim_a, int dim_b, double alpha) {
    if (alpha <= 0.0) return true;  // gating disabled
    const double c = n_samples - 1 - 0.5 * (dim_a + dim_b + 1);
    if (c <= 0.0) return true;  // window too short for the test
    const double stat = 2.0 * c * mi;
    return stat > chi2_quantile(static_cast<double>(dim_a * dim_b), 1.0 - alpha);
}

}  // namespace skelex
