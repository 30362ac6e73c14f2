#pragma once

// gaussian.hpp - multivariate normal fitting, entropy, log-density and the
// closed-form mutual information of two windowed observation streams.
//
// MI of two windows is computed from fitted MVNs:
//
//     MI = 1/2 * log( det(S_i) * det(S_j) / det(S_ij) )
//
// where S_ij is the covariance of the stacked joint samples. All
// determinants are taken after adding an adaptive ridge
// reg * (trace/d + 1) to the diagonal, which keeps windows of stationary
// objects (zero sample variance) well defined and yields MI = 0 for them.
// Results are reported in nats and clamped to [0, kMiCap]; perfectly
// dependent windows whose joint covariance is singular hit the cap.

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace skelex {

inline constexpr double kCovReg = 1e-9;   // default diagonal regularization scale
inline constexpr double kMiCap = 50.0;    // nats; identical trajectories clamp here

struct Mvn {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    int dim() const { return static_cast<int>(mean.size()); }
};

/// Scalar normal model with a strictly positive standard deviation.
/// Used for edge connectivity (distance) and resting (displacement) models.
struct ScalarNormal {
    double mean = 0.0;
    double stddev = 1.0;

    /// x within the central (1 - alpha) probability mass.
    bool within_two_sided(double x, double alpha) const;
    /// x below the (1 - alpha) quantile (one-sided upper bound).
    bool within_upper(double x, double alpha) const;
};

/// Sample mean and unbiased sample covariance with `reg` added to the
/// diagonal. Throws std::invalid_argument("insufficient samples") for
/// fewer than two samples.
Mvn fit_mvn(const std::vector<Eigen::VectorXd>& samples, double reg);

/// fit_mvn with the ridge reg_scale * (trace/d + 1) taken from the fitted
/// covariance itself, the same scheme the MI path uses.
Mvn fit_mvn_adaptive(const std::vector<Eigen::VectorXd>& samples, double reg_scale = kCovReg);

ScalarNormal fit_scalar_normal(std::span<const double> samples, double min_stddev = 1e-6);

/// Differential entropy 1/2 * log((2*pi*e)^d * det S) in nats.
/// Throws std::domain_error("singular covariance") when det S <= 0.
double mvn_entropy(const Mvn& m);

/// Exact multivariate normal log-density at x.
double mvn_logpdf(const Mvn& m, const Eigen::VectorXd& x);

/// Closed-form Gaussian MI of two equally long sample windows, in nats,
/// clamped to [0, kMiCap]. Exactly symmetric in its window arguments.
double mutual_information(const std::vector<Eigen::VectorXd>& win_i,
                          const std::vector<Eigen::VectorXd>& win_j,
                          double reg = kCovReg);

/// Inverse standard normal CDF (Acklam's rational approximation with one
/// Halley refinement; |error| < 1e-12 over (0,1)).
double normal_quantile(double p);

double normal_pdf(double x, double mean, double variance);

/// Chi-squared quantile via the Wilson-Hilferty cube approximation.
double chi2_quantile(double dof, double p);

/// Bartlett statistic 2 * (n - 1 - (p + q + 1) / 2) * MI is approximately
/// chi-squared with p*q dof when the two windows are independent. Returns
/// true when independence is rejected at significance `alpha`; used to
/// gate the small-window MI signal against estimator bias.
bool mi_significant(double mi, int n_samples, int dim_a, int dim_b, double alpha);

}  // namespace skelex
