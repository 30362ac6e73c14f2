#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "skelex/gaussian.hpp"

using namespace skelex;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec1(double x) {
    VectorXd v(1);
    v << x;
    return v;
}

std::vector<VectorXd> gaussian_window(int n, int d, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<VectorXd> w(n);
    for (auto& v : w) {
        v = VectorXd(d);
        for (int c = 0; c < d; ++c) v(c) = scale * g(rng);
    }
    return w;
}

}  // namespace

TEST_CASE("fit_mvn two points") {
    std::vector<VectorXd> s{Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(2, 0, 0)};
    const Mvn m = fit_mvn(s, 0.0);
    CHECK(m.mean.isApprox(Eigen::Vector3d(1, 0, 0)));
    CHECK(m.covariance(0, 0) == doctest::Approx(2.0));
    CHECK(m.covariance(1, 1) == 0.0);
    CHECK(m.covariance(2, 2) == 0.0);
}

TEST_CASE("fit_mvn degenerate cloud gets the ridge") {
    std::vector<VectorXd> s(5, VectorXd(Eigen::Vector3d(1, 2, 3)));
    const Mvn m = fit_mvn(s, 1e-4);
    CHECK(m.covariance.isApprox(1e-4 * MatrixXd::Identity(3, 3)));
}

TEST_CASE("fit_mvn rejects fewer than two samples") {
    std::vector<VectorXd> s{Eigen::Vector3d(0, 0, 0)};
    CHECK_THROWS_WITH_AS(fit_mvn(s, 0.0), "insufficient samples", std::invalid_argument);
}

TEST_CASE("fit_mvn Monte Carlo consistency") {
    std::mt19937_64 rng(1234);
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::Vector3d sigma(1.0, 2.0, 3.0);  // stddevs -> variances 1, 4, 9
    std::vector<VectorXd> s;
    s.reserve(10000);
    for (int i = 0; i < 10000; ++i) {
        Eigen::Vector3d x(g(rng) * sigma(0), g(rng) * sigma(1), g(rng) * sigma(2));
        s.push_back(x);
    }
    const Mvn m = fit_mvn(s, 0.0);
    for (int d = 0; d < 3; ++d) {
        const double truth = sigma(d) * sigma(d);
        CHECK(std::abs(m.covariance(d, d) - truth) / truth < 0.10);
    }
    CHECK(std::abs(m.covariance(0, 1)) < 0.3);
    CHECK(std::abs(m.covariance(0, 2)) < 0.3);
    CHECK(std::abs(m.covariance(1, 2)) < 0.3);
}

TEST_CASE("mvn_entropy closed forms") {
    Mvn m1{vec1(0.0), MatrixXd::Identity(1, 1)};
    CHECK(mvn_entropy(m1) == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e)).epsilon(1e-12));

    Mvn m3{Eigen::Vector3d::Zero(), MatrixXd::Identity(3, 3)};
    const double h3 = mvn_entropy(m3);
    CHECK(h3 == doctest::Approx(4.2568).epsilon(1e-4));

    // H(c * Sigma) = H(Sigma) + (d / 2) ln c
    Mvn m3s{Eigen::Vector3d::Zero(), 4.0 * MatrixXd::Identity(3, 3)};
    CHECK(mvn_entropy(m3s) == doctest::Approx(h3 + 1.5 * std::log(4.0)).epsilon(1e-12));
    CHECK(mvn_entropy(m3s) == doctest::Approx(6.336).epsilon(1e-4));
}

TEST_CASE("mvn_entropy rejects singular covariance") {
    Mvn m{Eigen::Vector3d::Zero(), MatrixXd::Zero(3, 3)};
    CHECK_THROWS_WITH_AS(mvn_entropy(m), "singular covariance", std::domain_error);
}

TEST_CASE("entropy never decreases when inflating the covariance") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        MatrixXd a(3, 3);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) a(r, c) = g(rng);
        }
        MatrixXd cov = a * a.transpose() + 1e-6 * MatrixXd::Identity(3, 3);
        Mvn m{Eigen::Vector3d::Zero(), cov};
        const double c = std::abs(g(rng)) + 1e-3;
        Mvn inflated{Eigen::Vector3d::Zero(), cov + c * MatrixXd::Identity(3, 3)};
        CHECK(mvn_entropy(inflated) >= mvn_entropy(m));
    }
}

TEST_CASE("mvn_logpdf closed forms") {
    Mvn m1{vec1(0.0), MatrixXd::Identity(1, 1)};
    CHECK(mvn_logpdf(m1, vec1(0.0)) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
    CHECK(mvn_logpdf(m1, vec1(1.0)) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi) - 0.5).epsilon(1e-12));

    Mvn m2{Eigen::Vector2d::Zero(), MatrixXd::Identity(2, 2)};
    CHECK(mvn_logpdf(m2, Eigen::Vector2d(3, 4)) ==
          doctest::Approx(-std::log(2.0 * std::numbers::pi) - 12.5).epsilon(1e-12));
}

TEST_CASE("fit then logpdf at the mean equals the analytic peak") {
    std::mt19937_64 rng(17);
    auto w = gaussian_window(40, 3, rng);
    const Mvn m = fit_mvn_adaptive(w);
    double ld = 0.0;
    Eigen::LLT<MatrixXd> llt(m.covariance);
    for (int i = 0; i < 3; ++i) ld += 2.0 * std::log(llt.matrixLLT()(i, i));
    const double peak = -0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + ld);
    CHECK(mvn_logpdf(m, m.mean) == doctest::Approx(peak).epsilon(1e-12));
}

TEST_CASE("MI of independent windows is near zero for large n") {
    std::mt19937_64 rng(2);
    const auto a = gaussian_window(10000, 1, rng);
    const auto b = gaussian_window(10000, 1, rng);
    CHECK(mutual_information(a, b) < 0.05);
    CHECK(mutual_information(a, b) >= 0.0);
}

TEST_CASE("MI of an identical copy clamps to the cap") {
    std::mt19937_64 rng(3);
    const auto a = gaussian_window(50, 6, rng);
    CHECK(mutual_information(a, a) == kMiCap);
}

TEST_CASE("MI matches the analytic value for correlated 1-D Gaussians") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double rho : {0.9}) {
        std::vector<VectorXd> x, y;
        for (int i = 0; i < 10000; ++i) {
            const double u = g(rng), v = g(rng);
            x.push_back(vec1(u));
            y.push_back(vec1(rho * u + std::sqrt(1 - rho * rho) * v));
        }
        const double expected = -0.5 * std::log(1 - rho * rho);
        const double mi = mutual_information(x, y);
        CHECK(std::abs(mi - expected) / expected < 0.10);
    }
}

TEST_CASE("MI is exactly symmetric and clamped") {
    std::mt19937_64 rng(6);
    for (int k = 0; k < 30; ++k) {
        const auto a = gaussian_window(12, 3, rng);
        const auto b = gaussian_window(12, 3, rng);
        const double ab = mutual_information(a, b);
        const double ba = mutual_information(b, a);
        CHECK(ab == ba);  // bitwise
        CHECK(ab >= 0.0);
        CHECK(ab <= kMiCap);
    }
}

TEST_CASE("MI unchanged by a common rigid translation") {
    std::mt19937_64 rng(8);
    for (int k = 0; k < 20; ++k) {
        auto a = gaussian_window(15, 3, rng);
        auto b = gaussian_window(15, 3, rng);
        const double before = mutual_information(a, b);
        const Eigen::Vector3d shift(0.5, -1.25, 2.0);
        for (auto& v : a) v += shift;
        for (auto& v : b) v += shift;
        CHECK(mutual_information(a, b) == doctest::Approx(before).epsilon(1e-6));
    }
}

TEST_CASE("MI rejects mismatched windows") {
    std::mt19937_64 rng(9);
    auto a = gaussian_window(10, 3, rng);
    auto b = gaussian_window(9, 3, rng);
    CHECK_THROWS_AS(mutual_information(a, b), std::invalid_argument);
}

TEST_CASE("zero-variance windows carry no information") {
    std::vector<VectorXd> a(12, VectorXd(Eigen::Vector3d(1, 2, 3)));
    std::vector<VectorXd> b(12, VectorXd(Eigen::Vector3d(-1, 0, 5)));
    CHECK(mutual_information(a, b) == 0.0);
}

TEST_CASE("normal_quantile matches known values") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
    CHECK(normal_quantile(0.9) == doctest::Approx(1.281551566).epsilon(1e-8));
    CHECK(normal_quantile(1e-6) == doctest::Approx(-4.753424309).epsilon(1e-6));
}

TEST_CASE("scalar normal quantile membership") {
    ScalarNormal n{1.0, 0.1};
    CHECK(n.within_two_sided(1.0, 0.1));
    CHECK(n.within_two_sided(1.16, 0.1));   // |z| = 1.6 < 1.645
    CHECK_FALSE(n.within_two_sided(1.17, 0.1));  // |z| = 1.7
    CHECK(n.within_upper(1.12, 0.1));   // z = 1.2 < 1.282
    CHECK_FALSE(n.within_upper(1.14, 0.1));
}

TEST_CASE("Bartlett gate separates noise from signal") {
    std::mt19937_64 rng(10);
    // Independent 3-D windows of 9 samples: raw MI is biased high but
    // rarely significant.
    int false_hits = 0;
    for (int k = 0; k < 300; ++k) {
        const auto a = gaussian_window(9, 3, rng, 0.002);
        const auto b = gaussian_window(9, 3, rng, 0.002);
        const double mi = mutual_information(a, b);
        if (mi_significant(mi, 9, 3, 3, 1e-5)) ++false_hits;
    }
    CHECK(false_hits == 0);

    // A rigidly shared window is always significant.
    const auto a = gaussian_window(9, 3, rng);
    auto b = a;
    for (auto& v : b) v += Eigen::Vector3d(0.1, 0.0, 0.0);
    const double mi = mutual_information(a, b);
    CHECK(mi_significant(mi, 9, 3, 3, 1e-5));
}
