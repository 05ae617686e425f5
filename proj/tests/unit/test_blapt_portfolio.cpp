#include "blfuse/blapt.hpp"
#include "blfuse/portfolio.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace blfuse;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }
Mat m1(double x) { return Mat::Constant(1, 1, x); }

double rel_max(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff()); }

FactorModel random_model(Rng& rng, Index n, Index k) {
    FactorModel fm;
    fm.exposures = oracle::random_matrix(rng, n, k);
    fm.idio_var = Vec(n);
    for (Index i = 0; i < n; ++i) fm.idio_var(i) = 0.01 + rng.uniform();
    fm.factor_cov = oracle::random_spd(rng, k);
    return fm;
}

}  // namespace

TEST_SUITE("blapt") {
    TEST_CASE("posterior_theta examples") {
        const auto p = posterior_theta(Prior{v1(0), m1(1)}, ViewSet{v1(2), v1(1)});
        CHECK(p.mean()(0) == doctest::Approx(1.0));
        CHECK(p.cov()(0, 0) == doctest::Approx(0.5));

        Vec xi(2), q(2), om(2);
        xi << 0.1, -0.2;
        q << 0.5, 0.3;
        om << 1e12, 1e12;
        const Mat v = Vec::Constant(2, 0.04).asDiagonal();
        const auto flat = posterior_theta(Prior{xi, v}, ViewSet{q, om});
        CHECK(rel_max(flat.mean(), xi) < 1e-6);
        CHECK(rel_max(flat.cov(), v) < 1e-6);

        om << 0.02, 0.08;
        const auto post = posterior_theta(Prior{xi, v}, ViewSet{q, om});
        for (Index j = 0; j < 2; ++j) {
            const double prec = 1.0 / 0.04 + 1.0 / om(j);
            CHECK(post.cov()(j, j) == doctest::Approx(1.0 / prec).epsilon(1e-12));
            CHECK(post.mean()(j) == doctest::Approx((xi(j) / 0.04 + q(j) / om(j)) / prec).epsilon(1e-12));
        }
    }

    TEST_CASE("posterior is tighter than prior and views; precision adds") {
        Rng rng(11);
        for (int trial = 0; trial < 50; ++trial) {
            const Mat v = oracle::random_spd(rng, 3);
            Vec om(3);
            for (Index j = 0; j < 3; ++j) om(j) = 0.05 + rng.uniform();
            const auto post = posterior_theta(Prior{oracle::random_vector(rng, 3), v}, ViewSet{oracle::random_vector(rng, 3), om});
            CHECK(is_consistent_wrt(v, post.cov()));
            CHECK(is_consistent_wrt(Mat(om.asDiagonal()), post.cov()));
            const Mat precision = oracle::gauss_jordan_inverse(v) + Mat(om.cwiseInverse().asDiagonal());
            CHECK(rel_max(oracle::gauss_jordan_inverse(post.cov()), precision) < 1e-10);
        }
    }

    TEST_CASE("more confident views pull the posterior toward q") {
        Vec xi = Vec::Zero(2), q(2);
        q << 1.0, -1.0;
        const Mat v = Mat::Identity(2, 2) * 0.5;
        const auto wide = posterior_theta(Prior{xi, v}, ViewSet{q, Vec::Constant(2, 1.0)});
        const auto tight = posterior_theta(Prior{xi, v}, ViewSet{q, Vec::Constant(2, 0.1)});
        for (Index j = 0; j < 2; ++j) CHECK(std::abs(tight.mean()(j) - q(j)) < std::abs(wide.mean()(j) - q(j)));
    }

    TEST_CASE("posterior_theta rejects singular inputs") {
        CHECK_THROWS_AS(posterior_theta(Prior{v1(0), m1(0)}, ViewSet{v1(1), v1(1)}), ValidationError);
        CHECK_THROWS_AS(posterior_theta(Prior{v1(0), m1(1)}, ViewSet{v1(1), v1(0)}), ValidationError);
    }

    TEST_CASE("predictive_factors examples") {
        const GaussianEstimate post(v1(1), m1(0.5));
        const auto f = predictive_factors(post, m1(2));
        CHECK(f.mean()(0) == 1.0);
        CHECK(f.cov()(0, 0) == doctest::Approx(2.5));
        const auto z = predictive_factors(post, m1(1e-15));
        CHECK(z.cov()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK_THROWS_AS(predictive_factors(post, Mat::Identity(2, 2)), ValidationError);
    }

    TEST_CASE("predictive_returns scalar example and X = 0") {
        FactorModel fm{m1(1), v1(1), m1(1)};
        const GaussianEstimate fq(v1(0.3), m1(1));
        const auto r = predictive_returns(fm, fq);
        CHECK(r.cov()(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(r.mean()(0) == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(optimal_weights_bl(fm, fq, 10.0)(0) == doctest::Approx(0.015).epsilon(1e-12));

        FactorModel zero{Mat::Zero(3, 2), Vec::Constant(3, 0.2), Mat()};
        const auto rz = predictive_returns(zero, GaussianEstimate(Vec::Constant(2, 0.1), Mat::Identity(2, 2)));
        CHECK(rel_max(rz.cov(), Mat(Vec::Constant(3, 0.2).asDiagonal())) < 1e-12);
        CHECK(rz.mean().cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("predictive_returns matches the Woodbury form on a random 6x2 instance") {
        Rng rng(12);
        const auto fm = random_model(rng, 6, 2);
        const GaussianEstimate fq(oracle::random_vector(rng, 2), oracle::random_spd(rng, 2));
        const auto r = predictive_returns(fm, fq);
        const Mat woodbury = Mat(fm.idio_var.asDiagonal()) + fm.exposures * fq.cov() * fm.exposures.transpose();
        CHECK(rel_max(r.cov(), woodbury) < 1e-8);
        CHECK(rel_max(r.mean(), fm.exposures * fq.mean()) < 1e-8);
    }

    TEST_CASE("optimal_weights_bl scaling and zero premium") {
        Rng rng(13);
        const auto fm = random_model(rng, 8, 3);
        const GaussianEstimate fq(oracle::random_vector(rng, 3), oracle::random_spd(rng, 3));
        const Vec h = optimal_weights_bl(fm, fq, 5.0);
        CHECK(rel_max(optimal_weights_bl(fm, fq, 10.0), h / 2.0) < 1e-14);
        const GaussianEstimate zero(Vec::Zero(3), fq.cov());
        CHECK(optimal_weights_bl(fm, zero, 5.0).cwiseAbs().maxCoeff() == 0.0);
        const auto pr = predictive_returns(fm, fq);
        CHECK(rel_max(h, oracle::gauss_jordan_inverse(pr.cov()) * pr.mean() / 5.0) < 1e-8);
        CHECK_THROWS_AS(optimal_weights_bl(fm, fq, 0.0), ValidationError);
    }

    TEST_CASE("ill-conditioned inner matrix reports the condition number") {
        // X'D^-1 X ~ 1e-6 against M^-1 ~ 1e11 pushes the inner condition past 1e12
        FactorModel fm{Mat::Identity(2, 2), Vec::Constant(2, 1e6), Mat()};
        Mat m = Mat::Zero(2, 2);
        m(0, 0) = 1e3;
        m(1, 1) = 1e-11;
        try {
            predictive_returns(fm, GaussianEstimate(Vec::Zero(2), m));
            FAIL("expected NumericalError");
        } catch (const NumericalError& e) {
            CHECK(e.condition() > 1e12);
        }
    }

    TEST_CASE("FusionSpec parsing") {
        CHECK(FusionSpec::parse("ci").method == FusionMethod::ci);
        CHECK(FusionSpec::parse("single:2").single_index == 2);
        CHECK(FusionSpec::parse("single").tag() == "single:0");
        CHECK_THROWS_AS(FusionSpec::parse("kalman"), ValidationError);
        CHECK_THROWS_AS(FusionSpec::parse("single:x"), ValidationError);
    }

    TEST_CASE("bl_pipeline composition") {
        Rng rng(14);
        const auto fm = random_model(rng, 5, 2);
        const Prior prior{Vec::Zero(2), Mat::Identity(2, 2) * 0.1};
        Vec q(2);
        q << 0.02, -0.01;
        const SourceViews src{"a", ViewSet{q, Vec::Constant(2, 0.05)}, Mat::Identity(2, 2) * 0.2};

        const auto single = bl_pipeline(prior, {src}, fm, FusionSpec::parse("single"), 10.0);
        const auto manual = optimal_weights_bl(fm, predictive_factors(posterior_theta(prior, src.views), src.factor_cov), 10.0);
        CHECK(rel_max(single.weights, manual) < 1e-14);

        const auto ci = bl_pipeline(prior, {src, src, src}, fm, FusionSpec::parse("ci"), 10.0);
        CHECK(rel_max(ci.weights, manual) < 1e-10);

        SourceViews empty_f = src;
        empty_f.factor_cov = Mat();
        FactorModel with_f = fm;
        with_f.factor_cov = src.factor_cov;
        const auto fallback = bl_pipeline(prior, {empty_f}, with_f, FusionSpec::parse("single"), 10.0);
        CHECK(rel_max(fallback.weights, manual) < 1e-14);
    }

    TEST_CASE("bl_pipeline two-source pw scalar chain") {
        FactorModel fm{m1(1), v1(1), Mat()};
        const Prior prior{v1(0), m1(1)};
        const SourceViews a{"a", ViewSet{v1(2), v1(1)}, m1(0.5)};
        const SourceViews b{"b", ViewSet{v1(4), v1(1)}, m1(0.5)};
        const auto r = bl_pipeline(prior, {a, b}, fm, FusionSpec::parse("pw"), 10.0);
        // per source: posterior (q/2, 1/2), predictive var 1; pw: mean (1 + 2)/2 = 1.5, var 0.5
        CHECK(r.factors.estimate.mean()(0) == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(r.factors.estimate.cov()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
        // weights = mean / (gamma var), var = D + X M X' = 1.5
        CHECK(r.weights(0) == doctest::Approx(1.5 / (10.0 * 1.5)).epsilon(1e-12));
    }
}

TEST_SUITE("portfolio") {
    TEST_CASE("markowitz examples") {
        Vec mu(2);
        mu << 0.1, 0.2;
        CHECK(markowitz_weights(mu, Mat::Identity(2, 2), 1.0).isApprox(mu));
        CHECK(markowitz_weights(mu, Mat::Identity(2, 2), 2.0).isApprox(mu / 2.0));
        Mat s(2, 2);
        s << 2, 0.5, 0.5, 1;
        Vec mu2 = Vec::Constant(2, 0.1);
        const double det = 2.0 * 1.0 - 0.25;
        Vec expected(2);
        expected << (1.0 * 0.1 - 0.5 * 0.1) / det, (-0.5 * 0.1 + 2.0 * 0.1) / det;
        const Vec w = markowitz_weights(mu2, s, 1.0);
        CHECK((w - expected).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((s * w - mu2).norm() <= 1e-10 * mu2.norm());
        CHECK_THROWS_AS(markowitz_weights(mu2, Mat::Zero(2, 2), 1.0), NumericalError);
        CHECK_THROWS_AS(markowitz_weights(mu2, s, -1.0), ValidationError);
    }

    TEST_CASE("impact matrix calibration") {
        const DiagMat l = impact_matrix(v1(100));
        CHECK(l.diagonal()(0) == doctest::Approx(0.002).epsilon(1e-15));
        CHECK(0.5 * l.diagonal()(0) * (0.01 * 100) == doctest::Approx(0.001).epsilon(1e-15));
        CHECK(impact_matrix(Vec::Constant(2, 5.0)).diagonal().isApprox(Vec::Constant(2, 0.04)));
        CHECK(impact_matrix(v1(300)).diagonal()(0) == doctest::Approx(0.002 / 3.0).epsilon(1e-15));
        CHECK_THROWS_AS(impact_matrix(v1(0)), ValidationError);
    }

    TEST_CASE("turnover and cost examples") {
        CHECK(turnover(v1(0.55), v1(0.5), v1(1.1), 1.0)(0) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(turnover(v1(0.5), v1(0.4), v1(1.0), 100.0)(0) == doctest::Approx(10.0).epsilon(1e-14));
        CHECK(turnover(v1(0.3), v1(0.3), v1(1.0), 7.0)(0) == 0.0);
        CHECK_THROWS_AS(turnover(Vec::Zero(2), Vec::Zero(3), Vec::Ones(2), 1.0), ValidationError);
        const DiagMat lam(v1(0.002));
        CHECK(transaction_cost_dollars(v1(0.0), lam) == 0.0);
        CHECK(transaction_cost_dollars(v1(10.0), lam) == doctest::Approx(0.1).epsilon(1e-15));
        CHECK(transaction_cost_dollars(v1(20.0), lam) == doctest::Approx(0.4).epsilon(1e-15));
    }

    TEST_CASE("optimal_weights_tc examples") {
        // Lambda = 1 needs L = 0.2
        const CostModel scalar{v1(0.2), 1.0, v1(1.0)};
        CHECK(optimal_weights_tc(v1(0.1), m1(1), 1.0, scalar, v1(0.2))(0) == doctest::Approx(0.15).epsilon(1e-14));

        Rng rng(15);
        const Mat sigma = oracle::random_spd(rng, 4);
        const Vec mu = oracle::random_vector(rng, 4) * 0.05;
        const Vec prev = oracle::random_vector(rng, 4);
        const CostModel cost{Vec::Constant(4, 1e6), 2e5, Vec::Constant(4, 1.02)};
        CHECK((optimal_weights_tc(mu, sigma, 3.0, cost, prev, 0.0) - markowitz_weights(mu, sigma, 3.0)).cwiseAbs().maxCoeff() < 1e-12);

        const CostModel heavy{Vec::Constant(4, 2e-10), 1.0, Vec::Constant(4, 1.02)};
        CHECK((optimal_weights_tc(mu, sigma, 3.0, heavy, prev) - heavy.realized_return_adj.cwiseProduct(prev)).cwiseAbs().maxCoeff() < 1e-6);
    }

    TEST_CASE("optimal_weights_tc is a stationary point of the cost-aware objective") {
        Rng rng(16);
        for (int trial = 0; trial < 20; ++trial) {
            const Index n = 5;
            const Mat sigma = oracle::random_spd(rng, n) * 0.01;
            const Vec mu = oracle::random_vector(rng, n) * 0.01;
            const Vec prev = oracle::random_vector(rng, n) * 0.2;
            Vec vol(n);
            for (Index i = 0; i < n; ++i) vol(i) = 1e6 * (0.5 + rng.uniform());
            const CostModel cost{vol, wealth_from_volumes(vol), Vec::Constant(n, 1.0) + oracle::random_vector(rng, n) * 0.05};
            const Vec w = optimal_weights_tc(mu, sigma, 10.0, cost, prev);
            const double h = 1e-6;
            for (Index i = 0; i < n; ++i) {
                Vec up = w, dn = w;
                up(i) += h;
                dn(i) -= h;
                const double grad = (tc_objective(up, mu, sigma, 10.0, cost, prev) - tc_objective(dn, mu, sigma, 10.0, cost, prev)) / (2 * h);
                CHECK(std::abs(grad) <= 1e-8);
            }
            const Vec drifted = cost.realized_return_adj.cwiseProduct(prev);
            CHECK((w - drifted).lpNorm<1>() <= (markowitz_weights(mu, sigma, 10.0) - drifted).lpNorm<1>() + 1e-12);
        }
    }

    TEST_CASE("wealth and drift conventions") {
        CHECK(wealth_from_volumes(Vec::Constant(3, 10.0)) == doctest::Approx(3.0));
        const Vec r = drift_adjustment(v1(0.1), 100.0, 50.0);
        CHECK(r(0) == doctest::Approx(2.2));
        CHECK_THROWS_AS(drift_adjustment(v1(0.1), 0.0, 1.0), ValidationError);
        const CostModel bad{v1(-1.0), 1.0, v1(1.0)};
        CHECK_THROWS_AS(bad.validate(), ValidationError);
    }
}
