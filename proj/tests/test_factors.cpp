#include "fme/factors.hpp"
#include "fme/simulate.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/LU>

using namespace fme;
using fme::test::max_abs;

namespace {

// Solves a small dense system by Gaussian elimination with partial pivoting.
Vector eliminate(Matrix a, Vector b)
{
    const Index n = a.rows();
    for (Index k = 0; k < n; ++k) {
        Index p = k;
        for (Index i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
        a.row(k).swap(a.row(p));
        std::swap(b(k), b(p));
        for (Index i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            for (Index j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            b(i) -= f * b(k);
        }
    }
    Vector x(n);
    for (Index i = n - 1; i >= 0; --i) {
        double s = b(i);
        for (Index j = i + 1; j < n; ++j) s -= a(i, j) * x(j);
        x(i) = s / a(i, i);
    }
    return x;
}

}  // namespace

TEST_CASE("OLS factors")
{
    std::mt19937_64 rng(40);
    const PanelData panel = make_panel(test::gaussian(15, 4, rng));

    Matrix e1 = Matrix::Zero(4, 1);
    e1(0, 0) = 1.0;
    CHECK(max_abs(factors_ols(panel, e1).col(0) - panel.values.col(0)) < 1e-15);

    const Matrix f = test::gaussian(15, 2, rng);
    const Matrix l = test::gaussian(6, 2, rng);
    CHECK(max_abs(factors_ols(make_panel(f * l.transpose()), l) - f) < 1e-9);

    const Matrix l3 = test::gaussian(4, 3, rng);
    const Matrix got = factors_ols(panel, l3);
    const Matrix normal = l3.transpose() * l3;
    for (Index t = 0; t < 15; ++t) {
        const Vector expect = eliminate(normal, l3.transpose() * panel.values.row(t).transpose());
        CHECK(max_abs(got.row(t).transpose() - expect) < 1e-10);
    }
}

TEST_CASE("GLS factors")
{
    std::mt19937_64 rng(41);
    const PanelData panel = make_panel(test::gaussian(12, 5, rng));
    const Matrix l = test::gaussian(5, 2, rng);
    CHECK(max_abs(factors_gls(panel, l, Vector::Ones(5)) - factors_ols(panel, l)) < 1e-12);

    Matrix x(2, 2);
    x << 1, 2, 0, 0;
    Matrix ones = Matrix::Ones(2, 1);
    Vector s2(2);
    s2 << 1, 4;
    CHECK(factors_gls(make_panel(x), ones, s2)(0, 0) == doctest::Approx(1.2).epsilon(1e-14));
}

TEST_CASE("GLS beats OLS on heteroskedastic data (diagnostic)")
{
    std::mt19937_64 rng(42);
    int wins = 0;
    const int reps = 50;
    for (int b = 0; b < reps; ++b) {
        const Matrix f = test::gaussian(40, 2, rng);
        const Matrix l = test::gaussian(30, 2, rng);
        const Vector s2 = test::uniform(30, 0.1, 5.0, rng);
        const Matrix e = test::gaussian(40, 30, rng) * s2.cwiseSqrt().asDiagonal();
        const PanelData panel = make_panel(f * l.transpose() + e);
        const double ols = (factors_ols(panel, l) - f).squaredNorm();
        const double gls = (factors_gls(panel, l, s2) - f).squaredNorm();
        wins += gls <= ols ? 1 : 0;
    }
    MESSAGE("GLS factor error <= OLS in " << wins << " of " << reps << " replications");
}

TEST_CASE("LP factors")
{
    std::mt19937_64 rng(43);
    const PanelData panel = make_panel(test::gaussian(20, 8, rng));
    const Matrix l = test::gaussian(8, 3, rng);
    const Vector s2 = test::uniform(8, 0.5, 2.0, rng);

    // Left-hand form L'(L L' + S)^{-1} x_t by direct n x n inversion.
    const Matrix omega_inv = (l * l.transpose() + Matrix(s2.asDiagonal())).inverse();
    const Matrix direct = panel.values * omega_inv * l;
    const Matrix lp = factors_lp(panel, l, s2);
    CHECK(max_abs(lp - direct) < 1e-10 * std::max(1.0, max_abs(direct)));

    // Shrinkage identity F_LP = (A + I)^{-1} A F_GLS with A = L' S^{-1} L.
    const Matrix a = l.transpose() * s2.cwiseInverse().asDiagonal() * l;
    const Matrix a_shrink = (a + Matrix::Identity(3, 3)).inverse() * a;
    const Matrix gls = factors_gls(panel, l, s2);
    CHECK(max_abs(lp - gls * a_shrink.transpose()) < 1e-10);

    Matrix l1(3, 1);
    l1 << 3, 3, 9;  // L'L = 99
    const PanelData p3 = make_panel(test::gaussian(5, 3, rng));
    CHECK(max_abs(factors_lp(p3, l1, Vector::Ones(3)) - 0.99 * factors_gls(p3, l1, Vector::Ones(3))) < 1e-14);
}

TEST_CASE("GLS and LP factors merge at rate 1/n")
{
    std::vector<double> gap;
    for (int n : {20, 50, 100, 200}) {
        double total = 0.0;
        const int reps = 20;
        for (int b = 0; b < reps; ++b) {
            DgpConfig dgp;
            dgp.n = n;
            dgp.seed = 4300 + static_cast<std::uint64_t>(b);
            const SimulatedPanel sim = simulate_panel(dgp);
            const Matrix d = factors_gls(sim.panel, sim.true_loadings, sim.true_idio_variances)
                             - factors_lp(sim.panel, sim.true_loadings, sim.true_idio_variances);
            total += d.rowwise().norm().maxCoeff();
        }
        gap.push_back(total / reps);
    }
    INFO("mean max_t gap: " << gap[0] << " " << gap[1] << " " << gap[2] << " " << gap[3]);
    for (std::size_t k = 1; k < gap.size(); ++k) CHECK(gap[k] < gap[k - 1]);
    // n * gap roughly constant: the tenfold increase in n shrinks the gap by well over 3x.
    CHECK(gap[3] < gap[0] / 3.0);
}

TEST_CASE("column reordering equivariance")
{
    std::mt19937_64 rng(44);
    const PanelData panel = make_panel(test::gaussian(10, 6, rng));
    const Matrix l = test::gaussian(6, 3, rng);
    const Vector s2 = test::uniform(6, 0.5, 2.0, rng);
    Eigen::PermutationMatrix<3> perm;
    perm.indices() << 2, 0, 1;
    const Matrix lp = l * perm;
    CHECK(max_abs(factors_ols(panel, lp) - factors_ols(panel, l) * perm) < 1e-12);
    CHECK(max_abs(factors_gls(panel, lp, s2) - factors_gls(panel, l, s2) * perm) < 1e-12);
    CHECK(max_abs(factors_lp(panel, lp, s2) - factors_lp(panel, l, s2) * perm) < 1e-12);
}

TEST_CASE("factor estimator errors")
{
    std::mt19937_64 rng(45);
    const PanelData panel = make_panel(test::gaussian(10, 4, rng));
    Matrix deficient(4, 2);
    deficient.col(0) = test::gaussian(4, 1, rng);
    deficient.col(1) = -deficient.col(0);
    CHECK_THROWS_AS(factors_ols(panel, deficient), DegenerateModelError);
    CHECK_THROWS_AS(factors_gls(panel, deficient, Vector::Ones(4)), DegenerateModelError);
    CHECK_THROWS_AS(factors_lp(panel, deficient, Vector::Ones(4)), DegenerateModelError);
    CHECK_THROWS_AS(factors_ols(panel, Matrix::Ones(3, 1)), InputError);
    CHECK_THROWS_AS(factors_gls(panel, Matrix::Ones(4, 1), Vector::Zero(4)), InputError);
    CHECK_THROWS_AS(factors_lp(panel, Matrix::Ones(4, 1), Vector::Ones(3)), InputError);
}
