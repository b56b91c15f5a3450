#include <map>
#include <random>

#include <gtest/gtest.h>

#include <spinbath/gpb.hpp>
#include <spinbath/typicality.hpp>

#include "oracles.hpp"

using namespace spinbath;

namespace {

DenseBlocks infinite_temperature(SectorModel const& m)
{
    return infinite_temperature_rho(m.a, std::size_t{1} << m.lattice.bath_spins());
}

/// Random density matrix block-diagonal in the sectors.
DenseBlocks random_rho(SectorModel const& m, unsigned seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g;
    DenseBlocks rho;
    double tr = 0.0;
    for (auto const& s : m.sectors) {
        auto const d = static_cast<Eigen::Index>(s.dim());
        DenseMatrix x(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) { x(i, j) = g(gen); }
        }
        rho.push_back(x * x.transpose());
        tr += rho.back().trace();
    }
    for (auto& b : rho) { b /= tr; }
    return rho;
}

/// Tr(rho [X, [Y, A]]) on full dense blocks.
double dense_nested(DenseBlocks const& rho, SparseBlocks const& x, SparseBlocks const& y, SparseBlocks const& a)
{
    double t = 0.0;
    for (std::size_t b = 0; b < rho.size(); ++b) {
        DenseMatrix const X = to_dense(x[b]), Y = to_dense(y[b]), A = to_dense(a[b]);
        DenseMatrix const ya = Y * A - A * Y;
        t += (rho[b] * (X * ya - ya * X)).trace();
    }
    return t;
}

GapDistribution lorentzian(double gamma, double cutoff, double spacing)
{
    std::vector<double> g, w;
    for (double x = -cutoff; x <= cutoff + 1e-12; x += spacing) {
        g.push_back(x);
        w.push_back(1.0 / (x * x + gamma * gamma));
    }
    return make_distribution(g, w);
}

} // namespace

TEST(Diagonalize, SmallAnalyticSpectra)
{
    auto const one = diagonalize(build_system_hamiltonian(CouplingSpec{}));
    auto const e1 = one.eigenvalues();
    ASSERT_EQ(e1.size(), 2u);
    EXPECT_NEAR(e1[0], -0.25, 1e-15);
    EXPECT_NEAR(e1[1], 0.25, 1e-15);

    auto const two = diagonalize(build_operator(SpinTerms{2, {{0, 1, 1.0}}, {}}, FullBasis(2))).eigenvalues();
    EXPECT_NEAR(two[0], -0.75, 1e-14);
    for (std::size_t i = 1; i < 4; ++i) { EXPECT_NEAR(two[i], 0.25, 1e-14); }

    DiagonalizeOptions small;
    small.cap = 10;
    EXPECT_THROW(diagonalize(build_operator(SpinTerms{4, {{0, 1, 1.0}}, {}}, FullBasis(4)), small), DimensionError);
}

TEST(Diagonalize, ResidualsAndOrthonormalityAtN10)
{
    auto const m = build_sector_model(LatticeSpec{3}, CouplingSpec{}, 0.2);
    auto const spec = diagonalize(m.h, m.labels());
    EXPECT_EQ(spec.dim(), 1024u);
    double const span = spec.span();
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        auto const& blk = spec.blocks[b];
        DenseMatrix const hv = sparse_times_dense(m.h[b], blk.vectors);
        DenseMatrix const r = hv - blk.vectors * blk.energies.asDiagonal();
        for (Eigen::Index j = 0; j < r.cols(); ++j) { EXPECT_LT(r.col(j).norm(), 1e-9 * span); }
        auto const d = blk.vectors.cols();
        EXPECT_LT((blk.vectors.transpose() * blk.vectors - DenseMatrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(GapDistribution, NormalisedAndSymmetric)
{
    auto const m = build_sector_model(LatticeSpec{2}, CouplingSpec{}, 0.2);
    auto const spec = diagonalize(m.h, m.labels());
    auto const rho = product_state_rho(m, diagonalize_bath_up(m), -0.9, 0.1);
    validate_density(rho);
    auto const d = build_gap_distribution(rho, m.a, spec);
    ASSERT_FALSE(d.empty());
    double sum = 0.0;
    for (double w : d.weights) { sum += w; }
    EXPECT_NEAR(sum, 1.0, 1e-12);

    // p(G) mass equals p(-G) mass.
    std::map<long long, double> mass;
    for (std::size_t i = 0; i < d.size(); ++i) { mass[std::llround(d.gaps[i] * 1e8)] += d.weights[i]; }
    for (auto const& [k, w] : mass) {
        auto const it = mass.find(-k);
        ASSERT_NE(it, mass.end());
        EXPECT_NEAR(w, it->second, 1e-12);
    }
    EXPECT_NEAR(d.mean(), 0.0, 1e-12);
}

TEST(GapDistribution, InfiniteTemperatureMassesAreMatrixElementSquares)
{
    auto const m = build_sector_model(LatticeSpec{2}, CouplingSpec{}, 0.2);
    auto const spec = diagonalize(m.h, m.labels());
    auto const rho = infinite_temperature(m);
    auto const d = build_gap_distribution(rho, m.a, spec);

    // Independent oracle: dense eigenvectors of the full H, |<j|A|k>|^2 off the degenerate pairs.
    auto const full = oracle::dense(build_total_hamiltonian(m.lattice, m.couplings, 0.2));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(full);
    Eigen::MatrixXcd const a = es.eigenvectors().adjoint() * oracle::dense(system_sz(m.lattice)) * es.eigenvectors();
    double const tol = 1e-12 * (es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff());
    double total = 0.0;
    std::vector<std::pair<double, double>> expect;
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            double const g = es.eigenvalues()[j] - es.eigenvalues()[k];
            double const w = std::norm(a(j, k));
            if (std::abs(g) > tol && w > 1e-24) {
                expect.emplace_back(g, w);
                total += w;
            }
        }
    }
    // Compare second moments and binned masses, which do not depend on the eigenbasis choice in degenerate subspaces.
    double m2_expect = 0.0;
    for (auto const& [g, w] : expect) { m2_expect += g * g * w / total; }
    EXPECT_NEAR(d.sigma() * d.sigma(), m2_expect, 1e-10);
    auto const h = histogram(d, 0.05);
    std::vector<double> bins(h.density.size(), 0.0);
    for (auto const& [g, w] : expect) {
        long const k = std::lround(g / 0.05) - h.k_min;
        ASSERT_GE(k, 0);
        ASSERT_LT(k, static_cast<long>(bins.size()));
        bins[static_cast<std::size_t>(k)] += w / total;
    }
    for (std::size_t i = 0; i < bins.size(); ++i) { EXPECT_NEAR(h.density[i] * 0.05, bins[i], 1e-10); }
    // Q = sum |A_jk|^2 / (dim_bath ||A||).
    EXPECT_NEAR(compute_Q(d, 0.5), total / 64.0 / 0.5, 1e-12);
}

TEST(Histogram, SingleMassAndNormalisation)
{
    auto const single = make_distribution({1.0}, {3.0});
    auto const h = histogram(single, 0.1);
    ASSERT_EQ(h.density.size(), 1u);
    EXPECT_NEAR(h.density[0], 10.0, 1e-12);
    EXPECT_NEAR(h.center(0), 1.0, 1e-12);
    EXPECT_THROW(histogram(single, 0.0), ConfigError);
    EXPECT_THROW(histogram(GapDistribution{}, 0.1), NumericError);
    EXPECT_THROW(make_distribution({1.0}, {-1.0}), ConfigError);

    std::mt19937_64 gen(5);
    std::normal_distribution<double> n;
    std::vector<double> g, w;
    for (int i = 0; i < 500; ++i) {
        g.push_back(n(gen));
        w.push_back(std::abs(n(gen)));
    }
    auto const d = make_distribution(g, w);
    for (double e : {1e-3, 0.01, 0.1, 0.5, 3.0}) { EXPECT_NEAR(histogram(d, e).integral(), 1.0, 1e-12); }
    EXPECT_TRUE(histogram(d, 1e-7).sparse);
    EXPECT_FALSE(histogram(d, 0.5).sparse);
}

TEST(ComputeA, BoxDensity)
{
    std::vector<double> g, w;
    int const n = 100000;
    for (int i = 0; i < n; ++i) {
        g.push_back(-2.0 + 4.0 * (i + 0.5) / n);
        w.push_back(1.0);
    }
    auto const d = make_distribution(g, w);
    auto const h = histogram(d, 0.01);
    EXPECT_NEAR(h.w_max, 0.25, 0.25 * 0.02);
    EXPECT_NEAR(h.sigma_G, 4.0 / std::sqrt(12.0), 1e-6);
    EXPECT_NEAR(compute_a(h), 1.0 / std::sqrt(12.0), 0.01);
}

TEST(ComputeA, TruncatedLorentzianGrowsWithCutoff)
{
    // sigma_G grows like sqrt(cutoff) while w_max stays near 1/(pi gamma).
    double const gamma = 1.0;
    auto const a1 = compute_a(histogram(lorentzian(gamma, 50.0, 0.01), 0.1));
    auto const a10 = compute_a(histogram(lorentzian(gamma, 500.0, 0.01), 0.1));
    double const ratio = a10 / a1;
    EXPECT_GE(ratio, 2.8);
    EXPECT_LE(ratio, 3.5);

    // Numerical-integration oracle for sigma_G.
    auto sigma = [&](double c) {
        double const z = 2.0 * std::atan(c / gamma) / gamma;
        return std::sqrt((2.0 * c - 2.0 * gamma * std::atan(c / gamma)) / z);
    };
    EXPECT_NEAR(lorentzian(gamma, 500.0, 0.01).sigma(), sigma(500.0), 0.01 * sigma(500.0));
}

TEST(ComputeA, InvariantUnderRescaling)
{
    auto const m = build_sector_model(LatticeSpec{2}, CouplingSpec{}, 0.2);
    auto const rho = infinite_temperature(m);
    auto const base = gpb_report(rho, m, diagonalize(m.h, m.labels()));
    for (double s : {2.0, 10.0}) {
        auto const ms = scaled(m, s);
        auto const r = gpb_report(rho, ms, diagonalize(ms.h, ms.labels()));
        EXPECT_NEAR(r.a, base.a, 1e-12 * base.a) << "s = " << s;
        EXPECT_NEAR(r.sigma_G, s * base.sigma_G, 1e-10 * s * base.sigma_G);
        EXPECT_NEAR(r.w_max, base.w_max / s, 1e-10 * base.w_max);
        EXPECT_NEAR(r.Q, base.Q, 1e-10);
        EXPECT_NEAR(r.curvature, s * s * base.curvature, 1e-9 * s * s * base.curvature);
    }
}

TEST(EpsilonScan, PlateauDetection)
{
    std::mt19937_64 gen(11);
    std::normal_distribution<double> n;
    std::vector<double> g, w;
    for (int i = 0; i < 1000000; ++i) {
        g.push_back(n(gen));
        w.push_back(1.0);
    }
    auto const smooth = make_distribution(g, w);
    auto const s = epsilon_independence_scan(smooth, geometric_grid(0.02, 0.2, 6));
    EXPECT_TRUE(s.plateau);
    EXPECT_EQ(s.plateau_first, 0u);
    EXPECT_EQ(s.plateau_last, 5u);
    EXPECT_GE(s.chosen_epsilon, 0.02);

    auto const three = make_distribution({-1.0, 0.3, 2.0}, {1.0, 2.0, 1.0});
    auto const t = epsilon_independence_scan(three, geometric_grid(0.001, 0.01, 6));
    EXPECT_FALSE(t.plateau);
    for (double d : t.distance) { EXPECT_GT(d, 0.05); }
    EXPECT_TRUE(std::isnan(t.chosen_epsilon));

    EXPECT_THROW(epsilon_independence_scan(smooth, {0.1, 0.2, 0.3, 0.4}), ConfigError);
    EXPECT_THROW(epsilon_independence_scan(smooth, {0.1, 0.2, 0.3, 0.4, 0.5}), ConfigError);
}

TEST(ComputeQ, CommutingObservableAndNorm)
{
    auto const m = build_sector_model(LatticeSpec{2}, CouplingSpec{}, 0.0);
    auto const spec = diagonalize(m.h, m.labels());
    auto const rho = product_state_rho(m, diagonalize_bath_up(m), -0.9, 0.1);
    auto const d = build_gap_distribution(rho, m.a, spec);
    EXPECT_TRUE(d.empty());
    EXPECT_EQ(compute_Q(rho, m.a, spec), 0.0);
    EXPECT_NEAR(operator_norm(m.a), 0.5, 1e-14);
    EXPECT_THROW(compute_Q(d, 0.0), NumericError);

    auto const r = gpb_report(rho, m, spec);
    EXPECT_TRUE(std::isnan(r.a));
    EXPECT_FALSE(r.T_eq_defined);
    EXPECT_NEAR(r.curvature, 0.0, 1e-14);
}

TEST(Curvature, DenseOracleAndLambdaZero)
{
    auto const m = build_sector_model(LatticeSpec{3}, CouplingSpec{}, 0.2);
    auto const rho = random_rho(m, 3);
    EXPECT_NEAR(nested_commutator_trace(rho, m.h, m.h, m.a), dense_nested(rho, m.h, m.h, m.a), 1e-12);
    EXPECT_NEAR(nested_commutator_trace(rho, m.h0, m.h_int, m.a), dense_nested(rho, m.h0, m.h_int, m.a), 1e-12);

    auto const m0 = build_sector_model(LatticeSpec{3}, CouplingSpec{}, 0.0);
    EXPECT_NEAR(initial_curvature(rho, m0.h, m0.a), 0.0, 1e-12);
}

TEST(Curvature, MatchesFiniteDifferenceOfPropagation)
{
    LatticeSpec const lat{3};
    CouplingSpec const cp;
    auto const m = build_sector_model(lat, cp, 0.2);
    MagnetizationSector const s(lat.num_spins(), 5);
    auto const hb = build_bath_hamiltonian(lat, cp, s);
    auto const psi = prepare_member(s, InitialStateSpec{-1.35, 0.1, 0.4, 9}, hb, 9).state;
    auto const& h = m.h[5];
    double const curv = state_curvature(h, m.a[5], psi);

    // Centred differences at steps 1e-3 and 2e-3, Richardson-extrapolated.
    double const step = 1e-3;
    auto const fwd = evolve(h, psi, {0.0, step, 2.0 * step}, m.a[5]);
    auto const bwd = evolve_on_grid(h, psi, {0.0, -step, -2.0 * step}, m.a[5]);
    double const d1 = (fwd.values[1] - 2.0 * fwd.values[0] + bwd.values[1]) / (step * step);
    double const d2 = (fwd.values[2] - 2.0 * fwd.values[0] + bwd.values[2]) / (4.0 * step * step);
    double const second = d1 + (d1 - d2) / 3.0;
    // d^2/dt^2 <A> = -<[H,[H,A]]>.
    EXPECT_NEAR(-second, curv, 1e-6 * std::abs(curv) + 1e-7);
    EXPECT_GT(std::abs(curv), 1e-4);
    EXPECT_NEAR(state_nested_commutator(h, h, m.a[5], psi), curv, 1e-12);
}

TEST(Curvature, CoefficientsOfProductStateAndRandomState)
{
    auto const m = build_sector_model(LatticeSpec{2}, CouplingSpec{}, 0.3);
    auto const rho = product_state_rho(m, diagonalize_bath_up(m), -0.9, 0.1);
    auto const cc = curvature_coefficients(rho, m.h0, m.h_int, m.a);
    EXPECT_LT(std::abs(cc.c1), 1e-10);
    EXPECT_GT(std::abs(cc.c2), 1e-6);

    auto const rr = random_rho(m, 8);
    auto const cr = curvature_coefficients(rr, m.h0, m.h_int, m.a);
    EXPECT_GT(std::abs(cr.c1), 1e-6);
    for (double l : {0.1, 0.5, 1.0}) {
        auto const ml = build_sector_model(m.lattice, m.couplings, l);
        EXPECT_NEAR(cr.curvature(l), initial_curvature(rr, ml.h, ml.a), 1e-9) << "lambda = " << l;
    }

    SparseBlocks ident;
    for (auto const& s : m.sectors) { ident.push_back(RealOperator::identity(s.dim())); }
    auto const ci = curvature_coefficients(rr, m.h0, m.h_int, ident);
    EXPECT_NEAR(ci.c1, 0.0, 1e-13);
    EXPECT_NEAR(ci.c2, 0.0, 1e-13);
}

TEST(GpbTime, FormulaAndIdentity)
{
    auto const t = gpb_time(1.0, 1.0, 0.5, 1.0);
    EXPECT_TRUE(t.defined);
    EXPECT_NEAR(t.T_eq, std::numbers::pi / std::sqrt(2.0), 1e-15);
    auto const u = gpb_time(0.37, 0.8, 0.5, 0.013);
    EXPECT_DOUBLE_EQ(u.T_eq * std::sqrt(0.013), u.numerator);
    auto const z = gpb_time(0.37, 0.8, 0.5, 0.0);
    EXPECT_FALSE(z.defined);
    EXPECT_TRUE(std::isinf(z.T_eq));
}

TEST(LowerBound, ScalingAndZero)
{
    // tau ~ 0.95 / lambda^2 and sqrt(curvature) ~ lambda give a bound ~ 1 / lambda.
    auto bound = [](double l) { return numerator_lower_bound(0.95 / (l * l), std::pow(0.3 * l, 2)).value; };
    EXPECT_NEAR(bound(0.05) / bound(0.1), 2.0, 1e-12);
    EXPECT_EQ(numerator_lower_bound(95.0, 0.0).value, 0.0);
    EXPECT_TRUE(numerator_lower_bound(95.0, 1.0, true).censored);
    EXPECT_THROW(numerator_lower_bound(-1.0, 1.0), ConfigError);
}

TEST(InfiniteTemperature, TraceAndAutocorrelation)
{
    auto const m = build_sector_model(LatticeSpec{2}, CouplingSpec{}, 0.2);
    auto const rho = infinite_temperature(m);
    EXPECT_NEAR(trace(rho), 1.0, 1e-15);
    validate_density(rho);
    EXPECT_THROW(infinite_temperature_rho(m.a, 0), DimensionError);

    auto const spec = diagonalize(m.h, m.labels());
    std::vector<double> const t{0.0, 0.7, 3.0, 11.0, 40.0};
    auto const series = exact_expectation_series(to_eigenbasis(rho, spec), to_eigenbasis(m.a, spec), spec, t);
    EXPECT_NEAR(series[0], 0.5, 1e-13);

    // Tr(A(t) A) / d_bath from the full dense Hamiltonian.
    auto const full = oracle::dense(build_total_hamiltonian(m.lattice, m.couplings, 0.2));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(full);
    Eigen::MatrixXcd const a = es.eigenvectors().adjoint() * oracle::dense(system_sz(m.lattice)) * es.eigenvectors();
    for (std::size_t n = 0; n < t.size(); ++n) {
        complex s = 0.0;
        for (Eigen::Index j = 0; j < a.rows(); ++j) {
            for (Eigen::Index k = 0; k < a.cols(); ++k) {
                s += std::norm(a(j, k)) * std::exp(complex(0.0, (es.eigenvalues()[j] - es.eigenvalues()[k]) * t[n]));
            }
        }
        EXPECT_NEAR(series[n], s.real() / 64.0, 1e-10) << "t = " << t[n];
    }
}

TEST(Fourier, TwoLevelToy)
{
    TimeSeries s;
    s.times = uniform_grid(0.1, 20001);
    for (double t : s.times) { s.values.push_back(0.5 * std::cos(0.5 * t)); }
    auto const h = histogram(make_distribution({0.5, -0.5}, {1.0, 1.0}), 0.05);
    auto const f = fourier_check(s, h);
    EXPECT_LT(f.l1, 0.05);

    TimeSeries shortened;
    shortened.times = uniform_grid(0.1, 100);
    shortened.values.assign(100, 0.0);
    EXPECT_THROW(fourier_check(shortened, h), ConfigError);
}

TEST(Fourier, InfiniteTemperatureSeriesMatchesHistogram)
{
    auto const m = build_sector_model(LatticeSpec{2}, CouplingSpec{}, 0.2);
    auto const spec = diagonalize(m.h, m.labels());
    auto const rho = infinite_temperature(m);
    auto const rho_e = to_eigenbasis(rho, spec);
    auto const a_e = to_eigenbasis(m.a, spec);
    auto const d = build_gap_distribution(rho_e, a_e, spec);
    auto const h = histogram(d, 0.25 * d.sigma());
    TimeSeries s;
    s.times = uniform_grid(0.1, static_cast<std::size_t>(100.0 * std::numbers::pi / h.epsilon / 0.1) + 1);
    s.values = exact_expectation_series(rho_e, a_e, spec, s.times);
    auto const f = fourier_check(s, h);
    EXPECT_LT(f.l1, 0.1);
}

TEST(Fourier, LorentzianHalfWidthOfExponential)
{
    double const tau = 20.0;
    TimeSeries s;
    s.times = uniform_grid(0.1, 8001);
    for (double t : s.times) { s.values.push_back(-0.05 + 0.55 * std::exp(-t / tau)); }
    EXPECT_NEAR(lorentzian_half_width(s, -0.05), 1.0 / tau, 0.15 / tau);
}

TEST(ExactSeries, MatchesChebyshevPropagation)
{
    LatticeSpec const lat{3};
    auto const m = build_sector_model(lat, CouplingSpec{}, 0.2);
    auto const block = diagonalize_block(m.h[4], 4, 8192);
    auto const psi = oracle::random_state(m.sectors[4].dim(), 17);
    auto const t = uniform_grid(2.5, 41);
    auto const exact = exact_state_series(block, m.a[4], psi, t);
    auto const cheb = evolve(m.h[4], psi, t, m.a[4]);
    EXPECT_LT(oracle::max_abs_diff(exact, cheb.values), 1e-10);
}

TEST(Report, ChainOnTheTenSpinModel)
{
    auto const m = build_sector_model(LatticeSpec{3}, CouplingSpec{}, 0.2);
    auto const spec = diagonalize(m.h, m.labels());
    auto const rho = product_state_rho(m, diagonalize_bath_up(m), -1.35, 0.1);
    auto const r = gpb_report(rho, m, spec);
    EXPECT_NEAR(r.A_norm, 0.5, 1e-14);
    EXPECT_NEAR(r.hist.integral(), 1.0, 1e-12);
    EXPECT_GT(r.a, 0.0);
    EXPECT_GT(r.Q, 0.0);
    EXPECT_TRUE(r.T_eq_defined);
    EXPECT_NEAR(r.T_eq * std::sqrt(r.curvature), r.numerator, 1e-12 * r.numerator);
    EXPECT_LT(std::abs(r.c1), 1e-10);
    EXPECT_NEAR(r.curvature, std::abs(r.c2) * 0.04, 1e-10);
    EXPECT_EQ(r.scan.a.size(), 6u);
}
