// Acceptance run: one PASS/FAIL line per criterion. Arguments select
// criteria by number; without arguments all of them run.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <tuple>

#include <spinbath/spinbath.hpp>

using namespace spinbath;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(char const* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void note(std::string const& s) { std::printf("    %s\n", s.c_str()); std::fflush(stdout); }

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Decays keyed by (L, lambda, coupling mode), shared between criteria.
DecayResult const& decay(int L, double lambda, CouplingMode mode = CouplingMode::uniform)
{
    static std::map<std::tuple<int, double, int>, DecayResult> cache;
    auto const key = std::make_tuple(L, lambda, static_cast<int>(mode));
    if (auto it = cache.find(key); it != cache.end()) { return it->second; }
    RunConfig c;
    c.lattice.L = L;
    c.couplings.mode = mode;
    c.dynamics.lambda = lambda;
    auto const t0 = std::chrono::steady_clock::now();
    auto r = run_decay(c);
    note(fmt("decay N=%d lambda=%g %s: avg=%.4f tau=%.3f%s residual=%.3g %s (%.0fs)", c.num_spins(), lambda,
             to_string(mode).c_str(), r.label.longtime_avg, r.label.tau_rel, r.label.censored ? " (censored)" : "",
             r.label.fit_residual.value_or(std::nan("")), to_string(r.label.regime).c_str(), seconds_since(t0)));
    return cache.emplace(key, std::move(r)).first->second;
}

struct EdModel {
    SectorModel m;
    SpectralData spec;
    DenseBlocks rho;
};

EdModel ed_product_state(int L, double lambda, double delta = 0.1)
{
    LatticeSpec const lat{L};
    EdModel e{build_sector_model(lat, CouplingSpec{}, lambda), {}, {}};
    e.spec = diagonalize(e.m.h, e.m.labels());
    e.rho = product_state_rho(e.m, diagonalize_bath_up(e.m), default_bath_energy(lat.num_spins()), delta);
    return e;
}

struct Line {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

Line fit_line(std::vector<double> const& x, std::vector<double> const& y)
{
    double const n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    Line l;
    l.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    l.intercept = (sy - l.slope * sx) / n;
    double const cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
    l.r2 = cov * cov / (vx * vy);
    return l;
}

std::vector<double> const scan_lambdas{2.0, 1.5, 1.0, 0.7, 0.5, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05};

LambdaCrit lambda_crit_at(int L)
{
    std::vector<std::pair<double, double>> curve;
    for (double l : scan_lambdas) { curve.emplace_back(l, decay(L, l).label.longtime_avg); }
    return find_lambda_crit(curve, AnalysisOptions{}.threshold);
}

Verdict propagator_oracle()
{
    auto const t0 = std::chrono::steady_clock::now();
    LatticeSpec const lat{3};
    CouplingSpec const cp;
    double const lambda = 0.2;
    auto const m = build_sector_model(lat, cp, lambda);
    auto const ens = prepare_ensemble(lat, cp, {default_bath_energy(lat.num_spins()), 0.1, 0.4, 1});
    auto const t = uniform_grid(0.5, 401);
    std::vector<double> cheb(t.size(), 0.0), exact(t.size(), 0.0);
    for (auto const& mem : ens.members) {
        auto const i = static_cast<std::size_t>(mem.sector.n_up());
        auto const c = evolve(m.h[i], mem.state, t, m.a[i]).values;
        auto const e = exact_state_series(diagonalize_block(m.h[i], mem.sector.n_up(), 8192), m.a[i], mem.state, t);
        for (std::size_t k = 0; k < t.size(); ++k) {
            cheb[k] += mem.weight * c[k];
            exact[k] += mem.weight * e[k];
        }
    }
    double dev = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) { dev = std::max(dev, std::abs(cheb[k] - exact[k])); }
    double const secs = seconds_since(t0);
    return {dev < 1e-8 && secs < 300.0, fmt("N=10 lambda=0.2 t<=200: max |dev| = %.2e (< 1e-8), runtime %.1fs (< 300s)", dev, secs)};
}

Verdict analytic_limit()
{
    auto const h = build_system_hamiltonian(CouplingSpec{});
    double const r = 1.0 / std::sqrt(2.0);
    auto const t = uniform_grid(0.01, 10001);
    auto const v = evolve(h, StateVector{r, r}, t, site_spin(1, 0, Axis::x)).values;
    double dev = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) { dev = std::max(dev, std::abs(v[k] - 0.5 * std::cos(0.5 * t[k]))); }
    return {dev < 1e-12, fmt("single spin |+x>, t<=100: max |<Sx> - cos(t/2)/2| = %.2e (< 1e-12)", dev)};
}

Verdict fgr_constant()
{
    std::vector<std::pair<double, double>> pts;
    bool within = true;
    std::string s;
    for (double l : {0.15, 0.2, 0.3}) {
        auto const& d = decay(6, l);
        double const x = d.label.tau_rel * l * l;
        within = within && !d.label.censored && std::abs(x / 0.95 - 1.0) <= 0.25;
        pts.emplace_back(l, d.label.tau_rel);
        s += fmt("%s%.3f", s.empty() ? "" : ", ", x);
    }
    auto const f = fit_fgr_constant(pts);
    double const spread = f.spread - 1.0;
    return {within && spread < 0.3,
            fmt("N=19 tau*lambda^2 at 0.15/0.2/0.3 = {%s} (0.95 +-25%%), spread %.1f%% (< 30%%), fitted %.3f", s.c_str(),
                100.0 * spread, f.r)};
}

Verdict regime_taxonomy()
{
    auto const& strong = decay(4, 1.0);
    auto const& mid = decay(4, 0.15);
    double const rs = strong.label.fit_residual.value_or(std::nan(""));
    double const rm = mid.label.fit_residual.value_or(std::nan(""));
    bool const nm = strong.label.regime == Regime::nonMarkovian && rs > 3.0 * rm;

    auto const ed = ed_product_state(4, 0.15);
    double const mc = microcanonical_value(ed.rho, ed.m, ed.spec, 0.1);
    bool const mk = mid.label.regime == Regime::Markovian && std::abs(mid.label.longtime_avg - mc) < 0.03;

    auto const lc = lambda_crit_at(4);
    bool sw = lc.found;
    if (lc.found) {
        for (double l : scan_lambdas) {
            if (l <= lc.value) { sw = sw && decay(4, l).label.longtime_avg > -0.04; }
        }
    }
    note(fmt("lambda=1.0: %s, residual %.3g vs 3 x %.3g", to_string(strong.label.regime).c_str(), rs, rm));
    note(fmt("lambda=0.15: %s, avg %.4f vs microcanonical %.4f", to_string(mid.label.regime).c_str(),
             mid.label.longtime_avg, mc));
    note(lc.found ? fmt("lambda_crit(13) = %.4f", lc.value)
                  : fmt("no -0.04 crossing; closest avg %.4f at lambda=%g", lc.nearest_avg, lc.nearest_lambda));
    return {nm && mk && sw, fmt("N=13 nonMarkovian at 1.0: %s; Markovian+thermal at 0.15: %s; superweak below lambda_crit: %s",
                                nm ? "yes" : "no", mk ? "yes" : "no", sw ? "yes" : "no")};
}

Verdict lambda_crit_scaling()
{
    std::vector<std::pair<int, double>> pts;
    bool found = true;
    for (int L : {3, 4, 5}) {
        auto const lc = lambda_crit_at(L);
        int const N = LatticeSpec{L}.num_spins();
        std::string curve;
        for (double l : scan_lambdas) { curve += fmt(" %g:%.3f", l, decay(L, l).label.longtime_avg); }
        note(fmt("N=%d avg(lambda):%s", N, curve.c_str()));
        if (lc.found) { pts.emplace_back(N, lc.value); }
        found = found && lc.found;
        note(lc.found ? fmt("N=%d lambda_crit = %.4f", N, lc.value) : fmt("N=%d no -0.04 crossing", N));
    }
    if (!found) { return {false, fmt("lambda_crit located at %zu of 3 sizes", pts.size())}; }
    bool const dec = pts[0].second > pts[1].second && pts[1].second > pts[2].second;
    auto const f = fit_scaling(pts);
    return {dec && f.b > 0.0 && f.residual < 0.2,
            fmt("lambda_crit(10,13,16) = %.4f, %.4f, %.4f; b = %.3f (> 0), residual %.3f (< 0.2)", pts[0].second,
                pts[1].second, pts[2].second, f.b, f.residual)};
}

Verdict curvature_law()
{
    auto const lambdas = geometric_grid(0.01, 1.0, 9);
    std::vector<double> slopes;
    bool ok = true;
    std::string s;
    for (int L : {3, 4}) {
        LatticeSpec const lat{L};
        auto const m0 = build_sector_model(lat, CouplingSpec{}, 0.0);
        auto const rho = product_state_rho(m0, diagonalize_bath_up(m0), default_bath_energy(lat.num_spins()), 0.1);
        auto const cc = curvature_coefficients(rho, m0.h0, m0.h_int, m0.a);
        std::vector<double> root;
        for (double l : lambdas) {
            auto const m = build_sector_model(lat, CouplingSpec{}, l);
            root.push_back(std::sqrt(initial_curvature(rho, m.h, m.a)));
        }
        auto const line = fit_line(lambdas, root);
        ok = ok && std::abs(cc.c1) < 1e-10 && line.r2 > 0.999 && std::abs(line.intercept) < 1e-8;
        slopes.push_back(line.slope);
        s += fmt("N=%d c1=%.1e R2=%.8f intercept=%.1e slope=%.5f; ", lat.num_spins(), std::abs(cc.c1), line.r2,
                 line.intercept, line.slope);
    }
    double const rel = std::abs(slopes[0] / slopes[1] - 1.0);
    return {ok && rel < 0.05, s + fmt("slope ratio off by %.2f%% (< 5%%)", 100.0 * rel)};
}

Verdict gpb_chain()
{
    auto const e = ed_product_state(3, 0.2);
    auto const dist = build_gap_distribution(to_eigenbasis(e.rho, e.spec), to_eigenbasis(e.m.a, e.spec), e.spec);
    double sum = 0.0;
    for (double w : dist.weights) { sum += w; }
    auto const r = gpb_report(e.rho, e.m, e.spec);
    auto const ms = scaled(e.m, 10.0);
    auto const r10 = gpb_report(e.rho, ms, diagonalize(ms.h, ms.labels()));
    double const da = std::abs(r10.a / r.a - 1.0);
    double const did = std::abs(r.numerator - r.T_eq * std::sqrt(r.curvature)) / r.numerator;
    bool ok = std::abs(sum - 1.0) < 1e-12 && std::abs(r.hist.integral() - 1.0) < 1e-12 && da < 1e-12 &&
              did < 8 * std::numeric_limits<double>::epsilon();

    std::vector<double> bounds;
    std::string s;
    for (double l : {0.2, 0.1, 0.05}) {
        RunConfig c;
        c.lattice.L = 3;
        c.dynamics.lambda = l;
        auto const g = run_gpb(c);
        bounds.push_back(g.report.lower_bound->value);
        s += fmt("%s%g:%.3f%s", s.empty() ? "" : ", ", l, bounds.back(), g.report.lower_bound->censored ? "(c)" : "");
    }
    bool const grows = bounds[1] > bounds[0] && bounds[2] > bounds[1];
    return {ok && grows, fmt("sum p-1 = %.1e, integral-1 = %.1e, a(10H)/a-1 = %.1e, identity %.1e; bound {%s} %s",
                             sum - 1.0, r.hist.integral() - 1.0, da, did, s.c_str(), grows ? "grows" : "does not grow")};
}

Verdict fourier_lorentzian()
{
    LatticeSpec const lat{2};
    auto const m = build_sector_model(lat, CouplingSpec{}, 0.2);
    auto const spec = diagonalize(m.h, m.labels());
    auto const rho = infinite_temperature_rho(m.a, std::size_t{1} << lat.bath_spins());
    auto const r = gpb_report(rho, m, spec);
    TimeSeries s;
    s.times = uniform_grid(0.1, static_cast<std::size_t>(100.0 * std::numbers::pi / r.hist.epsilon / 0.1) + 1);
    s.values = exact_expectation_series(to_eigenbasis(rho, spec), to_eigenbasis(m.a, spec), spec, s.times);
    auto const f = fourier_check(s, r.hist);

    auto lorentzian = [](double cutoff) {
        std::vector<double> g, w;
        for (double x = -cutoff; x <= cutoff + 1e-12; x += 0.01) {
            g.push_back(x);
            w.push_back(1.0 / (x * x + 1.0));
        }
        return compute_a(histogram(make_distribution(g, w), 0.1));
    };
    double const ratio = lorentzian(500.0) / lorentzian(50.0);
    return {f.l1 < 0.1 && ratio >= 2.8 && ratio <= 3.5,
            fmt("N=7 DFT vs w(G) at epsilon=%.3f sigma_G: L1 = %.4f (< 0.1); Lorentzian a ratio = %.3f (in [2.8, 3.5])",
                r.hist.epsilon / r.sigma_G, f.l1, ratio)};
}

Verdict typicality_scaling()
{
    LatticeSpec const lat{4};
    double const lambda = 0.2, t_star = 5.0, energy = default_bath_energy(lat.num_spins());
    int const seeds = 24;
    // Windows wider than the spectral width of S^z_sys(t), where the error follows d_eff.
    std::vector<double> const deltas{0.03, 0.1, 0.3, 1.0};
    auto const m = build_sector_model(lat, CouplingSpec{}, lambda);
    auto const spec = diagonalize(m.h, m.labels());
    auto const bath = diagonalize_bath_up(m);
    auto const a_e = to_eigenbasis(m.a, spec);
    auto const te = typicality_error_scaling(lat, CouplingSpec{}, {energy, 0.1, 0.4, 7}, lambda, seeds, deltas, t_star);
    std::vector<double> x, y;
    bool unbiased = true;
    for (auto const& e : te) {
        double const d = exact_effective_dimension(bath, energy, e.delta);
        double const exact =
            exact_expectation_series(to_eigenbasis(product_state_rho(m, bath, energy, e.delta), spec), a_e, spec, {t_star})[0];
        double m1 = 0.0, m2 = 0.0;
        for (int k = 0; k < seeds; ++k) { (k < seeds / 2 ? m1 : m2) += e.samples[k] / (seeds / 2); }
        double const se = e.std / std::sqrt(static_cast<double>(seeds));
        bool const ok = std::abs(e.mean - exact) < 3.0 * se && std::abs(m1 - m2) < 6.0 * se;
        unbiased = unbiased && ok;
        note(fmt("delta=%g d_eff=%.1f std=%.4e mean-exact=%.2e (3se %.2e) halves differ %.2e", e.delta, d, e.std,
                 e.mean - exact, 3.0 * se, m1 - m2));
        x.push_back(std::log(d));
        y.push_back(std::log(e.std));
    }
    auto const line = fit_line(x, y);
    return {line.slope >= -0.65 && line.slope <= -0.35 && unbiased,
            fmt("N=13 %d seeds: log-log slope %.3f (in [-0.65, -0.35]); zero-mean error %s", seeds, line.slope,
                unbiased ? "yes" : "no")};
}

Verdict coupling_robustness()
{
    auto const& u = decay(4, 0.2, CouplingMode::uniform);
    auto const& r = decay(4, 0.2, CouplingMode::random);
    double const rel = std::abs(r.label.tau_rel / u.label.tau_rel - 1.0);
    bool const same = u.label.regime == r.label.regime;
    return {rel <= 0.25 && same, fmt("N=13 lambda=0.2 tau uniform %.3f vs random %.3f (%.1f%%, <= 25%%); labels %s / %s",
                                     u.label.tau_rel, r.label.tau_rel, 100.0 * rel, to_string(u.label.regime).c_str(),
                                     to_string(r.label.regime).c_str())};
}

} // namespace

int main(int argc, char** argv)
{
    std::vector<std::function<Verdict()>> const criteria{
        propagator_oracle, analytic_limit,  fgr_constant, regime_taxonomy,    lambda_crit_scaling,
        curvature_law,     gpb_chain,       fourier_lorentzian, typicality_scaling, coupling_robustness};
    std::set<int> chosen;
    for (int i = 1; i < argc; ++i) { chosen.insert(std::atoi(argv[i])); }
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        int const id = static_cast<int>(i) + 1;
        if (!chosen.empty() && !chosen.contains(id)) { continue; }
        auto const t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i]();
        }
        catch (std::exception const& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::printf("criterion %d: %s  %s [%.0fs]\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
