#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "dense.hpp"
#include "gpb.hpp"
#include "io.hpp"
#include "lanczos.hpp"
#include "model.hpp"
#include "scaling.hpp"
#include "typicality.hpp"

namespace spinbath {

namespace fs = std::filesystem;

/// Optional callbacks; `on_sample(n_up, grid_index)` runs after each recorded
/// sample (and after any checkpoint for it), and may throw to abort a run.
struct RunHooks {
    std::function<void(int, std::size_t)> on_sample;
};

struct DecayResult {
    TimeSeries series;
    SummaryRow row;
    RegimeLabel label;
    double d_eff_estimate = 0.0;
    std::string config_hash;
};

struct CostEstimate {
    double steps = 0.0;       ///< propagation steps per sector
    double order = 0.0;       ///< matvecs per step
    double nnz_products = 0.0; ///< total sparse multiply-adds
};

/// Rough work count of run_decay, for display before long runs.
inline CostEstimate estimate_cost(RunConfig const& cfg)
{
    cfg.validate();
    auto const bonds = static_cast<double>(bath_bonds(cfg.lattice, cfg.couplings).size());
    double const a = 0.75 * (bonds * cfg.couplings.J + 3.0 * cfg.dynamics.lambda) + 0.5 * cfg.couplings.B;
    CostEstimate c;
    double const t_max = cfg.t_max();
    double const dt = std::min(cfg.sample_interval(), cfg.dynamics.step_phase / a);
    c.steps = std::ceil(t_max / dt);
    c.order = a * dt + 12.0;
    double const dim = std::ldexp(1.0, cfg.num_spins());
    c.nnz_products = c.steps * c.order * dim * (1.0 + 0.5 * bonds);
    return c;
}

namespace detail {

inline fs::path checkpoint_path(RunConfig const& cfg, std::string const& hash, int n_up)
{
    return fs::path(cfg.outputs.checkpoint_dir) / ("ck_" + hash + "_s" + std::to_string(n_up) + ".bin");
}

/// Sector evolution with wall-time checkpoints and resume.
inline std::vector<double> evolve_member(RunConfig const& cfg, EnsembleMember const& m,
                                         std::vector<double> const& grid, std::string const& hash,
                                         RunHooks const& hooks)
{
    auto const h = build_total_hamiltonian(cfg.lattice, cfg.couplings, cfg.dynamics.lambda, m.sector);
    auto const a = system_sz(cfg.lattice, m.sector);
    LanczosOptions lo;
    lo.seed = mix64(static_cast<std::uint64_t>(m.sector.n_up()));
    EvolutionOptions eo = cfg.evolution_options();
    eo.bounds = estimate_spectral_bounds(h, cfg.dynamics.spectral_margin, lo);
    auto const plan_hash = plan_propagator(eo.bounds, default_time_step(eo.bounds, eo.chebyshev), eo.chebyshev).hash();

    std::vector<double> samples;
    StateVector state = m.state;
    std::size_t k0 = 0;
    bool const checkpointing = !cfg.outputs.checkpoint_dir.empty();
    fs::path const ck_path = checkpointing ? checkpoint_path(cfg, hash, m.sector.n_up()) : fs::path{};
    if (checkpointing && fs::exists(ck_path)) {
        auto ck = read_checkpoint(ck_path);
        bool const ok = ck.sector == m.sector.n_up() && ck.seed == cfg.initial.seed && ck.plan_hash == plan_hash &&
                        ck.amplitudes.size() == m.sector.dim() && ck.samples.size() == ck.grid_index + 1 &&
                        ck.grid_index < grid.size() && ck.time == grid[ck.grid_index];
        if (ok) {
            k0 = ck.grid_index;
            state = std::move(ck.amplitudes);
            samples = std::move(ck.samples);
        }
        else {
            std::clog << "warning: ignoring incompatible checkpoint " << ck_path << '\n';
        }
    }
    if (k0 + 1 == grid.size() && !samples.empty()) { return samples; }

    using clock = std::chrono::steady_clock;
    auto last_write = clock::now();
    auto save = [&](std::size_t k, StateVector const& psi) {
        Checkpoint ck;
        ck.sector = m.sector.n_up();
        ck.time = grid[k];
        ck.grid_index = k;
        ck.seed = cfg.initial.seed;
        ck.plan_hash = plan_hash;
        ck.amplitudes = psi;
        ck.samples = samples;
        fs::create_directories(ck_path.parent_path());
        write_checkpoint(ck_path, ck);
        last_write = clock::now();
    };
    std::vector<double> const sub(grid.begin() + static_cast<std::ptrdiff_t>(k0), grid.end());
    auto observer = [&](std::size_t k, double, double value, StateVector const& psi) {
        std::size_t const g = k0 + k;
        if (k == 0 && g < samples.size()) { return; }
        samples.push_back(value);
        if (checkpointing) {
            double const since = std::chrono::duration<double>(clock::now() - last_write).count();
            if (since >= cfg.dynamics.checkpoint_interval || g + 1 == grid.size()) { save(g, psi); }
        }
        if (hooks.on_sample) { hooks.on_sample(m.sector.n_up(), g); }
    };
    evolve_on_grid(h, std::move(state), sub, a, eo, observer);
    return samples;
}

} // namespace detail

/// Build, prepare, evolve and analyse one (L, lambda, seed) point.
inline DecayResult run_decay(RunConfig const& cfg, RunHooks const& hooks = {})
{
    cfg.validate();
    auto const grid = cfg.time_grid();
    auto const hash = config_hash(cfg);
    EnsembleOptions eo;
    eo.workers = cfg.workers;
    auto const ens = prepare_ensemble(cfg.lattice, cfg.couplings, cfg.initial_state(), eo);

    std::vector<std::vector<double>> parts(ens.members.size());
    parallel_for(ens.members.size(), cfg.workers, [&](std::size_t i) {
        parts[i] = detail::evolve_member(cfg, ens.members[i], grid, hash, hooks);
    });

    DecayResult r;
    r.config_hash = hash;
    r.d_eff_estimate = ens.d_eff_estimate;
    r.series.times = grid;
    r.series.values.assign(grid.size(), 0.0);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        for (std::size_t k = 0; k < grid.size(); ++k) { r.series.values[k] += ens.members[i].weight * parts[i][k]; }
    }
    r.series.meta = {cfg.num_spins(), cfg.lattice.L, cfg.dynamics.lambda, cfg.initial.seed,
                     to_string(cfg.couplings.mode)};

    auto const opts = cfg.analysis_options();
    AnalysisOptions lenient = opts;
    lenient.min_tail_samples = std::min<std::size_t>(opts.min_tail_samples, grid.size() / 4);
    r.label = classify_regime(r.series, cfg.dynamics.lambda, lenient);
    r.row.N = cfg.num_spins();
    r.row.L = cfg.lattice.L;
    r.row.lambda = cfg.dynamics.lambda;
    r.row.seed = cfg.initial.seed;
    r.row.coupling_mode = to_string(cfg.couplings.mode);
    r.row.longtime_avg = r.label.longtime_avg;
    r.row.tau_rel = r.label.tau_rel;
    r.row.censored = r.label.censored;
    r.row.fit_residual = r.label.fit_residual.value_or(std::nan(""));
    r.row.regime = to_string(r.label.regime);
    r.row.config_hash = hash;
    return r;
}

inline fs::path series_path(RunConfig const& cfg, std::string const& hash)
{
    return fs::path(cfg.outputs.dir) / ("series_" + hash + ".csv");
}

/// series_<hash>.csv and a one-row summary.csv in the output directory.
inline void write_decay_outputs(RunConfig const& cfg, DecayResult const& r)
{
    write_file_atomic(series_path(cfg, r.config_hash), series_csv(r.series, r.config_hash));
    write_file_atomic(fs::path(cfg.outputs.dir) / "summary.csv",
                      std::string(SummaryRow::header) + "\n" + r.row.to_csv() + "\n");
}

/// One configuration per sweep point, in output order (L, then lambda, then seed).
inline std::vector<RunConfig> sweep_points(RunConfig const& cfg)
{
    if (cfg.sweep.lambdas.empty()) { throw ConfigError("sweep: lambda grid is empty"); }
    auto Ls = cfg.sweep.L.empty() ? std::vector<int>{cfg.lattice.L} : cfg.sweep.L;
    auto seeds = cfg.sweep.seeds.empty() ? std::vector<std::uint64_t>{cfg.initial.seed} : cfg.sweep.seeds;
    std::vector<RunConfig> pts;
    for (int L : Ls) {
        for (double l : cfg.sweep.lambdas) {
            for (auto s : seeds) {
                RunConfig p = cfg;
                p.lattice.L = L;
                p.dynamics.lambda = l;
                p.initial.seed = s;
                p.sweep = {};
                p.validate();
                pts.push_back(std::move(p));
            }
        }
    }
    return pts;
}

struct LambdaCritRow {
    int N = 0;
    LambdaCrit crit;
};

/// lambda_crit per N from seed-averaged long-time averages of successful rows.
inline std::vector<LambdaCritRow> lambda_crit_table(std::vector<SummaryRow> const& rows, double threshold)
{
    std::map<int, std::map<double, std::pair<double, int>>> acc;
    for (auto const& r : rows) {
        if (r.regime == "failed" || !(r.lambda > 0.0) || std::isnan(r.longtime_avg)) { continue; }
        auto& cell = acc[r.N][r.lambda];
        cell.first += r.longtime_avg;
        cell.second += 1;
    }
    std::vector<LambdaCritRow> out;
    for (auto const& [N, curve] : acc) {
        std::vector<std::pair<double, double>> pts;
        for (auto const& [l, c] : curve) { pts.emplace_back(l, c.first / c.second); }
        out.push_back({N, find_lambda_crit(pts, threshold)});
    }
    return out;
}

/// Footer blocks appended after the data rows of a sweep summary.
inline std::string sweep_footer(RunConfig const& cfg, std::vector<SummaryRow> const& rows)
{
    std::ostringstream os;
    os << "\n# lambda_crit\nN,lambda_crit,found,nearest_lambda,nearest_avg\n";
    auto const crit = lambda_crit_table(rows, cfg.analysis.threshold);
    std::vector<std::pair<int, double>> fit_points;
    for (auto const& c : crit) {
        os << c.N << ',' << format_double(c.crit.value) << ',' << (c.crit.found ? 1 : 0) << ','
           << format_double(c.crit.nearest_lambda) << ',' << format_double(c.crit.nearest_avg) << '\n';
        if (c.crit.found) { fit_points.emplace_back(c.N, c.crit.value); }
    }

    os << "# fgr\nN,r,spread,warning,points\n";
    std::map<int, std::vector<std::pair<double, double>>> markov;
    for (auto const& r : rows) {
        if (r.regime == "Markovian" && !r.censored && r.tau_rel > 0.0) { markov[r.N].emplace_back(r.lambda, r.tau_rel); }
    }
    for (auto const& [N, pts] : markov) {
        if (pts.size() < 3) { continue; }
        auto const f = fit_fgr_constant(pts);
        os << N << ',' << format_double(f.r) << ',' << format_double(f.spread) << ',' << (f.warning ? 1 : 0) << ','
           << pts.size() << '\n';
    }

    os << "# scaling_fit\nC2,b,residual,points\n";
    if (fit_points.size() >= 3) {
        auto const f = fit_scaling(fit_points);
        os << format_double(f.C2) << ',' << format_double(f.b) << ',' << format_double(f.residual) << ','
           << fit_points.size() << '\n';
    }

    os << "# collapse\npoints,rms\n";
    std::vector<TimeSeries> series;
    for (auto const& r : rows) {
        if (r.regime != "Markovian") { continue; }
        auto const p = fs::path(cfg.outputs.dir) / ("series_" + r.config_hash + ".csv");
        if (fs::exists(p)) {
            auto s = read_series_csv(p);
            double const eq = r.longtime_avg;
            for (auto& v : s.values) { v = (v - eq) / (0.5 - eq); }
            series.push_back(std::move(s));
        }
    }
    if (series.size() >= 2) { os << series.size() << ',' << format_double(collapse_rms(series)) << '\n'; }
    return os.str();
}

struct SweepResult {
    std::vector<SummaryRow> rows;
    std::size_t resumed = 0; ///< points taken over from an earlier run
    std::size_t failed = 0;
};

/// Runs every sweep point not yet present in <dir>/sweep.csv, appending rows
/// in canonical order, then rewrites the footer blocks.
inline SweepResult run_sweep(RunConfig const& cfg, RunHooks const& hooks = {})
{
    cfg.validate();
    auto const points = sweep_points(cfg);
    fs::path const path = fs::path(cfg.outputs.dir) / "sweep.csv";
    fs::create_directories(cfg.outputs.dir);

    std::map<std::string, SummaryRow> done;
    if (fs::exists(path)) {
        try {
            for (auto& r : read_summary_rows(path)) { done[r.config_hash] = r; }
        }
        catch (ConfigError const&) {
            done.clear();
        }
    }
    SweepResult res;
    std::vector<std::optional<SummaryRow>> rows(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto const it = done.find(config_hash(points[i]));
        if (it != done.end() && it->second.regime != "failed") {
            rows[i] = it->second;
            ++res.resumed;
        }
    }

    // Rewrite the finished prefix, then append further rows as they complete in order.
    std::mutex io;
    std::size_t written = 0;
    std::ofstream os;
    auto flush_ready = [&] {
        while (written < rows.size() && rows[written]) {
            os << rows[written]->to_csv() << '\n';
            ++written;
        }
        os.flush();
    };
    {
        std::ostringstream head;
        head << SummaryRow::header << '\n';
        write_file_atomic(path, head.str());
        os.open(path, std::ios::app);
        flush_ready();
    }
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!rows[i]) { todo.push_back(i); }
    }
    int const outer = std::max(1, std::min<int>(cfg.workers, static_cast<int>(todo.size())));
    parallel_for(todo.size(), outer, [&](std::size_t j) {
        auto p = points[todo[j]];
        p.workers = std::max(1, cfg.workers / outer);
        SummaryRow row;
        try {
            auto const r = run_decay(p, hooks);
            write_file_atomic(series_path(p, r.config_hash), series_csv(r.series, r.config_hash));
            row = r.row;
        }
        catch (Error const& e) {
            std::clog << "sweep: point L=" << p.lattice.L << " lambda=" << p.dynamics.lambda
                      << " seed=" << p.initial.seed << " failed: " << e.what() << '\n';
            row.N = p.num_spins();
            row.L = p.lattice.L;
            row.lambda = p.dynamics.lambda;
            row.seed = p.initial.seed;
            row.coupling_mode = to_string(p.couplings.mode);
            row.config_hash = config_hash(p);
        }
        std::lock_guard lock(io);
        rows[todo[j]] = row;
        flush_ready();
    });
    os.close();
    for (auto& r : rows) {
        if (r->regime == "failed") { ++res.failed; }
        res.rows.push_back(*r);
    }
    std::ostringstream full;
    full << SummaryRow::header << '\n';
    for (auto const& r : res.rows) { full << r.to_csv() << '\n'; }
    full << sweep_footer(cfg, res.rows);
    write_file_atomic(path, full.str());
    return res;
}

struct GpbRun {
    GpbReport report;
    std::string tau_source; ///< "exact", "typical" or "none"
};

/// Full chain within the ED cap, curvature and lower bound only above it.
inline GpbRun run_gpb(RunConfig const& cfg)
{
    cfg.validate();
    double const lambda = cfg.dynamics.lambda;
    auto const m = build_sector_model(cfg.lattice, cfg.couplings, lambda);
    std::size_t max_dim = 0, pairs = 0;
    for (auto const& s : m.sectors) {
        max_dim = std::max(max_dim, s.dim());
        pairs += s.dim() * s.dim();
    }
    GpbRun run;
    GpbOptions go;
    go.eps_relative = cfg.gpb.eps_relative;
    if (max_dim <= cfg.ed_cap) {
        DiagonalizeOptions dopt;
        dopt.cap = cfg.ed_cap;
        dopt.workers = cfg.workers;
        auto const spec = diagonalize(m.h, m.labels(), dopt);
        auto const bath = diagonalize_bath_up(m, cfg.workers);
        auto const rho = product_state_rho(m, bath, cfg.bath_energy(), cfg.initial.delta);
        run.report = gpb_report(rho, m, spec, go);
        if (lambda > 0.0 && pairs <= 400000) {
            TimeSeries s;
            s.times = cfg.time_grid();
            s.values = exact_expectation_series(to_eigenbasis(rho, spec), to_eigenbasis(m.a, spec), spec, s.times);
            auto const eq = long_time_average(s, cfg.analysis.tail_fraction, std::min<std::size_t>(100, s.size() / 4));
            auto const rt = relaxation_time(s, eq);
            run.report.tau_rel = rt.tau;
            run.report.lower_bound = numerator_lower_bound(rt.tau, run.report.curvature, rt.censored);
            run.tau_source = "exact";
        }
    }
    else {
        run.report.partial = true;
        run.report.lambda = lambda;
        run.report.A_norm = 0.5;
        EnsembleOptions eo;
        eo.workers = cfg.workers;
        auto const ens = prepare_ensemble(cfg.lattice, cfg.couplings, cfg.initial_state(), eo);
        double curv = 0.0, c1 = 0.0, c2 = 0.0;
        for (auto const& mem : ens.members) {
            std::size_t const i = static_cast<std::size_t>(mem.sector.n_up());
            curv += mem.weight * state_nested_commutator(m.h[i], m.h[i], m.a[i], mem.state);
            c1 += mem.weight * state_nested_commutator(m.h0[i], m.h_int[i], m.a[i], mem.state);
            c2 += mem.weight * state_nested_commutator(m.h_int[i], m.h_int[i], m.a[i], mem.state);
        }
        run.report.curvature = std::abs(curv);
        run.report.c1 = c1;
        run.report.c2 = c2;
    }
    if (lambda > 0.0 && run.tau_source.empty()) {
        auto const d = run_decay(cfg);
        run.report.tau_rel = d.label.tau_rel;
        run.report.lower_bound = numerator_lower_bound(d.label.tau_rel, run.report.curvature, d.label.censored);
        run.tau_source = "typical";
    }
    if (!(lambda > 0.0)) {
        run.report.lower_bound = LowerBound{0.0, false};
        run.tau_source = "none";
    }
    return run;
}

inline json to_json(GpbReport const& r)
{
    json j{
        {"partial", r.partial},
        {"lambda", r.lambda},
        {"a", r.a},
        {"Q", r.Q},
        {"A_norm", r.A_norm},
        {"curvature", r.curvature},
        {"T_eq", r.T_eq_defined ? json(r.T_eq) : json(nullptr)},
        {"T_eq_defined", r.T_eq_defined},
        {"numerator", r.numerator},
        {"numerator_lower_bound", r.lower_bound ? json(r.lower_bound->value) : json(nullptr)},
        {"lower_bound_censored", r.lower_bound ? r.lower_bound->censored : false},
        {"tau_rel", r.tau_rel},
        {"c1", r.c1},
        {"c2", r.c2},
        {"sigma_G", r.sigma_G},
        {"w_max", r.w_max},
        {"epsilon", r.epsilon},
        {"epsilon_valid", r.epsilon_valid},
        {"excluded_mass", r.excluded_mass},
        {"support", r.support},
    };
    if (!r.partial && !r.scan.epsilon.empty()) {
        j["epsilon_scan"] = {{"epsilon", r.scan.epsilon},
                             {"a", r.scan.a},
                             {"distance", r.scan.distance},
                             {"plateau", r.scan.plateau}};
        std::vector<double> centers;
        for (std::size_t i = 0; i < r.hist.density.size(); ++i) { centers.push_back(r.hist.center(i)); }
        j["histogram"] = {{"epsilon", r.hist.epsilon}, {"centers", centers}, {"density", r.hist.density}};
    }
    return j;
}

inline std::string gpb_csv_header() { return "lambda,a,Q,curvature,T_eq,numerator,numerator_lower_bound"; }

inline std::string gpb_csv_row(GpbReport const& r)
{
    std::ostringstream os;
    os << format_double(r.lambda) << ',' << format_double(r.a) << ',' << format_double(r.Q) << ','
       << format_double(r.curvature) << ',' << format_double(r.T_eq_defined ? r.T_eq : std::nan("")) << ','
       << format_double(r.numerator) << ','
       << format_double(r.lower_bound ? r.lower_bound->value : std::nan(""));
    return os.str();
}

/// Ensemble manifest with filter diagnostics for every sector.
inline json run_filter_check(RunConfig const& cfg)
{
    cfg.validate();
    auto const spec = cfg.initial_state();
    EnsembleOptions eo;
    eo.workers = cfg.workers;
    auto const ens = prepare_ensemble(cfg.lattice, cfg.couplings, spec, eo);
    json sectors = json::array();
    double e_mean = 0.0, e2_mean = 0.0;
    double binom_total = 0.0;
    for (auto const& s : enumerate_sectors(cfg.lattice)) { binom_total += static_cast<double>(count_system_up(s)); }
    for (auto const& m : ens.members) {
        auto const hb = build_bath_hamiltonian(cfg.lattice, cfg.couplings, m.sector);
        auto const plan = plan_gaussian_filter(hb, spec.energy, spec.delta);
        auto const hx = hb.apply(m.state);
        double const e1 = inner(m.state, hx).real();
        double const e2 = inner(hx, hx).real();
        e_mean += m.weight * e1;
        e2_mean += m.weight * e2;
        sectors.push_back({{"n_up", m.sector.n_up()},
                           {"dim", m.sector.dim()},
                           {"seed", spec.seed},
                           {"raw_weight", m.raw_weight},
                           {"weight", m.weight},
                           {"binomial_weight", static_cast<double>(count_system_up(m.sector)) / binom_total},
                           {"filter_order", plan.order},
                           {"energy_mean", e1},
                           {"energy_variance", e2 - e1 * e1}});
    }
    json out{{"config_hash", config_hash(cfg)},
             {"N", cfg.num_spins()},
             {"energy", spec.energy},
             {"delta", spec.delta},
             {"beta_target", spec.beta_target},
             {"seed", spec.seed},
             {"d_eff_estimate", ens.d_eff_estimate},
             {"energy_mean", e_mean},
             {"energy_variance", e2_mean - e_mean * e_mean},
             {"sectors", sectors}};
    std::size_t max_dim = 0;
    for (auto const& s : enumerate_sectors(cfg.lattice)) { max_dim = std::max(max_dim, s.dim()); }
    if (max_dim <= cfg.ed_cap) {
        auto const m = build_sector_model(cfg.lattice, cfg.couplings, 0.0);
        out["d_eff_exact"] = exact_effective_dimension(diagonalize_bath_up(m, cfg.workers), spec.energy, spec.delta);
    }
    return out;
}

/// lambda_crit per N from sweep summaries, fitted to C2 N^{1/4} exp(-b N).
inline json run_scaling_fit(std::vector<SummaryRow> const& rows, double threshold)
{
    auto const crit = lambda_crit_table(rows, threshold);
    json pts = json::array();
    std::vector<std::pair<int, double>> fit_points;
    for (auto const& c : crit) {
        pts.push_back({{"N", c.N},
                       {"lambda_crit", c.crit.found ? json(c.crit.value) : json(nullptr)},
                       {"found", c.crit.found},
                       {"nearest_lambda", c.crit.nearest_lambda},
                       {"nearest_avg", c.crit.nearest_avg}});
        if (c.crit.found) { fit_points.emplace_back(c.N, c.crit.value); }
    }
    json out{{"threshold", threshold}, {"points", pts}};
    if (fit_points.size() < 3) {
        out["fit_error"] = "need lambda_crit at three or more N, have " + std::to_string(fit_points.size());
        return out;
    }
    auto const f = fit_scaling(fit_points);
    out["C2"] = f.C2;
    out["b"] = f.b;
    out["residual"] = f.residual;
    return out;
}

} // namespace spinbath
