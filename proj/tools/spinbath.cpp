// Command-line front end: decay, sweep, gpb, scaling-fit, filter-check.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <spinbath/spinbath.hpp>

namespace {

using spinbath::json;

enum Exit { ok = 0, failure = 1, config_error = 2, numeric_error = 3 };

/// Flags mirroring the JSON config; each one given on the command line
/// overrides the corresponding key of --config.
struct ConfigFlags {
    std::string path;
    std::vector<std::function<void(json&)>> apply;

    template <class T>
    void add(CLI::App* app, std::string const& flag, std::string const& pointer, std::string const& help)
    {
        auto value = std::make_shared<T>();
        auto* opt = app->add_option(flag, *value, help);
        apply.push_back([value, opt, pointer](json& j) {
            if (opt->count() > 0) { j[json::json_pointer(pointer)] = *value; }
        });
    }

    void attach(CLI::App* app)
    {
        app->add_option("--config", path, "JSON run configuration")->check(CLI::ExistingFile);
        add<int>(app, "--L", "/lattice/L", "ring length (N = 3L + 1)");
        add<bool>(app, "--periodic", "/lattice/periodic", "periodic rings");
        add<std::string>(app, "--coupling-mode", "/couplings/mode", "uniform | random");
        add<double>(app, "--J", "/couplings/J", "bath exchange");
        add<double>(app, "--B", "/couplings/B", "system field");
        add<double>(app, "--random-std", "/couplings/random_std", "std of random couplings");
        add<double>(app, "--random-mean", "/couplings/random_mean", "mean of random couplings");
        add<std::uint64_t>(app, "--coupling-seed", "/couplings/seed", "seed of random couplings");
        add<double>(app, "--energy", "/initial/energy", "bath filter energy");
        add<double>(app, "--delta", "/initial/delta", "filter variance");
        add<double>(app, "--beta-target", "/initial/beta_target", "nominal inverse temperature");
        add<std::uint64_t>(app, "--seed", "/initial/seed", "typical-state seed");
        add<double>(app, "--lambda", "/dynamics/lambda", "coupling strength");
        add<double>(app, "--t-max", "/dynamics/t_max", "final time");
        add<double>(app, "--dt", "/dynamics/dt", "sampling interval");
        add<std::size_t>(app, "--samples", "/dynamics/samples", "samples when --dt is unset");
        add<double>(app, "--cheb-tol", "/dynamics/cheb_tol", "Chebyshev truncation tolerance");
        add<double>(app, "--step-phase", "/dynamics/step_phase", "half-span times step");
        add<double>(app, "--spectral-margin", "/dynamics/spectral_margin", "relative widening of bounds");
        add<double>(app, "--checkpoint-interval", "/dynamics/checkpoint_interval", "seconds between checkpoints");
        add<double>(app, "--tail-fraction", "/analysis/tail_fraction", "tail used for the long-time average");
        add<double>(app, "--threshold", "/analysis/threshold", "superweak threshold on the average");
        add<double>(app, "--lambda-non-markovian", "/analysis/lambda_non_markovian", "non-Markovian boundary");
        add<std::string>(app, "--out", "/outputs/dir", "output directory");
        add<std::string>(app, "--checkpoint-dir", "/outputs/checkpoint_dir", "checkpoint directory");
        add<std::vector<double>>(app, "--lambdas", "/sweep/lambdas", "sweep lambda grid");
        add<std::vector<int>>(app, "--Ls", "/sweep/L", "sweep ring lengths");
        add<std::vector<std::uint64_t>>(app, "--seeds", "/sweep/seeds", "sweep seeds");
        add<std::vector<double>>(app, "--gpb-lambdas", "/gpb/lambdas", "gpb lambda grid");
        add<std::vector<double>>(app, "--eps-relative", "/gpb/eps_relative", "epsilon grid over sigma_G");
        add<std::size_t>(app, "--ed-cap", "/ed_cap", "largest sector for dense diagonalisation");
        add<int>(app, "--workers", "/workers", "threads");
    }

    spinbath::RunConfig resolve() const
    {
        json j = json::object();
        if (!path.empty()) {
            try {
                j = json::parse(spinbath::read_file(path));
            }
            catch (json::parse_error const& e) {
                throw spinbath::ConfigError(std::string("config: ") + e.what());
            }
        }
        for (auto const& f : apply) { f(j); }
        return spinbath::config_from_json(j);
    }
};

void print_cost(spinbath::RunConfig const& cfg)
{
    auto const c = spinbath::estimate_cost(cfg);
    std::fprintf(stderr, "N=%d lambda=%g t_max=%g: ~%.0f steps x %.0f terms, %.2e multiply-adds\n", cfg.num_spins(),
                 cfg.dynamics.lambda, cfg.t_max(), c.steps, c.order, c.nnz_products);
}

int cmd_decay(ConfigFlags const& flags)
{
    auto const cfg = flags.resolve();
    print_cost(cfg);
    auto const r = spinbath::run_decay(cfg);
    spinbath::write_decay_outputs(cfg, r);
    std::cout << spinbath::SummaryRow::header << '\n' << r.row.to_csv() << '\n';
    return ok;
}

int cmd_sweep(ConfigFlags const& flags)
{
    auto const cfg = flags.resolve();
    for (auto const& p : spinbath::sweep_points(cfg)) { print_cost(p); }
    auto const r = spinbath::run_sweep(cfg);
    std::cout << "sweep: " << r.rows.size() << " points, " << r.resumed << " resumed, " << r.failed << " failed -> "
              << (std::filesystem::path(cfg.outputs.dir) / "sweep.csv").string() << '\n';
    return r.failed == 0 ? ok : numeric_error;
}

int cmd_gpb(ConfigFlags const& flags)
{
    auto const cfg = flags.resolve();
    auto lambdas = cfg.gpb.lambdas.empty() ? std::vector<double>{cfg.dynamics.lambda} : cfg.gpb.lambdas;
    json reports = json::array();
    std::string csv = spinbath::gpb_csv_header() + "\n";
    for (double l : lambdas) {
        auto p = cfg;
        p.dynamics.lambda = l;
        if (l == 0.0 && !p.dynamics.t_max) { p.dynamics.t_max = 100.0; }
        auto const r = spinbath::run_gpb(p);
        auto j = spinbath::to_json(r.report);
        j["tau_source"] = r.tau_source;
        reports.push_back(j);
        csv += spinbath::gpb_csv_row(r.report) + "\n";
        std::cerr << "gpb: lambda=" << l << " a=" << r.report.a << " Q=" << r.report.Q
                  << " curvature=" << r.report.curvature << '\n';
    }
    std::filesystem::path const dir(cfg.outputs.dir);
    json const out{{"config", spinbath::to_json(cfg)}, {"config_hash", spinbath::config_hash(cfg)}, {"reports", reports}};
    spinbath::write_file_atomic(dir / "gpb.json", out.dump(2) + "\n");
    spinbath::write_file_atomic(dir / "gpb.csv", csv);
    std::cout << csv;
    return ok;
}

int cmd_filter_check(ConfigFlags const& flags)
{
    auto const cfg = flags.resolve();
    auto const out = spinbath::run_filter_check(cfg);
    spinbath::write_file_atomic(std::filesystem::path(cfg.outputs.dir) / "ensemble.json", out.dump(2) + "\n");
    std::cout << out.dump(2) << '\n';
    return ok;
}

struct ScalingArgs {
    std::vector<std::string> inputs;
    double threshold = -0.04;
    std::string output = "scaling.json";
    int eth_L = 0;
    double beta = 0.4;
};

int cmd_scaling_fit(ScalingArgs const& a)
{
    std::vector<spinbath::SummaryRow> rows;
    for (auto const& f : a.inputs) {
        auto r = spinbath::read_summary_rows(f);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    auto out = spinbath::run_scaling_fit(rows, a.threshold);
    if (a.eth_L > 0) {
        spinbath::LatticeSpec lat{a.eth_L};
        spinbath::CouplingSpec cp;
        auto const m = spinbath::build_sector_model(lat, cp, 0.0);
        double const target = 0.25 + spinbath::default_bath_energy(lat.num_spins());
        auto const eth = spinbath::measure_eth_constant(m, target);
        auto const bath = spinbath::to_dense(spinbath::build_bath_hamiltonian(lat, cp, spinbath::BathSpace::bath_only));
        Eigen::SelfAdjointEigenSolver<spinbath::DenseMatrix> es(bath, Eigen::EigenvaluesOnly);
        std::vector<double> e(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
        auto const dos = spinbath::fit_gaussian_dos(e, lat.bath_spins());
        spinbath::DosModel const model{dos.alpha_moment, a.beta};
        out["eth"] = {{"L", a.eth_L},       {"C1", eth.C1},         {"spread", eth.spread},
                      {"states", eth.states}, {"pairs", eth.pairs}, {"alpha_moment", dos.alpha_moment},
                      {"alpha_fit", dos.alpha_fit}, {"b_predicted", spinbath::scaling_exponent(model)},
                      {"C2_matched", spinbath::matched_C2(eth.C1)}};
        if (out.contains("b")) { out["alpha_from_b"] = spinbath::alpha_from_exponent(out["b"].get<double>(), a.beta); }
    }
    spinbath::write_file_atomic(a.output, out.dump(2) + "\n");
    std::cout << out.dump(2) << '\n';
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"spin-bath relaxation dynamics"};
    app.require_subcommand(1);

    ConfigFlags decay_flags, sweep_flags, gpb_flags, filter_flags;
    auto* decay = app.add_subcommand("decay", "relax the system spin for one configuration");
    decay_flags.attach(decay);
    auto* sweep = app.add_subcommand("sweep", "decay over a grid of L, lambda and seeds");
    sweep_flags.attach(sweep);
    auto* gpb = app.add_subcommand("gpb", "relaxation-time estimate from exact diagonalisation");
    gpb_flags.attach(gpb);
    auto* filter = app.add_subcommand("filter-check", "ensemble manifest and filter diagnostics");
    filter_flags.attach(filter);

    ScalingArgs scaling_args;
    auto* scaling = app.add_subcommand("scaling-fit", "lambda_crit(N) from sweep summaries");
    scaling->add_option("inputs", scaling_args.inputs, "sweep summary CSV files")->required()->check(CLI::ExistingFile);
    scaling->add_option("--threshold", scaling_args.threshold, "superweak threshold");
    scaling->add_option("--output", scaling_args.output, "JSON result");
    scaling->add_option("--eth-L", scaling_args.eth_L, "also measure C1 and alpha at this ring length");
    scaling->add_option("--beta", scaling_args.beta, "inverse temperature for the predicted exponent");

    try {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e) {
        int const code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*decay) { return cmd_decay(decay_flags); }
        if (*sweep) { return cmd_sweep(sweep_flags); }
        if (*gpb) { return cmd_gpb(gpb_flags); }
        if (*filter) { return cmd_filter_check(filter_flags); }
        if (*scaling) { return cmd_scaling_fit(scaling_args); }
    }
    catch (spinbath::ConfigError const& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    }
    catch (spinbath::DimensionError const& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    }
    catch (spinbath::NumericError const& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return numeric_error;
    }
    catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
    return ok;
}
