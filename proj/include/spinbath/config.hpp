#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "error.hpp"
#include "model.hpp"
#include "typicality.hpp"

namespace spinbath {

using json = nlohmann::json;

struct DynamicsConfig {
    double lambda = 0.1;
    std::optional<double> t_max;   ///< unset: 20 * 0.95 / lambda^2
    std::optional<double> dt;      ///< sampling interval; unset: t_max / samples
    std::size_t samples = 1000;
    double cheb_tol = 1e-14;
    double step_phase = 10.0;      ///< a * dt of one propagation step
    double spectral_margin = 0.02;
    double checkpoint_interval = 600.0; ///< seconds of wall time
};

struct InitialConfig {
    std::optional<double> energy; ///< unset: -0.15 (N - 1)
    double delta = 0.1;
    double beta_target = 0.4;
    std::uint64_t seed = 1;
};

struct AnalysisConfig {
    double tail_fraction = 0.5;
    double threshold = -0.04;
    double lambda_non_markovian = 0.3;
};

struct OutputConfig {
    std::string dir = "out";
    std::string checkpoint_dir; ///< empty: no checkpoints
};

struct SweepConfig {
    std::vector<double> lambdas;
    std::vector<int> L;
    std::vector<std::uint64_t> seeds;
};

struct GpbConfig {
    std::vector<double> lambdas;
    std::vector<double> eps_relative = geometric_grid(0.02, 0.2, 6);
};

struct RunConfig {
    LatticeSpec lattice;
    CouplingSpec couplings;
    InitialConfig initial;
    DynamicsConfig dynamics;
    AnalysisConfig analysis;
    OutputConfig outputs;
    SweepConfig sweep;
    GpbConfig gpb;
    std::size_t ed_cap = 8192;
    int workers = 1;

    int num_spins() const { return lattice.num_spins(); }

    double bath_energy() const { return initial.energy.value_or(default_bath_energy(num_spins())); }

    double t_max() const
    {
        if (dynamics.t_max) { return *dynamics.t_max; }
        double const l = dynamics.lambda;
        if (!(l > 0.0)) { throw ConfigError("dynamics.t_max is required when lambda = 0"); }
        return 20.0 * 0.95 / (l * l);
    }

    double sample_interval() const
    {
        return dynamics.dt ? *dynamics.dt : t_max() / static_cast<double>(dynamics.samples);
    }

    std::vector<double> time_grid() const
    {
        double const dt = sample_interval();
        auto const n = static_cast<std::size_t>(std::llround(t_max() / dt));
        return uniform_grid(dt, n + 1);
    }

    InitialStateSpec initial_state() const
    {
        return {bath_energy(), initial.delta, initial.beta_target, initial.seed};
    }

    AnalysisOptions analysis_options() const
    {
        AnalysisOptions o;
        o.tail_fraction = analysis.tail_fraction;
        o.threshold = analysis.threshold;
        o.lambda_non_markovian = analysis.lambda_non_markovian;
        return o;
    }

    EvolutionOptions evolution_options() const
    {
        EvolutionOptions o;
        o.chebyshev.tol = dynamics.cheb_tol;
        o.chebyshev.step_phase = dynamics.step_phase;
        return o;
    }

    void validate() const
    {
        lattice.validate();
        couplings.validate();
        if (!(initial.delta > 0.0)) { throw ConfigError("initial.delta must be > 0"); }
        if (!(dynamics.lambda >= 0.0)) { throw ConfigError("dynamics.lambda must be >= 0"); }
        if (dynamics.t_max && !(*dynamics.t_max > 0.0)) { throw ConfigError("dynamics.t_max must be > 0"); }
        if (dynamics.dt && !(*dynamics.dt > 0.0)) { throw ConfigError("dynamics.dt must be > 0"); }
        if (dynamics.samples < 2) { throw ConfigError("dynamics.samples must be >= 2"); }
        if (!(dynamics.cheb_tol > 0.0 && dynamics.cheb_tol < 1e-3)) {
            throw ConfigError("dynamics.cheb_tol must lie in (0, 1e-3)");
        }
        if (!(dynamics.step_phase > 0.0)) { throw ConfigError("dynamics.step_phase must be > 0"); }
        if (!(dynamics.spectral_margin >= 0.0)) { throw ConfigError("dynamics.spectral_margin must be >= 0"); }
        if (!(analysis.tail_fraction > 0.0 && analysis.tail_fraction <= 1.0)) {
            throw ConfigError("analysis.tail_fraction must lie in (0, 1]");
        }
        if (ed_cap < 1) { throw ConfigError("ed_cap must be >= 1"); }
        if (workers < 1) { throw ConfigError("workers must be >= 1"); }
        for (double l : sweep.lambdas) {
            if (!(l >= 0.0)) { throw ConfigError("sweep.lambdas must be >= 0"); }
        }
        for (int L : sweep.L) { LatticeSpec{L, lattice.periodic}.validate(); }
    }
};

namespace detail {

template <class T>
void read(json const& j, char const* key, T& out)
{
    if (!j.contains(key)) { return; }
    try {
        out = j.at(key).get<T>();
    }
    catch (json::exception const& e) {
        throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

template <class T>
void read(json const& j, char const* key, std::optional<T>& out)
{
    if (!j.contains(key)) { return; }
    if (j.at(key).is_null()) {
        out.reset();
        return;
    }
    T v{};
    read(j, key, v);
    out = v;
}

template <class T>
json opt(std::optional<T> const& v)
{
    return v ? json(*v) : json(nullptr);
}

inline void reject_unknown(json const& j, std::initializer_list<char const*> keys, std::string const& where)
{
    if (!j.is_object()) { throw ConfigError("config: '" + where + "' must be an object"); }
    for (auto const& [k, v] : j.items()) {
        bool known = false;
        for (auto const* key : keys) { known = known || k == key; }
        if (!known) { throw ConfigError("config: unknown key '" + where + "." + k + "'"); }
    }
}

inline json section(json const& j, char const* key)
{
    return j.contains(key) ? j.at(key) : json::object();
}

} // namespace detail

inline json to_json(RunConfig const& c)
{
    using detail::opt;
    return json{
        {"lattice", {{"L", c.lattice.L}, {"periodic", c.lattice.periodic}}},
        {"couplings",
         {{"mode", to_string(c.couplings.mode)},
          {"J", c.couplings.J},
          {"random_std", c.couplings.random_std},
          {"random_mean", c.couplings.random_mean},
          {"B", c.couplings.B},
          {"seed", c.couplings.seed}}},
        {"initial",
         {{"energy", opt(c.initial.energy)},
          {"delta", c.initial.delta},
          {"beta_target", c.initial.beta_target},
          {"seed", c.initial.seed}}},
        {"dynamics",
         {{"lambda", c.dynamics.lambda},
          {"t_max", opt(c.dynamics.t_max)},
          {"dt", opt(c.dynamics.dt)},
          {"samples", c.dynamics.samples},
          {"cheb_tol", c.dynamics.cheb_tol},
          {"step_phase", c.dynamics.step_phase},
          {"spectral_margin", c.dynamics.spectral_margin},
          {"checkpoint_interval", c.dynamics.checkpoint_interval}}},
        {"analysis",
         {{"tail_fraction", c.analysis.tail_fraction},
          {"threshold", c.analysis.threshold},
          {"lambda_non_markovian", c.analysis.lambda_non_markovian}}},
        {"outputs", {{"dir", c.outputs.dir}, {"checkpoint_dir", c.outputs.checkpoint_dir}}},
        {"sweep", {{"lambdas", c.sweep.lambdas}, {"L", c.sweep.L}, {"seeds", c.sweep.seeds}}},
        {"gpb", {{"lambdas", c.gpb.lambdas}, {"eps_relative", c.gpb.eps_relative}}},
        {"ed_cap", c.ed_cap},
        {"workers", c.workers},
    };
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig config_from_json(json const& j)
{
    using detail::read;
    using detail::section;
    detail::reject_unknown(j, {"lattice", "couplings", "initial", "dynamics", "analysis", "outputs", "sweep", "gpb",
                               "ed_cap", "workers"},
                           "config");
    RunConfig c;
    auto const lat = section(j, "lattice");
    detail::reject_unknown(lat, {"L", "periodic"}, "lattice");
    read(lat, "L", c.lattice.L);
    read(lat, "periodic", c.lattice.periodic);

    auto const cp = section(j, "couplings");
    detail::reject_unknown(cp, {"mode", "J", "random_std", "random_mean", "B", "seed"}, "couplings");
    std::string mode = to_string(c.couplings.mode);
    read(cp, "mode", mode);
    c.couplings.mode = coupling_mode_from_string(mode);
    read(cp, "J", c.couplings.J);
    read(cp, "random_std", c.couplings.random_std);
    read(cp, "random_mean", c.couplings.random_mean);
    read(cp, "B", c.couplings.B);
    read(cp, "seed", c.couplings.seed);

    auto const in = section(j, "initial");
    detail::reject_unknown(in, {"energy", "delta", "beta_target", "seed"}, "initial");
    read(in, "energy", c.initial.energy);
    read(in, "delta", c.initial.delta);
    read(in, "beta_target", c.initial.beta_target);
    read(in, "seed", c.initial.seed);

    auto const dy = section(j, "dynamics");
    detail::reject_unknown(dy, {"lambda", "t_max", "dt", "samples", "cheb_tol", "step_phase", "spectral_margin",
                                "checkpoint_interval"},
                           "dynamics");
    read(dy, "lambda", c.dynamics.lambda);
    read(dy, "t_max", c.dynamics.t_max);
    read(dy, "dt", c.dynamics.dt);
    read(dy, "samples", c.dynamics.samples);
    read(dy, "cheb_tol", c.dynamics.cheb_tol);
    read(dy, "step_phase", c.dynamics.step_phase);
    read(dy, "spectral_margin", c.dynamics.spectral_margin);
    read(dy, "checkpoint_interval", c.dynamics.checkpoint_interval);

    auto const an = section(j, "analysis");
    detail::reject_unknown(an, {"tail_fraction", "threshold", "lambda_non_markovian"}, "analysis");
    read(an, "tail_fraction", c.analysis.tail_fraction);
    read(an, "threshold", c.analysis.threshold);
    read(an, "lambda_non_markovian", c.analysis.lambda_non_markovian);

    auto const out = section(j, "outputs");
    detail::reject_unknown(out, {"dir", "checkpoint_dir"}, "outputs");
    read(out, "dir", c.outputs.dir);
    read(out, "checkpoint_dir", c.outputs.checkpoint_dir);

    auto const sw = section(j, "sweep");
    detail::reject_unknown(sw, {"lambdas", "L", "seeds"}, "sweep");
    read(sw, "lambdas", c.sweep.lambdas);
    read(sw, "L", c.sweep.L);
    read(sw, "seeds", c.sweep.seeds);

    auto const gp = section(j, "gpb");
    detail::reject_unknown(gp, {"lambdas", "eps_relative"}, "gpb");
    read(gp, "lambdas", c.gpb.lambdas);
    read(gp, "eps_relative", c.gpb.eps_relative);

    read(j, "ed_cap", c.ed_cap);
    read(j, "workers", c.workers);
    c.validate();
    return c;
}

inline RunConfig load_config(std::string const& path)
{
    std::ifstream is(path);
    if (!is) { throw ConfigError("config: cannot open " + path); }
    json j;
    try {
        j = json::parse(is);
    }
    catch (json::parse_error const& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

/// 64-bit FNV-1a of the canonical JSON of everything that shapes a single
/// run's numbers (paths, worker count and grids are left out), as hex.
inline std::string config_hash(RunConfig const& c)
{
    json j = to_json(c);
    for (auto const* k : {"outputs", "sweep", "gpb", "ed_cap", "workers"}) { j.erase(k); }
    j["dynamics"].erase("checkpoint_interval");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace spinbath
