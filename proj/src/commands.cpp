#include "echolab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "echolab/errors.hpp"
#include "echolab/format.hpp"

namespace echolab {

namespace fs = std::filesystem;

std::string_view to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

OutputFormat output_format_from_string(std::string_view s) {
    if (s == "csv") return OutputFormat::csv;
    if (s == "json") return OutputFormat::json;
    throw ValidationError("unknown output format: " + std::string(s));
}

EchoOptions EchoBlock::options(Interpolation method) const {
    EchoOptions o;
    o.method = method;
    o.extension = extension;
    o.nodes = nodes;
    o.half_width = half_width;
    o.check_convergence = check_convergence;
    return o;
}

void RunConfig::validate() const {
    if (!is_valid(truth)) throw ValidationError("truth parameters are not a valid skew-normal");
    if (params && !is_valid(*params)) throw ValidationError("params are not a valid skew-normal");
    pulses.pump.validate();
    pulses.probe.validate();
    if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be non-negative");
    fit.validate();
    if (fit_runs < 2) throw ValidationError("fit_runs must be at least 2");
    if (echo.methods.empty()) throw ValidationError("echo needs at least one interpolation method");
    if (echo.nodes < 4) throw ValidationError("echo quadrature needs at least 4 nodes per axis");
    if (!(echo.half_width > 0.0)) throw ValidationError("echo half_width must be positive");
    if (!(echo.tau_step_ms > 0.0) || !(echo.tau_max_ms > echo.tau_step_ms))
        throw ValidationError("echo tau grid needs 0 < step < max");
    if (echo.sweep && (echo.sweep_rho25.empty() || echo.sweep_rho05.empty()))
        throw ValidationError("sweep needs rho25 and rho05 values");
    trajectories.w0_window.validate();
    for (const auto& w : trajectories.w2_windows) w.validate();
    if (trajectories.w2_windows.empty()) throw ValidationError("trajectories need at least one w2 window");
    if (trajectories.samples == 0) throw ValidationError("trajectory sample count must be at least 1");
    if (trajectories.increment_points < 3) throw ValidationError("increment grid needs at least 3 points");
    baseline.lattice.validate();
    if (baseline.atoms == 0) throw ValidationError("baseline needs at least one atom");
    if (!std::isfinite(hole_pump_khz)) throw ValidationError("hole pump frequency must be finite");
}

// ---------------------------------------------------------------------------
// RunConfig JSON

namespace {

json methods_json(const std::vector<Interpolation>& methods) {
    json a = json::array();
    for (auto m : methods) a.push_back(std::string(to_string(m)));
    return a;
}

template <class T>
void take(const json& obj, const char* key, T& out, std::vector<std::string>& seen) {
    if (!obj.contains(key)) return;
    seen.emplace_back(key);
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& obj, const std::vector<std::string>& seen, const std::string& what) {
    for (const auto& item : obj.items())
        if (std::find(seen.begin(), seen.end(), item.key()) == seen.end())
            throw ValidationError(what + ": unknown key '" + item.key() + "'");
}

void require_object(const json& j, const std::string& what) {
    if (!j.is_object()) throw ValidationError(what + " must be a JSON object");
}

EchoBlock echo_from_json(const json& j) {
    require_object(j, "echo");
    EchoBlock b;
    std::vector<std::string> seen;
    std::vector<std::string> methods;
    for (auto m : b.methods) methods.emplace_back(to_string(m));
    std::string extension(to_string(b.extension));
    take(j, "methods", methods, seen);
    take(j, "extension", extension, seen);
    take(j, "nodes", b.nodes, seen);
    take(j, "half_width", b.half_width, seen);
    take(j, "check_convergence", b.check_convergence, seen);
    take(j, "tau_max_ms", b.tau_max_ms, seen);
    take(j, "tau_step_ms", b.tau_step_ms, seen);
    take(j, "plateau", b.plateau, seen);
    take(j, "family", b.family, seen);
    take(j, "sweep", b.sweep, seen);
    take(j, "sweep_rho25", b.sweep_rho25, seen);
    take(j, "sweep_rho05", b.sweep_rho05, seen);
    reject_unknown(j, seen, "echo");
    b.methods.clear();
    for (const auto& m : methods) b.methods.push_back(interpolation_from_string(m));
    b.extension = extension_from_string(extension);
    return b;
}

TrajectoryBlock trajectories_from_json(const json& j) {
    require_object(j, "trajectories");
    TrajectoryBlock b;
    std::vector<std::string> seen;
    std::string method(to_string(b.method)), extension(to_string(b.extension));
    take(j, "w0_window", b.w0_window, seen);
    take(j, "w2_windows", b.w2_windows, seen);
    take(j, "samples", b.samples, seen);
    take(j, "method", method, seen);
    take(j, "extension", extension, seen);
    take(j, "final_grid", b.final_grid, seen);
    take(j, "increment_points", b.increment_points, seen);
    reject_unknown(j, seen, "trajectories");
    b.method = interpolation_from_string(method);
    b.extension = extension_from_string(extension);
    return b;
}

BaselineBlock baseline_from_json(const json& j) {
    require_object(j, "baseline");
    BaselineBlock b;
    std::vector<std::string> seen;
    take(j, "lattice", b.lattice, seen);
    take(j, "atoms", b.atoms, seen);
    take(j, "export_trajectories", b.export_trajectories, seen);
    take(j, "plateau", b.plateau, seen);
    reject_unknown(j, seen, "baseline");
    return b;
}

std::string resolve(const std::string& p, const fs::path& base) {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal().string();
}

}  // namespace

void to_json(json& j, const RunConfig& c) {
    j = json::object();
    if (c.seed) j["seed"] = *c.seed;
    j["truth"] = c.truth;
    j["pulses"] = c.pulses;
    j["dataset_grid"] = c.dataset_grid;
    j["noise_sigma"] = c.noise_sigma;
    if (!c.dataset_path.empty()) j["dataset"] = c.dataset_path;
    if (!c.params_path.empty()) j["params_file"] = c.params_path;
    if (c.params) j["params"] = *c.params;
    j["fit"] = c.fit;
    j["fit_runs"] = c.fit_runs;
    j["echo"] = json{{"methods", methods_json(c.echo.methods)},
                     {"extension", std::string(to_string(c.echo.extension))},
                     {"nodes", c.echo.nodes},
                     {"half_width", c.echo.half_width},
                     {"check_convergence", c.echo.check_convergence},
                     {"tau_max_ms", c.echo.tau_max_ms},
                     {"tau_step_ms", c.echo.tau_step_ms},
                     {"plateau", c.echo.plateau},
                     {"family", c.echo.family},
                     {"sweep", c.echo.sweep},
                     {"sweep_rho25", c.echo.sweep_rho25},
                     {"sweep_rho05", c.echo.sweep_rho05}};
    j["trajectories"] = json{{"w0_window", c.trajectories.w0_window},
                             {"w2_windows", c.trajectories.w2_windows},
                             {"samples", c.trajectories.samples},
                             {"method", std::string(to_string(c.trajectories.method))},
                             {"extension", std::string(to_string(c.trajectories.extension))},
                             {"final_grid", c.trajectories.final_grid},
                             {"increment_points", c.trajectories.increment_points}};
    j["baseline"] = json{{"lattice", c.baseline.lattice},
                         {"atoms", c.baseline.atoms},
                         {"export_trajectories", c.baseline.export_trajectories},
                         {"plateau", c.baseline.plateau}};
    j["hole_pump_khz"] = c.hole_pump_khz;
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
    require_object(j, "config");
    RunConfig c;
    std::vector<std::string> seen;
    json echo = json::object(), traj = json::object(), base = json::object();
    std::uint64_t seed = 0;
    if (j.contains("seed")) {
        const auto& s = j.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) throw ValidationError("config: seed must be a non-negative integer");
        take(j, "seed", seed, seen);
        c.seed = seed;
    }
    take(j, "truth", c.truth, seen);
    take(j, "pulses", c.pulses, seen);
    take(j, "dataset_grid", c.dataset_grid, seen);
    take(j, "noise_sigma", c.noise_sigma, seen);
    take(j, "dataset", c.dataset_path, seen);
    take(j, "params_file", c.params_path, seen);
    if (j.contains("params")) {
        SkewNormalParams p;
        take(j, "params", p, seen);
        c.params = p;
    }
    take(j, "fit", c.fit, seen);
    take(j, "fit_runs", c.fit_runs, seen);
    take(j, "echo", echo, seen);
    take(j, "trajectories", traj, seen);
    take(j, "baseline", base, seen);
    take(j, "hole_pump_khz", c.hole_pump_khz, seen);
    reject_unknown(j, seen, "config");
    c.echo = echo_from_json(echo);
    c.trajectories = trajectories_from_json(traj);
    c.baseline = baseline_from_json(base);
    c.dataset_path = resolve(c.dataset_path, base_dir);
    c.params_path = resolve(c.params_path, base_dir);
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    const json j = read_json_file(path);
    return run_config_from_json(j, path.parent_path());
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) return 4;
    if (dynamic_cast<const ValidationError*>(&e)) return 2;
    if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const FitError*>(&e)) return 3;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 4;
    return 1;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

std::uint64_t require_seed(const RunConfig& c, const char* command) {
    if (!c.seed) throw ValidationError(std::string(command) + " needs a seed (--seed or \"seed\" in the config)");
    return *c.seed;
}

void prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

class Writer {
public:
    Writer(fs::path dir, CommandResult& result) : dir_(std::move(dir)), result_(result) {}

    void text(const std::string& name, const std::string& content) {
        write_text_file(dir_ / name, content);
        result_.files.push_back(name);
    }
    void json_file(const std::string& name, const json& j) { text(name, dump_json(j)); }
    template <class F>
    void stream(const std::string& name, F&& fill) {
        std::ostringstream os;
        fill(os);
        text(name, os.str());
    }

private:
    fs::path dir_;
    CommandResult& result_;
};

void write_config(Writer& w, const RunConfig& c) { w.json_file("run_config.json", json(c)); }

struct ParamSource {
    SkewNormalParams mean;
    std::vector<SkewNormalParams> runs;
    std::string origin;
};

ParamSource resolve_params(const RunConfig& c) {
    ParamSource s;
    if (!c.params_path.empty()) {
        const json j = read_json_file(c.params_path);
        if (j.is_object() && j.contains("table")) {
            s.mean = summary_mean_params(j);
            if (j.contains("run_params")) {
                try {
                    s.runs = j.at("run_params").get<std::vector<SkewNormalParams>>();
                } catch (const json::exception& e) {
                    throw ValidationError(std::string("fit summary run_params: ") + e.what());
                }
            }
            s.origin = "fit_summary";
        } else {
            try {
                s.mean = j.get<SkewNormalParams>();
            } catch (const json::exception& e) {
                throw ValidationError(std::string("params file: ") + e.what());
            }
            s.origin = "params_file";
        }
    } else if (c.params) {
        s.mean = *c.params;
        s.origin = "config_params";
    } else {
        s.mean = c.truth;
        s.origin = "truth";
    }
    SkewNormal check(s.mean);  // validates
    return s;
}

Dataset obtain_dataset(const RunConfig& c, std::uint64_t seed) {
    if (!c.dataset_path.empty()) return read_json_file(c.dataset_path).get<Dataset>();
    return synth_dataset(c.truth, c.pulses, c.dataset_grid, c.noise_sigma, seed);
}

json recovery_json(const SkewNormalParams& fitted, const SkewNormalParams& truth) {
    double mu = 0, sigma_rel = 0, rho = 0, alpha = 0;
    for (int i = 0; i < 3; ++i) {
        mu = std::max(mu, std::abs(fitted.mu_khz[i] - truth.mu_khz[i]));
        sigma_rel = std::max(sigma_rel, std::abs(fitted.sigma_khz[i] / truth.sigma_khz[i] - 1.0));
        rho = std::max(rho, std::abs(fitted.rho[i] - truth.rho[i]));
        alpha = std::max(alpha, std::abs(fitted.alpha[i] - truth.alpha[i]));
    }
    return json{{"max_abs_mu_khz", mu},
                {"max_rel_sigma", sigma_rel},
                {"max_abs_rho", rho},
                {"max_abs_alpha", alpha}};
}

void write_fit_runs_csv(std::ostream& os, const MultiFitResult& r) {
    os << "seed,ssr,ga_ssr,polished,evaluations,rejected,mu0_khz,mu2_khz,mu5_khz,sigma0_khz,sigma2_khz,sigma5_khz,"
          "rho02,rho25,rho05,alpha0,alpha2,alpha5,scale2,scale3,scale5,scale_probe\n";
    for (const auto& run : r.runs) {
        os << run.seed << ',' << format_number(run.ssr) << ',' << format_number(run.ga_ssr) << ','
           << (run.polished ? 1 : 0) << ',' << run.evaluations << ',' << run.rejected;
        for (const auto* a : {&run.params.mu_khz, &run.params.sigma_khz, &run.params.rho, &run.params.alpha})
            for (double v : *a) os << ',' << format_number(v);
        for (double v : run.scales) os << ',' << format_number(v);
        os << '\n';
    }
}

json fit_summary_json(const MultiFitResult& r, const Dataset& d, const FitConfig& fc) {
    json s = multi_fit_summary(r);
    s["fit_config"] = fc;
    s["dataset_seed"] = d.seed;
    s["noise_sigma"] = d.noise_sigma;
    if (d.truth) {
        s["truth"] = *d.truth;
        s["recovery"] = recovery_json(r.stats.mean, *d.truth);
    }
    return s;
}

MultiFitResult run_fits(const RunConfig& c, const Dataset& d, std::uint64_t seed) {
    FitConfig fc = c.fit;
    fc.seed = seed;
    return multi_fit(d, fc, c.fit_runs);
}

json free_dephasing_json(const SkewNormalParams& p) {
    const auto fd = free_dephasing(p, tau_grid(3.0, 0.005));
    SkewNormalParams g = p;
    g.alpha = {0.0, 0.0, 0.0};
    const auto gauss = free_dephasing(g, tau_grid(3.0, 0.005));
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"one_over_e_ms", opt(fd.one_over_e_ms)}, {"gaussian_one_over_e_ms", opt(gauss.one_over_e_ms)}};
}

void collect_warnings(const EchoCurve& curve, const std::string& label, CommandResult& result) {
    if (!curve.all_converged())
        result.warnings.push_back(label + ": quadrature not converged at some tau (max change " +
                                  format_number(curve.max_change) + ")");
}

void write_family_csv(std::ostream& os, const std::vector<std::pair<std::string, EchoCurve>>& curves) {
    os << "curve,interpolation,tau_ms,epsilon,converged_flag,model_dependent\n";
    for (const auto& [name, c] : curves)
        for (std::size_t t = 0; t < c.tau_ms.size(); ++t)
            os << name << ',' << to_string(c.method) << ',' << format_number(c.tau_ms[t]) << ','
               << format_number(c.epsilon[t]) << ',' << (c.converged[t] ? 1 : 0) << ','
               << (c.model_dependent[t] ? 1 : 0) << '\n';
}

std::string run_label(std::size_t i) {
    std::ostringstream os;
    os << "run" << (i + 1 < 10 ? "0" : "") << (i + 1);
    return os.str();
}

/// Mean curves for every configured method plus the per-run family (first method, no
/// convergence re-check).
struct EchoFamily {
    std::vector<std::pair<std::string, EchoCurve>> curves;
    json reports = json::object();
};

EchoFamily echo_family(const RunConfig& c, const ParamSource& src, bool family, CommandResult& result) {
    EchoFamily out;
    const auto taus = c.echo.taus();
    for (auto m : c.echo.methods) {
        auto curve = echo_amplitude(src.mean, taus, c.echo.options(m));
        collect_warnings(curve, std::string("mean/") + std::string(to_string(m)), result);
        out.reports[std::string(to_string(m))] = detect_plateau(curve, c.echo.plateau);
        out.curves.emplace_back("mean", std::move(curve));
    }
    if (family) {
        auto opts = c.echo.options(c.echo.methods.front());
        opts.check_convergence = false;
        for (std::size_t i = 0; i < src.runs.size(); ++i)
            out.curves.emplace_back(run_label(i), echo_amplitude(src.runs[i], taus, opts));
    }
    return out;
}

struct TrajectoryProducts {
    std::vector<TrajectorySample> samples;
    std::vector<std::pair<double, Spectrum1D>> finals;  ///< (w2 center, P_f)
    IncrementProjection increments;
    json summary;
};

TrajectoryProducts trajectory_products(const RunConfig& c, const SkewNormalParams& p, std::uint64_t seed) {
    const auto& tb = c.trajectories;
    TrajectoryProducts out;
    json windows = json::array();
    for (std::size_t k = 0; k < tb.w2_windows.size(); ++k) {
        const auto& w2 = tb.w2_windows[k];
        const auto first_id = out.samples.size();
        auto batch = sample_trajectories(p, tb.w0_window, w2, tb.samples, seed + k, tb.method, tb.extension);
        for (auto& s : batch) out.samples.push_back(std::move(s));
        auto pf = windowed_final_probability(p, tb.w0_window, w2, tb.final_grid);
        const auto peak = std::max_element(pf.values.begin(), pf.values.end()) - pf.values.begin();
        windows.push_back(json{{"w2_window", w2},
                               {"trajectory_ids", json::array({first_id, out.samples.size() - 1})},
                               {"final_mass", pf.mass()},
                               {"final_peak_khz", pf.freq_khz[static_cast<std::size_t>(peak)]}});
        out.finals.emplace_back(w2.center_khz, std::move(pf));
    }
    const SkewNormal model(p);
    const auto grids = default_increment_grids(model, tb.increment_points);
    out.increments = increment_projection(model, grids.first, grids.second);
    out.summary = json{{"w0_window", tb.w0_window},
                       {"interpolation", std::string(to_string(tb.method))},
                       {"extension", std::string(to_string(tb.extension))},
                       {"windows", std::move(windows)},
                       {"increment_mean_khz", json::array({out.increments.mean[0], out.increments.mean[1]})},
                       {"increment_covariance",
                        json::array({json::array({out.increments.cov(0, 0), out.increments.cov(0, 1)}),
                                     json::array({out.increments.cov(1, 0), out.increments.cov(1, 1)})})},
                       {"increment_correlation", out.increments.correlation}};
    return out;
}

void write_final_csv(std::ostream& os, const std::vector<std::pair<double, Spectrum1D>>& finals) {
    os << "w2_center_khz,freq_khz,probability\n";
    for (const auto& [center, pf] : finals)
        for (std::size_t i = 0; i < pf.freq_khz.size(); ++i)
            os << format_number(center) << ',' << format_number(pf.freq_khz[i]) << ',' << format_number(pf.values[i])
               << '\n';
}

void write_increment_csv(std::ostream& os, const IncrementProjection& inc) {
    const auto& g = inc.density;
    os << "d1_khz,d2_khz,density\n";
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t k = 0; k < g.cols(); ++k)
            os << format_number(g.pump_khz[i]) << ',' << format_number(g.probe_khz[k]) << ','
               << format_number(g.at(i, k)) << '\n';
}

struct BaselineProducts {
    BallisticEnsemble ensemble;
    BaselineEcho echo;
    TrajectoryCensus census;
    json summary;
};

BaselineProducts baseline_products(const RunConfig& c, std::uint64_t seed) {
    const auto& bb = c.baseline;
    BaselineProducts out;
    out.ensemble = ballistic_ensemble(bb.lattice, bb.atoms, seed);
    out.echo = baseline_echo(out.ensemble, c.echo.taus(), bb.plateau);
    out.census = baseline_trajectory_census(out.ensemble.trajectories);
    json nodes = json::array();
    for (double t : {0.0, 2.0, 5.0}) {
        double s1 = 0, s2 = 0;
        for (const auto& tr : out.ensemble.trajectories) {
            const double w = tr(t);
            s1 += w;
            s2 += w * w;
        }
        const double n = static_cast<double>(out.ensemble.trajectories.size());
        const double mean = s1 / n;
        nodes.push_back(json{{"time_ms", t},
                             {"mean_khz", mean},
                             {"sd_khz", std::sqrt(std::max(0.0, s2 / n - mean * mean))}});
    }
    out.summary = json{{"lattice", bb.lattice},
                       {"recoil_hz", bb.lattice.recoil_hz()},
                       {"peak_depth_er", bb.lattice.peak_depth_er()},
                       {"atoms", bb.atoms},
                       {"seed", seed},
                       {"node_statistics", std::move(nodes)},
                       {"census", out.census},
                       {"plateau", out.echo.plateau},
                       {"resolution_warning", out.echo.resolution_warning}};
    return out;
}

void write_baseline_trajectories(std::ostream& os, const BallisticEnsemble& e, std::size_t count) {
    std::vector<TrajectorySample> samples;
    const std::size_t n = std::min(count, e.trajectories.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& tr = e.trajectories[i];
        samples.push_back(TrajectorySample{{tr(0.0), tr(2.0), tr(5.0)}, tr, 1.0 / static_cast<double>(e.trajectories.size()), 0.0});
    }
    write_trajectories_csv(os, samples);
}

void write_hole_width_csv(std::ostream& os, const HoleWidthCurve& h) {
    os << "delay_ms,width_hz,fit_ok,instrumental_hz,inhomogeneous_hz\n";
    for (const auto& p : h.points)
        os << format_number(p.delay_ms) << ',' << format_number(p.width_hz) << ',' << (p.fit_ok ? 1 : 0) << ','
           << format_number(h.instrumental_hz) << ',' << format_number(h.inhomogeneous_hz) << '\n';
}

void write_fig3_csv(std::ostream& os, const Dataset& d, const std::optional<SkewNormalParams>& fitted) {
    os << "delay_ms,kind,pump_khz,probe_khz,value\n";
    auto rows = [&](const SpectrumGrid2D& g) {
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t k = 0; k < g.cols(); ++k)
                os << format_number(g.delay_ms) << ',' << to_string(g.kind) << ',' << format_number(g.pump_khz[i])
                   << ',' << format_number(g.probe_khz[k]) << ',' << format_number(g.at(i, k)) << '\n';
    };
    for (const auto& g : d.grids) rows(g);
    if (!fitted) return;
    const SkewNormal model(*fitted);
    const auto& axis_pump = d.grids[0].pump_khz;
    const auto& axis_probe = d.grids[0].probe_khz;
    const GridSpec pump{axis_pump.front(), axis_pump.back(), axis_step(axis_pump)};
    const GridSpec probe{axis_probe.front(), axis_probe.back(), axis_step(axis_probe)};
    for (double delay : kDelaysMs) {
        auto g = convolved_marginal(model, pair_for_delay(delay), d.pulses, pump, probe);
        g.delay_ms = delay;
        rows(g);
    }
    for (double delay : kDelaysMs) {
        auto g = sn_marginal_2d(model, pair_for_delay(delay)).evaluate(axis_pump, axis_probe);
        g.delay_ms = delay;
        g.kind = SpectrumKind::bare_marginal;
        rows(g);
    }
}

}  // namespace

CommandResult cmd_synth(const RunConfig& c, const fs::path& out_dir, OutputFormat format) {
    const auto seed = require_seed(c, "synth");
    prepare_dir(out_dir);
    CommandResult result;
    Writer w(out_dir, result);
    const auto d = synth_dataset(c.truth, c.pulses, c.dataset_grid, c.noise_sigma, seed);
    w.json_file("dataset.json", json(d));
    if (format == OutputFormat::csv) {
        w.stream("dataset_grids.csv", [&](std::ostream& os) { write_dataset_csv(os, d); });
        w.stream("probe_alone.csv", [&](std::ostream& os) { write_probe_alone_csv(os, d); });
    }
    write_config(w, c);
    return result;
}

CommandResult cmd_fit(const RunConfig& c, const fs::path& out_dir, OutputFormat format) {
    const auto seed = require_seed(c, "fit");
    const auto d = obtain_dataset(c, seed);
    prepare_dir(out_dir);
    CommandResult result;
    Writer w(out_dir, result);
    const auto r = run_fits(c, d, seed);
    for (auto s : r.failed_seeds) result.warnings.push_back("fit run with seed " + std::to_string(s) + " failed");
    FitConfig fc = c.fit;
    fc.seed = seed;
    w.json_file("fit_summary.json", fit_summary_json(r, d, fc));
    if (format == OutputFormat::csv)
        w.stream("fit_runs.csv", [&](std::ostream& os) { write_fit_runs_csv(os, r); });
    else
        w.json_file("fit_runs.json", json(r.runs));
    write_config(w, c);
    return result;
}

CommandResult cmd_echo(const RunConfig& c, const fs::path& out_dir, OutputFormat format) {
    const auto src = resolve_params(c);
    if (c.echo.family && src.runs.empty())
        throw ValidationError("echo family needs a fit summary with per-run parameters (params_file)");
    prepare_dir(out_dir);
    CommandResult result;
    Writer w(out_dir, result);
    json report{{"params_source", src.origin}, {"params", src.mean}};
    if (c.echo.sweep) {
        const auto cells = correlation_sweep(src.mean, c.echo.sweep_rho25, c.echo.sweep_rho05, c.echo.taus(),
                                             c.echo.options(c.echo.methods.front()), c.echo.plateau);
        json rows = json::array();
        std::size_t feasible = 0, detected = 0, wide = 0, wide_detected = 0;
        for (const auto& cell : cells) {
            if (cell.feasible && !cell.converged)
                result.warnings.push_back("sweep cell (" + format_number(cell.rho25) + ", " + format_number(cell.rho05) +
                                          ") not converged");
            feasible += cell.feasible;
            detected += cell.feasible && cell.report.detected;
            if (cell.feasible && cell.rho25 - cell.rho05 > 0.4) {
                ++wide;
                wide_detected += cell.report.detected;
            }
            json row{{"rho25", cell.rho25}, {"rho05", cell.rho05}, {"feasible", cell.feasible}, {"converged", cell.converged}};
            if (cell.feasible) row["plateau"] = cell.report;
            rows.push_back(std::move(row));
        }
        if (format == OutputFormat::csv)
            w.stream("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, cells); });
        else
            w.json_file("sweep.json", rows);
        report["sweep"] = json{{"interpolation", std::string(to_string(c.echo.methods.front()))},
                               {"cells", cells.size()},
                               {"feasible_cells", feasible},
                               {"plateau_cells", detected},
                               {"cells_difference_above_0.4", wide},
                               {"plateau_cells_difference_above_0.4", wide_detected}};
    } else {
        auto fam = echo_family(c, src, c.echo.family, result);
        for (const auto& [name, curve] : fam.curves) {
            if (name != "mean") continue;
            const std::string stem = "echo_" + std::string(to_string(curve.method));
            if (format == OutputFormat::csv)
                w.stream(stem + ".csv", [&](std::ostream& os) { write_echo_csv(os, curve); });
            else
                w.json_file(stem + ".json", json(curve));
        }
        if (c.echo.family) w.stream("echo_family.csv", [&](std::ostream& os) { write_family_csv(os, fam.curves); });
        report["plateau"] = fam.reports;
        report["free_dephasing"] = free_dephasing_json(src.mean);
    }
    report["warnings"] = result.warnings;
    w.json_file("echo_report.json", report);
    write_config(w, c);
    return result;
}

CommandResult cmd_traj(const RunConfig& c, const fs::path& out_dir, OutputFormat format) {
    const auto seed = require_seed(c, "traj");
    const auto src = resolve_params(c);
    prepare_dir(out_dir);
    CommandResult result;
    Writer w(out_dir, result);
    const auto products = trajectory_products(c, src.mean, seed);
    w.stream("trajectories.csv", [&](std::ostream& os) { write_trajectories_csv(os, products.samples); });
    w.stream("final_probability.csv", [&](std::ostream& os) { write_final_csv(os, products.finals); });
    w.stream("increment_projection.csv", [&](std::ostream& os) { write_increment_csv(os, products.increments); });
    json report = products.summary;
    report["params_source"] = src.origin;
    report["params"] = src.mean;
    w.json_file("traj_report.json", report);
    (void)format;  // trajectory exports are CSV only
    write_config(w, c);
    return result;
}

CommandResult cmd_baseline(const RunConfig& c, const fs::path& out_dir, OutputFormat format) {
    const auto seed = require_seed(c, "baseline");
    prepare_dir(out_dir);
    CommandResult result;
    Writer w(out_dir, result);
    const auto b = baseline_products(c, seed);
    if (b.echo.resolution_warning) result.warnings.push_back("baseline Monte Carlo standard error above 0.02");
    if (format == OutputFormat::csv)
        w.stream("baseline_echo.csv", [&](std::ostream& os) { write_echo_csv(os, b.echo.curve); });
    else
        w.json_file("baseline_echo.json", json(b.echo.curve));
    w.stream("baseline_trajectories.csv",
             [&](std::ostream& os) { write_baseline_trajectories(os, b.ensemble, c.baseline.export_trajectories); });
    json report = b.summary;
    report["warnings"] = result.warnings;
    w.json_file("baseline_report.json", report);
    write_config(w, c);
    return result;
}

const std::vector<std::string>& report_bundle_files() {
    static const std::vector<std::string> files{"fig3_grids.csv",
                                                "fig4_trajectories.csv",
                                                "fig4_final_probability.csv",
                                                "fig4d_increment_projection.csv",
                                                "fig5_echo.csv",
                                                "fig2c_hole_width.csv",
                                                "report.json"};
    return files;
}

CommandResult cmd_report(const RunConfig& c, const fs::path& out_dir, OutputFormat format) {
    const auto seed = require_seed(c, "report");
    prepare_dir(out_dir);
    (void)format;  // the bundle layout is fixed
    CommandResult result;
    Writer w(out_dir, result);
    json report = json::object();
    json stages = json::object();

    // Runs one stage; failures are recorded and later stages fall back where they can.
    auto stage = [&](const char* name, const std::function<void()>& body) {
        try {
            body();
            stages[name] = "ok";
            return true;
        } catch (const IoError&) {
            throw;  // the bundle itself cannot be written
        } catch (const std::exception& e) {
            stages[name] = std::string("failed: ") + e.what();
            if (result.exit_code == 0) result.exit_code = exit_code_for(e);
            return false;
        }
    };

    Dataset dataset;
    bool have_dataset = stage("synth", [&] {
        dataset = obtain_dataset(c, seed);
        report["dataset"] = json{{"seed", dataset.seed}, {"noise_sigma", dataset.noise_sigma},
                                 {"truth", dataset.truth ? json(*dataset.truth) : json(nullptr)}};
    });

    ParamSource src;
    src.mean = c.truth;
    src.origin = "truth";
    if (have_dataset) {
        stage("fit", [&] {
            const auto r = run_fits(c, dataset, seed);
            FitConfig fc = c.fit;
            fc.seed = seed;
            report["fit"] = fit_summary_json(r, dataset, fc);
            src.mean = r.stats.mean;
            for (const auto& run : r.runs) src.runs.push_back(run.params);
            src.origin = "fit_mean";
        });
    } else {
        stages["fit"] = "skipped: no dataset";
    }
    report["params_source"] = src.origin;

    if (have_dataset) {
        stage("fig3", [&] {
            std::optional<SkewNormalParams> fitted;
            if (src.origin == "fit_mean") fitted = src.mean;
            w.stream("fig3_grids.csv", [&](std::ostream& os) { write_fig3_csv(os, dataset, fitted); });
        });
    } else {
        stages["fig3"] = "skipped: no dataset";
    }

    stage("fig4", [&] {
        const auto products = trajectory_products(c, src.mean, seed);
        w.stream("fig4_trajectories.csv", [&](std::ostream& os) { write_trajectories_csv(os, products.samples); });
        w.stream("fig4_final_probability.csv", [&](std::ostream& os) { write_final_csv(os, products.finals); });
        w.stream("fig4d_increment_projection.csv",
                 [&](std::ostream& os) { write_increment_csv(os, products.increments); });
        report["trajectories"] = products.summary;
    });

    stage("fig5", [&] {
        auto fam = echo_family(c, src, !src.runs.empty(), result);
        w.stream("fig5_echo.csv", [&](std::ostream& os) { write_family_csv(os, fam.curves); });
        report["echo"] = json{{"plateau", fam.reports}, {"free_dephasing", free_dephasing_json(src.mean)}};
    });

    stage("fig2c", [&] {
        const SkewNormal model(src.mean);
        const auto h = hole_width_curve(model, c.hole_pump_khz, c.pulses);
        w.stream("fig2c_hole_width.csv", [&](std::ostream& os) { write_hole_width_csv(os, h); });
        report["hole_width"] = h;
        report["hole_width"]["pump_khz"] = c.hole_pump_khz;
    });

    stage("baseline", [&] {
        const auto b = baseline_products(c, seed);
        report["baseline"] = b.summary;
        if (b.echo.resolution_warning) result.warnings.push_back("baseline Monte Carlo standard error above 0.02");
    });

    json manifest = json::array();
    for (const auto& f : report_bundle_files()) {
        if (f == "report.json") continue;
        const bool present = std::find(result.files.begin(), result.files.end(), f) != result.files.end();
        manifest.push_back(json{{"file", f}, {"status", present ? "ok" : "missing"}});
    }
    manifest.push_back(json{{"file", "report.json"}, {"status", "ok"}});
    report["manifest"] = manifest;
    report["stages"] = stages;
    report["partial"] = result.exit_code != 0;
    report["warnings"] = result.warnings;
    report["seed"] = seed;
    report["config"] = json(c);
    w.json_file("report.json", report);
    return result;
}

}  // namespace echolab
