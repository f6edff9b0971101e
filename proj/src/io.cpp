#include "echolab/io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "echolab/errors.hpp"
#include "echolab/format.hpp"

namespace echolab {

double round_output(double v) {
    if (!std::isfinite(v) || v == 0.0) return v;
    return std::strtod(format_number(v).c_str(), nullptr);
}

namespace {

void round_tree(json& j) {
    if (j.is_number_float()) {
        const double v = j.get<double>();
        j = std::isfinite(v) ? json(round_output(v)) : json(nullptr);
    } else if (j.is_structured()) {
        for (auto& child : j) round_tree(child);
    }
}

// Strict object reader: tracks which keys were consumed and rejects the rest.
class Reader {
public:
    Reader(const json& j, std::string what) : j_(j), what_(std::move(what)) {
        if (!j.is_object()) throw ValidationError(what_ + " must be a JSON object");
    }

    template <class T>
    void optional(const char* key, T& out) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        convert(j_.at(key), key, out);
    }

    template <class T>
    void required(const char* key, T& out) {
        if (!j_.contains(key)) throw ValidationError(what_ + ": missing key '" + key + "'");
        optional(key, out);
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw ValidationError(what_ + ": unknown key '" + item.key() + "'");
    }

private:
    template <class T>
    void convert(const json& v, const char* key, T& out) const {
        try {
            if constexpr (std::is_same_v<T, std::array<double, 3>> || std::is_same_v<T, std::array<double, 4>>) {
                if (!v.is_array() || v.size() != std::tuple_size_v<T>)
                    throw ValidationError(what_ + ": '" + key + "' must hold " +
                                          std::to_string(std::tuple_size_v<T>) + " numbers");
            }
            if constexpr (std::is_arithmetic_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number()) throw ValidationError(what_ + ": '" + key + "' must be a number");
                if constexpr (std::is_integral_v<T>) {
                    if (!v.is_number_integer()) throw ValidationError(what_ + ": '" + key + "' must be an integer");
                    if constexpr (std::is_unsigned_v<T>) {
                        if (v.is_number_integer() && !v.is_number_unsigned())
                            throw ValidationError(what_ + ": '" + key + "' must be non-negative");
                    }
                }
            }
            out = v.get<T>();
        } catch (const json::exception& e) {
            throw ValidationError(what_ + ": bad value for '" + key + "': " + e.what());
        }
    }

    const json& j_;
    std::string what_;
    std::set<std::string> seen_;
};

std::vector<double> checked_axis(const json& j, const char* what) {
    if (!j.is_array() || j.size() < 2) throw ValidationError(std::string(what) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw ValidationError(std::string(what) + " must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

json matrix(const SpectrumGrid2D& g) {
    json rows = json::array();
    for (std::size_t i = 0; i < g.rows(); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < g.cols(); ++k) row.push_back(g.at(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string dump_json(const json& j, int indent) {
    json copy = j;
    round_tree(copy);
    return copy.dump(indent) + "\n";
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path.string());
    return ss.str();
}

json read_json_file(const std::filesystem::path& path) { return parse_json(read_text_file(path)); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

void to_json(json& j, const SkewNormalParams& p) {
    j = json{{"mu_khz", p.mu_khz},
             {"sigma_khz", p.sigma_khz},
             {"rho", p.rho},
             {"alpha", p.alpha},
             {"node_times_ms", p.node_times_ms}};
}

void from_json(const json& j, SkewNormalParams& p) {
    Reader r(j, "skew-normal parameters");
    r.required("mu_khz", p.mu_khz);
    r.required("sigma_khz", p.sigma_khz);
    r.required("rho", p.rho);
    r.required("alpha", p.alpha);
    r.optional("node_times_ms", p.node_times_ms);
    r.finish();
}

void to_json(json& j, const PulseSpec& p) {
    j = json{{"omega_m_khz", p.omega_m_khz}, {"amplitude_rad", p.amplitude_rad}, {"cycles", p.cycles}};
}

void from_json(const json& j, PulseSpec& p) {
    Reader r(j, "pulse");
    r.optional("omega_m_khz", p.omega_m_khz);
    r.optional("amplitude_rad", p.amplitude_rad);
    r.optional("cycles", p.cycles);
    r.finish();
    p.validate();
}

void to_json(json& j, const PulsePair& p) { j = json{{"pump", p.pump}, {"probe", p.probe}}; }

void from_json(const json& j, PulsePair& p) {
    Reader r(j, "pulses");
    r.optional("pump", p.pump);
    r.optional("probe", p.probe);
    r.finish();
}

void to_json(json& j, const GridSpec& g) { j = json{{"lo_khz", g.lo}, {"hi_khz", g.hi}, {"step_khz", g.step}}; }

void from_json(const json& j, GridSpec& g) {
    Reader r(j, "grid");
    r.optional("lo_khz", g.lo);
    r.optional("hi_khz", g.hi);
    r.optional("step_khz", g.step);
    r.finish();
    if (!(g.step > 0.0) || !(g.hi > g.lo) || !std::isfinite(g.lo) || !std::isfinite(g.hi))
        throw ValidationError("grid needs lo < hi and step > 0");
}

void to_json(json& j, const Dataset& d) {
    json grids = json::array();
    for (const auto& g : d.grids) grids.push_back(matrix(g));
    json spectra = json::array();
    for (const auto& p : d.probe_alone) spectra.push_back(p.values);
    j = json{{"format", "echolab-dataset"},
             {"version", 1},
             {"delays_ms", kDelaysMs},
             {"pump_khz", d.grids[0].pump_khz},
             {"probe_khz", d.grids[0].probe_khz},
             {"grids", std::move(grids)},
             {"probe_alone", std::move(spectra)},
             {"pulses", d.pulses},
             {"seed", d.seed},
             {"noise_sigma", d.noise_sigma}};
    if (d.truth) j["truth"] = *d.truth;
}

void from_json(const json& j, Dataset& d) {
    Reader r(j, "dataset");
    std::string format;
    int version = 0;
    json delays, pump, probe, grids, spectra;
    r.required("format", format);
    r.required("version", version);
    r.required("delays_ms", delays);
    r.required("pump_khz", pump);
    r.required("probe_khz", probe);
    r.required("grids", grids);
    r.required("probe_alone", spectra);
    r.optional("pulses", d.pulses);
    r.optional("seed", d.seed);
    r.optional("noise_sigma", d.noise_sigma);
    d.truth.reset();
    if (j.contains("truth")) {
        SkewNormalParams truth;
        r.required("truth", truth);
        d.truth = truth;
    }
    r.finish();
    if (format != "echolab-dataset" || version != 1) throw ValidationError("not an echolab dataset (version 1)");
    const auto delay_values = checked_axis(delays, "delays_ms");
    if (delay_values.size() != 3) throw ValidationError("dataset needs three delays");
    const auto pump_axis = checked_axis(pump, "pump_khz");
    const auto probe_axis = checked_axis(probe, "probe_khz");
    if (!grids.is_array() || grids.size() != 3 || !spectra.is_array() || spectra.size() != 3)
        throw ValidationError("dataset needs three grids and three probe-alone spectra");
    try {
        for (std::size_t k = 0; k < 3; ++k) {
            SpectrumGrid2D g(pump_axis, probe_axis, delay_values[k], SpectrumKind::measured);
            const json& rows = grids[k];
            if (!rows.is_array() || rows.size() != g.rows()) throw ValidationError("grid rows do not match pump axis");
            for (std::size_t i = 0; i < g.rows(); ++i) {
                if (!rows[i].is_array() || rows[i].size() != g.cols())
                    throw ValidationError("grid columns do not match probe axis");
                for (std::size_t c = 0; c < g.cols(); ++c) g.at(i, c) = rows[i][c].get<double>();
            }
            d.grids[k] = std::move(g);
            d.probe_alone[k].freq_khz = probe_axis;
            d.probe_alone[k].values = spectra[k].get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("dataset values must be numbers: ") + e.what());
    }
    d.validate();
}

void to_json(json& j, const FitBounds& b) {
    auto pair = [](const Interval& i) { return json::array({i.lo, i.hi}); };
    j = json{{"mu_khz", pair(b.mu)},
             {"sigma_khz", pair(b.sigma)},
             {"rho", pair(b.rho)},
             {"alpha", pair(b.alpha)},
             {"scale", pair(b.scale)}};
}

void from_json(const json& j, FitBounds& b) {
    Reader r(j, "fit bounds");
    auto read = [&](const char* key, Interval& out) {
        std::vector<double> v{out.lo, out.hi};
        r.optional(key, v);
        if (v.size() != 2) throw ValidationError(std::string("bound '") + key + "' must be [lo, hi]");
        out = {v[0], v[1]};
    };
    read("mu_khz", b.mu);
    read("sigma_khz", b.sigma);
    read("rho", b.rho);
    read("alpha", b.alpha);
    read("scale", b.scale);
    r.finish();
}

void to_json(json& j, const FitConfig& c) {
    j = json{{"population", c.population},
             {"generations", c.generations},
             {"crossover_rate", c.crossover_rate},
             {"mutation_rate", c.mutation_rate},
             {"mutation_scale", c.mutation_scale},
             {"mutation_shrink", c.mutation_shrink},
             {"elite_fraction", c.elite_fraction},
             {"tournament_size", c.tournament_size},
             {"bounds", c.bounds},
             {"seed", c.seed},
             {"polish", c.polish},
             {"threads", c.threads}};
}

void from_json(const json& j, FitConfig& c) {
    Reader r(j, "fit config");
    r.optional("population", c.population);
    r.optional("generations", c.generations);
    r.optional("crossover_rate", c.crossover_rate);
    r.optional("mutation_rate", c.mutation_rate);
    r.optional("mutation_scale", c.mutation_scale);
    r.optional("mutation_shrink", c.mutation_shrink);
    r.optional("elite_fraction", c.elite_fraction);
    r.optional("tournament_size", c.tournament_size);
    r.optional("bounds", c.bounds);
    r.optional("seed", c.seed);
    r.optional("polish", c.polish);
    r.optional("threads", c.threads);
    r.finish();
    c.validate();
}

void to_json(json& j, const FitResult& f) {
    j = json{{"params", f.params},
             {"scales", f.scales},
             {"ssr", f.ssr},
             {"ga_ssr", f.ga_ssr},
             {"polished", f.polished},
             {"covariance_valid", f.covariance_valid},
             {"seed", f.seed},
             {"evaluations", f.evaluations},
             {"rejected", f.rejected},
             {"history", f.history}};
}

void from_json(const json& j, FitResult& f) {
    Reader r(j, "fit result");
    r.required("params", f.params);
    r.required("scales", f.scales);
    r.required("ssr", f.ssr);
    r.optional("ga_ssr", f.ga_ssr);
    r.optional("polished", f.polished);
    r.optional("covariance_valid", f.covariance_valid);
    r.optional("seed", f.seed);
    r.optional("evaluations", f.evaluations);
    r.optional("rejected", f.rejected);
    r.optional("history", f.history);
    r.finish();
}

json multi_fit_summary(const MultiFitResult& result) {
    const auto& m = result.stats.mean;
    const auto& s = result.stats.stddev;
    static constexpr const char* kNode[3] = {"0", "2", "5"};
    static constexpr const char* kPair[3] = {"02", "25", "05"};
    json table = json::array();
    auto row = [&](const std::string& name, double mean, double sd) {
        table.push_back(json{{"parameter", name}, {"mean", mean}, {"std", sd}});
    };
    for (int i = 0; i < 3; ++i) row(std::string("mu") + kNode[i] + "_khz", m.mu_khz[i], s.mu_khz[i]);
    for (int i = 0; i < 3; ++i) row(std::string("sigma") + kNode[i] + "_khz", m.sigma_khz[i], s.sigma_khz[i]);
    for (int i = 0; i < 3; ++i) row(std::string("rho") + kPair[i], m.rho[i], s.rho[i]);
    for (int i = 0; i < 3; ++i) row(std::string("alpha") + kNode[i], m.alpha[i], s.alpha[i]);
    json ssr = json::array();
    json seeds = json::array();
    json run_params = json::array();
    for (const auto& run : result.runs) {
        ssr.push_back(run.ssr);
        seeds.push_back(run.seed);
        run_params.push_back(run.params);
    }
    return json{{"runs", result.runs.size()},
                {"seeds", std::move(seeds)},
                {"failed_seeds", result.failed_seeds},
                {"table", std::move(table)},
                {"mean", m},
                {"stddev", s},
                {"scale_mean", result.stats.scale_mean},
                {"scale_stddev", result.stats.scale_stddev},
                {"ssr", std::move(ssr)},
                {"run_params", std::move(run_params)}};
}

SkewNormalParams summary_mean_params(const json& summary) {
    if (!summary.is_object() || !summary.contains("mean")) throw ValidationError("fit summary has no 'mean' block");
    return summary.at("mean").get<SkewNormalParams>();
}

void to_json(json& j, const LatticeConfig& c) {
    j = json{{"spacing_um", c.spacing_um},
             {"angle_deg", c.angle_deg},
             {"wavelength_nm", c.wavelength_nm},
             {"depth_er", c.depth_er},
             {"tilt_er", c.tilt_er},
             {"waist_um", c.waist_um},
             {"cloud_sigma_um", c.cloud_sigma_um},
             {"temperature_uk", c.temperature_uk},
             {"depth_model", std::string(to_string(c.depth_model))}};
}

void from_json(const json& j, LatticeConfig& c) {
    Reader r(j, "lattice");
    std::string model(to_string(c.depth_model));
    r.optional("spacing_um", c.spacing_um);
    r.optional("angle_deg", c.angle_deg);
    r.optional("wavelength_nm", c.wavelength_nm);
    r.optional("depth_er", c.depth_er);
    r.optional("tilt_er", c.tilt_er);
    r.optional("waist_um", c.waist_um);
    r.optional("cloud_sigma_um", c.cloud_sigma_um);
    r.optional("temperature_uk", c.temperature_uk);
    r.optional("depth_model", model);
    r.finish();
    c.depth_model = depth_model_from_string(model);
    c.validate();
}

void to_json(json& j, const WindowSpec& w) {
    j = json{{"center_khz", w.center_khz}, {"width_khz", w.width_khz}, {"node", w.node}};
}

void from_json(const json& j, WindowSpec& w) {
    Reader r(j, "window");
    r.optional("center_khz", w.center_khz);
    r.optional("width_khz", w.width_khz);
    r.optional("node", w.node);
    r.finish();
    w.validate();
}

void to_json(json& j, const PlateauOptions& o) {
    j = json{{"slope_threshold", o.slope_threshold}, {"min_length_ms", o.min_length_ms}};
}

void from_json(const json& j, PlateauOptions& o) {
    Reader r(j, "plateau options");
    r.optional("slope_threshold", o.slope_threshold);
    r.optional("min_length_ms", o.min_length_ms);
    r.finish();
    if (!(o.slope_threshold > 0.0) || !(o.min_length_ms > 0.0))
        throw ValidationError("plateau thresholds must be positive");
}

void to_json(json& j, const PlateauReport& r) {
    j = json{{"initial_decay_ms", r.initial_decay_ms},
             {"initial_end_ms", r.initial_end_ms},
             {"steepest_decay_ms", r.steepest_decay_ms},
             {"plateau_detected", r.detected},
             {"plateau_start_ms", r.start_ms},
             {"plateau_end_ms", r.end_ms},
             {"plateau_length_ms", r.length_ms()},
             {"plateau_level", r.level},
             {"final_decay_ms", r.final_decay_ms ? json(*r.final_decay_ms) : json(nullptr)}};
}

void to_json(json& j, const EchoCurve& c) {
    j = json{{"source", c.source},
             {"interpolation", std::string(to_string(c.method))},
             {"extension", std::string(to_string(c.extension))},
             {"nodes", c.nodes},
             {"half_width", c.half_width},
             {"max_change", c.max_change},
             {"all_converged", c.all_converged()},
             {"tau_ms", c.tau_ms},
             {"epsilon", c.epsilon},
             {"converged", c.converged},
             {"model_dependent", c.model_dependent}};
    if (!c.std_error.empty()) j["std_error"] = c.std_error;
}

void to_json(json& j, const TrajectoryCensus& c) {
    j = json{{"total", c.total},
             {"up_up", c.up_up},
             {"up_down", c.up_down},
             {"down_up", c.down_up},
             {"down_down", c.down_down},
             {"degenerate", c.degenerate},
             {"down_up_fraction", c.fraction(c.down_up)},
             {"increment_correlation", c.increment_correlation}};
}

void to_json(json& j, const HoleWidthCurve& c) {
    json points = json::array();
    for (const auto& p : c.points)
        points.push_back(json{{"delay_ms", p.delay_ms}, {"width_hz", p.width_hz}, {"fit_ok", p.fit_ok}});
    j = json{{"points", std::move(points)},
             {"instrumental_hz", c.instrumental_hz},
             {"inhomogeneous_hz", c.inhomogeneous_hz}};
}

void write_dataset_csv(std::ostream& os, const Dataset& d) {
    os << "delay_ms,pump_khz,probe_khz,value\n";
    for (const auto& g : d.grids)
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t k = 0; k < g.cols(); ++k)
                os << format_number(g.delay_ms) << ',' << format_number(g.pump_khz[i]) << ','
                   << format_number(g.probe_khz[k]) << ',' << format_number(g.at(i, k)) << '\n';
}

void write_probe_alone_csv(std::ostream& os, const Dataset& d) {
    static constexpr int kNodeMs[3] = {0, 2, 5};
    os << "node_ms,freq_khz,value\n";
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < d.probe_alone[k].freq_khz.size(); ++i)
            os << kNodeMs[k] << ',' << format_number(d.probe_alone[k].freq_khz[i]) << ','
               << format_number(d.probe_alone[k].values[i]) << '\n';
}

}  // namespace echolab
