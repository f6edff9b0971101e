#include "echolab/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "echolab/errors.hpp"

namespace echolab {

namespace {

constexpr std::size_t kGenes = 16;
using Genome = std::array<double, kGenes>;

// Gene layout: mu[3], sigma[3], rho[3], alpha[3], scales[4].
SkewNormalParams decode_params(const Genome& g) {
    SkewNormalParams p;
    for (std::size_t i = 0; i < 3; ++i) {
        p.mu_khz[i] = g[i];
        p.sigma_khz[i] = g[3 + i];
        p.rho[i] = g[6 + i];
        p.alpha[i] = g[9 + i];
    }
    return p;
}

ScaleFactors decode_scales(const Genome& g) { return {g[12], g[13], g[14], g[15]}; }

std::array<Interval, kGenes> gene_bounds(const FitBounds& b) {
    std::array<Interval, kGenes> out;
    for (std::size_t i = 0; i < 3; ++i) {
        out[i] = b.mu;
        out[3 + i] = b.sigma;
        out[6 + i] = b.rho;
        out[9 + i] = b.alpha;
    }
    for (std::size_t i = 12; i < kGenes; ++i) out[i] = b.scale;
    return out;
}

double reflect(double x, const Interval& iv) {
    const double w = iv.hi - iv.lo;
    if (w <= 0.0) return iv.lo;
    double y = std::fmod(x - iv.lo, 2.0 * w);
    if (y < 0.0) y += 2.0 * w;
    if (y > w) y = 2.0 * w - y;
    return iv.lo + y;
}

struct Individual {
    Genome genes{};
    double fitness = std::numeric_limits<double>::infinity();
};

bool in_bounds(const Genome& g, const std::array<Interval, kGenes>& b) {
    for (std::size_t k = 0; k < kGenes; ++k)
        if (g[k] < b[k].lo || g[k] > b[k].hi) return false;
    return true;
}

// Residual vector for Eigen's Levenberg-Marquardt. Invalid parameters give a constant
// large residual so the step is rejected.
struct ResidualFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const SurfaceModel* model = nullptr;
    const Dataset* data = nullptr;
    int count = 0;

    int inputs() const { return static_cast<int>(kGenes); }
    int values() const { return count; }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
        Genome g;
        for (std::size_t k = 0; k < kGenes; ++k) g[k] = x[static_cast<Eigen::Index>(k)];
        SurfaceModel::Surfaces s;
        if (!model->evaluate(decode_params(g), s)) {
            r.setConstant(10.0);
            return 0;
        }
        const ScaleFactors sc = decode_scales(g);
        Eigen::Index n = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t i = 0; i < s.grids[k].size(); ++i) r[n++] = sc[k] * s.grids[k][i] - data->grids[k].values[i];
            for (std::size_t i = 0; i < s.probe_alone[k].size(); ++i)
                r[n++] = sc[3] * s.probe_alone[k][i] - data->probe_alone[k].values[i];
        }
        return 0;
    }
};

Genome levenberg_marquardt(const SurfaceModel& model, const Dataset& data, const Genome& start) {
    ResidualFunctor f;
    f.model = &model;
    f.data = &data;
    for (std::size_t k = 0; k < 3; ++k)
        f.count += static_cast<int>(data.grids[k].values.size() + data.probe_alone[k].values.size());
    Eigen::NumericalDiff<ResidualFunctor> diff(f);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<ResidualFunctor>> lm(diff);
    lm.parameters.maxfev = 4000;
    Eigen::VectorXd x(static_cast<Eigen::Index>(kGenes));
    for (std::size_t k = 0; k < kGenes; ++k) x[static_cast<Eigen::Index>(k)] = start[k];
    lm.minimize(x);
    Genome out;
    for (std::size_t k = 0; k < kGenes; ++k) out[k] = x[static_cast<Eigen::Index>(k)];
    return out;
}

void check_interval(const Interval& iv, const char* name) {
    if (!(iv.lo < iv.hi)) throw ValidationError(std::string("fit bounds for ") + name + " must satisfy lo < hi");
}

}  // namespace

void FitConfig::validate() const {
    if (population < 10) throw ValidationError("population must be at least 10");
    if (generations < 1) throw ValidationError("generation count must be positive");
    for (double r : {crossover_rate, mutation_rate, elite_fraction, mutation_shrink})
        if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("GA rates must lie in [0, 1]");
    if (!(mutation_scale >= 0.0)) throw ValidationError("mutation scale must be non-negative");
    if (tournament_size < 1) throw ValidationError("tournament size must be positive");
    if (threads < 1) throw ValidationError("thread count must be positive");
    check_interval(bounds.mu, "mu");
    check_interval(bounds.sigma, "sigma");
    check_interval(bounds.rho, "rho");
    check_interval(bounds.alpha, "alpha");
    check_interval(bounds.scale, "scale");
    if (bounds.sigma.lo <= 0.0) throw ValidationError("sigma bounds must be positive");
    if (bounds.rho.lo <= -1.0 || bounds.rho.hi >= 1.0) throw ValidationError("rho bounds must lie inside (-1, 1)");
}

double residual_ssr(const SurfaceModel& model, const SkewNormalParams& params, const ScaleFactors& scales,
                    const Dataset& dataset) {
    SurfaceModel::Surfaces s;
    if (!model.evaluate(params, s)) return std::numeric_limits<double>::infinity();
    double ssr = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& data = dataset.grids[k].values;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double r = scales[k] * s.grids[k][i] - data[i];
            ssr += r * r;
        }
        const auto& pa = dataset.probe_alone[k].values;
        for (std::size_t i = 0; i < pa.size(); ++i) {
            const double r = scales[3] * s.probe_alone[k][i] - pa[i];
            ssr += r * r;
        }
    }
    return ssr;
}

double residual_ssr(const SkewNormalParams& params, const ScaleFactors& scales, const Dataset& dataset) {
    return residual_ssr(SurfaceModel(dataset), params, scales, dataset);
}

FitResult ga_fit(const Dataset& dataset, const FitConfig& config) {
    config.validate();
    dataset.validate();
    const SurfaceModel model(dataset);
    const auto bounds = gene_bounds(config.bounds);
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    FitResult result;
    result.seed = config.seed;

    auto feasible = [](const Genome& g) { return is_valid(decode_params(g)); };

    // Fitness evaluation touches no shared mutable state, so the split across threads
    // cannot change the outcome.
    auto evaluate = [&](std::vector<Individual>& pop, std::size_t from) {
        const std::size_t n = pop.size() - from;
        auto work = [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                Individual& ind = pop[from + i];
                ind.fitness = residual_ssr(model, decode_params(ind.genes), decode_scales(ind.genes), dataset);
                if (!std::isfinite(ind.fitness)) ind.fitness = std::numeric_limits<double>::infinity();
            }
        };
        const auto nthreads = static_cast<std::size_t>(std::min<long>(config.threads, static_cast<long>(n)));
        if (nthreads <= 1) {
            work(0, n);
        } else {
            std::vector<std::jthread> pool;
            const std::size_t chunk = (n + nthreads - 1) / nthreads;
            for (std::size_t t = 0; t < nthreads; ++t)
                pool.emplace_back(work, std::min(n, t * chunk), std::min(n, (t + 1) * chunk));
        }
        result.evaluations += static_cast<long>(n);
    };

    const auto pop_size = static_cast<std::size_t>(config.population);
    std::vector<Individual> pop;
    pop.reserve(pop_size);
    const long max_attempts = 1000L * config.population;
    for (long attempt = 0; pop.size() < pop_size && attempt < max_attempts; ++attempt) {
        Individual ind;
        for (std::size_t k = 0; k < kGenes; ++k)
            ind.genes[k] = bounds[k].lo + (bounds[k].hi - bounds[k].lo) * unit(rng);
        if (feasible(ind.genes))
            pop.push_back(ind);
        else
            ++result.rejected;
    }
    if (pop.size() < pop_size) throw ValidationError("GA initialization found no feasible population within the bounds");
    evaluate(pop, 0);

    const auto by_fitness = [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; };
    const auto n_elite = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(config.elite_fraction * config.population)));

    auto tournament = [&]() -> const Individual& {
        std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
        std::size_t best = pick(rng);
        for (int t = 1; t < config.tournament_size; ++t) {
            const std::size_t c = pick(rng);
            if (pop[c].fitness < pop[best].fitness) best = c;
        }
        return pop[best];
    };

    std::stable_sort(pop.begin(), pop.end(), by_fitness);
    std::vector<Individual> next;
    next.reserve(pop_size);
    for (int gen = 0; gen < config.generations; ++gen) {
        const double shrink = 1.0 - config.mutation_shrink * static_cast<double>(gen) / config.generations;
        next.assign(pop.begin(), pop.begin() + static_cast<long>(n_elite));
        while (next.size() < pop_size) {
            Individual child;
            for (int attempt = 0; attempt < 20; ++attempt) {
                const Individual& a = tournament();
                const Individual& b = tournament();
                child.genes = a.genes;
                if (unit(rng) < config.crossover_rate) {
                    // Blend crossover: each gene drawn on the segment extended by 25% both ways.
                    for (std::size_t k = 0; k < kGenes; ++k) {
                        const double t = -0.25 + 1.5 * unit(rng);
                        child.genes[k] = a.genes[k] + t * (b.genes[k] - a.genes[k]);
                    }
                }
                for (std::size_t k = 0; k < kGenes; ++k) {
                    if (unit(rng) < config.mutation_rate) {
                        const double sd = config.mutation_scale * shrink * (bounds[k].hi - bounds[k].lo);
                        child.genes[k] += sd * normal(rng);
                    }
                    child.genes[k] = reflect(child.genes[k], bounds[k]);
                }
                if (feasible(child.genes)) break;
                ++result.rejected;
            }
            next.push_back(child);
        }
        evaluate(next, n_elite);
        std::swap(pop, next);
        std::stable_sort(pop.begin(), pop.end(), by_fitness);
        result.history.push_back(pop.front().fitness);
    }

    Individual best = pop.front();
    result.ga_ssr = best.fitness;
    if (config.polish && std::isfinite(best.fitness)) {
        Individual refined;
        refined.genes = levenberg_marquardt(model, dataset, best.genes);
        if (in_bounds(refined.genes, bounds) && feasible(refined.genes)) {
            refined.fitness = residual_ssr(model, decode_params(refined.genes), decode_scales(refined.genes), dataset);
            if (refined.fitness < best.fitness) {
                best = refined;
                result.polished = true;
            }
        }
    }
    result.params = decode_params(best.genes);
    result.scales = decode_scales(best.genes);
    result.ssr = best.fitness;
    result.covariance_valid = is_valid(result.params);
    if (!result.covariance_valid || !std::isfinite(result.ssr))
        throw ValidationError("GA finished without a feasible individual");
    return result;
}

ParamStats summarize(std::span<const FitResult> runs) {
    ParamStats s;
    s.mean.node_times_ms = s.stddev.node_times_ms = {0.0, 2.0, 5.0};
    if (runs.empty()) return s;
    const double n = static_cast<double>(runs.size());
    auto stat = [&](auto getter, double& mean, double& sd) {
        double m = 0.0;
        for (const auto& r : runs) m += getter(r);
        m /= n;
        double v = 0.0;
        for (const auto& r : runs) v += (getter(r) - m) * (getter(r) - m);
        mean = m;
        sd = runs.size() > 1 ? std::sqrt(v / (n - 1.0)) : 0.0;
    };
    for (std::size_t i = 0; i < 3; ++i) {
        stat([i](const FitResult& r) { return r.params.mu_khz[i]; }, s.mean.mu_khz[i], s.stddev.mu_khz[i]);
        stat([i](const FitResult& r) { return r.params.sigma_khz[i]; }, s.mean.sigma_khz[i], s.stddev.sigma_khz[i]);
        stat([i](const FitResult& r) { return r.params.rho[i]; }, s.mean.rho[i], s.stddev.rho[i]);
        stat([i](const FitResult& r) { return r.params.alpha[i]; }, s.mean.alpha[i], s.stddev.alpha[i]);
    }
    for (std::size_t i = 0; i < 4; ++i)
        stat([i](const FitResult& r) { return r.scales[i]; }, s.scale_mean[i], s.scale_stddev[i]);
    return s;
}

MultiFitResult multi_fit(const Dataset& dataset, const FitConfig& config, std::span<const std::uint64_t> seeds) {
    if (seeds.size() < 2) throw ValidationError("multi_fit needs at least two runs");
    MultiFitResult out;
    Error last_error("no runs");
    for (std::uint64_t seed : seeds) {
        FitConfig c = config;
        c.seed = seed;
        try {
            out.runs.push_back(ga_fit(dataset, c));
        } catch (const ValidationError& e) {
            out.failed_seeds.push_back(seed);
            last_error = Error(e.what());
        }
    }
    if (out.runs.empty()) throw ValidationError(std::string("all fit runs failed: ") + last_error.what());
    out.stats = summarize(out.runs);
    return out;
}

MultiFitResult multi_fit(const Dataset& dataset, const FitConfig& config, int runs) {
    if (runs < 2) throw ValidationError("multi_fit needs at least two runs");
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(runs));
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = config.seed + i;
    return multi_fit(dataset, config, seeds);
}

}  // namespace echolab
