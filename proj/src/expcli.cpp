#include "frb/expcli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

#include "frb/besov.hpp"
#include "frb/parallel.hpp"
#include "frb/paracontrolled.hpp"

#ifndef FRB_VERSION
#define FRB_VERSION "unknown"
#endif

namespace frb::exp {

namespace fs = std::filesystem;

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::Covariance: return "covariance";
        case Experiment::Regularity: return "regularity";
        case Experiment::Simulate: return "simulate";
        case Experiment::Energy: return "energy";
        case Experiment::Convergence: return "convergence";
        case Experiment::Paracontrolled: return "paracontrolled";
        case Experiment::AdmissibleScan: return "admissible_scan";
    }
    return "unknown";
}

Experiment experiment_from_string(const std::string& s) {
    for (auto e : {Experiment::Covariance, Experiment::Regularity, Experiment::Simulate, Experiment::Energy,
                   Experiment::Convergence, Experiment::Paracontrolled, Experiment::AdmissibleScan})
        if (to_string(e) == s) return e;
    throw Error(ErrorKind::Config, "unknown experiment '" + s + "'");
}

//------------------------------------------------------------------------------
// Config parsing
//------------------------------------------------------------------------------
namespace {

const json kU0Default = json::array();

const std::map<Experiment, json>& param_defaults() {
    static const std::map<Experiment, json> d = {
        {Experiment::Covariance, {{"modes", {1, 4, 16}}, {"lag_steps", {0, 1, 2, 4}}}},
        {Experiment::Regularity, {{"lag_steps", {1, 2, 4, 8, 16, 32, 64}}, {"spatial", true}, {"temporal", true}}},
        {Experiment::Simulate, {{"u0", kU0Default}}},
        {Experiment::Energy, {{"u0", kU0Default}, {"refinements", 2}, {"gronwall", true}}},
        {Experiment::Convergence, {{"u0", kU0Default}, {"rungs", 3}, {"zero_noise", false}}},
        {Experiment::Paracontrolled, {{"u0", kU0Default}, {"regularity", true}, {"cross_check", false}}},
        {Experiment::AdmissibleScan, {{"n_band", {8, 16, 32, 64, 128}}, {"zero_noise", false}}},
    };
    return d;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw Error(ErrorKind::Config, where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw Error(ErrorKind::Config, where + ": unknown key '" + key + "'");
    }
}

double get_double(const json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw Error(ErrorKind::Config, where + "." + key + ": expected a number");
    return v.get<double>();
}

std::int64_t get_int(const json& obj, const char* key, std::int64_t fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw Error(ErrorKind::Config, where + "." + key + ": expected an integer");
    return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_string()) throw Error(ErrorKind::Config, where + "." + key + ": expected a string");
    return v.get<std::string>();
}

bool same_shape(const json& a, const json& b) {
    if (a.is_number_integer()) return b.is_number_integer();
    if (a.is_number()) return b.is_number();
    if (a.is_array()) return b.is_array();
    return a.type() == b.type();
}

json normalize_params(Experiment e, const json& given) {
    json out = param_defaults().at(e);
    if (given.is_null()) return out;
    if (!given.is_object()) throw Error(ErrorKind::Config, "params: expected an object");
    for (const auto& [key, value] : given.items()) {
        if (!out.contains(key))
            throw Error(ErrorKind::Config, "params: unknown key '" + key + "' for experiment " + to_string(e));
        if (!same_shape(out[key], value)) throw Error(ErrorKind::Config, "params." + key + ": wrong type");
        out[key] = value;
    }
    return out;
}

template <class T>
std::vector<T> param_list(const ExperimentConfig& cfg, const char* key) {
    try {
        return cfg.params.at(key).get<std::vector<T>>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::Config, std::string("params.") + key + ": expected a list of numbers");
    }
}

SpectralField parse_u0(const ExperimentConfig& cfg) {
    SpectralField u0(cfg.solver.grid);
    for (const auto& entry : cfg.params.at("u0")) {
        if (!entry.is_array() || entry.size() != 3 || !entry[0].is_number_integer() || !entry[1].is_number() ||
            !entry[2].is_number())
            throw Error(ErrorKind::Config, "params.u0: entries must be [k, re, im] with integer k");
        const int k = entry[0].get<int>();
        if (k < 1 || k >= cfg.solver.grid.nyquist())
            throw Error(ErrorKind::Config, "params.u0: wavenumber " + std::to_string(k) + " outside [1, N/2)");
        u0.set_coeff(k, cplx(entry[1].get<double>(), entry[2].get<double>()));
    }
    return u0;
}

void sync_noise(ExperimentConfig& c) {
    c.noise.gamma = c.solver.gamma;
    c.noise.dt = c.solver.dt;
    c.noise.n_steps = std::max(c.solver.n_steps(), 1);
    c.noise.grid = c.solver.grid;
    c.noise.seed = c.seed;
}

}  // namespace

void ExperimentConfig::validate() const {
    solver.validate();
    noise.validate();
    require(ensemble_size >= 1, ErrorKind::Config, "ensemble_size must be >= 1");
    require(threads >= 1, ErrorKind::Config, "threads must be >= 1");
    require(!output_dir.empty(), ErrorKind::Config, "output_dir must not be empty");
    require(noise.gamma == solver.gamma && noise.dt == solver.dt && noise.grid == solver.grid && noise.seed == seed,
            ErrorKind::Config, "noise section out of sync with solver and seed");
}

ExperimentConfig config_from_json(const json& j) {
    try {
        check_keys(j, {"experiment", "seed", "ensemble_size", "threads", "output_dir", "solver", "noise", "params"}, "config");
        ExperimentConfig c;
        if (!j.contains("experiment")) throw Error(ErrorKind::Config, "config: 'experiment' is required");
        c.experiment = experiment_from_string(get_string(j, "experiment", "", "config"));
        if (j.contains("seed")) {
            const auto& s = j.at("seed");
            if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
                throw Error(ErrorKind::Config, "config.seed: expected a non-negative integer");
            c.seed = s.get<std::uint64_t>();
        }
        c.ensemble_size = static_cast<int>(get_int(j, "ensemble_size", 1, "config"));
        c.threads = static_cast<int>(get_int(j, "threads", 1, "config"));
        c.output_dir = get_string(j, "output_dir", c.output_dir, "config");

        const json solver = j.value("solver", json::object());
        check_keys(solver, {"gamma", "T", "dt", "N", "equation", "picard_tol", "picard_max_iters", "s_work"}, "solver");
        c.solver.gamma = get_double(solver, "gamma", c.solver.gamma, "solver");
        c.solver.T = get_double(solver, "T", c.solver.T, "solver");
        c.solver.dt = get_double(solver, "dt", c.solver.dt, "solver");
        c.solver.grid = TorusGrid(static_cast<int>(get_int(solver, "N", c.solver.grid.n_modes(), "solver")));
        c.solver.equation = equation_from_string(get_string(solver, "equation", to_string(c.solver.equation), "solver"));
        c.solver.picard_tol = get_double(solver, "picard_tol", c.solver.picard_tol, "solver");
        c.solver.picard_max_iters = static_cast<int>(get_int(solver, "picard_max_iters", c.solver.picard_max_iters, "solver"));
        c.solver.s_work = get_double(solver, "s_work", c.solver.s_work, "solver");

        const json noise = j.value("noise", json::object());
        check_keys(noise, {"variant", "epsilon", "n_band", "beta"}, "noise");
        c.noise.variant = noise_variant_from_string(get_string(noise, "variant", to_string(c.noise.variant), "noise"));
        c.noise.epsilon = get_double(noise, "epsilon", c.noise.epsilon, "noise");
        c.noise.n_band = static_cast<int>(get_int(noise, "n_band", c.noise.n_band, "noise"));
        c.noise.beta = get_double(noise, "beta", c.noise.beta, "noise");

        c.params = normalize_params(c.experiment, j.contains("params") ? j.at("params") : json());
        sync_noise(c);
        c.validate();
        return c;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        throw Error(ErrorKind::Config, e.what());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("config: ") + e.what());
    }
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = to_string(c.experiment);
    j["seed"] = c.seed;
    j["ensemble_size"] = c.ensemble_size;
    j["threads"] = c.threads;
    j["output_dir"] = c.output_dir;
    j["solver"] = {{"gamma", c.solver.gamma},
                   {"T", c.solver.T},
                   {"dt", c.solver.dt},
                   {"N", c.solver.grid.n_modes()},
                   {"equation", to_string(c.solver.equation)},
                   {"picard_tol", c.solver.picard_tol},
                   {"picard_max_iters", c.solver.picard_max_iters},
                   {"s_work", c.solver.s_work}};
    j["noise"] = {{"variant", to_string(c.noise.variant)},
                  {"epsilon", c.noise.epsilon},
                  {"n_band", c.noise.n_band},
                  {"beta", c.noise.beta}};
    j["params"] = c.params;
    return j;
}

ExperimentConfig load_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::Config, "cannot open config file " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "config file " + file.string() + ": " + e.what());
    }
    if (j.is_object() && j.contains("schema") && j.contains("config")) return config_from_json(j.at("config"));
    return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : config_to_json(c).dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

//------------------------------------------------------------------------------
// Output plumbing
//------------------------------------------------------------------------------
namespace {

std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
std::string fmt(int x) { return std::to_string(x); }
std::string fmt(std::size_t x) { return std::to_string(x); }
std::string fmt(const std::string& s) { return s; }
std::string fmt(const char* s) { return s; }

class Csv {
public:
    Csv(const fs::path& file, const std::vector<std::string>& columns) : out_(file) {
        if (!out_) throw Error(ErrorKind::Config, "cannot write " + file.string());
        line(columns);
    }
    template <class... Ts>
    void row(const Ts&... values) {
        static_assert(sizeof...(Ts) > 0);
        line({fmt(values)...});
    }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    std::ofstream out_;
};

class Run {
public:
    Run(const ExperimentConfig& cfg) : cfg_(cfg), dir_(cfg.output_dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorKind::Config, "cannot create output_dir " + dir_.string() + ": " + ec.message());
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        manifest_["schema"] = "frb.manifest.v1";
        manifest_["status"] = "running";
        manifest_["code_version"] = FRB_VERSION;
        manifest_["config"] = config_to_json(cfg);
        manifest_["config_hash"] = config_hash(cfg);
        manifest_["master_seed"] = cfg.seed;
        manifest_["sub_seed_scheme"] = kSubSeedScheme;
        manifest_["conventions"] = {
            {"fourier", kFourierConvention},
            {"covariance_conversion_to_unnormalized_transform", kCovarianceConversion},
            {"exponent_holder_moment_sup", "sup_x sqrt(mean_m |Delta_j f_m(x)|^2) ~ 2^{-j alpha}"},
            {"exponent_sobolev_block_l2", "mean_m ||Delta_j f_m||_L2 ~ 2^{-j alpha}"},
            {"fit_blocks", "j in [2, j_max - 2]"}};
        manifest_["started_at"] = buf;
        manifest_["outputs"] = json::array();
        manifest_["warnings"] = json::array();
        start_ = std::chrono::steady_clock::now();
        write();
    }

    const ExperimentConfig& cfg() const { return cfg_; }

    Csv csv(const std::string& name, const std::string& schema, const std::vector<std::string>& columns) {
        manifest_["outputs"].push_back({{"file", name}, {"schema", schema}, {"columns", columns}});
        write();
        return Csv(dir_ / name, columns);
    }
    void warn(const std::string& w) { manifest_["warnings"].push_back(w); }

    void finish(const json& summary) {
        manifest_["status"] = "complete";
        manifest_["summary"] = summary;
        stamp();
        write();
    }
    void fail(const std::string& kind, int exit_code, const std::string& message) {
        manifest_["status"] = "failed";
        manifest_["error"] = {{"kind", kind}, {"exit_code", exit_code}, {"message", message}};
        stamp();
        write();
    }

private:
    void stamp() {
        manifest_["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    void write() const {
        const auto tmp = dir_ / "manifest.json.tmp";
        {
            std::ofstream out(tmp);
            out << manifest_.dump(2) << '\n';
        }
        fs::rename(tmp, dir_ / "manifest.json");
    }

    const ExperimentConfig& cfg_;
    fs::path dir_;
    json manifest_;
    std::chrono::steady_clock::time_point start_;
};

std::size_t members(const ExperimentConfig& cfg) { return static_cast<std::size_t>(cfg.ensemble_size); }

template <class Fn>
auto with_member_context(std::size_t m, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), "member " + std::to_string(m) + ": " + e.what());
    }
}

double sup_l2(const TimePath& a, const TimePath& b) {
    double s = 0.0;
    for (std::size_t n = 0; n < std::min(a.size(), b.size()); ++n) s = std::max(s, l2_norm(a[n] - b[n]));
    return s;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

//------------------------------------------------------------------------------
// covariance
//------------------------------------------------------------------------------
json covariance_impl(Run& run) {
    const auto& cfg = run.cfg();
    const auto modes = param_list<int>(cfg, "modes");
    const auto lags = param_list<int>(cfg, "lag_steps");
    require(!modes.empty() && !lags.empty(), ErrorKind::Config, "covariance: modes and lag_steps must be non-empty");
    for (int k : modes)
        require(k >= 1 && k < cfg.solver.grid.nyquist(), ErrorKind::Config, "covariance: mode outside [1, N/2)");
    for (int l : lags)
        require(l >= 0 && l <= cfg.noise.n_steps, ErrorKind::Config, "covariance: lag_steps must lie in [0, n_steps]");
    if (cfg.ensemble_size < 100) run.warn("ensemble_size < 100: z-scores are unreliable");

    const std::size_t M = members(cfg), nk = modes.size(), nl = lags.size();
    std::vector<double> prod(M * nk * nl);
    parallel_for(M, cfg.threads, [&](std::size_t m) {
        const auto Y = *build_X(cfg.noise, m, true).Y;
        for (std::size_t a = 0; a < nk; ++a)
            for (std::size_t b = 0; b < nl; ++b)
                prod[(m * nk + a) * nl + b] =
                    std::real(Y[0].coeff(modes[a]) * std::conj(Y[static_cast<std::size_t>(lags[b])].coeff(modes[a])));
    });

    auto csv = run.csv("covariance.csv", "covariance.v1", {"k", "t", "t_prime", "empirical", "theoretical", "stderr", "z"});
    auto dcsv = run.csv("decay.csv", "decay.v1", {"k", "fitted_rate", "predicted_rate", "relative_error"});
    json rows = json::array(), decay = json::array();
    double max_z = 0.0;
    for (std::size_t a = 0; a < nk; ++a) {
        const int k = modes[a];
        const double lam = std::pow(double(k), cfg.solver.gamma);
        const double s = noise_scale(cfg.noise, k);
        std::vector<double> taus, logs;
        for (std::size_t b = 0; b < nl; ++b) {
            double sum = 0.0, sq = 0.0;
            for (std::size_t m = 0; m < M; ++m) sum += prod[(m * nk + a) * nl + b];
            const double mu = sum / double(M);
            for (std::size_t m = 0; m < M; ++m) sq += std::pow(prod[(m * nk + a) * nl + b] - mu, 2);
            const double se = M > 1 ? std::sqrt(sq / double(M - 1) / double(M)) : std::numeric_limits<double>::quiet_NaN();
            const double tau = lags[b] * cfg.noise.dt;
            const double theory = s * s * stationary_variance(k, cfg.solver.gamma) * std::exp(-lam * tau);
            const double z = se > 0.0 ? (mu - theory) / se : std::numeric_limits<double>::quiet_NaN();
            if (std::isfinite(z)) max_z = std::max(max_z, std::abs(z));
            csv.row(k, 0.0, tau, mu, theory, se, z);
            rows.push_back({{"k", k}, {"t_prime", tau}, {"empirical", mu}, {"theoretical", theory}, {"stderr", se}, {"z", z}});
            if (mu > 0.0) {
                taus.push_back(tau);
                logs.push_back(std::log(mu));
            }
        }
        if (taus.size() >= 2 && taus.front() != taus.back()) {
            const auto fit = least_squares(taus, logs);
            const double rate = -fit.slope;
            dcsv.row(k, rate, lam, rate / lam - 1.0);
            decay.push_back({{"k", k}, {"fitted_rate", rate}, {"predicted_rate", lam}});
        }
    }
    return {{"max_abs_z", max_z}, {"within_3_stderr", max_z <= 3.0}, {"rows", rows}, {"decay", decay}};
}

//------------------------------------------------------------------------------
// regularity
//------------------------------------------------------------------------------
json regularity_impl(Run& run) {
    const auto& cfg = run.cfg();
    const bool spatial = cfg.params.at("spatial").get<bool>();
    const bool temporal = cfg.params.at("temporal").get<bool>();
    const auto lags = param_list<int>(cfg, "lag_steps");
    if (temporal)
        for (int l : lags)
            require(l >= 1 && l < cfg.noise.n_steps, ErrorKind::Config, "regularity: lag_steps must lie in [1, n_steps)");
    const double beta = cfg.noise.variant == NoiseVariant::Roughened ? cfg.noise.beta : 0.0;
    const std::size_t M = members(cfg);
    const auto grid = cfg.solver.grid;

    // Fixed chunking keeps the floating-point reduction order independent of the thread count.
    constexpr std::size_t kChunk = 4;
    const std::size_t n_chunks = (M + kChunk - 1) / kChunk;
    std::vector<std::optional<BlockStatistics>> chunk_stats(n_chunks);
    std::vector<std::optional<TimePath>> paths(temporal ? M : 0);
    parallel_for(n_chunks, cfg.threads, [&](std::size_t c) {
        BlockStatistics st(grid);
        for (std::size_t m = c * kChunk; m < std::min(M, (c + 1) * kChunk); ++m) {
            auto X = build_X(cfg.noise, m).X;
            if (spatial) st.add(X.back());
            if (temporal) paths[m] = std::move(X);
        }
        chunk_stats[c] = std::move(st);
    });

    json summary;
    auto ecsv = run.csv("exponents.csv", "exponents.v1", {"quantity", "convention", "fitted", "stderr", "predicted"});
    if (spatial) {
        BlockStatistics stats(grid);
        for (auto& s : chunk_stats) stats.merge(*s);
        const double predicted = cfg.solver.gamma / 2.0 - 0.5 - beta;
        auto bcsv = run.csv("blocks.csv", "blocks.v1", {"j", "mean_l2", "rms_sup", "count"});
        for (int j = 0; j <= j_max(grid); ++j) bcsv.row(j, stats.mean_l2(j), stats.rms_sup(j), stats.count());
        json sp{{"predicted", predicted}};
        for (auto p : {Integrability::LInf, Integrability::L2}) {
            const auto fit = fit_regularity(stats, p);
            ecsv.row("spatial", fit.convention, fit.alpha, fit.stderr_alpha, predicted);
            sp[fit.convention] = {{"alpha", fit.alpha}, {"stderr", fit.stderr_alpha}};
        }
        summary["spatial"] = sp;
    }
    if (temporal) {
        std::vector<TimePath> all;
        all.reserve(M);
        for (auto& p : paths) all.push_back(std::move(*p));
        const auto fit = fit_temporal_exponent(all, lags);
        const double predicted = predicted_temporal_exponent(cfg.solver.gamma, beta);
        ecsv.row("temporal", "l2_increment", fit.kappa, fit.stderr_kappa, predicted);
        auto tcsv = run.csv("temporal.csv", "temporal.v1", {"lag", "mean_increment"});
        for (const auto& r : fit.rows) tcsv.row(r.lag, r.mean_increment);
        summary["temporal"] = {{"kappa", fit.kappa}, {"stderr", fit.stderr_kappa}, {"predicted", predicted}};
    }
    return summary;
}

//------------------------------------------------------------------------------
// simulate
//------------------------------------------------------------------------------
struct SimRecord {
    std::size_t windows = 0;
    int halvings = 0, iterations = 0;
    double max_ratio = 0.0, join = 0.0, overlap = 0.0, final_v = 0.0, final_u = 0.0, sup_u = 0.0;
};

json simulate_impl(Run& run) {
    const auto& cfg = run.cfg();
    const auto u0 = parse_u0(cfg);
    const std::size_t M = members(cfg);
    std::vector<SimRecord> rec(M);
    std::optional<TimePath> X0, v0;
    parallel_for(M, cfg.threads, [&](std::size_t m) {
        with_member_context(m, [&] {
            const auto X = build_X(cfg.noise, m).X;
            const auto g = continue_global(u0, X, cfg.solver);
            auto& r = rec[m];
            r.windows = g.windows.size();
            for (const auto& w : g.windows) {
                r.halvings += w.report.halvings;
                r.iterations += w.report.iterations;
                r.max_ratio = std::max(r.max_ratio, w.report.max_ratio);
            }
            r.join = g.max_join_jump;
            r.overlap = g.max_overlap_mismatch;
            r.final_v = l2_norm(g.v.back());
            r.final_u = l2_norm(g.v.back() + X.back());
            for (std::size_t n = 0; n < g.v.size(); ++n) r.sup_u = std::max(r.sup_u, l2_norm(g.v[n] + X[n]));
            if (m == 0) {
                X0 = X;
                v0 = g.v;
            }
            return 0;
        });
    });

    auto csv = run.csv("runs.csv", "simulate_runs.v1",
                       {"member", "windows", "halvings", "iterations", "max_contraction_ratio", "max_join_jump",
                        "max_overlap_mismatch", "final_l2_v", "final_l2_u", "sup_l2_u"});
    double join = 0.0, overlap = 0.0, ratio = 0.0;
    std::vector<double> finals;
    for (std::size_t m = 0; m < M; ++m) {
        const auto& r = rec[m];
        csv.row(m, r.windows, r.halvings, r.iterations, r.max_ratio, r.join, r.overlap, r.final_v, r.final_u, r.sup_u);
        join = std::max(join, r.join);
        overlap = std::max(overlap, r.overlap);
        ratio = std::max(ratio, r.max_ratio);
        finals.push_back(r.final_u);
    }
    auto tcsv = run.csv("trajectory.csv", "trajectory.v1", {"t", "l2_u", "l2_v", "l2_X"});
    for (std::size_t n = 0; n < v0->size(); ++n)
        tcsv.row(v0->time(n), l2_norm((*v0)[n] + (*X0)[n]), l2_norm((*v0)[n]), l2_norm((*X0)[n]));
    auto fcsv = run.csv("field.csv", "field.v1", {"x", "u", "v", "X"});
    const auto pv = to_physical(v0->back()), px = to_physical(X0->back());
    for (std::size_t i = 0; i < pv.size(); ++i) fcsv.row(double(i) * cfg.solver.grid.dx(), pv[i] + px[i], pv[i], px[i]);
    return {{"members", M},
            {"all_complete", true},
            {"max_join_jump", join},
            {"max_overlap_mismatch", overlap},
            {"max_contraction_ratio", ratio},
            {"mean_final_l2_u", mean(finals)}};
}

//------------------------------------------------------------------------------
// energy
//------------------------------------------------------------------------------
struct EnergyRecord {
    std::vector<double> max_res, mean_res;
    std::vector<double> lhs, xw;
};

json energy_impl(Run& run) {
    const auto& cfg = run.cfg();
    const auto u0 = parse_u0(cfg);
    const int R = static_cast<int>(cfg.params.at("refinements").get<std::int64_t>());
    require(R >= 0 && R <= 8, ErrorKind::Config, "energy: refinements must lie in [0, 8]");
    bool gronwall = cfg.params.at("gronwall").get<bool>();
    if (gronwall && (cfg.solver.equation != Equation::Burgers || cfg.solver.gamma <= 1.5)) {
        run.warn("gronwall envelope skipped: it is stated for Burgers with gamma in (3/2, 2]");
        gronwall = false;
    }
    const std::size_t M = members(cfg);
    const double gamma = cfg.solver.gamma;
    NoiseConfig fine = cfg.noise;
    fine.dt = cfg.noise.dt / double(1 << R);
    fine.n_steps = cfg.noise.n_steps << R;

    std::vector<EnergyRecord> rec(M);
    std::optional<EnergyLedger> ledger0;
    parallel_for(M, cfg.threads, [&](std::size_t m) {
        with_member_context(m, [&] {
            const auto Xf = build_X(fine, m).X;
            for (int l = 0; l <= R; ++l) {
                const auto X = Xf.subsample(std::size_t(1) << (R - l));
                SolverConfig sc = cfg.solver;
                sc.dt = X.dt();
                const auto g = continue_global(u0, X, sc);
                auto L = energy_ledger(g.v, X, gamma, sc.equation);
                double mx = 0.0, sum = 0.0;
                for (std::size_t n = 1; n < L.balance_residual.size(); ++n) {
                    mx = std::max(mx, std::abs(L.balance_residual[n]));
                    sum += std::abs(L.balance_residual[n]);
                }
                rec[m].max_res.push_back(mx);
                rec[m].mean_res.push_back(sum / double(L.balance_residual.size() - 1));
                if (l == R) {
                    if (gronwall) {
                        rec[m].lhs = gronwall_lhs(g.v, gamma);
                        const double a = energy_w_exponent(gamma);
                        for (std::size_t n = 0; n < X.size(); ++n) rec[m].xw.push_back(w_norm(X[n], a));
                    }
                    if (m == 0) ledger0 = std::move(L);
                }
            }
            return 0;
        });
    });

    auto ocsv = run.csv("order.csv", "energy_order.v1", {"member", "level", "dt", "max_abs_residual", "mean_abs_residual"});
    for (std::size_t m = 0; m < M; ++m)
        for (int l = 0; l <= R; ++l)
            ocsv.row(m, l, cfg.solver.dt / double(1 << l), rec[m].max_res[l], rec[m].mean_res[l]);
    json ratios = json::array();
    double worst_ratio = 0.0;
    for (int l = 0; l < R; ++l) {
        std::vector<double> r;
        for (const auto& e : rec) r.push_back(e.max_res[l + 1] / e.max_res[l]);
        ratios.push_back(mean(r));
        worst_ratio = std::max(worst_ratio, mean(r));
    }
    auto lcsv = run.csv("ledger.csv", "energy_ledger.v1",
                        {"t", "l2_sq", "dissipation", "balance_residual", "dp_functional", "skew_defect"});
    for (std::size_t n = 0; n < ledger0->times.size(); ++n)
        lcsv.row(ledger0->times[n], ledger0->l2_sq[n], ledger0->dissipation[n], ledger0->balance_residual[n],
                 ledger0->dp_functional[n], ledger0->skew_defect[n]);
    json finest = json::array();
    for (const auto& e : rec) finest.push_back(e.max_res.back());
    json summary{{"residual_ratio_per_halving", ratios}, {"worst_residual_ratio", worst_ratio}, {"max_residual_finest", finest}};

    if (gronwall) {
        const double dt = fine.dt;
        std::vector<std::vector<double>> lhs, xw;
        std::vector<double> u0sq(M, l2_norm_sq(u0));
        for (auto& e : rec) {
            lhs.push_back(e.lhs);
            xw.push_back(e.xw);
        }
        const double C = fit_gronwall_constant(lhs, u0sq, xw, dt, gamma);
        auto gcsv = run.csv("gronwall.csv", "gronwall.v1", {"member", "own_constant", "max_lhs_over_envelope"});
        double worst = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const double own = fit_gronwall_constant({lhs[m]}, {u0sq[m]}, {xw[m]}, dt, gamma);
            const auto env = gronwall_envelope(C, u0sq[m], xw[m], dt, gamma);
            double r = 0.0;
            for (std::size_t n = 0; n < env.size(); ++n)
                if (env[n] > 0.0) r = std::max(r, lhs[m][n] / env[n]);
            worst = std::max(worst, r);
            gcsv.row(m, own, r);
        }
        summary["gronwall"] = {{"constant", C}, {"w_exponent", energy_w_exponent(gamma)}, {"max_lhs_over_envelope", worst}};
    }
    return summary;
}

//------------------------------------------------------------------------------
// convergence
//------------------------------------------------------------------------------
json convergence_impl(Run& run) {
    const auto& cfg = run.cfg();
    const auto u0 = parse_u0(cfg);
    const int R = static_cast<int>(cfg.params.at("rungs").get<std::int64_t>());
    const bool zero = cfg.params.at("zero_noise").get<bool>();
    require(R >= 1 && R <= 12, ErrorKind::Config, "convergence: rungs must lie in [1, 12]");
    require(zero || cfg.noise.variant == NoiseVariant::Mollified, ErrorKind::Config,
            "convergence: noise.variant must be mollified (noise.epsilon is the first rung)");
    const double eps0 = cfg.noise.epsilon;
    if (!zero && (4.0 / 3.0) / (eps0 / double(1 << R)) > cfg.solver.grid.k_max())
        run.warn("finest rung's mollifier support exceeds the grid: its noise is truncated at N/2");

    const std::size_t M = members(cfg);
    std::vector<std::vector<double>> diffs(M);
    parallel_for(M, cfg.threads, [&](std::size_t m) {
        with_member_context(m, [&] {
            std::optional<TimePath> prev;
            for (int r = 0; r <= R; ++r) {
                NoiseConfig nc = cfg.noise;
                nc.epsilon = eps0 / double(1 << r);
                const auto X = zero ? TimePath(cfg.solver.grid, cfg.solver.dt, std::size_t(cfg.noise.n_steps) + 1)
                                    : build_X(nc, m).X;
                const auto g = continue_global(u0, X, cfg.solver);
                TimePath u = g.v + X;
                if (prev) diffs[m].push_back(sup_l2(*prev, u));
                prev = std::move(u);
            }
            return 0;
        });
    });

    auto csv = run.csv("ladder.csv", "ladder.v1", {"member", "rung", "epsilon", "epsilon_next", "sup_l2_difference"});
    bool monotone = true;
    for (std::size_t m = 0; m < M; ++m) {
        for (int r = 0; r < R; ++r) {
            csv.row(m, r, eps0 / double(1 << r), eps0 / double(1 << (r + 1)), diffs[m][r]);
            if (r > 0 && !(diffs[m][r] < diffs[m][r - 1])) monotone = false;
        }
    }
    json ratios = json::array();
    for (int r = 0; r + 1 < R; ++r) {
        std::vector<double> q;
        for (const auto& d : diffs) q.push_back(d[r] / d[r + 1]);
        ratios.push_back(mean(q));
    }
    return {{"monotone_decrease", monotone}, {"differences_member0", diffs[0]}, {"mean_rung_ratio", ratios}};
}

//------------------------------------------------------------------------------
// paracontrolled
//------------------------------------------------------------------------------
struct PcRecord {
    int iterations = 0, halvings = 0;
    double max_ratio = 0.0, t_local = 0.0, assembly = 0.0, stencil = 0.0, residual = 0.0;
    double cross_gap = std::numeric_limits<double>::quiet_NaN();
    bool in_range = false;
};

ParacontrolledState last_slice(const ParacontrolledState& s) {
    const std::size_t n = s.X.size() - 1;
    return {s.X.slice(n, 1), s.Q.slice(n, 1), s.u_prime.slice(n, 1), s.u_sharp.slice(n, 1), s.w.slice(n, 1),
            s.u_assembled.slice(n, 1), s.gamma, s.in_proof_range, s.assembly_defect, s.stencil_defect};
}

json paracontrolled_impl(Run& run) {
    const auto& cfg = run.cfg();
    const auto u0 = parse_u0(cfg);
    const bool regularity = cfg.params.at("regularity").get<bool>();
    const bool cross = cfg.params.at("cross_check").get<bool>();
    require(!regularity || cfg.ensemble_size >= 20, ErrorKind::InsufficientData,
            "paracontrolled: the regularity report needs ensemble_size >= 20 (set params.regularity false)");
    const std::size_t M = members(cfg);
    std::vector<PcRecord> rec(M);
    std::vector<std::optional<ParacontrolledState>> finals(M);
    std::vector<std::string> notes;
    parallel_for(M, cfg.threads, [&](std::size_t m) {
        with_member_context(m, [&] {
            const auto X = build_X(cfg.noise, m).X;
            const auto s = solve_paracontrolled(u0, X, cfg.solver);
            auto& r = rec[m];
            r.iterations = s.report.iterations;
            r.halvings = s.report.halvings;
            r.max_ratio = s.report.max_ratio;
            r.t_local = s.report.t_local;
            r.assembly = s.state.assembly_defect;
            r.stencil = s.state.stencil_defect;
            r.in_range = s.state.in_proof_range;
            const auto res = residual_mild(s.state);
            r.residual = *std::max_element(res.begin(), res.end());
            if (cross) {
                const auto d = solve_local(u0, X, cfg.solver);
                r.cross_gap = 0.0;
                for (std::size_t n = 0; n < std::min(d.v.size(), s.state.X.size()); ++n)
                    r.cross_gap = std::max(r.cross_gap, l2_norm(s.state.u_assembled[n] - s.state.X[n] - d.v[n]));
            }
            if (regularity) finals[m] = last_slice(s.state);
            return 0;
        });
    });

    auto csv = run.csv("runs.csv", "paracontrolled_runs.v1",
                       {"member", "iterations", "halvings", "max_contraction_ratio", "t_local", "assembly_defect",
                        "stencil_defect", "max_mild_residual", "cross_check_gap"});
    double ratio = 0.0, assembly = 0.0, gap = 0.0, stencil = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        const auto& r = rec[m];
        csv.row(m, r.iterations, r.halvings, r.max_ratio, r.t_local, r.assembly, r.stencil, r.residual, r.cross_gap);
        ratio = std::max(ratio, r.max_ratio);
        assembly = std::max(assembly, r.assembly);
        stencil = std::max(stencil, r.stencil);
        if (cross) gap = std::max(gap, r.cross_gap);
    }
    json summary{{"in_proof_range", rec[0].in_range},
                 {"max_contraction_ratio", ratio},
                 {"max_assembly_defect", assembly},
                 {"max_stencil_defect", stencil}};
    if (!rec[0].in_range) run.warn("gamma outside (5/4, 4/3]: paracontrolled run is a cross-validation only");
    if (cross) summary["max_cross_check_gap"] = gap;
    if (regularity) {
        std::vector<ParacontrolledState> states;
        for (auto& f : finals) states.push_back(std::move(*f));
        auto ecsv = run.csv("exponents.csv", "paracontrolled_exponents.v1",
                            {"quantity", "convention", "fitted", "stderr", "predicted", "note"});
        json ex;
        for (auto p : {Integrability::LInf, Integrability::L2}) {
            const std::string conv = p == Integrability::LInf ? "holder_moment_sup" : "sobolev_block_l2";
            json block;
            double u = 0.0, sharp = 0.0;
            for (const auto& row : regularity_report(states, p)) {
                ecsv.row(row.name, conv, row.fitted, row.stderr_fit, row.predicted, row.note);
                block[row.name] = {{"fitted", row.fitted}, {"stderr", row.stderr_fit}, {"predicted", row.predicted}};
                if (row.name == "u") u = row.fitted;
                if (row.name == "u_sharp") sharp = row.fitted;
            }
            block["gap_sharp_minus_u"] = sharp - u;
            ex[conv] = block;
        }
        summary["exponents"] = ex;
    }
    return summary;
}

//------------------------------------------------------------------------------
// admissible scan
//------------------------------------------------------------------------------
json admissible_impl(Run& run) {
    const auto& cfg = run.cfg();
    auto levels = param_list<int>(cfg, "n_band");
    const bool zero = cfg.params.at("zero_noise").get<bool>();
    std::sort(levels.begin(), levels.end());
    require(levels.size() >= 2 && levels.front() >= 2, ErrorKind::Config, "admissible_scan: need >= 2 n_band levels, each >= 2");
    require(std::adjacent_find(levels.begin(), levels.end()) == levels.end(), ErrorKind::Config,
            "admissible_scan: n_band levels must be distinct");
    const double gamma = cfg.solver.gamma, beta = cfg.noise.beta;
    require(beta >= 0.0, ErrorKind::Config, "admissible_scan: noise.beta must be >= 0");
    const std::size_t M = members(cfg);

    auto csv = run.csv("scan.csv", "admissible_scan.v1", {"n_band", "N", "dt", "mean_l2_u1", "stderr"});
    std::vector<double> xs, ys;
    bool all_zero = true;
    for (int nb : levels) {
        NoiseConfig nc;
        nc.gamma = gamma;
        nc.seed = cfg.seed;
        nc.grid = TorusGrid(scan_grid_size(cfg, nb));
        nc.dt = scan_dt(cfg, nb);
        nc.n_steps = static_cast<int>(std::lround(cfg.solver.T / nc.dt));
        nc.variant = NoiseVariant::BandLimited;
        nc.n_band = nb;
        nc.beta = beta;
        nc.validate();
        std::vector<double> norms(M);
        parallel_for(M, cfg.threads, [&](std::size_t m) {
            const auto Y = zero ? TimePath(nc.grid, nc.dt, std::size_t(nc.n_steps) + 1) : *build_X(nc, m, true).Y;
            norms[m] = l2_norm(first_iterate(Y, gamma).back());
        });
        const double mu = mean(norms);
        double sq = 0.0;
        for (double v : norms) sq += (v - mu) * (v - mu);
        const double se = M > 1 ? std::sqrt(sq / double(M - 1) / double(M)) : std::numeric_limits<double>::quiet_NaN();
        csv.row(nb, nc.grid.n_modes(), nc.dt, mu, se);
        if (mu > 0.0) {
            all_zero = false;
            xs.push_back(std::log2(double(nb)));
            ys.push_back(std::log2(mu));
        }
    }
    const double predicted = 2.0 * (beta - gamma + 1.0);
    const bool admissible = beta <= gamma - 1.0;
    json summary{{"predicted_exponent", predicted}, {"admissible", admissible}, {"all_zero", all_zero}};
    if (xs.size() >= 2) {
        const auto fit = least_squares(xs, ys);
        summary["exponent"] = fit.slope;
        summary["stderr"] = fit.stderr_slope;
        summary["sign_consistent"] = (fit.slope < 0.0) == admissible;
    } else {
        summary["exponent"] = nullptr;
    }
    return summary;
}

}  // namespace

TimePath first_iterate(const TimePath& X, double gamma) {
    TimePath h(X.grid(), X.dt(), X.size(), X.t0());
    for (std::size_t n = 0; n < X.size(); ++n) h[n] = derivative(dealiased_product(X[n], X[n]));
    return duhamel_path(h, gamma);
}

int scan_grid_size(const ExperimentConfig& cfg, int n_band) {
    int n = cfg.solver.grid.n_modes();
    while (n < 4 * n_band) n *= 2;
    return n;
}

double scan_dt(const ExperimentConfig& cfg, int n_band) {
    const double target = std::min(cfg.solver.dt, 0.25 / std::pow(double(n_band), cfg.solver.gamma));
    return cfg.solver.T / std::ceil(cfg.solver.T / target);
}

json run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    Run run(cfg);
    try {
        json summary;
        switch (cfg.experiment) {
            case Experiment::Covariance: summary = covariance_impl(run); break;
            case Experiment::Regularity: summary = regularity_impl(run); break;
            case Experiment::Simulate: summary = simulate_impl(run); break;
            case Experiment::Energy: summary = energy_impl(run); break;
            case Experiment::Convergence: summary = convergence_impl(run); break;
            case Experiment::Paracontrolled: summary = paracontrolled_impl(run); break;
            case Experiment::AdmissibleScan: summary = admissible_impl(run); break;
        }
        run.finish(summary);
        return summary;
    } catch (const Error& e) {
        run.fail(to_string(e.kind()), exit_code_for(e.kind()), e.what());
        throw;
    } catch (const std::exception& e) {
        run.fail("internal", 1, e.what());
        throw;
    }
}

namespace {
json run_as(const ExperimentConfig& cfg, Experiment e) {
    require(cfg.experiment == e, ErrorKind::Config, "config is for experiment " + to_string(cfg.experiment) + ", not " + to_string(e));
    return run_experiment(cfg);
}
}  // namespace

json run_covariance(const ExperimentConfig& cfg) { return run_as(cfg, Experiment::Covariance); }
json run_regularity(const ExperimentConfig& cfg) { return run_as(cfg, Experiment::Regularity); }
json run_simulate(const ExperimentConfig& cfg) { return run_as(cfg, Experiment::Simulate); }
json run_energy(const ExperimentConfig& cfg) { return run_as(cfg, Experiment::Energy); }
json run_convergence(const ExperimentConfig& cfg) { return run_as(cfg, Experiment::Convergence); }
json run_paracontrolled(const ExperimentConfig& cfg) { return run_as(cfg, Experiment::Paracontrolled); }
json run_admissible_scan(const ExperimentConfig& cfg) { return run_as(cfg, Experiment::AdmissibleScan); }

}  // namespace frb::exp
