// mfdl: command-line driver for the mean-field / Monte-Carlo dropout lab.
//
// Each subcommand starts from built-in defaults, applies a JSON config file
// (--config), then the common flags, and records the resolved config on the
// first line of every file it writes.
//
// Exit codes: 0 ok, 1 usage or config error, 2 numerical non-convergence, 3 I/O.

#include "output.hpp"

#include "mfdl/ensemble.hpp"
#include "mfdl/error.hpp"
#include "mfdl/linear_theory.hpp"
#include "mfdl/meanfield.hpp"
#include "mfdl/phase.hpp"
#include "mfdl/universality.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

using json = nlohmann::json;
using namespace mfdl;
using mfdl::cli::CsvWriter;
using mfdl::cli::format_optional;
using mfdl::cli::format_real;
using mfdl::cli::IoError;
using mfdl::cli::json_real;

constexpr const char* kVersion = "0.1.0";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<int> quad_order;
    std::optional<int> instances;
    bool no_timestamp = false;
};

struct Context {
    std::string command;
    json config;  // resolved
    int threads = 1;
    std::filesystem::path out;
    bool timestamp = true;

    json header() const {
        return {{"tool", "mfdl"}, {"version", kVersion}, {"command", command}, {"threads", threads},
                {"config", config}};
    }
};

// ---------------------------------------------------------------- config

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
    return j;
}

int resolve_threads(const Common& c) {
    if (c.threads) {
        if (*c.threads < 1) throw UsageError("--threads must be >= 1");
        return *c.threads;
    }
    if (const char* env = std::getenv("MFDL_THREADS"); env && *env) {
        try {
            const int t = std::stoi(env);
            if (t >= 1) return t;
        } catch (const std::exception&) {
        }
        throw UsageError(std::string("MFDL_THREADS must be a positive integer, got '") + env + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

Context make_context(const std::string& command, json defaults, const Common& c) {
    if (!c.config_path.empty()) {
        const json user = load_config_file(c.config_path);
        for (const auto& [key, value] : user.items()) {
            if (!defaults.contains(key)) throw UsageError("unknown config key '" + key + "' for " + command);
            defaults[key] = value;
        }
    }
    auto override_key = [&](const char* key, const json& value, const char* flag) {
        if (defaults.contains(key))
            defaults[key] = value;
        else
            std::cerr << "note: " << flag << " has no effect on " << command << '\n';
    };
    if (c.seed) override_key("seed", *c.seed, "--seed");
    if (c.instances) override_key("instances", *c.instances, "--instances");
    if (c.quad_order) override_key("quad_order", *c.quad_order, "--quad-order");

    Context ctx;
    ctx.command = command;
    ctx.config = std::move(defaults);
    ctx.threads = resolve_threads(c);
    ctx.out = c.out_dir;
    ctx.timestamp = !c.no_timestamp;
    return ctx;
}

template <class T>
T get(const json& cfg, const char* key) {
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError(std::string("config key '") + key + "' is missing or has the wrong type");
    }
}

std::optional<double> get_optional_real(const json& cfg, const char* key) {
    if (!cfg.contains(key) || cfg.at(key).is_null()) return std::nullopt;
    return get<double>(cfg, key);
}

std::pair<double, double> get_pair(const json& cfg, const char* key) {
    const auto v = get<std::vector<double>>(cfg, key);
    if (v.size() != 2) throw UsageError(std::string("config key '") + key + "' must be a two-element array");
    return {v[0], v[1]};
}

ActivationKind activation_of(const json& cfg) {
    try {
        return parse_activation(get<std::string>(cfg, "activation"));
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

MeanFieldParams params_of(const json& cfg, std::optional<double> rho = std::nullopt) {
    MeanFieldParams p;
    p.sigma_w_sq = get<double>(cfg, "sigma_w_sq");
    p.sigma_b_sq = get<double>(cfg, "sigma_b_sq");
    p.rho = rho ? *rho : get<double>(cfg, "rho");
    p.validate();
    return p;
}

QuadratureRule rule_of(const json& cfg) { return make_rule(get<int>(cfg, "quad_order")); }

int positive_int(const json& cfg, const char* key) {
    const int v = get<int>(cfg, key);
    if (v < 1) throw UsageError(std::string("config key '") + key + "' must be >= 1");
    return v;
}

// ---------------------------------------------------------------- progress

class Progress {
  public:
    explicit Progress(std::string label) : label_(std::move(label)) {}

    std::function<void(int, int)> callback() {
        return [this](int done, int total) {
            std::lock_guard lock(mutex_);
            std::cerr << '\r' << label_ << ' ' << done << '/' << total << std::flush;
            if (done == total) std::cerr << '\n';
        };
    }

  private:
    std::string label_;
    std::mutex mutex_;
};

std::string rho_tag(double rho) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", rho);
    return buf;
}

EnsembleOptions ensemble_options(const Context& ctx, int instances, double c0, std::optional<double> q0) {
    EnsembleOptions eo;
    eo.n_instances = instances;
    eo.c0 = c0;
    eo.q0 = q0;
    eo.threads = ctx.threads;
    eo.quad_order = get<int>(ctx.config, "quad_order");
    eo.cache_budget_bytes = kDefaultWeightCacheBytes;
    return eo;
}

// ---------------------------------------------------------------- lengthmap

json cmd_lengthmap(const Common& common) {
    Context ctx = make_context("lengthmap",
                               {{"activation", "linear"},
                                {"sigma_w_sq", 0.25},
                                {"sigma_b_sq", 2.25},
                                {"rhos", {1.0, 0.7, 0.4}},
                                {"quantity", "q"},
                                {"mode", "layers"},
                                {"layers", 20},
                                {"q0", 1.0},
                                {"c0", 0.9},
                                {"grid", nullptr},
                                {"simulate", false},
                                {"width", 1000},
                                {"instances", 100},
                                {"seed", 1},
                                {"quad_order", kDefaultQuadOrder}},
                               common);
    const json& cfg = ctx.config;
    const ActivationKind act = activation_of(cfg);
    const auto rhos = get<std::vector<double>>(cfg, "rhos");
    if (rhos.empty()) throw UsageError("lengthmap: 'rhos' is empty");
    const std::string quantity = get<std::string>(cfg, "quantity");
    const std::string mode = get<std::string>(cfg, "mode");
    if (quantity != "q" && quantity != "c") throw UsageError("lengthmap: quantity must be \"q\" or \"c\"");
    if (mode != "layers" && mode != "map") throw UsageError("lengthmap: mode must be \"layers\" or \"map\"");
    const bool simulate = get<bool>(cfg, "simulate");
    const int width = positive_int(cfg, "width");
    const int instances = positive_int(cfg, "instances");
    const auto seed = get<std::uint64_t>(cfg, "seed");
    const double q0 = get<double>(cfg, "q0");
    const double c0 = get<double>(cfg, "c0");
    const QuadratureRule rule = rule_of(cfg);
    const Metric metric = quantity == "q" ? Metric::QAA : Metric::CAB;

    std::vector<double> grid;
    if (mode == "map") {
        double lo = quantity == "q" ? 0.5 : 0.0;
        double hi = quantity == "q" ? 15.0 : 1.0;
        int points = quantity == "q" ? 30 : 21;
        if (!cfg.at("grid").is_null()) {
            const auto g = get<std::vector<double>>(cfg, "grid");
            if (g.size() != 3) throw UsageError("lengthmap: grid must be [lo, hi, points]");
            lo = g[0];
            hi = g[1];
            points = static_cast<int>(g[2]);
        }
        grid = linear_grid(lo, hi, points);
    }

    json files = json::array();
    for (double rho : rhos) {
        const MeanFieldParams p = params_of(cfg, rho);
        NetworkConfig net;
        net.width = width;
        net.params = p;
        net.activation = act;
        net.seed = seed;

        std::vector<double> xs, theory, sim_mean;
        std::vector<std::optional<double>> sim_err;
        if (mode == "layers") {
            const int layers = positive_int(cfg, "layers");
            LengthState s{q0, q0, c0, 0};
            xs.push_back(0);
            theory.push_back(quantity == "q" ? q0 : c0);
            for (int l = 1; l <= layers; ++l) {
                s = c_step(s, p, act, rule);
                xs.push_back(l);
                theory.push_back(quantity == "q" ? s.q_aa : s.c_ab);
            }
            if (simulate) {
                net.depth = layers;
                Progress progress("lengthmap rho=" + rho_tag(rho));
                EnsembleOptions eo = ensemble_options(ctx, instances, c0, q0);
                eo.preactivation_inputs = true;
                eo.metrics = {metric};
                eo.progress = progress.callback();
                const EnsembleStats st = ensemble_run(net, eo).stats.at(metric);
                sim_mean.push_back(quantity == "q" ? q0 : c0);
                sim_err.push_back(0.0);
                for (int l = 1; l <= layers; ++l) {
                    sim_mean.push_back(st.mean[l - 1]);
                    sim_err.push_back(st.std_error[l - 1]);
                }
            }
        } else {
            double q_star = kNaN;
            if (quantity == "c") q_star = q_fixed_point(p, act, rule).value;
            for (double x : grid) {
                xs.push_back(x);
                if (quantity == "q")
                    theory.push_back(q_step(x, p, act, rule));
                else
                    theory.push_back(c_step(LengthState{q_star, q_star, x, 0}, p, act, rule).c_ab);
            }
            if (simulate) {
                net.depth = 1;
                Progress progress("lengthmap rho=" + rho_tag(rho));
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    const double qin = quantity == "q" ? grid[i] : q_star;
                    const double cin = quantity == "q" ? c0 : grid[i];
                    EnsembleOptions eo = ensemble_options(ctx, instances, cin, qin);
                    eo.preactivation_inputs = true;
                    eo.metrics = {metric};
                    const EnsembleStats st = ensemble_run(net, eo).stats.at(metric);
                    sim_mean.push_back(st.mean[0]);
                    sim_err.push_back(st.std_error[0]);
                    progress.callback()(static_cast<int>(i + 1), static_cast<int>(grid.size()));
                }
            }
        }

        CsvWriter csv(ctx.out, "lengthmap_" + quantity + "_" + mode + "_rho" + rho_tag(rho) + ".csv", ctx.header(),
                      ctx.timestamp, {"layer_or_qin", "theory", "sim_mean", "sim_stderr", "rho"});
        for (std::size_t i = 0; i < xs.size(); ++i)
            csv.row({format_real(xs[i]), format_real(theory[i]),
                     simulate ? format_real(sim_mean[i]) : std::string(),
                     simulate ? format_optional(sim_err[i]) : std::string(), format_real(rho)});
        csv.close();
        files.push_back(csv.path().string());
    }
    return {{"command", "lengthmap"}, {"files", files}};
}

// ---------------------------------------------------------------- gradsim

json cmd_gradsim(const Common& common) {
    Context ctx = make_context("gradsim",
                               {{"activation", "linear"},
                                {"sigma_w_sq", 0.5},
                                {"sigma_b_sq", 0.1},
                                {"rho", 1.0},
                                {"depth", 200},
                                {"width", 1000},
                                {"instances", 100},
                                {"seed", 1},
                                {"c0", 0.9},
                                {"q0", nullptr},
                                {"fit_window", {0.2, 0.8}},
                                {"quad_order", kDefaultQuadOrder}},
                               common);
    const json& cfg = ctx.config;
    NetworkConfig net;
    net.activation = activation_of(cfg);
    net.params = params_of(cfg);
    net.depth = positive_int(cfg, "depth");
    net.width = positive_int(cfg, "width");
    net.seed = get<std::uint64_t>(cfg, "seed");
    const int instances = positive_int(cfg, "instances");
    const auto [fit_lo, fit_hi] = get_pair(cfg, "fit_window");
    const QuadratureRule rule = rule_of(cfg);
    const MeanFieldParams& p = net.params;
    const int L = net.depth;

    // Theory side. q* may not exist (Linear/ReLU with growing lengths); the
    // chi's of those activations do not need it.
    double q_star = kNaN;
    try {
        q_star = q_fixed_point(p, net.activation, rule).value;
    } catch (const ConvergenceError&) {
        if (!positively_homogeneous(net.activation)) throw;
    }
    const double c_star = c_fixed_point(p, net.activation, rule).value;
    const double x1 = chi1_at(p, net.activation, rule);
    const double x2 = chi2(std::isfinite(q_star) ? q_star : 1.0, c_star, p, net.activation, rule);

    Progress progress("gradsim");
    EnsembleOptions eo = ensemble_options(ctx, instances, get<double>(cfg, "c0"), get_optional_real(cfg, "q0"));
    eo.metrics.assign(std::begin(kGradientMetrics), std::end(kGradientMetrics));
    eo.progress = progress.callback();
    const EnsembleResult ens = ensemble_run(net, eo);
    const auto& gaa = ens.stats.at(Metric::GAA);
    const auto& gab = ens.stats.at(Metric::GAB);
    const auto& gt = ens.stats.at(Metric::GTildeAB);

    const bool linear_theory = net.activation == ActivationKind::Linear && std::isfinite(q_star);
    const BaselinePrediction top{gaa.mean[L - 1], gab.mean[L - 1]};

    CsvWriter csv(ctx.out, "gradsim.csv", ctx.header(), ctx.timestamp,
                  {"layer", "g_aa_mean", "g_aa_stderr", "g_ab_mean", "g_ab_stderr", "g_tilde_ab_mean",
                   "g_tilde_ab_stderr", "g_aa_linear", "g_ab_linear", "g_aa_indep", "g_ab_indep", "g_ab_chi1",
                   "g_tilde_ab_chi1"});
    for (int l = 1; l <= L; ++l) {
        const BaselinePrediction indep = independence_baseline(l, L, x1, x2, top.g_aa, top.g_ab);
        const double chi1_pow = std::pow(x1, L - l);
        std::string lin_aa, lin_ab;
        if (linear_theory) {
            lin_aa = format_real(g_aa_closed(l, L, p, q_star));
            lin_ab = format_real(g_ab_closed(l, L, p, c_star * q_star));
        }
        csv.row({std::to_string(l), format_real(gaa.mean[l - 1]), format_optional(gaa.std_error[l - 1]),
                 format_real(gab.mean[l - 1]), format_optional(gab.std_error[l - 1]), format_real(gt.mean[l - 1]),
                 format_optional(gt.std_error[l - 1]), lin_aa, lin_ab, format_real(indep.g_aa),
                 format_real(indep.g_ab), format_real(top.g_ab * chi1_pow),
                 format_real(gt.mean[L - 1] * chi1_pow)});
    }
    csv.close();

    json slopes = json::object();
    for (const auto* st : {&gaa, &gab, &gt}) {
        try {
            const LogSlopeFit f = fit_log_slope(st->mean, fit_lo, fit_hi);
            // ln g^l = (L - l) ln chi + const, so the rate per layer toward the input is -slope.
            slopes[std::string(to_string(st->metric))] = {{"rate", -f.slope}, {"r_squared", f.r_squared}};
        } catch (const InvalidArgument& e) {
            slopes[std::string(to_string(st->metric))] = {{"error", e.what()}};
        }
    }
    return {{"command", "gradsim"},    {"file", csv.path().string()}, {"q_star", json_real(q_star)},
            {"c_star", c_star},        {"chi1", x1},                  {"chi2", x2},
            {"ln_chi1", std::log(x1)}, {"ln_chi2", json_real(std::log(std::abs(x2)))},
            {"fitted_rates", slopes},  {"q0", ens.q0}};
}

// ---------------------------------------------------------------- universality

json cmd_universality(const Common& common) {
    Context ctx = make_context("universality",
                               {{"depth", 200},
                                {"sigma_b_sq", 0.1},
                                {"instances", 100},
                                {"seed", 1},
                                {"c0", 0.9},
                                {"window", {0.1, 0.95}},
                                {"activations", {"linear", "relu", "tanh", "hardtanh"}},
                                {"rhos", {1.0, 0.7, 0.4}},
                                {"widths", {500}},
                                {"sigma_w_sq", nullptr},
                                {"configs", nullptr},
                                {"quad_order", kDefaultQuadOrder}},
                               common);
    const json& cfg = ctx.config;
    std::vector<UniversalityConfig> rows;
    const auto sw_override = get_optional_real(cfg, "sigma_w_sq");
    if (!cfg.at("configs").is_null()) {
        if (!cfg.at("configs").is_array()) throw UsageError("universality: 'configs' must be an array");
        for (const json& c : cfg.at("configs")) {
            UniversalityConfig u;
            u.activation = activation_of(c);
            u.rho = get<double>(c, "rho");
            u.width = positive_int(c, "width");
            u.sigma_w_sq = get_optional_real(c, "sigma_w_sq");
            if (!u.sigma_w_sq) u.sigma_w_sq = sw_override;
            rows.push_back(u);
        }
    } else {
        for (const auto& name : get<std::vector<std::string>>(cfg, "activations"))
            for (double rho : get<std::vector<double>>(cfg, "rhos"))
                for (int w : get<std::vector<int>>(cfg, "widths")) {
                    UniversalityConfig u;
                    try {
                        u.activation = parse_activation(name);
                    } catch (const InvalidArgument& e) {
                        throw UsageError(e.what());
                    }
                    u.rho = rho;
                    u.width = w;
                    u.sigma_w_sq = sw_override;
                    rows.push_back(u);
                }
    }
    if (rows.empty()) throw UsageError("universality: the configuration list is empty");

    NetworkConfig base;
    base.depth = positive_int(cfg, "depth");
    base.params.sigma_b_sq = get<double>(cfg, "sigma_b_sq");
    base.seed = get<std::uint64_t>(cfg, "seed");
    const auto [lo, hi] = get_pair(cfg, "window");

    CsvWriter fits(ctx.out, "universality_fits.csv", ctx.header(), ctx.timestamp,
                   {"activation", "rho", "width", "metric", "exponent", "intercept", "r_squared", "n_points",
                    "n_excluded"});
    CsvWriter scatter(ctx.out, "universality_scatter.csv", ctx.header(), ctx.timestamp,
                      {"activation", "rho", "width", "metric", "layer", "mean", "variance"});
    json summary = json::array();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const UniversalityConfig& u = rows[r];
        const std::string label = "universality " + std::string(to_string(u.activation)) + " rho=" +
                                  rho_tag(u.rho) + " N=" + std::to_string(u.width) + " (" + std::to_string(r + 1) +
                                  "/" + std::to_string(rows.size()) + ")";
        Progress progress(label);
        UniversalityOptions uo;
        uo.window_lo = lo;
        uo.window_hi = hi;
        uo.ensemble = ensemble_options(ctx, positive_int(cfg, "instances"), get<double>(cfg, "c0"), std::nullopt);
        uo.ensemble.progress = progress.callback();
        const auto out = universality_report(std::span(&u, 1), base, uo);
        for (const UniversalityRow& row : out) {
            const std::string act(to_string(u.activation));
            const std::string metric(to_string(row.metric));
            const bool ok = row.error.empty();
            fits.row({act, format_real(u.rho), std::to_string(u.width), metric,
                      ok ? format_real(row.fit.exponent) : "nan", ok ? format_real(row.fit.log_intercept) : "nan",
                      ok ? format_real(row.fit.r_squared) : "nan", std::to_string(row.fit.n_points),
                      std::to_string(row.n_excluded)});
            for (std::size_t i = 0; i < row.layers.size(); ++i)
                scatter.row({act, format_real(u.rho), std::to_string(u.width), metric, std::to_string(row.layers[i]),
                             format_real(row.means[i]), format_real(row.variances[i])});
            json s = {{"activation", act},
                      {"rho", u.rho},
                      {"width", u.width},
                      {"sigma_w_sq", row.sigma_w_sq},
                      {"metric", metric}};
            if (ok)
                s["exponent"] = row.fit.exponent;
            else
                s["error"] = row.error;
            summary.push_back(s);
            if (!ok) std::cerr << "universality: " << act << " rho=" << u.rho << ' ' << metric << ": " << row.error << '\n';
        }
    }
    fits.close();
    scatter.close();
    return {{"command", "universality"}, {"files", {fits.path().string(), scatter.path().string()}}, {"rows", summary}};
}

// ---------------------------------------------------------------- phase

json cmd_phase(const Common& common) {
    Context ctx = make_context("phase",
                               {{"activation", "tanh"},
                                {"rho", 1.0},
                                {"sigma_b_sq", 0.05},
                                {"grid", {{"lo", 1.0}, {"hi", 4.0}, {"points", 64}, {"spacing", "log"}}},
                                {"multiplier", kTrainableMultiplier},
                                {"baseline_multiplier", kBaselineMultiplier},
                                {"quad_order", kDefaultQuadOrder}},
                               common);
    const json& cfg = ctx.config;
    const ActivationKind act = activation_of(cfg);
    MeanFieldParams base;
    base.sigma_b_sq = get<double>(cfg, "sigma_b_sq");
    base.rho = get<double>(cfg, "rho");
    base.validate();
    const json& g = cfg.at("grid");
    const double lo = get<double>(g, "lo");
    const double hi = get<double>(g, "hi");
    const int points = positive_int(g, "points");
    const std::string spacing = get<std::string>(g, "spacing");
    std::vector<double> grid;
    if (spacing == "log")
        grid = log_grid(lo, hi, points);
    else if (spacing == "linear")
        grid = linear_grid(lo, hi, points);
    else
        throw UsageError("phase: grid spacing must be \"log\" or \"linear\"");

    const PhaseCurve c = depth_scale_grid(grid, base, act, rule_of(cfg), get<double>(cfg, "multiplier"),
                                          get<double>(cfg, "baseline_multiplier"));

    CsvWriter csv(ctx.out, "phase.csv", ctx.header(), ctx.timestamp,
                  {"sigma_w_sq", "q_star", "c_star", "chi1", "chi2", "xi1", "xi2", "b12xi1", "b6xi2", "b12xi2",
                   "trainable_bound", "converged"});
    json points_json = json::array();
    int failed = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        csv.row({format_real(c.sigma_w_sq[i]), format_real(c.q_star[i]), format_real(c.c_star[i]),
                 format_real(c.chi1[i]), format_real(c.chi2[i]), format_real(c.xi1[i]), format_real(c.xi2[i]),
                 format_real(c.b12xi1[i]), format_real(c.b6xi2[i]), format_real(c.b12xi2[i]),
                 format_real(c.trainable_bound[i]), c.converged[i] ? "true" : "false"});
        json pt = {{"sigma_w_sq", c.sigma_w_sq[i]}, {"converged", static_cast<bool>(c.converged[i])}};
        const std::pair<const char*, double> cols[] = {
            {"q_star", c.q_star[i]}, {"c_star", c.c_star[i]}, {"chi1", c.chi1[i]},   {"chi2", c.chi2[i]},
            {"xi1", c.xi1[i]},       {"xi2", c.xi2[i]},       {"b12xi1", c.b12xi1[i]}, {"b6xi2", c.b6xi2[i]},
            {"b12xi2", c.b12xi2[i]}, {"trainable_bound", c.trainable_bound[i]}};
        for (const auto& [name, v] : cols) {
            pt[name] = json_real(v);
            if (std::isinf(v)) pt[std::string(name) + "_infinite"] = true;
        }
        if (!c.converged[i]) {
            pt["diagnostic"] = c.diagnostic[i];
            ++failed;
        }
        points_json.push_back(pt);
    }
    csv.close();
    mfdl::cli::write_json_file(ctx.out, "phase.json", ctx.header(), ctx.timestamp, points_json);
    return {{"command", "phase"},
            {"files", {csv.path().string(), (ctx.out / "phase.json").string()}},
            {"points", c.size()},
            {"unconverged_points", failed}};
}

// ---------------------------------------------------------------- critical-line

json cmd_critical_line(const Common& common) {
    Context ctx = make_context("critical-line",
                               {{"activation", "tanh"},
                                {"rho", 1.0},
                                {"sigma_b_sq", 0.05},
                                {"bracket", {0.1, 8.0}},
                                {"tol", 1e-10},
                                {"quad_order", kDefaultQuadOrder}},
                               common);
    const json& cfg = ctx.config;
    const ActivationKind act = activation_of(cfg);
    MeanFieldParams base;
    base.sigma_b_sq = get<double>(cfg, "sigma_b_sq");
    base.rho = get<double>(cfg, "rho");
    base.validate();
    const auto [lo, hi] = get_pair(cfg, "bracket");
    const QuadratureRule rule = rule_of(cfg);
    const double crit = critical_line(base, act, rule, lo, hi, get<double>(cfg, "tol"));
    MeanFieldParams at = base;
    at.sigma_w_sq = crit;
    const double x1 = chi1_at(at, act, rule);

    CsvWriter csv(ctx.out, "critical_line.csv", ctx.header(), ctx.timestamp,
                  {"activation", "rho", "sigma_b_sq", "sigma_w_sq_crit", "chi1_at_crit"});
    csv.row({std::string(to_string(act)), format_real(base.rho), format_real(base.sigma_b_sq), format_real(crit),
             format_real(x1)});
    csv.close();
    return {{"command", "critical-line"}, {"file", csv.path().string()}, {"sigma_w_sq_crit", crit}, {"chi1", x1}};
}

// ---------------------------------------------------------------- fixed-point

json cmd_fixed_point(const Common& common) {
    Context ctx = make_context("fixed-point",
                               {{"activation", "tanh"},
                                {"sigma_w_sq", 1.4},
                                {"sigma_b_sq", 0.1},
                                {"rho", 1.0},
                                {"q0", 1.0},
                                {"c0", 0.9},
                                {"tol", 1e-12},
                                {"max_iter", 10000},
                                {"multiplier", kTrainableMultiplier},
                                {"quad_order", kDefaultQuadOrder}},
                               common);
    const json& cfg = ctx.config;
    const ActivationKind act = activation_of(cfg);
    const MeanFieldParams p = params_of(cfg);
    const QuadratureRule rule = rule_of(cfg);
    SolverOptions opts;
    opts.tol = get<double>(cfg, "tol");
    opts.max_iter = positive_int(cfg, "max_iter");

    const FixedPointResult q = q_fixed_point(p, act, rule, get<double>(cfg, "q0"), opts);
    const FixedPointResult c = c_fixed_point(p, act, rule, get<double>(cfg, "c0"), opts);
    DepthScales d;
    d.q_star = q.value;
    d.c_star = c.value;
    d.chi1 = chi1(q.value, p, act, rule);
    d.chi2 = chi2(q.value, c.value, p, act, rule);
    d.xi1 = depth_scale(d.chi1);
    d.xi2 = depth_scale(d.chi2);
    const double bound = trainable_length(d, get<double>(cfg, "multiplier"));

    CsvWriter csv(ctx.out, "fixed_point.csv", ctx.header(), ctx.timestamp,
                  {"q_star", "q_iterations", "c_star", "c_iterations", "chi1", "chi2", "xi1", "xi2",
                   "trainable_bound"});
    csv.row({format_real(d.q_star), std::to_string(q.iterations), format_real(d.c_star), std::to_string(c.iterations),
             format_real(d.chi1), format_real(d.chi2), format_real(d.xi1), format_real(d.xi2), format_real(bound)});
    csv.close();

    json out = {{"command", "fixed-point"},  {"file", csv.path().string()}, {"q_star", d.q_star},
                {"q_iterations", q.iterations}, {"c_star", d.c_star},        {"c_iterations", c.iterations},
                {"chi1", d.chi1},            {"chi2", d.chi2}};
    for (const auto& [name, v] : {std::pair<const char*, double>{"xi1", d.xi1}, {"xi2", d.xi2},
                                  {"trainable_bound", bound}}) {
        out[name] = json_real(v);
        out[std::string(name) + "_infinite"] = std::isinf(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field theory and Monte-Carlo simulation of deep dropout networks"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Common common;
    app.add_option("--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", common.out_dir, "Output directory (created if missing)");
    app.add_option("--seed", common.seed, "Base seed (unsigned 64-bit)");
    app.add_option("--threads", common.threads, "Worker threads (falls back to MFDL_THREADS)");
    app.add_option("--quad-order", common.quad_order, "Gauss-Hermite order, 2..512");
    app.add_option("--instances", common.instances, "Monte-Carlo instances");
    app.add_flag("--no-header-timestamp", common.no_timestamp, "Omit the timestamp line from output headers");

    struct Sub {
        const char* name;
        const char* help;
        json (*run)(const Common&);
    };
    const Sub subs[] = {
        {"lengthmap", "Length / correlation map iterates, optionally with simulation", cmd_lengthmap},
        {"gradsim", "Per-layer gradient metrics: simulation, linear theory, chi baselines", cmd_gradsim},
        {"universality", "Variance-versus-mean power-law fits of gradient metrics", cmd_universality},
        {"phase", "Depth scales and trainable-length bounds over a sigma_w^2 grid", cmd_phase},
        {"critical-line", "sigma_w^2 at which chi1 = 1", cmd_critical_line},
        {"fixed-point", "q*, c*, chi1, chi2 and depth scales at one point", cmd_fixed_point},
    };
    std::vector<std::pair<CLI::App*, const Sub*>> registered;
    for (const Sub& s : subs) {
        CLI::App* sc = app.add_subcommand(s.name, s.help);
        sc->fallthrough();
        registered.emplace_back(sc, &s);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        for (const auto& [sc, s] : registered) {
            if (!sc->parsed()) continue;
            const json summary = s->run(common);
            std::cout << summary.dump() << '\n';
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << " (last iterate " << e.last_iterate() << " after " << e.iterations()
                  << " iterations)\n";
        return 2;
    } catch (const DegenerateState& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const EvaluationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
