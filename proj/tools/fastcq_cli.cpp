// Experiment driver: weight accuracy, linear two-point system, beating
// convergence table, nonlinear runs and the fast/direct timing benchmark.
// Every run writes a CSV and a JSON file with the parameters that produced it.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fastcq/fastcq.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitTruncated = 3;

struct RunConfig {
    std::string experiment;
    std::string method = "RadauIIA2";
    std::optional<double> h;
    std::optional<double> T;
    std::optional<double> tol;
    std::string out = ".";
    std::string engine;
    // experiment-specific
    double d = 1.0;
    double A0 = 1.0, A1 = 2.0, B = 3.0;
    std::string truncation = "numeric";
    int q_cap = 512;
    double sigma = 0.0;
    double alpha = std::sqrt(0.01);
    double beta = std::sqrt(0.99);
    double a = 3.0;
    std::optional<double> gamma;
    std::optional<int> n0;
    std::vector<double> hs{2.0, 1.0, 0.5, 0.25, 0.125};
    std::vector<std::size_t> Ns{2048, 4096, 8192, 16384};
    unsigned seed = 1;
};

void apply_json(RunConfig& c, const json& j) {
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    auto opt_d = [&](const char* key, std::optional<double>& field) {
        if (j.contains(key)) field = j.at(key).get<double>();
    };
    opt("method", c.method);
    opt_d("h", c.h);
    opt_d("T", c.T);
    opt_d("tol", c.tol);
    opt("out", c.out);
    opt("engine", c.engine);
    opt("d", c.d);
    opt("A0", c.A0);
    opt("A1", c.A1);
    opt("B", c.B);
    opt("truncation", c.truncation);
    opt("q_cap", c.q_cap);
    opt("sigma", c.sigma);
    opt("alpha", c.alpha);
    opt("beta", c.beta);
    opt("a", c.a);
    opt_d("gamma", c.gamma);
    if (j.contains("n0")) c.n0 = j.at("n0").get<int>();
    opt("hs", c.hs);
    opt("Ns", c.Ns);
    opt("seed", c.seed);
}

json config_json(const RunConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["method"] = c.method;
    if (c.h) j["h"] = *c.h;
    if (c.T) j["T"] = *c.T;
    if (c.tol) j["tol"] = *c.tol;
    j["engine"] = c.engine;
    j["d"] = c.d;
    j["A0"] = c.A0;
    j["A1"] = c.A1;
    j["B"] = c.B;
    j["truncation"] = c.truncation;
    j["q_cap"] = c.q_cap;
    j["sigma"] = c.sigma;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["a"] = c.a;
    if (c.gamma) j["gamma"] = *c.gamma;
    if (c.n0) j["n0"] = *c.n0;
    j["hs"] = c.hs;
    j["Ns"] = c.Ns;
    j["seed"] = c.seed;
    return j;
}

fastcq::PlanOptions plan_options(const RunConfig& c) {
    fastcq::PlanOptions opt;
    opt.A0 = c.A0;
    opt.A1 = c.A1;
    opt.B = c.B;
    if (c.truncation == "closed_form") {
        opt.truncation = fastcq::TruncationMode::closed_form;
    } else if (c.truncation != "numeric") {
        throw fastcq::DomainError("truncation must be 'numeric' or 'closed_form'");
    }
    opt.q_cap = c.q_cap;
    opt.n0_override = c.n0;
    return opt;
}

std::ofstream open_out(const RunConfig& c, const std::string& name) {
    fs::create_directories(c.out);
    std::ofstream os(fs::path(c.out) / name);
    if (!os) throw fastcq::Error("cannot write " + (fs::path(c.out) / name).string());
    return os;
}

void write_json(const RunConfig& c, const std::string& name, const json& j) {
    auto os = open_out(c, name);
    os << j.dump(2) << '\n';
}

int run_weights(const RunConfig& c) {
    const auto m = fastcq::builtin_method(c.method);
    const double h = c.h.value_or(1e-2);
    const double T = c.T.value_or(100.0);
    const double tol = c.tol.value_or(5e-4);
    const auto mc = fastcq::method_constants(m, fastcq::default_b_strip(m, h));
    const auto plan = fastcq::build_plan(mc, m, c.d, h, T, tol, plan_options(c));
    const auto N = static_cast<std::size_t>(std::llround(T / h));
    const auto table = fastcq::weights_fft(fastcq::KernelSpec{1, c.d}, m, h, N, fastcq::default_rho(N));
    const auto seq = fastcq::quadrature_weight_sequence(plan, c.d, m, static_cast<long>(N));

    auto os = open_out(c, "weights.csv");
    os.precision(10);
    os << "n,error,tol,n0,N_Q\n";
    double worst = 0.0;
    for (std::size_t n = static_cast<std::size_t>(plan.n0); n <= N; ++n) {
        const double err = (seq[n - plan.n0] - table.omega[n]).norm();
        worst = std::max(worst, err);
        os << n << ',' << err << ',' << tol << ',' << plan.n0 << ',' << plan.N_Q() << '\n';
    }
    json meta = config_json(c);
    meta["plan"] = fastcq::plan_to_json(plan);
    meta["max_error"] = worst;
    meta["N"] = N;
    write_json(c, "weights.json", meta);
    std::cout << "n0 = " << plan.n0 << ", N_Q = " << plan.N_Q() << ", max error = " << worst << '\n';
    return kExitOk;
}

int run_linear(const RunConfig& c) {
    const auto m = fastcq::builtin_method(c.method);
    const double h = c.h.value_or(0.1);
    const double T = c.T.value_or(40.0);
    fastcq::EngineSettings es;
    es.tol = c.tol.value_or(1e-6);
    es.plan_options = plan_options(c);
    const auto cfg = fastcq::two_point_example();
    const std::string engine = c.engine.empty() ? "both" : c.engine;

    json meta = config_json(c);
    std::vector<fastcq::ChargeTrajectory> runs;
    for (const std::string name : {"fast", "direct"}) {
        if (engine != "both" && engine != name) continue;
        es.kind = fastcq::parse_engine(name);
        runs.push_back(fastcq::solve_linear_two_point(cfg, m, h, T, es));
        auto os = open_out(c, "linear_" + name + ".csv");
        fastcq::write_trajectory_csv(runs.back(), os);
        meta[name] = fastcq::trajectory_metadata(runs.back());
    }
    if (runs.empty()) throw fastcq::DomainError("engine must be fast, direct or both");
    if (runs.size() == 2) {
        double diff = 0.0;
        for (std::size_t n = 0; n < runs[0].steps(); ++n) {
            for (std::size_t j = 0; j < 2; ++j) {
                diff = std::max(diff, (runs[0].stages[n][j] - runs[1].stages[n][j]).cwiseAbs().maxCoeff());
            }
        }
        meta["sup_difference"] = diff;
        std::cout << "fast vs direct sup difference = " << diff << '\n';
    }
    for (const auto& r : runs) {
        if (r.n0 > 0) std::cout << "n0 = " << r.n0 << ", N_Q = " << r.N_Q << '\n';
    }
    write_json(c, "linear.json", meta);
    return kExitOk;
}

int run_beating(const RunConfig& c) {
    const auto m = fastcq::builtin_method(c.method);
    const double T = c.T.value_or(100.0);
    fastcq::EngineSettings es;
    es.tol = c.tol.value_or(1e-8);
    es.kind = c.engine.empty() ? fastcq::EngineKind::fast : fastcq::parse_engine(c.engine);
    es.plan_options = plan_options(c);
    fastcq::NonlinearConfig base;
    base.a = c.a;
    base.alpha = c.alpha;
    base.beta = c.beta;
    const auto rows = fastcq::beating_convergence(c.hs, m, T, es, base);
    auto os = open_out(c, "beating.csv");
    os.precision(10);
    os << "h,error,eoc,n0,N_Q\n";
    for (const auto& r : rows) {
        os << r.h << ',' << r.error << ',';
        if (r.eoc) os << *r.eoc;
        os << ',' << r.n0 << ',' << r.N_Q << '\n';
        std::cout << "h = " << r.h << "  e = " << r.error;
        if (r.eoc) std::cout << "  EOC = " << *r.eoc;
        std::cout << '\n';
    }
    write_json(c, "beating.json", config_json(c));
    return kExitOk;
}

int run_nonlinear(const RunConfig& c) {
    const auto m = fastcq::builtin_method(c.method);
    const double h = c.h.value_or(0.5);
    const double T = c.T.value_or(100.0);
    fastcq::EngineSettings es;
    es.tol = c.tol.value_or(1e-8);
    es.kind = c.engine.empty() ? fastcq::EngineKind::fast : fastcq::parse_engine(c.engine);
    es.plan_options = plan_options(c);
    fastcq::NonlinearConfig cfg;
    cfg.a = c.a;
    cfg.sigma = c.sigma;
    cfg.alpha = c.alpha;
    cfg.beta = c.beta;
    cfg.gamma = c.gamma;
    const auto pair = fastcq::bound_states(cfg.a, cfg.gamma_linear);
    const auto tr = fastcq::solve_nonlinear(cfg, m, h, T, pair, es);
    auto os = open_out(c, "nonlinear.csv");
    fastcq::write_trajectory_csv(tr, os);
    json meta = config_json(c);
    meta["run"] = fastcq::trajectory_metadata(tr);
    write_json(c, "nonlinear.json", meta);
    if (tr.truncated) {
        std::cerr << "run truncated at step " << *tr.truncation_step << ": " << tr.truncation_reason << '\n';
        return kExitTruncated;
    }
    return kExitOk;
}

int run_bench(const RunConfig& c) {
    const auto m = fastcq::builtin_method(c.method);
    const double T = c.T.value_or(200.0);
    const auto rows = fastcq::run_engine_bench(c.Ns, m, T, c.sigma, c.tol.value_or(1e-6));
    auto os = open_out(c, "bench.csv");
    os << "N,engine,seconds,setup_seconds,n0,N_Q\n";
    for (const auto& r : rows) {
        os << r.N << ',' << fastcq::engine_name(r.engine) << ',' << r.seconds << ',' << r.setup_seconds << ','
           << r.n0 << ',' << r.N_Q << '\n';
    }
    json meta = config_json(c);
    meta["slope_fast"] = fastcq::loglog_slope(rows, fastcq::EngineKind::fast);
    meta["slope_direct"] = fastcq::loglog_slope(rows, fastcq::EngineKind::direct);
    std::optional<std::size_t> crossover;
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
        if (rows[i].seconds < rows[i + 1].seconds) {
            crossover = rows[i].N;
            break;
        }
    }
    if (crossover) meta["crossover_N"] = *crossover;
    write_json(c, "bench.json", meta);
    std::cout << "slope fast = " << meta["slope_fast"] << ", slope direct = " << meta["slope_direct"] << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fast and oblivious convolution quadrature for Schroedinger equations with point interactions"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "Print this help message and exit");  // keeps -h free of --h

    RunConfig flags;
    std::string config_path;
    std::optional<std::string> method;
    std::optional<std::string> out;
    std::optional<std::string> engine;
    std::optional<double> sigma;
    std::optional<double> d;
    std::optional<int> n0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON file with run parameters")->check(CLI::ExistingFile);
        sub->add_option("--method", method, "Runge-Kutta method (BackwardEuler, RadauIIA2, RadauIIA3, LobattoIIIC2)");
        sub->add_option("--h", flags.h, "time step");
        sub->add_option("--T", flags.T, "final time");
        sub->add_option("--tol", flags.tol, "quadrature tolerance");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--engine", engine, "fast, direct (or both for linear)");
        sub->add_option("--n0", n0, "override the number of direct steps");
    };

    auto* weights = app.add_subcommand("weights", "real-line quadrature weights against FFT weights");
    add_common(weights);
    weights->add_option("--d", d, "distance");
    auto* linear = app.add_subcommand("linear", "linear system with time-dependent potentials");
    add_common(linear);
    auto* beating = app.add_subcommand("beating", "convergence table for the linear beating problem");
    add_common(beating);
    auto* nonlinear = app.add_subcommand("nonlinear", "nonlinear point interactions");
    add_common(nonlinear);
    nonlinear->add_option("--sigma", sigma, "power of the nonlinearity");
    auto* bench = app.add_subcommand("bench", "fast versus direct timing");
    add_common(bench);
    bench->add_option("--sigma", sigma, "power of the nonlinearity");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig c;
        c.experiment = app.get_subcommands().front()->get_name();
        if (c.experiment == "bench") {
            c.method = "BackwardEuler";
            c.sigma = 0.8;
        }
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            apply_json(c, json::parse(is));
        }
        if (method) c.method = *method;
        if (flags.h) c.h = flags.h;
        if (flags.T) c.T = flags.T;
        if (flags.tol) c.tol = flags.tol;
        if (out) c.out = *out;
        if (engine) c.engine = *engine;
        if (sigma) c.sigma = *sigma;
        if (d) c.d = *d;
        if (n0) c.n0 = n0;

        if (c.experiment == "weights") return run_weights(c);
        if (c.experiment == "linear") return run_linear(c);
        if (c.experiment == "beating") return run_beating(c);
        if (c.experiment == "nonlinear") return run_nonlinear(c);
        return run_bench(c);
    } catch (const fastcq::InfeasiblePlanError& e) {
        std::cerr << "infeasible plan: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
}
