// driftless: command-line front end for the simulation, reweighting, drift
// verification and hedging pipeline.

#include "driftless/desk.hpp"
#include "driftless/error.hpp"
#include "driftless/hedging.hpp"
#include "driftless/io.hpp"
#include "driftless/measure.hpp"
#include "driftless/parallel.hpp"
#include "driftless/trainer.hpp"
#include "driftless/var_model.hpp"
#include "driftless/version.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace driftless;

namespace {

// Error raised inside a pipeline stage; keeps the stage and the file it was
// working on so that the message names both.
struct StageError {
    std::string stage;
    std::string file;
    ErrorKind kind;
    std::string message;
};

template <class F>
auto stage(const std::string& name, const fs::path& file, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw StageError{name, file.string(), e.kind(), e.what()};
    } catch (const Json::exception& e) {
        throw StageError{name, file.string(), ErrorKind::Validation, e.what()};
    }
}

class Manifest {
public:
    Manifest(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

    void input(const fs::path& p) {
        if (fs::is_directory(p)) {
            for (const auto& e : fs::directory_iterator(p)) {
                if (e.is_regular_file() && e.path().filename() != "run.json") input(e.path());
            }
            return;
        }
        inputs_[p.string()] = sha256_file(p);
    }
    void output(const fs::path& p) { outputs_.push_back(p); }
    void param(const std::string& key, Json value) { params_[key] = std::move(value); }

    // run.json keeps the latest record per (command, first output), so
    // several commands sharing a directory all stay reachable.
    void write(const fs::path& dir) const {
        Json outs = Json::object();
        for (const auto& p : outputs_) {
            if (fs::is_directory(p)) {
                for (const auto& e : fs::directory_iterator(p)) {
                    if (e.is_regular_file()) outs[e.path().string()] = sha256_file(e.path());
                }
            } else {
                outs[p.string()] = sha256_file(p);
            }
        }
        Json record{{"command", command_},
                    {"version", kVersion},
                    {"seed", seed_},
                    {"threads", thread_count()},
                    {"parameters", params_},
                    {"inputs", inputs_},
                    {"outputs", outs}};
        const fs::path path = dir / "run.json";
        Json manifest{{"runs", Json::object()}};
        if (fs::exists(path)) {
            try {
                Json old = read_json(path);
                if (old.is_object() && old.contains("runs") && old["runs"].is_object()) manifest = old;
            } catch (const std::exception&) {
                // unreadable manifests are replaced
            }
        }
        const std::string key = command_ + (outputs_.empty() ? "" : " " + outputs_.front().string());
        manifest["runs"][key] = record;
        write_json(path, manifest);
    }

private:
    std::string command_;
    std::uint64_t seed_;
    std::map<std::string, std::string> inputs_;
    std::vector<fs::path> outputs_;
    Json params_ = Json::object();
};

fs::path parent_dir(const fs::path& file) {
    const fs::path p = file.parent_path();
    return p.empty() ? fs::path(".") : p;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create directory " + dir.string());
}

void write_file(Manifest& m, const fs::path& path, const std::string& text) {
    write_text_atomic(path, text);
    m.output(path);
}

void write_json_file(Manifest& m, const fs::path& path, const Json& j) {
    write_json(path, j);
    m.output(path);
}

template <class T, class Parse>
T load_config(Manifest& m, const std::string& name, const fs::path& path, Parse&& parse) {
    return stage(name, path, [&] {
        m.input(path);
        return parse(read_json(path));
    });
}

TrainConfig train_config(Manifest& m, const std::optional<fs::path>& path, std::optional<std::uint64_t> seed) {
    TrainConfig c = path ? load_config<TrainConfig>(m, "train config", *path, train_config_from_json) : TrainConfig{};
    if (seed) c.seed = *seed;
    return c;
}

// Path weights of the base measure: the bundle's own weights if it carries
// them, otherwise uniform (empty).
std::vector<double> base_weights(const PathBundle& b) { return b.weights ? *b.weights : std::vector<double>{}; }

std::vector<double> load_weights(Manifest& m, const fs::path& path, std::size_t n_paths) {
    return stage("weights", path, [&] {
        m.input(path);
        auto w = read_weights_csv(path);
        if (w.size() != n_paths) {
            throw Error(ErrorKind::Shape, "weights file has " + std::to_string(w.size()) + " rows for " +
                                              std::to_string(n_paths) + " paths");
        }
        return w;
    });
}

PathBundle load_bundle_input(Manifest& m, const fs::path& dir) {
    return stage("bundle", dir, [&] {
        auto b = load_bundle(dir);
        m.input(dir);
        return b;
    });
}

Json solution_json(const Solution& s, std::span<const InstrumentSpec> instruments) {
    Json j = to_json(s);
    Json ins = Json::array();
    for (const auto& i : instruments) ins.push_back(to_json(i));
    j["instruments"] = ins;
    return j;
}

Json hedge_json(const HedgeResult& h, std::span<const InstrumentSpec> instruments) {
    return Json{{"certainty_equivalent", h.certainty_equivalent},
                {"y", h.y},
                {"stats", to_json(h.stats)},
                {"solution", solution_json(h.solution, instruments)}};
}

Json robustness_json(const RobustnessReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        rows.push_back(Json{{"c", row.c},
                            {"theta", row.theta},
                            {"entropy", row.entropy},
                            {"ce_p", row.ce_p},
                            {"ce_q", row.ce_q},
                            {"delta_ce_p", row.delta_p},
                            {"delta_ce_q", row.delta_q},
                            {"stats_p", to_json(row.stats_p)},
                            {"stats_q", to_json(row.stats_q)}});
    }
    return Json{{"ce_p_uniform", r.ce_p_uniform},
                {"ce_q_uniform", r.ce_q_uniform},
                {"se_p", r.se_p},
                {"se_q", r.se_q},
                {"rows", rows}};
}

std::vector<double> parse_entropies(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(parse_double(item));
    }
    if (out.empty()) throw Error(ErrorKind::Validation, "no entropies given");
    return out;
}

void print_drift(const char* name, const DriftReport& r) {
    std::printf("%s: %zu/%zu rows fail, %zu/%zu buckets fail\n", name, r.failures(), r.rows.size(), r.bucket_failures(),
                r.buckets.size());
}

struct Globals {
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
};

// ---------------------------------------------------------------------------

struct FitVarArgs {
    fs::path history, grid, out;
    double dt_days = 1.0;
};

void run_fit_var(const FitVarArgs& a, const Globals& g) {
    Manifest m("fit-var", g.seed.value_or(0));
    const DlvGrid grid = load_config<DlvGrid>(m, "grid", a.grid, grid_from_json);
    const Eigen::MatrixXd hist = stage("history", a.history, [&] {
        m.input(a.history);
        return read_history_csv(a.history);
    });
    if (hist.cols() != static_cast<Eigen::Index>(1 + grid.n_nodes())) {
        throw StageError{"fit-var", a.history.string(), ErrorKind::Shape, "history width does not match the grid"};
    }
    const VarFit fit = stage("fit-var", a.history, [&] { return fit_var(hist, a.dt_days / kDaysPerYear); });
    VarSpec spec{fit.params, grid, hist.row(hist.rows() - 2).transpose(), hist.row(hist.rows() - 1).transpose()};
    ensure_dir(parent_dir(a.out));
    Json j = to_json(spec);
    write_json_file(m, a.out, j);
    m.param("n_obs", fit.n_obs);
    m.param("ridge_applied", fit.ridge_applied);
    m.write(parent_dir(a.out));
    std::printf("fitted VAR of dimension %zu on %zu observations%s\n", fit.params.dim, fit.n_obs,
                fit.ridge_applied ? " (ridge)" : "");
}

struct SimulateArgs {
    fs::path params, out;
    std::size_t paths = 10000;
    std::size_t steps = 10;
};

void run_simulate(const SimulateArgs& a, const Globals& g) {
    const std::uint64_t seed = g.seed.value_or(1);
    Manifest m("simulate", seed);
    const VarSpec spec = load_config<VarSpec>(m, "params", a.params, var_spec_from_json);
    const PathBundle bundle = stage("simulate", a.params, [&] {
        return simulate(spec.params, spec.grid, spec.init_prev, spec.init, a.paths, a.steps, seed);
    });
    stage("write bundle", a.out, [&] {
        save_bundle(a.out, bundle);
        return 0;
    });
    m.output(a.out);
    m.param("paths", a.paths);
    m.param("steps", a.steps);
    m.write(a.out);
    std::printf("simulated %zu paths of %zu steps into %s\n", a.paths, a.steps, a.out.string().c_str());
}

struct MakeQArgs {
    fs::path bundle, cost, utility, out;
    std::optional<fs::path> train;
    bool bounded = false;
};

void run_make_q(const MakeQArgs& a, const Globals& g) {
    Manifest m("make-q", g.seed.value_or(0));
    const PathBundle bundle = load_bundle_input(m, a.bundle);
    const CostSpec spec = load_config<CostSpec>(m, "cost", a.cost, cost_spec_from_json);
    const Utility u = load_config<Utility>(m, "utility", a.utility, utility_from_json);
    const TrainConfig tc = train_config(m, a.train, g.seed);
    const auto instruments = grid_instruments(bundle.grid);
    const ProblemData data = stage("returns", a.bundle, [&] { return make_problem_data(bundle, instruments); });
    const auto base = base_weights(bundle);

    Solution sol;
    DensityWeights dens;
    if (a.bounded) {
        if (!base.empty()) throw StageError{"make-q", a.bundle.string(), ErrorKind::Validation,
                                            "bounded reweighting needs an unweighted bundle"};
        auto res = stage("make-q", a.bundle, [&] { return bounded_reweight(data, u, tc); });
        sol = std::move(res.solution);
        dens = std::move(res.density);
    } else {
        const Problem pb = make_problem(data, spec, u, base);
        sol = stage("make-q", a.bundle, [&] { return train(pb, tc); });
        dens = stage("density", a.bundle, [&] { return density(pb, sol); });
    }
    std::vector<double> w = dens.weights;
    if (!base.empty()) {
        double mean = 0.0;
        for (std::size_t p = 0; p < w.size(); ++p) mean += (w[p] *= base[p]);
        mean /= static_cast<double>(w.size());
        for (double& x : w) x /= mean;
    }
    ensure_dir(parent_dir(a.out));
    write_file(m, a.out, weights_csv(w));
    const fs::path stem = parent_dir(a.out) / a.out.stem();
    write_json_file(m, fs::path(stem.string() + "_solution.json"), solution_json(sol, instruments));
    write_file(m, fs::path(stem.string() + "_trace.csv"), trace_csv(sol));
    const auto div = divergence(w, u);
    Json summary{{"objective", sol.objective_value},
                 {"y_star", sol.y_star},
                 {"raw_mean", dens.raw_mean},
                 {"mode", to_string(dens.mode)},
                 {"divergence", div.value},
                 {"divergence_se", div.se}};
    write_json_file(m, fs::path(stem.string() + "_summary.json"), summary);
    m.param("bounded", a.bounded);
    m.write(parent_dir(a.out));
    std::printf("objective %.6g  y* %.6g  raw mean %.6f  divergence %.6g (se %.2g)\n", sol.objective_value,
                sol.y_star, dens.raw_mean, div.value, div.se);
}

struct VerifyArgs {
    fs::path bundle, cost, report;
    std::optional<fs::path> weights;
    double z = 3.0;
};

void run_verify(const VerifyArgs& a, const Globals& g) {
    Manifest m("verify", g.seed.value_or(0));
    const PathBundle bundle = load_bundle_input(m, a.bundle);
    const CostSpec spec = load_config<CostSpec>(m, "cost", a.cost, cost_spec_from_json);
    std::vector<double> w = a.weights ? load_weights(m, *a.weights, bundle.n_paths) : base_weights(bundle);
    const auto instruments = grid_instruments(bundle.grid);
    const DriftReport rep = stage("verify", a.bundle, [&] {
        const InstrumentReturn r = build_returns(bundle, instruments);
        return verify_drift(bundle, instruments, r, w, spec, a.z);
    });
    ensure_dir(parent_dir(a.report));
    if (a.report.extension() == ".json") {
        write_json_file(m, a.report, to_json(rep));
    } else {
        write_file(m, a.report, drift_csv(rep));
    }
    m.param("z", a.z);
    m.write(parent_dir(a.report));
    print_drift("drift", rep);
}

struct HedgeArgs {
    fs::path bundle, payoff, cost, utility, out;
    std::optional<fs::path> weights, train;
};

void run_hedge(const HedgeArgs& a, const Globals& g) {
    Manifest m("hedge", g.seed.value_or(0));
    const PathBundle bundle = load_bundle_input(m, a.bundle);
    const PayoffSpec ps = load_config<PayoffSpec>(m, "payoff", a.payoff, payoff_from_json);
    const CostSpec spec = load_config<CostSpec>(m, "cost", a.cost, cost_spec_from_json);
    const Utility u = load_config<Utility>(m, "utility", a.utility, utility_from_json);
    const TrainConfig tc = train_config(m, a.train, g.seed);
    std::vector<double> w = a.weights ? load_weights(m, *a.weights, bundle.n_paths) : base_weights(bundle);
    const auto instruments = hedging_instruments();
    const auto z = stage("payoff", a.payoff, [&] { return payoff(ps, bundle); });
    const ProblemData data = stage("returns", a.bundle, [&] { return make_problem_data(bundle, instruments); });
    const HedgeResult h = stage("hedge", a.bundle, [&] { return deep_hedge(data, w, z, spec, u, tc); });
    ensure_dir(parent_dir(a.out));
    write_json_file(m, a.out, hedge_json(h, instruments));
    const fs::path stem = parent_dir(a.out) / a.out.stem();
    write_file(m, fs::path(stem.string() + "_pnl_hist.csv"), histogram_csv(make_histogram(h.pnl, w)));
    m.write(parent_dir(a.out));
    std::printf("certainty equivalent %.6g  (indifference price %.6g)\n", h.certainty_equivalent,
                -h.certainty_equivalent);
}

struct RobustnessArgs {
    fs::path bundle, weights, payoff, cost, utility, out;
    std::optional<fs::path> train;
    std::string entropies = "0.05,0.5";
};

void run_robustness(const RobustnessArgs& a, const Globals& g) {
    Manifest m("robustness", g.seed.value_or(0));
    const PathBundle bundle = load_bundle_input(m, a.bundle);
    const PayoffSpec ps = load_config<PayoffSpec>(m, "payoff", a.payoff, payoff_from_json);
    const CostSpec spec = load_config<CostSpec>(m, "cost", a.cost, cost_spec_from_json);
    const Utility u = load_config<Utility>(m, "utility", a.utility, utility_from_json);
    const TrainConfig tc = train_config(m, a.train, g.seed);
    const std::vector<double> q = load_weights(m, a.weights, bundle.n_paths);
    const std::vector<double> entropies =
        stage("robustness", fs::path(), [&] { return parse_entropies(a.entropies); });
    const auto instruments = hedging_instruments();
    const auto z = stage("payoff", a.payoff, [&] { return payoff(ps, bundle); });
    const ProblemData data = stage("returns", a.bundle, [&] { return make_problem_data(bundle, instruments); });
    const auto base = base_weights(bundle);
    const HedgeResult hp = stage("hedge P", a.bundle, [&] { return deep_hedge(data, base, z, spec, u, tc); });
    const HedgeResult hq = stage("hedge Q", a.bundle, [&] { return deep_hedge(data, q, z, spec, u, tc); });
    const HedgeResult h0 = stage("statarb", a.bundle, [&] { return deep_hedge(data, base, {}, spec, u, tc); });
    const RobustnessReport rep =
        stage("robustness", a.bundle, [&] { return robustness_eval(hp.pnl, hq.pnl, h0.pnl, u, entropies); });
    ensure_dir(parent_dir(a.out));
    Json j = robustness_json(rep);
    j["hedge_p"] = hedge_json(hp, instruments);
    j["hedge_q"] = hedge_json(hq, instruments);
    j["statarb_ce"] = h0.certainty_equivalent;
    write_json_file(m, a.out, j);
    const fs::path stem = parent_dir(a.out) / a.out.stem();
    for (const auto& row : rep.rows) {
        const auto t = tilt(h0.pnl, row.c);
        const std::string c = format_double(row.c);
        write_file(m, fs::path(stem.string() + "_p_c" + c + "_hist.csv"), histogram_csv(make_histogram(hp.pnl, t.weights)));
        write_file(m, fs::path(stem.string() + "_q_c" + c + "_hist.csv"), histogram_csv(make_histogram(hq.pnl, t.weights)));
    }
    m.param("entropies", entropies);
    m.write(parent_dir(a.out));
    std::printf("uniform CE: P-hedge %.6g  Q-hedge %.6g\n", rep.ce_p_uniform, rep.ce_q_uniform);
    for (const auto& row : rep.rows) {
        std::printf("c = %g: degradation P %.6g  Q %.6g\n", row.c, row.delta_p, row.delta_q);
    }
}

struct DemoArgs {
    fs::path out = "demo_out";
    std::optional<std::size_t> paths;
    std::optional<std::size_t> epochs;
    bool skip_hedging = false;
};

void run_demo(const DemoArgs& a, const Globals& g) {
    DeskConfig cfg;
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.train.seed = *g.seed;
    }
    if (a.paths) cfg.paths = *a.paths;
    if (a.epochs) cfg.train.epochs = *a.epochs;
    Manifest m("demo", cfg.seed);
    ensure_dir(a.out);
    const fs::path cfg_dir = a.out / "config";
    ensure_dir(cfg_dir);

    std::printf("simulating %zu paths x %zu steps\n", cfg.paths, cfg.steps);
    const DeskMarket market = stage("simulate", a.out, [&] { return make_desk_market(cfg); });
    write_json_file(m, cfg_dir / "grid.json", to_json(market.grid));
    write_json_file(m, cfg_dir / "params.json",
                    to_json(VarSpec{market.market.params, market.grid, market.market.init_prev, market.market.init}));
    write_json_file(m, cfg_dir / "cost.json", to_json(desk_cost(cfg)));
    write_json_file(m, cfg_dir / "utility.json", to_json(Utility::exponential(cfg.lambda)));
    write_json_file(m, cfg_dir / "train.json", to_json(cfg.train));
    write_json_file(m, cfg_dir / "payoff.json", to_json(desk_digital(cfg)));
    stage("write bundle", a.out / "bundle", [&] {
        save_bundle(a.out / "bundle", market.bundle);
        return 0;
    });
    m.output(a.out / "bundle");

    std::printf("training the statistical-arbitrage policy (%zu epochs)\n", cfg.train.epochs);
    const DeskMeasure dm = stage("make-q", a.out, [&] { return make_desk_measure(market, cfg); });
    write_file(m, a.out / "weights.csv", weights_csv(dm.density.weights));
    write_json_file(m, a.out / "solution.json", solution_json(dm.solution, dm.instruments));
    write_file(m, a.out / "trace.csv", trace_csv(dm.solution));
    const auto div = divergence(dm.density.weights, dm.utility);

    const DriftReport ru = verify_drift(market.bundle, dm.instruments, dm.data.returns, {}, dm.spec);
    const DriftReport rq = verify_drift(market.bundle, dm.instruments, dm.data.returns, dm.density.weights, dm.spec);
    write_file(m, a.out / "drift_uniform.csv", drift_csv(ru));
    write_file(m, a.out / "drift_q.csv", drift_csv(rq));
    write_json_file(m, a.out / "drift_uniform.json", to_json(ru));
    write_json_file(m, a.out / "drift_q.json", to_json(rq));
    print_drift("uniform weights", ru);
    print_drift("Q weights", rq);

    std::printf("adversarial policies at doubled cost\n");
    CostSpec adv_spec = dm.spec;
    adv_spec.gamma = {2.0 * cfg.gamma};
    const TrainConfig adv_cfg = adversary_config(cfg.train);
    const auto adv_p = stage("adversarial", a.out, [&] { return adversarial_test(dm.data, {}, adv_spec, dm.utility, adv_cfg); });
    const auto adv_q = stage("adversarial", a.out, [&] {
        return adversarial_test(dm.data, dm.density.weights, adv_spec, dm.utility, adv_cfg);
    });
    write_file(m, a.out / "adversarial_p_hist.csv", histogram_csv(adv_p.histogram));
    write_file(m, a.out / "adversarial_q_hist.csv", histogram_csv(adv_q.histogram));

    Json summary{{"objective", dm.solution.objective_value},
                 {"y_star", dm.solution.y_star},
                 {"raw_mean", dm.density.raw_mean},
                 {"divergence", div.value},
                 {"divergence_se", div.se},
                 {"drift_failures_uniform", ru.failures()},
                 {"drift_failures_q", rq.failures()},
                 {"drift_rows", rq.rows.size()},
                 {"adversarial_ce_p", adv_p.certainty_equivalent},
                 {"adversarial_ce_q", adv_q.certainty_equivalent}};
    std::printf("objective %.6g  raw mean %.6f  divergence %.6g (se %.2g)\n", dm.solution.objective_value,
                dm.density.raw_mean, div.value, div.se);
    std::printf("adversarial CE: P %.6g  Q %.6g\n", adv_p.certainty_equivalent, adv_q.certainty_equivalent);

    if (!a.skip_hedging) {
        std::printf("hedging a short ATM digital\n");
        const DeskHedges h = stage("hedge", a.out, [&] { return make_desk_hedges(market, dm, cfg, desk_digital(cfg)); });
        const std::vector<double> entropies{0.0, 0.05, 0.5};
        const auto rep = robustness_eval(h.p.pnl, h.q.pnl, h.statarb.pnl, dm.utility, entropies);
        const auto instruments = hedging_instruments();
        write_json_file(m, a.out / "hedge_p.json", hedge_json(h.p, instruments));
        write_json_file(m, a.out / "hedge_q.json", hedge_json(h.q, instruments));
        Json rj = robustness_json(rep);
        rj["statarb_ce"] = h.statarb.certainty_equivalent;
        write_json_file(m, a.out / "robustness.json", rj);
        write_file(m, a.out / "hedge_p_pnl_hist.csv", histogram_csv(make_histogram(h.p.pnl)));
        write_file(m, a.out / "hedge_q_pnl_hist.csv", histogram_csv(make_histogram(h.q.pnl)));
        for (const auto& row : rep.rows) {
            const auto t = tilt(h.statarb.pnl, row.c);
            const std::string c = format_double(row.c);
            write_file(m, a.out / ("robust_p_c" + c + "_hist.csv"), histogram_csv(make_histogram(h.p.pnl, t.weights)));
            write_file(m, a.out / ("robust_q_c" + c + "_hist.csv"), histogram_csv(make_histogram(h.q.pnl, t.weights)));
            std::printf("c = %g: degradation P %.6g  Q %.6g\n", row.c, row.delta_p, row.delta_q);
        }
        summary["hedge_ce_p"] = h.p.certainty_equivalent;
        summary["hedge_ce_q"] = h.q.certainty_equivalent;
    }
    write_json_file(m, a.out / "summary.json", summary);
    m.param("paths", cfg.paths);
    m.param("epochs", cfg.train.epochs);
    m.write(a.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Statistical-arbitrage-free reweighting of simulated option markets"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed = 1;
    auto* seed_opt = app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    FitVarArgs fa;
    auto* fit = app.add_subcommand("fit-var", "Fit the VAR to a Y-history CSV");
    fit->add_option("--history", fa.history, "Y-history CSV")->required();
    fit->add_option("--grid", fa.grid, "Grid JSON")->required();
    fit->add_option("--out", fa.out, "Output params JSON")->required();
    fit->add_option("--dt-days", fa.dt_days, "Observation spacing in business days")->capture_default_str();

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Simulate a path bundle from VAR params");
    sim->add_option("--params", sa.params, "VAR params JSON")->required();
    sim->add_option("--paths", sa.paths, "Number of paths")->capture_default_str();
    sim->add_option("--steps", sa.steps, "Steps per path")->capture_default_str();
    sim->add_option("--out", sa.out, "Bundle directory")->required();

    MakeQArgs ma;
    auto* mq = app.add_subcommand("make-q", "Train the statistical-arbitrage policy and write path weights");
    mq->add_option("--bundle", ma.bundle, "Bundle directory")->required();
    mq->add_option("--cost", ma.cost, "Cost JSON")->required();
    mq->add_option("--utility", ma.utility, "Utility JSON")->required();
    mq->add_option("--train", ma.train, "Training JSON");
    mq->add_flag("--bounded", ma.bounded, "Use the bounded frictionless reweighting");
    mq->add_option("--out", ma.out, "Weights CSV")->required();

    VerifyArgs va;
    auto* ver = app.add_subcommand("verify", "Check weighted drifts against the cost bands");
    ver->add_option("--bundle", va.bundle, "Bundle directory")->required();
    ver->add_option("--weights", va.weights, "Weights CSV (default: bundle weights or uniform)");
    ver->add_option("--cost", va.cost, "Cost JSON")->required();
    ver->add_option("--z", va.z, "Band width in standard errors")->capture_default_str();
    ver->add_option("--report", va.report, "Report path (.csv or .json)")->required();

    HedgeArgs ha;
    auto* hed = app.add_subcommand("hedge", "Deep-hedge a payoff under the bundle or given weights");
    hed->add_option("--bundle", ha.bundle, "Bundle directory")->required();
    hed->add_option("--weights", ha.weights, "Weights CSV");
    hed->add_option("--payoff", ha.payoff, "Payoff JSON")->required();
    hed->add_option("--cost", ha.cost, "Cost JSON")->required();
    hed->add_option("--utility", ha.utility, "Utility JSON")->required();
    hed->add_option("--train", ha.train, "Training JSON");
    hed->add_option("--out", ha.out, "Result JSON")->required();

    RobustnessArgs ra;
    auto* rob = app.add_subcommand("robustness", "Compare hedges trained under both measures on tilted samples");
    rob->add_option("--bundle", ra.bundle, "Bundle directory")->required();
    rob->add_option("--weights", ra.weights, "Reweighting CSV")->required();
    rob->add_option("--payoff", ra.payoff, "Payoff JSON")->required();
    rob->add_option("--cost", ra.cost, "Cost JSON")->required();
    rob->add_option("--utility", ra.utility, "Utility JSON")->required();
    rob->add_option("--train", ra.train, "Training JSON");
    rob->add_option("--entropies", ra.entropies, "Comma-separated relative entropies")->capture_default_str();
    rob->add_option("--out", ra.out, "Report JSON")->required();

    DemoArgs da;
    auto* demo = app.add_subcommand("demo", "Run the desk-scale scenario end to end");
    demo->add_option("--out", da.out, "Output directory")->capture_default_str();
    demo->add_option("--paths", da.paths, "Override the number of paths");
    demo->add_option("--epochs", da.epochs, "Override the training epochs");
    demo->add_flag("--skip-hedging", da.skip_hedging, "Stop after the adversarial test");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    if (seed_opt->count() > 0) g.seed = seed;
    set_thread_count(g.threads);

    try {
        if (fit->parsed()) run_fit_var(fa, g);
        if (sim->parsed()) run_simulate(sa, g);
        if (mq->parsed()) run_make_q(ma, g);
        if (ver->parsed()) run_verify(va, g);
        if (hed->parsed()) run_hedge(ha, g);
        if (rob->parsed()) run_robustness(ra, g);
        if (demo->parsed()) run_demo(da, g);
    } catch (const StageError& e) {
        std::fprintf(stderr, "error in %s%s%s: %s\n", e.stage.c_str(), e.file.empty() ? "" : " (",
                     e.file.empty() ? "" : (e.file + ")").c_str(), e.message.c_str());
        return is_numerical(e.kind) ? 2 : 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return is_numerical(e.kind()) ? 2 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
