#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdekf/bench.hpp"
#include "cdekf/plot.hpp"
#include "cdekf/sim.hpp"

namespace {

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        values.push_back(std::stod(token));
    }
    return values;
}

std::vector<cdekf::FilterVariant> parse_filter_list(const std::string& text) {
    std::vector<cdekf::FilterVariant> variants;
    if (text == "all") {
        variants.assign(cdekf::kAllVariants.begin(), cdekf::kAllVariants.end());
        return variants;
    }
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        const auto v = cdekf::variant_from_id(token);
        if (!v) throw CLI::ValidationError("--filters", "unknown filter id: " + token);
        variants.push_back(*v);
    }
    if (variants.empty()) throw CLI::ValidationError("--filters", "no filter ids given");
    return variants;
}

cdekf::PlotKind plot_kind_for(cdekf::Scenario scenario) {
    switch (scenario) {
        case cdekf::Scenario::CstrIllCond: return cdekf::PlotKind::ArmseVsDeltaIll;
        case cdekf::Scenario::VdpStiffness: return cdekf::PlotKind::ArmseVsLambda;
        default: return cdekf::PlotKind::ArmseVsDelta;
    }
}

struct RunArgs {
    std::string scenario = "cstr";
    std::string filters = "all";
    double alpha = 1e3;
    double tol = 1e-4;
    double max_step = 0.1;
    int runs = 100;
    std::uint64_t seed = 42;
    int threads = 0;
    std::string sweep;
    std::string out;
    std::string plot;
    std::string plot_cpu;
    bool no_timing = false;
    std::string config_path;
};

int command_run(const RunArgs& args, const CLI::App& cmd) {
    RunArgs merged = args;
    if (!args.config_path.empty()) {
        const auto kv = cdekf::parse_config_file(args.config_path);
        auto pick = [&](const char* key, const char* flag, auto& slot) {
            auto it = kv.find(key);
            if (it == kv.end() || cmd.count(flag) > 0) return;  // explicit flags win
            std::stringstream ss(it->second);
            ss >> slot;
            if (ss.fail()) throw std::runtime_error(std::string("bad config value for ") + key);
        };
        pick("scenario", "--scenario", merged.scenario);
        pick("filters", "--filters", merged.filters);
        pick("alpha", "--alpha", merged.alpha);
        pick("tol", "--tol", merged.tol);
        pick("max_step", "--max-step", merged.max_step);
        pick("runs", "--runs", merged.runs);
        pick("seed", "--seed", merged.seed);
        pick("threads", "--threads", merged.threads);
        pick("sweep", "--sweep", merged.sweep);
        pick("out", "--out", merged.out);
        pick("plot", "--plot", merged.plot);
        if (kv.count("no_timing") && cmd.count("--no-timing") == 0) {
            merged.no_timing = kv.at("no_timing") == "true" || kv.at("no_timing") == "1";
        }
    }

    const auto scenario = cdekf::scenario_from_id(merged.scenario);
    if (!scenario) {
        std::cerr << "error: unknown scenario '" << merged.scenario
                  << "' (expected cstr, cstr-ill, vdp or lti-test)\n";
        return 2;
    }

    cdekf::ExperimentConfig config;
    config.scenario = *scenario;
    config.variants = parse_filter_list(merged.filters);
    config.alpha = merged.alpha;
    config.let_tol = merged.tol;
    config.max_step = merged.max_step;
    config.runs = merged.runs;
    config.base_seed = merged.seed;
    config.threads = merged.threads;
    config.include_timing = !merged.no_timing;
    config.output_path = merged.out;
    if (!merged.sweep.empty()) config.sweep = parse_double_list(merged.sweep);

    const auto reports = cdekf::run_experiment(config);
    if (!merged.plot.empty()) {
        cdekf::emit_plot(reports, plot_kind_for(config.scenario), merged.plot);
    }
    if (!merged.plot_cpu.empty()) {
        cdekf::emit_plot(reports, cdekf::PlotKind::CpuVsDelta, merged.plot_cpu);
    }

    for (const auto& r : reports) {
        std::cout << r.scenario << " param=" << r.param << " " << r.variant
                  << " armse=" << r.armse << " failed=" << r.failed_runs << "\n";
    }
    return 0;
}

struct SimArgs {
    std::string model = "cstr";
    double param = 1e-3;
    double dt = 1e-3;
    double horizon = 30.0;
    std::uint64_t seed = 1;
    std::string out = "trajectory.csv";
};

int command_simulate(const SimArgs& args) {
    std::unique_ptr<cdekf::ModelSpec> model;
    if (args.model == "cstr") {
        model = std::make_unique<cdekf::CstrModel>();
    } else if (args.model == "cstr-ill") {
        model = std::make_unique<cdekf::CstrIllCondModel>(args.param);
    } else if (args.model == "vdp") {
        model = std::make_unique<cdekf::VanDerPolModel>(args.param);
    } else if (args.model == "lti-test") {
        model = std::make_unique<cdekf::LtiModel>(cdekf::make_lti_test_model());
    } else {
        std::cerr << "error: unknown model '" << args.model << "'\n";
        return 2;
    }
    const auto truth =
        cdekf::euler_maruyama(*model, model->x0_mean(), args.dt, args.horizon, args.seed);
    cdekf::write_trajectory_csv(args.out, truth);
    std::cout << "wrote " << truth.size() << " states to " << args.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-discrete derivative-free EKF benchmark toolkit"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "Run a Monte Carlo filtering experiment");
    run->add_option("--scenario", run_args.scenario,
                    "Scenario: cstr, cstr-ill, vdp or lti-test");
    run->add_option("--filters", run_args.filters,
                    "Comma-separated variant ids or 'all' (std-ekf, mde, spde, sr-mde-a, "
                    "sr-mde-b, sr-spde-a, sr-spde-b)");
    run->add_option("--alpha", run_args.alpha, "Sample point scaling parameter");
    run->add_option("--tol", run_args.tol, "Local error tolerance of the ODE solver");
    run->add_option("--max-step", run_args.max_step, "Maximum integration step");
    run->add_option("--runs", run_args.runs, "Monte Carlo runs per sweep value");
    run->add_option("--seed", run_args.seed, "Base seed; run r uses seed + r");
    run->add_option("--threads", run_args.threads, "Worker threads (0 = hardware)");
    run->add_option("--sweep", run_args.sweep, "Comma-separated sweep values");
    run->add_option("--out", run_args.out, "CSV report path");
    run->add_option("--plot", run_args.plot, "SVG accuracy plot path");
    run->add_option("--plot-cpu", run_args.plot_cpu, "SVG timing plot path");
    run->add_flag("--no-timing", run_args.no_timing,
                  "Write NA in the timing column (deterministic output)");
    run->add_option("--config", run_args.config_path, "key=value configuration file");

    SimArgs sim_args;
    CLI::App* sim = app.add_subcommand("simulate", "Export one truth trajectory as CSV");
    sim->add_option("--model", sim_args.model, "Model: cstr, cstr-ill, vdp or lti-test");
    sim->add_option("--param", sim_args.param, "Model parameter (delta or lambda)");
    sim->add_option("--dt", sim_args.dt, "Discretization step");
    sim->add_option("--horizon", sim_args.horizon, "Simulation horizon");
    sim->add_option("--seed", sim_args.seed, "Seed");
    sim->add_option("--out", sim_args.out, "Output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return command_run(run_args, *run);
        if (sim->parsed()) return command_simulate(sim_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
