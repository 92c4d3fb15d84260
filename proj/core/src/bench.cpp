#include "cdekf/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "cdekf/oracle.hpp"
#include "cdekf/sim.hpp"

namespace cdekf {

std::string_view scenario_id(Scenario scenario) {
    switch (scenario) {
        case Scenario::CstrAccuracy: return "cstr";
        case Scenario::CstrIllCond: return "cstr-ill";
        case Scenario::VdpStiffness: return "vdp";
        case Scenario::LtiOracle: return "lti-test";
    }
    return "unknown";
}

std::optional<Scenario> scenario_from_id(std::string_view id) {
    for (Scenario s : {Scenario::CstrAccuracy, Scenario::CstrIllCond, Scenario::VdpStiffness,
                       Scenario::LtiOracle}) {
        if (scenario_id(s) == id) return s;
    }
    return std::nullopt;
}

std::vector<double> default_sweep(Scenario scenario) {
    switch (scenario) {
        case Scenario::CstrAccuracy:
            return {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
        case Scenario::CstrIllCond: {
            std::vector<double> d;
            for (int e = 1; e <= 15; ++e) d.push_back(std::pow(10.0, -e));
            return d;
        }
        case Scenario::VdpStiffness:
            return {1.0, 1e1, 1e2, 1e3, 1e4};
        case Scenario::LtiOracle:
            return {0.1};
    }
    return {};
}

double armse(const std::vector<std::vector<Vector>>& truth_runs,
             const std::vector<std::vector<Vector>>& estimate_runs) {
    if (truth_runs.size() != estimate_runs.size() || truth_runs.empty()) {
        throw std::invalid_argument("armse: run count mismatch or empty");
    }
    const std::size_t instants = truth_runs.front().size();
    if (instants == 0) throw std::invalid_argument("armse: no instants");
    double sum = 0.0;
    for (std::size_t r = 0; r < truth_runs.size(); ++r) {
        if (truth_runs[r].size() != instants || estimate_runs[r].size() != instants) {
            throw std::invalid_argument("armse: instant count mismatch");
        }
        for (std::size_t k = 0; k < instants; ++k) {
            const Vector& t = truth_runs[r][k];
            const Vector& e = estimate_runs[r][k];
            if (t.size() != e.size()) throw std::invalid_argument("armse: state dim mismatch");
            for (std::size_t j = 0; j < t.size(); ++j) {
                const double d = t[j] - e[j];
                sum += d * d;
            }
        }
    }
    return std::sqrt(sum / (static_cast<double>(truth_runs.size()) *
                            static_cast<double>(instants)));
}

namespace {

struct ScenarioSetup {
    std::shared_ptr<const ModelSpec> model;
    double sampling_period = 0.0;
    double truth_dt = 0.0;
    double horizon = 0.0;
    OdeMethod method = OdeMethod::NonstiffRk45;
};

ScenarioSetup make_setup(Scenario scenario, double param) {
    ScenarioSetup s;
    switch (scenario) {
        case Scenario::CstrAccuracy:
            s.model = std::make_shared<CstrModel>();
            s.sampling_period = param;
            s.truth_dt = 1e-3;
            s.horizon = 30.0;
            s.method = OdeMethod::NonstiffRk45;
            break;
        case Scenario::CstrIllCond:
            s.model = std::make_shared<CstrIllCondModel>(param);
            s.sampling_period = 1.0;
            s.truth_dt = 1e-3;
            s.horizon = 30.0;
            s.method = OdeMethod::NonstiffRk45;
            break;
        case Scenario::VdpStiffness:
            s.model = std::make_shared<VanDerPolModel>(param);
            s.sampling_period = 0.2;
            s.truth_dt = 1e-5;
            s.horizon = 2.0;
            s.method = OdeMethod::StiffImplicit;
            break;
        case Scenario::LtiOracle:
            s.model = std::make_shared<LtiModel>(make_lti_test_model());
            s.sampling_period = param;
            s.truth_dt = 1e-4;
            s.horizon = 50.0 * param;
            s.method = OdeMethod::NonstiffRk45;
            break;
    }
    return s;
}

constexpr double kSseOverflow = 1e300;

struct VariantRunResult {
    bool failed = false;
    double failure_time = 0.0;
    double seconds = 0.0;
    std::vector<Vector> estimates;  // posterior means at the instants
};

struct RunData {
    std::vector<Vector> truth_at_instants;
    std::vector<VariantRunResult> per_variant;  // config order (+ oracle slot for lti)
};

// One Monte Carlo run: simulate truth once, synthesize one measurement
// stream, hand the identical data to every variant.
RunData execute_run(const ScenarioSetup& setup, const ExperimentConfig& config,
                    std::size_t run_index, bool with_oracle) {
    const std::uint64_t run_seed = config.base_seed + run_index;
    const std::uint64_t meas_seed = Rng::split(run_seed);

    double dt = setup.truth_dt;
    Trajectory truth;
    for (int attempt = 0;; ++attempt) {
        try {
            truth = euler_maruyama(*setup.model, setup.model->x0_mean(), dt, setup.horizon,
                                   run_seed);
            break;
        } catch (const NonFiniteError&) {
            if (attempt >= 2) throw;
            dt *= 0.1;  // explicit truth discretization unstable; refine
            std::cerr << "note: truth simulation refined to dt=" << dt << " (run " << run_index
                      << ")\n";
        }
    }
    const auto measurements =
        synthesize_measurements(truth, *setup.model, setup.sampling_period, meas_seed);
    const auto idx = measurement_indices(truth, setup.sampling_period);

    const std::uint64_t truth_sum = checksum(truth);
    const std::uint64_t meas_sum = checksum(measurements);

    RunData data;
    data.truth_at_instants.reserve(idx.size());
    for (std::size_t i : idx) data.truth_at_instants.push_back(truth.states[i]);

    OdeOptions opts;
    opts.abs_tol = config.let_tol;
    opts.rel_tol = config.let_tol;
    opts.max_step = config.max_step;
    opts.method = setup.method;

    data.per_variant.resize(config.variants.size() + (with_oracle ? 1 : 0));
    for (std::size_t v = 0; v < config.variants.size(); ++v) {
        if (checksum(truth) != truth_sum || checksum(measurements) != meas_sum) {
            throw std::logic_error("shared truth/measurement data mutated between variants");
        }
        VariantRunResult& res = data.per_variant[v];
        const auto start = std::chrono::steady_clock::now();
        const FilterRun run =
            run_filter(config.variants[v], *setup.model, measurements, config.alpha, opts);
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
        if (run.diverged()) {
            res.failed = true;
            res.failure_time = run.failure->time;
            continue;
        }
        res.estimates.reserve(run.beliefs.size() - 1);
        double sse = 0.0;
        for (std::size_t k = 1; k < run.beliefs.size(); ++k) {
            const Vector& est = run.beliefs[k].mean;
            const Vector& tru = data.truth_at_instants[k - 1];
            for (std::size_t j = 0; j < est.size(); ++j) {
                const double d = tru[j] - est[j];
                sse += d * d;
            }
            if (!std::isfinite(sse) || sse > kSseOverflow) {
                res.failed = true;
                res.failure_time = run.beliefs[k].time;
                break;
            }
            res.estimates.push_back(est);
        }
    }

    if (with_oracle) {
        VariantRunResult& res = data.per_variant.back();
        const auto* lti = dynamic_cast<const LtiModel*>(setup.model.get());
        const auto start = std::chrono::steady_clock::now();
        const DiscreteLti discrete =
            discretize_lti(lti->a(), process_noise_matrix(*lti), lti->h(), lti->meas_cov_r(),
                           setup.sampling_period);
        const KalmanTrace trace =
            exact_kalman_filter(discrete, lti->x0_mean(), lti->x0_cov(), measurements);
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
        res.estimates = trace.means;
    }
    return data;
}

std::string format_param(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

std::vector<RunReport> run_experiment(const ExperimentConfig& config) {
    if (config.runs < 1) throw std::invalid_argument("runs must be at least 1");
    if (!(config.alpha > 0.0) || !(config.let_tol > 0.0) || !(config.max_step > 0.0)) {
        throw std::invalid_argument("alpha and tolerances must be positive");
    }
    if (config.variants.empty()) throw std::invalid_argument("no filter variants selected");
    std::vector<double> sweep = config.sweep.empty() ? default_sweep(config.scenario)
                                                     : config.sweep;
    if (sweep.empty()) throw std::invalid_argument("sweep must be nonempty");

    const bool with_oracle = config.scenario == Scenario::LtiOracle;
    const std::size_t runs = static_cast<std::size_t>(config.runs);
    unsigned hw = std::thread::hardware_concurrency();
    const std::size_t workers = config.threads > 0
                                    ? static_cast<std::size_t>(config.threads)
                                    : std::max(1u, hw);

    std::vector<RunReport> reports;
    for (double param : sweep) {
        const ScenarioSetup setup = make_setup(config.scenario, param);
        std::vector<RunData> run_data(runs);

        std::atomic<std::size_t> next{0};
        std::exception_ptr worker_error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t r = next.fetch_add(1);
                if (r >= runs) return;
                try {
                    run_data[r] = execute_run(setup, config, r, with_oracle);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!worker_error) worker_error = std::current_exception();
                    return;
                }
            }
        };
        if (workers <= 1 || runs == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < std::min(workers, runs); ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        if (worker_error) std::rethrow_exception(worker_error);

        // Ordered reduction over run indices so parallelism never changes
        // the output bytes.
        const std::size_t total_variants = config.variants.size() + (with_oracle ? 1 : 0);
        for (std::size_t v = 0; v < total_variants; ++v) {
            RunReport report;
            report.scenario = std::string(scenario_id(config.scenario));
            report.param = param;
            report.variant = v < config.variants.size()
                                 ? std::string(variant_id(config.variants[v]))
                                 : "exact-kf";
            std::vector<std::vector<Vector>> truth_ok, est_ok;
            double time_sum = 0.0;
            std::optional<double> first_failure;
            for (std::size_t r = 0; r < runs; ++r) {
                const VariantRunResult& res = run_data[r].per_variant[v];
                time_sum += res.seconds;
                if (res.failed) {
                    ++report.failed_runs;
                    if (!first_failure || res.failure_time < *first_failure) {
                        first_failure = res.failure_time;
                    }
                } else {
                    truth_ok.push_back(run_data[r].truth_at_instants);
                    est_ok.push_back(res.estimates);
                }
            }
            report.mean_cpu_seconds = time_sum / static_cast<double>(runs);
            report.first_failure_time = first_failure;
            report.armse = truth_ok.empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : armse(truth_ok, est_ok);
            reports.push_back(std::move(report));
        }
    }

    if (!config.output_path.empty()) {
        write_reports_csv(config.output_path, reports, config.include_timing);
    }
    return reports;
}

void write_reports_csv(const std::string& path, const std::vector<RunReport>& reports,
                       bool include_timing) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "scenario,param,variant,armse,mean_cpu_s,failed_runs,first_failure_t\n";
    char buf[64];
    for (const auto& r : reports) {
        out << r.scenario << "," << format_param(r.param) << "," << r.variant << ",";
        if (std::isnan(r.armse)) {
            out << "NaN";
        } else {
            std::snprintf(buf, sizeof(buf), "%.9e", r.armse);
            out << buf;
        }
        out << ",";
        if (include_timing) {
            std::snprintf(buf, sizeof(buf), "%.6f", r.mean_cpu_seconds);
            out << buf;
        } else {
            out << "NA";
        }
        out << "," << r.failed_runs << ",";
        if (r.first_failure_time) {
            std::snprintf(buf, sizeof(buf), "%.6g", *r.first_failure_time);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::map<std::string, std::string> values;
    std::string line;
    auto trim = [](std::string s) {
        const auto first = s.find_first_not_of(" \t\r");
        const auto last = s.find_last_not_of(" \t\r");
        if (first == std::string::npos) return std::string();
        return s.substr(first, last - first + 1);
    };
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     " is not key=value");
        }
        values[trim(stripped.substr(0, eq))] = trim(stripped.substr(eq + 1));
    }
    return values;
}

}  // namespace cdekf
