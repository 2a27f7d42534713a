// Command-line front end: difficulty, synth, calibrate, optimize, simulate, report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "CLI11.hpp"
#include "dart/adaptive.hpp"
#include "dart/difficulty.hpp"
#include "dart/engine.hpp"
#include "dart/mdp.hpp"
#include "dart/metrics.hpp"
#include "dart/optimizer.hpp"
#include "dart/policy_io.hpp"
#include "dart/trace.hpp"

namespace fs = std::filesystem;
using namespace dart;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Usage problems detected after parsing (bad values, missing inputs).
struct UsageError : Error {
    using Error::Error;
};

std::uint64_t default_seed() {
    if (const char* env = std::getenv("DART_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::logic_error&) {
            throw UsageError(std::string("DART_SEED is not an unsigned integer: ") + env);
        }
    }
    return 0;
}

/// Writes via a temporary sibling and renames, so readers never see a partial file.
void write_atomic(const std::string& path, const std::function<void(std::ostream&)>& body) {
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write '" + tmp.string() + "'");
        body(out);
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("write failed for '" + path + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path + "'");
    }
}

void emit(const std::string& path, const std::function<void(std::ostream&)>& body) {
    if (path.empty() || path == "-")
        body(std::cout);
    else
        write_atomic(path, body);
}

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size())
                throw std::invalid_argument(cell);
        } catch (const std::logic_error&) {
            throw UsageError(std::string("malformed ") + what + " '" + text + "'");
        }
    }
    return out;
}

std::map<int, double> parse_bias(const std::string& text) {
    std::map<int, double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto colon = cell.find(':');
        if (colon == std::string::npos)
            throw UsageError("bias entries must look like class:offset, got '" + cell + "'");
        try {
            out[std::stoi(cell.substr(0, colon))] = std::stod(cell.substr(colon + 1));
        } catch (const std::logic_error&) {
            throw UsageError("malformed bias entry '" + cell + "'");
        }
    }
    return out;
}

DifficultySource parse_difficulty_source(const std::string& text, const std::string& image_root) {
    DifficultySource src;
    src.image_root = image_root;
    if (text == "auto")
        src.mode = DifficultyMode::Auto;
    else if (text == "stored")
        src.mode = DifficultyMode::Stored;
    else if (text == "image")
        src.mode = DifficultyMode::Image;
    else {
        src.mode = DifficultyMode::Constant;
        try {
            src.constant = std::stod(text);
        } catch (const std::logic_error&) {
            throw UsageError("difficulty source must be auto, stored, image or a number in [0,1]");
        }
        if (!(src.constant >= 0.0 && src.constant <= 1.0))
            throw UsageError("constant difficulty must lie in [0,1]");
    }
    return src;
}

std::string trace_dir(const std::string& trace_path) {
    const auto parent = fs::path(trace_path).parent_path();
    return parent.empty() ? std::string(".") : parent.string();
}

std::vector<double> std_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// ---------------------------------------------------------------- difficulty

struct DifficultyArgs {
    std::vector<std::string> images;
    std::string weights = "0.4,0.3,0.3";
    double edge_sigma = 1.0;
    std::string format = "table";
    int jobs = 1;
};

int run_difficulty(const DifficultyArgs& a) {
    const auto w = parse_list(a.weights, "weights");
    if (w.size() != 3)
        throw UsageError("--weights needs three values");
    DifficultyOptions opts{{w[0], w[1], w[2]}, a.edge_sigma};
    try {
        opts.weights.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    const auto format = parse_report_format(a.format);

    const auto n = a.images.size();
    std::vector<std::optional<DifficultyScore>> scores(n);
    std::vector<std::string> errors(n);
    std::vector<std::thread> pool;
    const auto workers = static_cast<std::size_t>(std::clamp(a.jobs, 1, 64));
    for (std::size_t w0 = 0; w0 < workers; ++w0)
        pool.emplace_back([&, w0] {
            for (std::size_t i = w0; i < n; i += workers) {
                try {
                    scores[i] = difficulty(load_image(a.images[i]), opts);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        });
    for (auto& t : pool)
        t.join();

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    if (format == ReportFormat::Csv)
        std::cout << "image,edge,variance,gradient,fused\n";
    else if (format == ReportFormat::Table)
        std::cout << std::left << std::setw(32) << "image" << std::right << std::setw(9) << "edge" << std::setw(10)
                  << "variance" << std::setw(10) << "gradient" << std::setw(8) << "fused" << '\n';
    bool failed = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (!scores[i]) {
            std::cerr << "error: " << errors[i] << '\n';
            failed = true;
            continue;
        }
        const auto& s = *scores[i];
        if (format == ReportFormat::Csv) {
            std::cout << a.images[i] << std::setprecision(17) << ',' << s.edge << ',' << s.variance << ','
                      << s.gradient << ',' << s.fused << '\n';
        } else if (format == ReportFormat::Table) {
            std::cout << std::left << std::setw(32) << a.images[i] << std::right << std::fixed << std::setprecision(4)
                      << std::setw(9) << s.edge << std::setw(10) << s.variance << std::setw(10) << s.gradient
                      << std::setw(8) << s.fused << '\n';
        } else {
            rows.push_back({{"image", a.images[i]},
                            {"edge", s.edge},
                            {"variance", s.variance},
                            {"gradient", s.gradient},
                            {"fused", s.fused}});
        }
    }
    if (format == ReportFormat::Json)
        std::cout << rows.dump(2) << '\n';
    return failed ? kExitUsage : 0;
}

// --------------------------------------------------------------------- synth

struct SynthArgs {
    int exits = 3;
    int samples = 1000;
    int classes = 10;
    std::optional<std::uint64_t> seed;
    std::string bias;
    std::optional<double> difficulty_slope;
    double total_macs = 1.0e8;
    double total_time_ms = 1.0;
    double total_energy_mj = 50.0;
    std::string out;
};

int run_synth(const SynthArgs& a) {
    SynthConfig cfg;
    cfg.num_exits = a.exits;
    cfg.num_samples = a.samples;
    cfg.num_classes = a.classes;
    cfg.seed = a.seed.value_or(default_seed());
    cfg.class_offset = parse_bias(a.bias);
    if (a.difficulty_slope)
        cfg.difficulty_slope = *a.difficulty_slope;
    cfg.total_macs = a.total_macs;
    cfg.total_time_ms = a.total_time_ms;
    cfg.total_energy_mj = a.total_energy_mj;
    TraceSet t;
    try {
        t = synth_trace(cfg);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    emit(a.out, [&](std::ostream& os) { write_trace(t, os); });
    return 0;
}

// ----------------------------------------------------------------- calibrate

struct CalibrateArgs {
    std::string trace;
    std::string quantiles = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
};

int run_calibrate(const CalibrateArgs& a) {
    const auto t = read_trace_file(a.trace);
    const auto cands = quantile_candidates(t, parse_list(a.quantiles, "quantiles"));
    for (std::size_t i = 0; i < cands.size(); ++i) {
        std::cout << "exit " << i + 1 << ':';
        for (double c : cands[i])
            std::cout << ' ' << std::setprecision(10) << c;
        std::cout << '\n';
    }
    return 0;
}

// ------------------------------------------------------------------ optimize

struct OptimizeArgs {
    std::string trace;
    std::string method = "grid";
    double beta_opt = 0.3;
    double beta_diff = 0.3;
    std::string quantiles = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
    int alpha_bins = 10;
    int conf_bins = 10;
    double gamma = 1.0;
    std::string difficulty_source = "auto";
    std::string image_root;
    std::uint64_t max_combinations = 1'000'000;
    int jobs = 1;
    std::string out;
};

int run_optimize(const OptimizeArgs& a) {
    auto t = read_trace_file(a.trace);
    const ObjectiveConfig cfg{a.beta_opt};
    PolicyFile file;
    file.meta["method"] = a.method;
    file.meta["beta_opt"] = a.beta_opt;
    file.meta["trace"] = a.trace;
    file.meta["samples"] = t.samples.size();

    ThresholdVector tau;
    if (a.method == "grid") {
        const auto cands = quantile_candidates(t, parse_list(a.quantiles, "quantiles"));
        const auto r = grid_search(cands, t, cfg, {a.max_combinations, a.jobs});
        tau = r.thresholds;
        file.meta["combinations"] = r.evaluated;
    } else if (a.method == "dp") {
        const auto src = parse_difficulty_source(a.difficulty_source, a.image_root.empty() ? trace_dir(a.trace) : a.image_root);
        const auto alpha = resolve_difficulty(t, src, true, a.jobs);
        for (std::size_t i = 0; i < t.samples.size(); ++i)
            t.samples[i].difficulty = alpha.alpha[i];
        const auto mdp = build_mdp(t, cfg, {a.alpha_bins, a.conf_bins});
        const auto q = value_iterate(mdp, {a.gamma, 1e-9, 1000});
        const auto policy = extract_thresholds(q, mdp);
        tau = policy.thresholds;
        file.meta["alpha_bins"] = a.alpha_bins;
        file.meta["conf_bins"] = a.conf_bins;
        file.meta["gamma"] = a.gamma;
        int flagged = 0;
        for (const auto& f : policy.non_monotone)
            flagged += static_cast<int>(f.count());
        file.meta["non_monotone_bins"] = flagged;
    } else {
        throw UsageError("--method must be grid or dp");
    }
    const auto detail = evaluate_objective_detail(tau, t, cfg);
    file.meta["objective"] = detail.value;
    file.meta["accuracy"] = detail.accuracy;
    file.meta["exit_fraction"] = std_vec(detail.exit_fraction);
    file.policy = ExitPolicy::from_thresholds(tau, a.beta_diff);

    if (!a.out.empty())
        write_atomic(a.out, [&](std::ostream& os) { write_policy(file, os); });
    std::cout << "thresholds:";
    for (Eigen::Index i = 0; i < tau.size(); ++i)
        std::cout << ' ' << std::setprecision(10) << tau(i);
    std::cout << "\nJ = " << std::setprecision(12) << detail.value << "\naccuracy = " << detail.accuracy << '\n';
    return 0;
}

// ------------------------------------------------------------------ simulate

struct SimulateArgs {
    std::string trace;
    std::string policy;
    std::optional<double> beta_diff;
    bool adaptive = false;
    std::string strategy = "both";
    bool bandit = false;
    double target_accuracy = 0.85;
    double eta = 0.05;
    double decay = 0.95;
    std::size_t cadence = 100;
    std::size_t window = 1000;
    double beta_opt = 0.3;
    bool no_pseudo_labels = false;
    std::string difficulty_source = "auto";
    std::string image_root;
    double overhead_ms = 0.0;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string out;
    std::string adapt_log;
    std::string policy_out;
    std::string format = "table";
};

int run_simulate(const SimulateArgs& a) {
    const auto t = read_trace_file(a.trace);
    PolicyFile pf;
    if (!a.policy.empty())
        pf = read_policy_file(a.policy);
    else
        pf.policy = ExitPolicy::static_policy(t.num_exits());
    if (a.beta_diff)
        pf.policy.beta_diff = *a.beta_diff;

    SimulateOptions opts;
    opts.adaptive = a.adaptive;
    opts.jobs = a.jobs;
    auto& ac = opts.adaptive_config;
    ac.strategy = parse_strategy(a.strategy);
    ac.use_bandit = a.bandit;
    ac.target_accuracy = a.target_accuracy;
    ac.eta = a.eta;
    ac.decay = a.decay;
    ac.cadence = a.cadence;
    ac.window = a.window;
    ac.beta_opt = a.beta_opt;
    ac.use_pseudo_labels = !a.no_pseudo_labels;
    opts.difficulty = parse_difficulty_source(a.difficulty_source, a.image_root.empty() ? trace_dir(a.trace) : a.image_root);
    opts.difficulty.overhead_ms_per_image = a.overhead_ms;
    // Routing draws no random numbers; the seed only tags the outputs.
    const auto seed = a.seed.value_or(default_seed());

    const auto result = simulate(t, pf.policy, opts);

    if (!a.out.empty())
        write_atomic(a.out, [&](std::ostream& os) { write_outcomes(result.outcomes, os); });
    if (!a.adapt_log.empty())
        write_atomic(a.adapt_log, [&](std::ostream& os) {
            for (const auto& e : result.events) {
                nlohmann::ordered_json j;
                j["iteration"] = e.iteration;
                j["strategy"] = to_string(e.strategy);
                if (e.cls)
                    j["class"] = *e.cls;
                else
                    j["class"] = nullptr;
                j["old"] = std_vec(e.before);
                j["new"] = std_vec(e.after);
                j["seed"] = seed;
                os << j.dump() << '\n';
            }
        });
    if (!a.policy_out.empty()) {
        PolicyFile adapted = pf;
        adapted.policy.coefficients = result.final_coefficients;
        adapted.meta["adapted_from"] = a.trace;
        write_atomic(a.policy_out, [&](std::ostream& os) { write_policy(adapted, os); });
    }
    render_report({{t.profile.model_name, a.adaptive ? "adaptive" : "policy", result.report, {}, {}, {},
                    result.report.mean_difficulty}},
                  parse_report_format(a.format), std::cout);
    return 0;
}

// -------------------------------------------------------------------- report

struct ReportArgs {
    std::string outcomes;
    std::string baseline;
    std::string published;
    std::string format = "table";
    std::optional<double> alpha;
    std::string model = "model";
    std::string method = "DART";
};

int run_report(const ReportArgs& a) {
    const auto format = parse_report_format(a.format);
    std::vector<ReportRow> rows;
    if (!a.published.empty()) {
        std::ifstream in(a.published);
        if (!in)
            throw IoError("cannot open results '" + a.published + "'");
        rows = evaluate_published(read_published_csv(in));
    } else {
        if (a.outcomes.empty())
            throw UsageError("report needs --outcomes or --published");
        const auto outcomes = read_outcomes_file(a.outcomes);
        const auto candidate = aggregate(outcomes);
        if (a.baseline.empty()) {
            rows.push_back({a.model, a.method, candidate, {}, {}, {}, a.alpha.value_or(candidate.mean_difficulty)});
        } else {
            const auto base = aggregate(read_outcomes_file(a.baseline));
            const auto cmp = compare(base, candidate, a.alpha);
            rows.push_back({a.model, "Static", base, 1.0, 1.0, cmp.daes_baseline, cmp.alpha});
            rows.push_back({a.model, a.method, candidate, cmp.speedup, cmp.power_efficiency, cmp.daes_candidate, cmp.alpha});
        }
    }
    render_report(rows, format, std::cout);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Difficulty-aware early-exit policy engine"};
    app.require_subcommand(1);

    DifficultyArgs da;
    auto* diff = app.add_subcommand("difficulty", "Score image difficulty");
    diff->add_option("images", da.images, "PGM/PPM/DIMG files")->required();
    diff->add_option("--weights", da.weights, "edge,variance,gradient weights");
    diff->add_option("--edge-sigma", da.edge_sigma, "Edge threshold in standard deviations above the mean");
    diff->add_option("--format", da.format)->check(CLI::IsMember({"table", "csv", "json"}));
    diff->add_option("--jobs", da.jobs)->check(CLI::PositiveNumber);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a calibrated synthetic trace");
    synth->add_option("--exits", sa.exits)->check(CLI::Range(1, 64));
    synth->add_option("--samples", sa.samples)->check(CLI::Range(1, 100'000'000));
    synth->add_option("--classes", sa.classes)->check(CLI::Range(2, 1'000'000));
    synth->add_option("--seed", sa.seed, "Defaults to $DART_SEED, then 0");
    synth->add_option("--bias", sa.bias, "Per-class difficulty offsets, e.g. 0:-0.3,2:0.3");
    synth->add_option("--difficulty-slope", sa.difficulty_slope, "Confidence penalty per unit difficulty");
    synth->add_option("--total-macs", sa.total_macs)->check(CLI::PositiveNumber);
    synth->add_option("--total-time-ms", sa.total_time_ms)->check(CLI::PositiveNumber);
    synth->add_option("--total-energy-mj", sa.total_energy_mj)->check(CLI::PositiveNumber);
    synth->add_option("--out", sa.out, "Output path (stdout if omitted)");

    CalibrateArgs ca;
    auto* cal = app.add_subcommand("calibrate", "Print per-exit quantile threshold candidates");
    cal->add_option("--trace", ca.trace)->required();
    cal->add_option("--quantiles", ca.quantiles);

    OptimizeArgs oa;
    auto* opt = app.add_subcommand("optimize", "Jointly optimize exit thresholds");
    opt->add_option("--trace", oa.trace)->required();
    opt->add_option("--method", oa.method)->check(CLI::IsMember({"grid", "dp"}));
    opt->add_option("--beta-opt", oa.beta_opt)->check(CLI::Range(0.0, 1.0));
    opt->add_option("--beta-diff", oa.beta_diff, "Difficulty sensitivity stored in the policy")->check(CLI::NonNegativeNumber);
    opt->add_option("--quantiles", oa.quantiles);
    opt->add_option("--alpha-bins", oa.alpha_bins)->check(CLI::Range(1, 1000));
    opt->add_option("--conf-bins", oa.conf_bins)->check(CLI::Range(1, 1000));
    opt->add_option("--gamma", oa.gamma)->check(CLI::Range(0.0, 1.0));
    opt->add_option("--difficulty-source", oa.difficulty_source, "auto|stored|image|<alpha>");
    opt->add_option("--image-root", oa.image_root);
    opt->add_option("--max-combinations", oa.max_combinations);
    opt->add_option("--jobs", oa.jobs)->check(CLI::PositiveNumber);
    opt->add_option("--out", oa.out, "Policy JSON path");

    SimulateArgs ma;
    auto* sim = app.add_subcommand("simulate", "Run the exit policy over a trace");
    sim->add_option("--trace", ma.trace)->required();
    sim->add_option("--policy", ma.policy, "Policy JSON (static model if omitted)");
    sim->add_option("--beta-diff", ma.beta_diff)->check(CLI::NonNegativeNumber);
    sim->add_flag("--adaptive", ma.adaptive);
    sim->add_option("--strategy", ma.strategy)->check(CLI::IsMember({"temporal", "class", "both", "frozen"}));
    sim->add_flag("--bandit", ma.bandit, "Let UCB1 choose the strategy at each update");
    sim->add_option("--target-accuracy", ma.target_accuracy)->check(CLI::Range(0.0, 1.0));
    sim->add_option("--eta", ma.eta)->check(CLI::PositiveNumber);
    sim->add_option("--decay", ma.decay)->check(CLI::Range(0.0, 1.0));
    sim->add_option("--cadence", ma.cadence)->check(CLI::PositiveNumber);
    sim->add_option("--window", ma.window)->check(CLI::PositiveNumber);
    sim->add_option("--beta-opt", ma.beta_opt)->check(CLI::Range(0.0, 1.0));
    sim->add_flag("--no-pseudo-labels", ma.no_pseudo_labels);
    sim->add_option("--difficulty-source", ma.difficulty_source, "auto|stored|image|<alpha>");
    sim->add_option("--image-root", ma.image_root);
    sim->add_option("--difficulty-overhead-ms", ma.overhead_ms)->check(CLI::NonNegativeNumber);
    sim->add_option("--seed", ma.seed);
    sim->add_option("--jobs", ma.jobs)->check(CLI::PositiveNumber);
    sim->add_option("--out", ma.out, "Outcome JSON-lines path");
    sim->add_option("--adapt-log", ma.adapt_log, "Coefficient update log (JSON lines)");
    sim->add_option("--policy-out", ma.policy_out, "Write the adapted policy here");
    sim->add_option("--format", ma.format)->check(CLI::IsMember({"table", "csv", "json"}));

    ReportArgs ra;
    auto* rep = app.add_subcommand("report", "Aggregate outcomes or published results");
    rep->add_option("--outcomes", ra.outcomes);
    rep->add_option("--baseline", ra.baseline, "Outcomes of the static model");
    rep->add_option("--published", ra.published, "CSV: model,method,accuracy,time_ms,energy_mj,alpha");
    rep->add_option("--format", ra.format)->check(CLI::IsMember({"table", "csv", "json"}));
    rep->add_option("--alpha", ra.alpha, "Override the difficulty used for DAES")->check(CLI::Range(0.0, 1.0));
    rep->add_option("--model", ra.model);
    rep->add_option("--method", ra.method);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*diff)
            return run_difficulty(da);
        if (*synth)
            return run_synth(sa);
        if (*cal)
            return run_calibrate(ca);
        if (*opt)
            return run_optimize(oa);
        if (*sim)
            return run_simulate(ma);
        if (*rep)
            return run_report(ra);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
