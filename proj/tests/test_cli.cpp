#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <map>
#include <numeric>
#include <fstream>
#include <sstream>

#include "dart/optimizer.hpp"
#include "dart/outcome.hpp"
#include "dart/policy_io.hpp"
#include "dart/trace.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace dart;

namespace {

struct Run {
    int status = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path work(const std::string& name) {
    return test::temp_path("cli_" + name);
}

Run dart_cli(const std::string& args, const std::string& env = "") {
    const auto out = work("stdout.txt");
    const auto err = work("stderr.txt");
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + std::string(DART_CLI) + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string q(const std::filesystem::path& p) {
    return "'" + p.string() + "'";
}

std::string make_trace(const std::string& name, const std::string& flags) {
    const auto p = work(name);
    const auto r = dart_cli("synth " + flags + " --out " + q(p));
    REQUIRE(r.status == 0);
    return p.string();
}

void write_tau(const std::filesystem::path& p, Eigen::VectorXd tau, double beta_diff) {
    std::ofstream out(p);
    write_policy(PolicyFile{ExitPolicy::from_thresholds(std::move(tau), beta_diff), {}}, out);
}

} // namespace

TEST_CASE("difficulty subcommand") {
    const auto flat = work("flat.pgm");
    test::write_bytes(flat, "P5\n4 4\n255\n" + std::string(16, '\x50'));
    const auto dots = work("dots.pgm");
    std::string px(25, '\0');
    px[6] = px[12] = px[18] = '\xff';
    test::write_bytes(dots, "P5\n5 5\n255\n" + px);

    SUBCASE("constant image scores zero") {
        const auto r = dart_cli("difficulty --format json " + q(flat));
        REQUIRE(r.status == 0);
        const auto j = nlohmann::json::parse(r.out);
        REQUIRE(j.size() == 1);
        CHECK(j[0]["fused"].get<double>() == 0.0);
        CHECK(j[0].contains("edge"));
        CHECK(j[0].contains("variance"));
        CHECK(j[0].contains("gradient"));
    }
    SUBCASE("unreadable files fail with status 2 and are named") {
        const auto missing = work("nope.pgm");
        const auto r = dart_cli("difficulty --format csv " + q(flat) + " " + q(missing));
        CHECK(r.status == 2);
        CHECK(r.err.find("nope.pgm") != std::string::npos);
        CHECK(r.out.find("flat.pgm") != std::string::npos);
    }
    SUBCASE("degenerate weights select the edge component") {
        const auto r = dart_cli("difficulty --format json --weights 1,0,0 " + q(dots));
        REQUIRE(r.status == 0);
        const auto j = nlohmann::json::parse(r.out)[0];
        CHECK(j["fused"].get<double>() == j["edge"].get<double>());
        CHECK(j["edge"].get<double>() > 0.0);
    }
    SUBCASE("bad weights are a usage error") {
        CHECK(dart_cli("difficulty --weights 1,0 " + q(flat)).status == 2);
        CHECK(dart_cli("difficulty --weights -1,1,1 " + q(flat)).status == 2);
    }
}

TEST_CASE("synth subcommand") {
    SUBCASE("deterministic") {
        const auto a = make_trace("a.jsonl", "--samples 300 --seed 9");
        const auto b = make_trace("b.jsonl", "--samples 300 --seed 9");
        CHECK(slurp(a) == slurp(b));
        const auto c = make_trace("c.jsonl", "--samples 300 --seed 10");
        CHECK(slurp(a) != slurp(c));
    }
    SUBCASE("seed from the environment, overridden by the flag") {
        const auto a = make_trace("a.jsonl", "--samples 100 --seed 4");
        const auto e = work("env.jsonl");
        REQUIRE(dart_cli("synth --samples 100 --out " + q(e), "DART_SEED=4").status == 0);
        CHECK(slurp(a) == slurp(e));
        REQUIRE(dart_cli("synth --samples 100 --seed 5 --out " + q(e), "DART_SEED=4").status == 0);
        CHECK(slurp(a) != slurp(e));
        CHECK(dart_cli("synth --samples 10", "DART_SEED=abc").status == 2);
    }
    SUBCASE("single exit") {
        const auto t = read_trace_file(make_trace("one.jsonl", "--exits 1 --samples 50"));
        CHECK(t.num_exits() == 1);
        CHECK(t.samples.size() == 50);
    }
    SUBCASE("usage errors") {
        CHECK(dart_cli("synth --samples 0").status == 2);
        CHECK(dart_cli("synth --bias 0:x").status == 2);
        CHECK(dart_cli("synth --frobnicate").status == 2);
    }
    SUBCASE("bias shifts difficulty") {
        const auto t = read_trace_file(make_trace("bias.jsonl", "--samples 3000 --classes 3 --bias 0:-0.3,2:0.3"));
        double sum[3] = {0, 0, 0}, n[3] = {0, 0, 0};
        for (const auto& s : t.samples) {
            sum[*s.label] += *s.difficulty;
            n[*s.label] += 1;
        }
        CHECK(sum[0] / n[0] < sum[1] / n[1]);
        CHECK(sum[1] / n[1] < sum[2] / n[2]);
    }
}

TEST_CASE("calibrate and optimize subcommands") {
    const auto trace = make_trace("opt.jsonl", "--samples 1500 --seed 21");
    const auto t = read_trace_file(trace);

    SUBCASE("calibrate prints one line per early exit") {
        const auto r = dart_cli("calibrate --trace " + q(trace));
        REQUIRE(r.status == 0);
        CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
        CHECK(r.out.rfind("exit 1:", 0) == 0);
    }
    SUBCASE("grid search matches the library") {
        const auto pol = work("grid.json");
        REQUIRE(dart_cli("optimize --trace " + q(trace) + " --method grid --out " + q(pol)).status == 0);
        const auto pf = read_policy_file(pol.string());
        const auto lib = grid_search(quantile_candidates(t, default_quantiles()), t, ObjectiveConfig{});
        CHECK(pf.policy.thresholds == lib.thresholds);
        CHECK(std::abs(pf.meta["objective"].get<double>() - lib.objective) < 1e-12);
        CHECK(std::abs(lib.objective - test::oracle_objective(t, std::vector<double>{lib.thresholds(0), lib.thresholds(1)}, 0.3)) <
              1e-12);
    }
    SUBCASE("zero cost weight maximizes accuracy") {
        const auto pol = work("acc.json");
        REQUIRE(dart_cli("optimize --trace " + q(trace) + " --beta-opt 0 --out " + q(pol)).status == 0);
        const auto pf = read_policy_file(pol.string());
        const auto acc = evaluate_objective_detail(pf.policy.thresholds, t, ObjectiveConfig{0.0}).accuracy;
        CHECK(std::abs(pf.meta["objective"].get<double>() - acc) < 1e-12);
        const auto cand = quantile_candidates(t, default_quantiles());
        for (double a : cand[0])
            for (double b : cand[1])
                CHECK(evaluate_objective_detail(Eigen::Vector2d(a, b), t, ObjectiveConfig{0.0}).accuracy <= acc);
    }
    SUBCASE("dynamic programming") {
        const auto pol = work("dp.json");
        const auto r = dart_cli("optimize --trace " + q(trace) + " --method dp --conf-bins 20 --out " + q(pol));
        REQUIRE(r.status == 0);
        const auto pf = read_policy_file(pol.string());
        CHECK(pf.policy.thresholds.size() == 2);
        CHECK((pf.policy.thresholds.array() >= 0).all());
        CHECK((pf.policy.thresholds.array() <= 1).all());
    }
    SUBCASE("usage errors") {
        CHECK(dart_cli("optimize").status == 2);
        CHECK(dart_cli("optimize --trace " + q(work("missing.jsonl"))).status == 2);
        CHECK(dart_cli("optimize --trace " + q(trace) + " --method anneal").status == 2);
    }
}

TEST_CASE("simulate and report subcommands") {
    const auto trace = make_trace("sim.jsonl", "--samples 1000 --seed 5");
    const auto t = read_trace_file(trace);

    SUBCASE("a never-exiting policy is the static model") {
        const auto pol = work("ones.json");
        write_tau(pol, Eigen::Vector2d(1.0, 1.0), 0.0);
        const auto a = work("static.jsonl");
        const auto b = work("ones.jsonl");
        REQUIRE(dart_cli("simulate --trace " + q(trace) + " --out " + q(a)).status == 0);
        REQUIRE(dart_cli("simulate --trace " + q(trace) + " --policy " + q(pol) + " --out " + q(b)).status == 0);
        CHECK(slurp(a) == slurp(b));
        std::size_t hits = 0;
        for (const auto& s : t.samples)
            hits += s.correct_at(2) ? 1 : 0;
        const auto r = dart_cli("report --format json --outcomes " + q(b));
        REQUIRE(r.status == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j[0]["accuracy"].get<double>() == static_cast<double>(hits) / 1000.0);
        CHECK(j[0]["time_ms"].get<double>() == t.profile.cum_time_ms(2));
    }
    SUBCASE("reruns are identical") {
        const auto pol = work("p.json");
        write_tau(pol, Eigen::Vector2d(0.6, 0.8), 0.3);
        const auto a = work("r1.jsonl");
        const auto b = work("r2.jsonl");
        const std::string base = "simulate --adaptive --trace " + q(trace) + " --policy " + q(pol) + " --out ";
        REQUIRE(dart_cli(base + q(a)).status == 0);
        REQUIRE(dart_cli(base + q(b) + " --jobs 3").status == 0);
        CHECK(slurp(a) == slurp(b));
        CHECK(read_outcomes_file(a.string()).size() == 1000);
    }
    SUBCASE("report against a baseline") {
        const auto pol = work("p.json");
        write_tau(pol, Eigen::Vector2d(0.6, 0.8), 0.3);
        const auto s = work("s.jsonl");
        const auto o = work("o.jsonl");
        REQUIRE(dart_cli("simulate --trace " + q(trace) + " --out " + q(s)).status == 0);
        REQUIRE(dart_cli("simulate --trace " + q(trace) + " --policy " + q(pol) + " --out " + q(o)).status == 0);

        auto r = dart_cli("report --format json --outcomes " + q(s) + " --baseline " + q(s));
        REQUIRE(r.status == 0);
        auto j = nlohmann::json::parse(r.out);
        CHECK(j.back()["speedup"].get<double>() == 1.0);
        CHECK(j.back()["power_eff"].get<double>() == 1.0);

        r = dart_cli("report --format json --outcomes " + q(o) + " --baseline " + q(s));
        REQUIRE(r.status == 0);
        j = nlohmann::json::parse(r.out);
        CHECK(j.back()["speedup"].get<double>() > 1.0);

        r = dart_cli("report --format csv --outcomes " + q(o) + " --baseline " + q(s));
        REQUIRE(r.status == 0);
        CHECK(r.out.rfind("model,method,accuracy,time_ms,energy_mj,power_w,speedup,power_eff,daes,mean_alpha\n", 0) ==
              0);
    }
    SUBCASE("published results reproduce the golden scores") {
        const auto r = dart_cli("report --format json --published " + q(test::data_path("published_results.csv")));
        REQUIRE(r.status == 0);
        const auto j = nlohmann::json::parse(r.out);
        const auto golden = test::read_csv(test::data_path("daes_golden.csv"));
        REQUIRE(j.size() == golden.size());
        for (std::size_t i = 0; i < golden.size(); ++i)
            CHECK(std::abs(j[i]["daes"].get<double>() - std::stod(golden[i].at("daes"))) <= 0.01);
    }
    SUBCASE("errors") {
        CHECK(dart_cli("simulate").status == 2);
        CHECK(dart_cli("report").status == 2);
        CHECK(dart_cli("simulate --trace " + q(trace) + " --difficulty-source sometimes").status == 2);
        const auto pol = work("bad.json");
        write_tau(pol, Eigen::Vector3d(0.5, 0.5, 0.5), 0.0);
        CHECK(dart_cli("simulate --trace " + q(trace) + " --policy " + q(pol)).status == 1);
    }
}

TEST_CASE("adaptation log shows class drift") {
    int ok = 0;
    for (int seed = 0; seed < 3; ++seed) {
        const auto trace = make_trace("drift.jsonl", "--classes 3 --samples 3000 --bias 0:-0.3,2:0.3 --seed " +
                                                         std::to_string(seed));
        const auto pol = work("loose.json");
        write_tau(pol, Eigen::Vector2d(0.3, 0.3), 0.0);
        const auto log = work("adapt.jsonl");
        const auto pout = work("adapted.json");
        const auto r = dart_cli("simulate --adaptive --target-accuracy 0.6 --trace " + q(trace) + " --policy " +
                                q(pol) + " --adapt-log " + q(log) + " --policy-out " + q(pout));
        REQUIRE(r.status == 0);
        std::map<int, double> last;
        std::ifstream in(log);
        std::size_t events = 0;
        for (std::string line; std::getline(in, line); ++events) {
            const auto j = nlohmann::json::parse(line);
            CHECK(j.contains("iteration"));
            CHECK(j.contains("old"));
            if (!j["class"].is_null()) {
                const auto v = j["new"].get<std::vector<double>>();
                last[j["class"].get<int>()] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            }
        }
        CHECK(events > 0);
        const auto adapted = read_policy_file(pout.string());
        CHECK(adapted.policy.coefficients.per_class.at(0).mean() == doctest::Approx(last.at(0)));
        ok += (last.at(0) < 1.0 && last.at(2) > 1.0) ? 1 : 0;
    }
    CHECK(ok == 3);
}
