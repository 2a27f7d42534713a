#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dart/optimizer.hpp"
#include "test_support.hpp"

using namespace dart;
using doctest::Approx;

namespace {

ExitProfile linear_profile(int n, int classes = 10) {
    ExitProfile p;
    p.model_name = "toy";
    p.dataset_name = "toy";
    p.num_exits = n;
    p.num_classes = classes;
    p.cum_macs = Eigen::VectorXd::LinSpaced(n, 1, n);
    p.cum_time_ms = p.cum_macs * 0.1;
    p.cum_energy_mj = p.cum_macs * 2.0;
    return p;
}

SampleRecord sample(std::string id, int label, std::vector<double> conf, std::vector<int> pred) {
    SampleRecord s;
    s.id = std::move(id);
    s.label = label;
    s.confidences = Eigen::Map<Eigen::VectorXd>(conf.data(), static_cast<Eigen::Index>(conf.size()));
    s.predictions = Eigen::Map<Eigen::VectorXi>(pred.data(), static_cast<Eigen::Index>(pred.size()));
    return s;
}

TraceSet random_labeled(std::mt19937_64& rng, int n, int m) {
    TraceSet t{linear_profile(n, 3), {}};
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> cls(0, 2);
    for (int k = 0; k < m; ++k) {
        std::vector<double> conf(n);
        std::vector<int> pred(n);
        for (int i = 0; i < n; ++i) {
            conf[i] = u(rng);
            pred[i] = cls(rng);
        }
        t.samples.push_back(sample("r" + std::to_string(k), cls(rng), conf, pred));
    }
    return t;
}

std::vector<double> as_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

TEST_CASE("objective at the extremes") {
    TraceSet t{linear_profile(3), {}};
    t.samples.push_back(sample("a", 1, {0.4, 0.6, 0.9}, {0, 1, 1}));
    t.samples.push_back(sample("b", 2, {0.7, 0.2, 0.8}, {2, 2, 2}));
    t.samples.push_back(sample("c", 3, {0.1, 0.95, 0.99}, {3, 0, 3}));
    const ObjectiveConfig cfg{0.3};
    CHECK(evaluate_objective(Eigen::Vector2d(1.0, 1.0), t, cfg) == Approx(0.7));
    // Everything leaves at exit 1 (cost 1/3); two of three are right there.
    CHECK(evaluate_objective(Eigen::Vector2d(0.0, 0.0), t, cfg) == Approx(2.0 / 3.0 - 0.3 / 3.0));

    const auto d = evaluate_objective_detail(Eigen::Vector2d(0.5, 0.5), t, cfg);
    CHECK(d.exit_fraction.sum() == Approx(1.0));
    CHECK(d.exit_fraction(2) == 0.0);
    CHECK(d.exit_accuracy(2) == 0.0);
}

TEST_CASE("objective matches a per-sample oracle") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto t = random_labeled(rng, 3, 50);
        const Eigen::Vector2d tau(u(rng), u(rng));
        const double beta = u(rng);
        CHECK(std::abs(evaluate_objective(tau, t, {beta}) - test::oracle_objective(t, as_std(tau), beta)) < 1e-12);
    }
}

TEST_CASE("objective properties") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    auto t = random_labeled(rng, 4, 200);
    const Eigen::Vector3d tau(0.3, 0.6, 0.5);

    SUBCASE("order invariant") {
        const double j = evaluate_objective(tau, t, {0.3});
        std::shuffle(t.samples.begin(), t.samples.end(), rng);
        CHECK(evaluate_objective(tau, t, {0.3}) == Approx(j).epsilon(1e-12));
    }
    SUBCASE("beta zero is accuracy") {
        const auto d = evaluate_objective_detail(tau, t, {0.0});
        CHECK(d.value == Approx(d.accuracy).epsilon(1e-12));
    }
    SUBCASE("raising a threshold never adds early-exit mass") {
        for (int trial = 0; trial < 100; ++trial) {
            Eigen::Vector3d base(u(rng), u(rng), u(rng));
            Eigen::Vector3d raised = base;
            const int i = trial % 3;
            raised(i) = base(i) + (1 - base(i)) * u(rng);
            const auto a = evaluate_objective_detail(base, t, {0.3}).exit_fraction;
            const auto b = evaluate_objective_detail(raised, t, {0.3}).exit_fraction;
            CHECK(b.head(i + 1).sum() <= a.head(i + 1).sum() + 1e-12);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(evaluate_objective(Eigen::Vector2d(0.5, 0.5), t, {0.3}), Error);
        CHECK_THROWS_AS(evaluate_objective(tau, t, {1.5}), Error);
        t.samples[3].label.reset();
        CHECK_THROWS_WITH_AS(evaluate_objective(tau, t, {0.3}), doctest::Contains("labels"), Error);
    }
}

TEST_CASE("quantile candidates") {
    TraceSet two{linear_profile(2), {}};
    two.samples.push_back(sample("a", 0, {0.0, 0.5}, {0, 0}));
    two.samples.push_back(sample("b", 0, {1.0, 0.5}, {0, 0}));
    const auto mid = quantile_candidates(two, {0.5});
    REQUIRE(mid.size() == 1);
    CHECK(mid[0] == std::vector<double>{0.5});

    TraceSet flat{linear_profile(2), {}};
    for (int k = 0; k < 10; ++k)
        flat.samples.push_back(sample("f" + std::to_string(k), 0, {0.7, 0.9}, {0, 0}));
    CHECK(quantile_candidates(flat, default_quantiles())[0] == std::vector<double>{0.7});

    TraceSet nine{linear_profile(3), {}};
    std::vector<double> values;
    for (int k = 1; k <= 9; ++k) {
        values.push_back(k / 10.0);
        nine.samples.push_back(sample("n" + std::to_string(k), 0, {k / 10.0, 1.0 - k / 10.0, 0.5}, {0, 0, 0}));
    }
    const auto cands = quantile_candidates(nine, default_quantiles());
    REQUIRE(cands.size() == 2);
    std::vector<double> expect;
    for (double q : default_quantiles())
        expect.push_back(test::oracle_quantile(values, q));
    REQUIRE(cands[0].size() == expect.size());
    for (std::size_t k = 0; k < expect.size(); ++k)
        CHECK(cands[0][k] == Approx(expect[k]).epsilon(1e-15));
    CHECK(std::is_sorted(cands[1].begin(), cands[1].end()));

    CHECK_THROWS_AS(quantile_candidates(TraceSet{linear_profile(2), {}}, {0.5}), Error);
    CHECK_THROWS_AS(quantile_candidates(nine, {1.0}), Error);
}

TEST_CASE("grid search") {
    std::mt19937_64 rng(31);
    const auto t = random_labeled(rng, 3, 300);
    const ObjectiveConfig cfg{0.3};

    SUBCASE("single candidate") {
        const auto r = grid_search({{0.4}, {0.6}}, t, cfg);
        CHECK(r.thresholds == Eigen::Vector2d(0.4, 0.6));
        CHECK(r.objective == Approx(evaluate_objective(Eigen::Vector2d(0.4, 0.6), t, cfg)));
        CHECK(r.evaluated == 1);
    }
    SUBCASE("two by two matches manual enumeration") {
        double best = -1e9;
        Eigen::Vector2d arg;
        for (double a : {0.3, 0.9})
            for (double b : {0.3, 0.9}) {
                const double j = test::oracle_objective(t, {a, b}, 0.3);
                if (j > best) {
                    best = j;
                    arg = {a, b};
                }
            }
        const auto r = grid_search({{0.3, 0.9}, {0.3, 0.9}}, t, cfg);
        CHECK(r.thresholds == arg);
        CHECK(r.objective == Approx(best).epsilon(1e-12));
        CHECK(r.evaluated == 4);
    }
    SUBCASE("dominated candidates do not change the optimum") {
        const auto base = grid_search({{0.2, 0.5, 0.8}, {0.2, 0.5, 0.8}}, t, cfg);
        const auto more = grid_search({{0.2, 0.5, 0.8, 1.0}, {0.2, 0.5, 0.8, 1.0}}, t, cfg);
        const auto dup = grid_search({{0.2, 0.5, 0.8, 1.0}, {0.2, 0.5, 0.8, 1.0, 1.0}}, t, cfg);
        CHECK(more.objective >= base.objective);
        CHECK(dup.objective == more.objective);
        CHECK(dup.thresholds == more.thresholds);
    }
    SUBCASE("ties prefer the lexicographically smaller vector") {
        // Nothing exceeds 0.999 except at conf 1.0, so 0.999 and 0.9995 tie.
        TraceSet flat{linear_profile(3, 3), {}};
        flat.samples.push_back(sample("a", 0, {0.5, 0.5, 0.5}, {0, 0, 0}));
        const auto r = grid_search({{0.999, 0.9995}, {0.9995, 0.999}}, flat, cfg);
        CHECK(r.thresholds == Eigen::Vector2d(0.999, 0.999));
    }
    SUBCASE("parallel scan agrees") {
        const auto cands = quantile_candidates(t, default_quantiles());
        const auto serial = grid_search(cands, t, cfg);
        const auto parallel = grid_search(cands, t, cfg, {1'000'000, 4});
        CHECK(parallel.thresholds == serial.thresholds);
        CHECK(parallel.objective == serial.objective);
    }
    SUBCASE("errors") {
        CHECK_THROWS_WITH_AS(grid_search({{0.1, 0.2}, {0.1, 0.2}}, t, cfg, {3, 1}), doctest::Contains("cap"), Error);
        CHECK_THROWS_WITH_AS(grid_search({{0.1}, {}}, t, cfg), doctest::Contains("empty"), Error);
        CHECK_THROWS_AS(grid_search({{0.1}}, t, cfg), Error);
    }
    SUBCASE("single exit model") {
        TraceSet one{linear_profile(1, 3), {}};
        one.samples.push_back(sample("a", 1, {0.9}, {1}));
        const auto r = grid_search({}, one, cfg);
        CHECK(r.thresholds.size() == 0);
        CHECK(r.objective == Approx(0.7));
    }
}
