#include "dart/engine.hpp"

#include <algorithm>
#include <thread>

namespace dart {
namespace {

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, 64));
    if (workers <= 1 || n < 2 * workers) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const auto begin = std::min(n, w * chunk);
        const auto end = std::min(n, begin + chunk);
        pool.emplace_back([&fn, begin, end] {
            for (auto i = begin; i < end; ++i)
                fn(i);
        });
    }
    for (auto& t : pool)
        t.join();
}

WindowEntry window_entry(const SampleRecord& s, const ExitOutcome& o, const ExitProfile& profile,
                         const AdaptiveConfig& cfg) {
    WindowEntry e;
    e.exit = o.exit;
    e.confidence = s.confidences(o.exit);
    e.cost = o.macs / profile.cum_macs(profile.num_exits - 1);
    if (s.label) {
        e.cls = *s.label;
        e.correct = o.prediction == *s.label ? 1.0 : 0.0;
    } else if (!cfg.use_pseudo_labels) {
        throw Error("sample '" + s.id + "' has no label and pseudo-labels are disabled");
    } else if (e.confidence >= cfg.pseudo_label_confidence) {
        e.cls = o.prediction;
        e.correct = e.confidence;
    }
    return e;
}

} // namespace

ExitPolicy ExitPolicy::static_policy(int num_exits) {
    return {ThresholdVector::Ones(num_exits - 1), CoefficientSet::ones(num_exits - 1), 0.0};
}

ExitPolicy ExitPolicy::from_thresholds(ThresholdVector thresholds, double beta_diff) {
    const auto k = static_cast<int>(thresholds.size());
    return {std::move(thresholds), CoefficientSet::ones(k), beta_diff};
}

void ExitPolicy::validate(int num_exits) const {
    if (thresholds.size() != num_exits - 1)
        throw Error("policy has " + std::to_string(thresholds.size()) + " thresholds, trace has " +
                    std::to_string(num_exits) + " exits");
    if ((thresholds.array() < 0.0).any() || (thresholds.array() > 1.0).any())
        throw Error("thresholds must lie in [0,1]");
    if (!(beta_diff >= 0.0))
        throw Error("beta_diff must be non-negative");
    coefficients.validate(num_exits - 1);
}

Eigen::VectorXd effective_thresholds(const ExitPolicy& p, double alpha, std::optional<int> class_hint) {
    const auto& c = p.coefficients.lookup(class_hint);
    return (c.array() * p.thresholds.array() + p.beta_diff * alpha).max(0.0).min(1.0).matrix();
}

ExitOutcome decide_exit(const SampleRecord& s, const Eigen::VectorXd& effective, const ExitProfile& profile) {
    ExitOutcome o;
    o.sample_id = s.id;
    o.num_exits = profile.num_exits;
    o.exit = first_exit(s.confidences, effective);
    o.prediction = s.predictions(o.exit);
    if (s.label)
        o.correct = o.prediction == *s.label;
    o.effective_thresholds = effective;
    o.time_ms = profile.cum_time_ms(o.exit);
    o.energy_mj = profile.cum_energy_mj(o.exit);
    o.macs = profile.cum_macs(o.exit);
    return o;
}

ResolvedDifficulty resolve_difficulty(const TraceSet& traces, const DifficultySource& source, bool required,
                                      int jobs) {
    const auto n = traces.samples.size();
    ResolvedDifficulty r{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    if (source.mode == DifficultyMode::Constant) {
        if (!(source.constant >= 0.0 && source.constant <= 1.0))
            throw Error("constant difficulty must lie in [0,1]");
        std::fill(r.alpha.begin(), r.alpha.end(), source.constant);
        return r;
    }
    // Surface the first missing-source error in trace order before doing work.
    std::vector<bool> from_image(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = traces.samples[i];
        const bool stored_ok = source.mode != DifficultyMode::Image && s.difficulty.has_value();
        // Auto mode only pays for image estimation when the value is used.
        const bool image_ok = (source.mode == DifficultyMode::Image || (source.mode == DifficultyMode::Auto && required)) &&
                              s.image.has_value();
        if (stored_ok)
            r.alpha[i] = *s.difficulty;
        else if (image_ok)
            from_image[i] = true;
        else if (required)
            throw Error("sample '" + s.id + "' has no difficulty source");
    }
    std::vector<std::string> errors(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        if (!from_image[i])
            return;
        std::filesystem::path path(*traces.samples[i].image);
        if (path.is_relative())
            path = source.image_root / path;
        try {
            r.alpha[i] = difficulty(load_image(path.string()), source.estimator).fused;
            r.overhead_ms[i] = source.overhead_ms_per_image;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        if (!errors[i].empty())
            throw Error("sample '" + traces.samples[i].id + "': " + errors[i]);
    return r;
}

SimulationResult simulate(const TraceSet& traces, const ExitPolicy& policy, const SimulateOptions& opts) {
    if (traces.samples.empty())
        throw Error("cannot simulate an empty trace");
    const auto& profile = traces.profile;
    policy.validate(profile.num_exits);
    const auto difficulty = resolve_difficulty(traces, opts.difficulty, policy.beta_diff > 0.0, opts.jobs);

    SimulationResult result;
    const auto n = traces.samples.size();
    result.outcomes.resize(n);
    auto route = [&](const ExitPolicy& p, std::size_t i) {
        const auto& s = traces.samples[i];
        const auto tau = effective_thresholds(p, difficulty.alpha[i], s.predictions(0));
        auto o = decide_exit(s, tau, profile);
        o.alpha = difficulty.alpha[i];
        o.overhead_ms = difficulty.overhead_ms[i];
        return o;
    };

    if (!opts.adaptive) {
        parallel_for(n, opts.jobs, [&](std::size_t i) { result.outcomes[i] = route(policy, i); });
        result.final_coefficients = policy.coefficients;
    } else {
        AdaptiveManager manager(policy.coefficients, opts.adaptive_config);
        ExitPolicy live = policy;
        for (std::size_t i = 0; i < n; ++i) {
            live.coefficients = manager.coefficients();
            result.outcomes[i] = route(live, i);
            manager.observe(window_entry(traces.samples[i], result.outcomes[i], profile, opts.adaptive_config));
        }
        result.final_coefficients = manager.coefficients();
        result.events = manager.events();
        if (opts.adaptive_config.use_bandit)
            result.bandit = manager.bandit();
    }
    result.report = aggregate(result.outcomes);
    return result;
}

} // namespace dart
