#include "dart/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace dart {

void CoefficientSet::validate(int early_exits) const {
    auto check = [&](const Eigen::VectorXd& c) {
        if (c.size() != early_exits)
            throw Error("coefficient vector has length " + std::to_string(c.size()) + ", expected " +
                        std::to_string(early_exits));
        if ((c.array() < kCoefficientMin).any() || (c.array() > kCoefficientMax).any())
            throw Error("coefficient outside [0.5, 2.0]");
    };
    check(global);
    for (const auto& [cls, c] : per_class)
        check(c);
}

std::optional<WindowStats> SlidingWindow::stats(const WindowFilter& filter, std::optional<std::size_t> last) const {
    const std::size_t skip = last && *last < entries_.size() ? entries_.size() - *last : 0;
    WindowStats s;
    double conf = 0;
    double cost = 0;
    double correct = 0;
    std::size_t judged = 0;
    for (auto it = entries_.begin() + static_cast<std::ptrdiff_t>(skip); it != entries_.end(); ++it) {
        if (filter.exit && it->exit != *filter.exit)
            continue;
        if (filter.cls && it->cls != filter.cls)
            continue;
        ++s.count;
        conf += it->confidence;
        cost += it->cost;
        if (it->correct) {
            correct += *it->correct;
            ++judged;
        }
    }
    if (s.count == 0)
        return std::nullopt;
    s.mean_confidence = conf / static_cast<double>(s.count);
    s.mean_cost = cost / static_cast<double>(s.count);
    if (judged > 0)
        s.accuracy = correct / static_cast<double>(judged);
    return s;
}

double performance_coefficient(double accuracy, double target) {
    return std::clamp(1.0 + (target - accuracy), kCoefficientMin, kCoefficientMax);
}

double temporal_update(double c_prev, double perf, double decay) {
    if (!(decay >= 0.0 && decay <= 1.0))
        throw Error("decay must lie in [0,1]");
    return std::clamp(decay * c_prev + (1.0 - decay) * perf, kCoefficientMin, kCoefficientMax);
}

Eigen::VectorXd class_update(const Eigen::VectorXd& coefficients, double class_accuracy, double target, double eta) {
    if (!(eta > 0.0))
        throw Error("learning rate must be positive");
    return (coefficients.array() + eta * (target - class_accuracy)).max(kCoefficientMin).min(kCoefficientMax).matrix();
}

std::size_t ucb_select(const BanditState& b) {
    if (b.arms() == 0)
        throw Error("no strategies registered");
    for (std::size_t i = 0; i < b.arms(); ++i)
        if (b.pulls[i] == 0)
            return i;
    const double log_t = std::log(static_cast<double>(b.total));
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b.arms(); ++i) {
        const double score = b.mean_reward[i] + std::sqrt(2.0 * log_t / static_cast<double>(b.pulls[i]));
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

void bandit_reward(BanditState& b, std::size_t arm, double reward) {
    if (arm >= b.arms())
        throw Error("unknown strategy index " + std::to_string(arm));
    ++b.pulls[arm];
    ++b.total;
    b.mean_reward[arm] += (reward - b.mean_reward[arm]) / static_cast<double>(b.pulls[arm]);
}

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::TemporalOnly: return "temporal";
    case Strategy::ClassAware: return "class";
    case Strategy::Both: return "both";
    case Strategy::Frozen: return "frozen";
    }
    return "unknown";
}

Strategy parse_strategy(const std::string& name) {
    for (auto s : kAllStrategies)
        if (to_string(s) == name)
            return s;
    throw Error("unknown adaptation strategy '" + name + "'");
}

void AdaptiveConfig::validate() const {
    if (!(decay >= 0.0 && decay <= 1.0))
        throw Error("decay must lie in [0,1]");
    if (!(eta > 0.0))
        throw Error("learning rate must be positive");
    if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0))
        throw Error("target accuracy must lie in [0,1]");
    if (window == 0 || cadence == 0)
        throw Error("window and cadence must be positive");
    if (!(beta_opt >= 0.0 && beta_opt <= 1.0))
        throw Error("beta_opt must lie in [0,1]");
}

AdaptiveManager::AdaptiveManager(CoefficientSet initial, AdaptiveConfig cfg)
    : coefficients_(std::move(initial)), cfg_(cfg), window_(cfg.window),
      bandit_(cfg.use_bandit ? std::size(kAllStrategies) : 0) {
    cfg_.validate();
    coefficients_.validate(static_cast<int>(coefficients_.global.size()));
}

void AdaptiveManager::observe(const WindowEntry& e) {
    window_.push(e);
    if (++observed_ % cfg_.cadence == 0)
        update();
}

void AdaptiveManager::update() {
    if (!cfg_.use_bandit) {
        apply(cfg_.strategy);
        return;
    }
    // The previous arm governed the period that just ended.
    if (active_arm_) {
        const auto recent = window_.stats({}, cfg_.cadence);
        if (recent && recent->accuracy)
            bandit_reward(bandit_, *active_arm_, *recent->accuracy - cfg_.beta_opt * recent->mean_cost);
    }
    active_arm_ = ucb_select(bandit_);
    apply(kAllStrategies[*active_arm_]);
}

void AdaptiveManager::apply(Strategy s) {
    const bool temporal = s == Strategy::TemporalOnly || s == Strategy::Both;
    const bool per_class = s == Strategy::ClassAware || s == Strategy::Both;

    if (temporal) {
        const Eigen::VectorXd before = coefficients_.global;
        for (Eigen::Index i = 0; i < before.size(); ++i) {
            const auto st = window_.stats(WindowFilter{static_cast<int>(i), std::nullopt});
            if (st && st->accuracy)
                coefficients_.global(i) = temporal_update(
                    coefficients_.global(i), performance_coefficient(*st->accuracy, cfg_.target_accuracy), cfg_.decay);
        }
        if (before != coefficients_.global)
            events_.push_back({observed_, s, std::nullopt, before, coefficients_.global});
    }
    if (per_class) {
        std::set<int> classes;
        for (const auto& e : window_.entries())
            if (e.cls)
                classes.insert(*e.cls);
        for (int cls : classes) {
            const auto st = window_.stats(WindowFilter{std::nullopt, cls});
            if (!st || !st->accuracy)
                continue;
            auto& c = coefficients_.for_class(cls);
            const Eigen::VectorXd before = c;
            c = class_update(c, *st->accuracy, cfg_.target_accuracy, cfg_.eta);
            events_.push_back({observed_, s, cls, before, c});
        }
    }
}

} // namespace dart
