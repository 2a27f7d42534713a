#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dart/error.hpp"

namespace dart {

inline constexpr double kCoefficientMin = 0.5;
inline constexpr double kCoefficientMax = 2.0;

/// Multiplicative per-exit threshold coefficients, globally and per class.
struct CoefficientSet {
    Eigen::VectorXd global;
    std::map<int, Eigen::VectorXd> per_class;

    static CoefficientSet ones(int early_exits) { return {Eigen::VectorXd::Ones(early_exits), {}}; }

    /// Per-class vector when one exists for the hint, else the global vector.
    const Eigen::VectorXd& lookup(std::optional<int> class_hint) const {
        if (class_hint) {
            const auto it = per_class.find(*class_hint);
            if (it != per_class.end())
                return it->second;
        }
        return global;
    }

    /// Creates the class vector from the current global vector on first use.
    Eigen::VectorXd& for_class(int cls) { return per_class.try_emplace(cls, global).first->second; }

    void validate(int early_exits) const;
};

struct WindowEntry {
    int exit = 0;
    std::optional<int> cls;
    /// 1/0 for labeled samples; a pseudo-labeled sample contributes its confidence.
    std::optional<double> correct;
    double confidence = 0;
    /// Normalized cumulative cost at the chosen exit.
    double cost = 0;
};

struct WindowFilter {
    std::optional<int> exit;
    std::optional<int> cls;
};

struct WindowStats {
    std::optional<double> accuracy;
    double mean_confidence = 0;
    double mean_cost = 0;
    std::size_t count = 0;
};

/// Fixed-capacity FIFO of recent inference outcomes.
class SlidingWindow {
public:
    explicit SlidingWindow(std::size_t capacity = 1000) : capacity_(capacity) {
        if (capacity_ == 0)
            throw Error("window capacity must be positive");
    }

    void push(const WindowEntry& e) {
        if (entries_.size() == capacity_)
            entries_.pop_front();
        entries_.push_back(e);
    }

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::deque<WindowEntry>& entries() const { return entries_; }

    /// Statistics over retained entries matching `filter`, restricted to the
    /// newest `last` entries when given. Empty selections yield nullopt.
    std::optional<WindowStats> stats(const WindowFilter& filter = {}, std::optional<std::size_t> last = {}) const;

private:
    std::size_t capacity_;
    std::deque<WindowEntry> entries_;
};

/// Target coefficient for a windowed accuracy: 1 + (target - accuracy), clamped.
double performance_coefficient(double accuracy, double target);

/// decay * c_prev + (1 - decay) * perf, clamped to the coefficient range.
double temporal_update(double c_prev, double perf, double decay);

/// Shifts every coefficient by eta * (target - class_accuracy), clamped.
Eigen::VectorXd class_update(const Eigen::VectorXd& coefficients, double class_accuracy, double target, double eta);

struct BanditState {
    std::vector<std::size_t> pulls;
    std::vector<double> mean_reward;
    std::size_t total = 0;

    explicit BanditState(std::size_t arms = 0) : pulls(arms, 0), mean_reward(arms, 0.0) {}
    std::size_t arms() const { return pulls.size(); }
};

/// UCB1: untried arms first (lowest index), then argmax of
/// mean + sqrt(2 ln t / n) with ties to the lowest index.
std::size_t ucb_select(const BanditState& b);

/// Folds one reward into the arm's running mean.
void bandit_reward(BanditState& b, std::size_t arm, double reward);

enum class Strategy { TemporalOnly, ClassAware, Both, Frozen };

inline constexpr Strategy kAllStrategies[] = {Strategy::TemporalOnly, Strategy::ClassAware, Strategy::Both,
                                              Strategy::Frozen};

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

struct AdaptiveConfig {
    double decay = 0.95;
    double eta = 0.05;
    double target_accuracy = 0.85;
    std::size_t window = 1000;
    std::size_t cadence = 100;
    double pseudo_label_confidence = 0.9;
    bool use_pseudo_labels = true;
    /// When set, UCB1 picks among all strategies at every update.
    bool use_bandit = false;
    Strategy strategy = Strategy::Both;
    /// Cost weight in the bandit reward.
    double beta_opt = 0.3;

    void validate() const;
};

struct AdaptationEvent {
    std::size_t iteration = 0;
    Strategy strategy = Strategy::Both;
    std::optional<int> cls;  ///< nullopt for the global vector
    Eigen::VectorXd before;
    Eigen::VectorXd after;
};

/// Single-writer owner of the coefficient state.
class AdaptiveManager {
public:
    AdaptiveManager(CoefficientSet initial, AdaptiveConfig cfg);

    /// Records one outcome; runs an update every `cadence` observations.
    void observe(const WindowEntry& e);

    const CoefficientSet& coefficients() const { return coefficients_; }
    const SlidingWindow& window() const { return window_; }
    const BanditState& bandit() const { return bandit_; }
    const std::vector<AdaptationEvent>& events() const { return events_; }
    const AdaptiveConfig& config() const { return cfg_; }

private:
    void update();
    void apply(Strategy s);

    CoefficientSet coefficients_;
    AdaptiveConfig cfg_;
    SlidingWindow window_;
    BanditState bandit_;
    std::optional<std::size_t> active_arm_;
    std::size_t observed_ = 0;
    std::vector<AdaptationEvent> events_;
};

} // namespace dart
