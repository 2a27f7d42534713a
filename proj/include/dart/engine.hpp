#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <vector>

#include "dart/adaptive.hpp"
#include "dart/difficulty.hpp"
#include "dart/metrics.hpp"
#include "dart/optimizer.hpp"
#include "dart/outcome.hpp"
#include "dart/trace.hpp"

namespace dart {

struct ExitPolicy {
    ThresholdVector thresholds;
    CoefficientSet coefficients;
    /// Weight of the input difficulty added to every threshold.
    double beta_diff = 0.3;

    /// Thresholds all 1.0: never exits early.
    static ExitPolicy static_policy(int num_exits);
    static ExitPolicy from_thresholds(ThresholdVector thresholds, double beta_diff = 0.3);

    void validate(int num_exits) const;
};

/// clamp(c ⊙ tau + beta_diff * alpha, 0, 1), with the class vector when the
/// hint names a class that has one.
Eigen::VectorXd effective_thresholds(const ExitPolicy& p, double alpha, std::optional<int> class_hint = {});

/// First exit whose confidence strictly exceeds its effective threshold, else
/// the last exit; costs are the profile's cumulative values there.
ExitOutcome decide_exit(const SampleRecord& s, const Eigen::VectorXd& effective, const ExitProfile& profile);

enum class DifficultyMode {
    Auto,      ///< stored value, else computed from the image
    Stored,
    Image,
    Constant,
};

struct DifficultySource {
    DifficultyMode mode = DifficultyMode::Auto;
    double constant = 0.0;
    /// Relative image paths are resolved against this directory.
    std::filesystem::path image_root;
    DifficultyOptions estimator;
    /// Per-image estimation cost reported as overhead, never added to exit costs.
    double overhead_ms_per_image = 0.0;
};

struct SimulateOptions {
    bool adaptive = false;
    AdaptiveConfig adaptive_config;
    DifficultySource difficulty;
    int jobs = 1;
};

struct SimulationResult {
    std::vector<ExitOutcome> outcomes;
    RunReport report;
    CoefficientSet final_coefficients;
    std::vector<AdaptationEvent> events;
    std::optional<BanditState> bandit;
};

/// Per-sample difficulty and its overhead, in trace order.
struct ResolvedDifficulty {
    std::vector<double> alpha;
    std::vector<double> overhead_ms;
};

ResolvedDifficulty resolve_difficulty(const TraceSet& traces, const DifficultySource& source, bool required,
                                      int jobs = 1);

/// Routes every sample in order. Adaptive runs feed each outcome back before
/// the next sample is routed.
SimulationResult simulate(const TraceSet& traces, const ExitPolicy& policy, const SimulateOptions& opts = {});

} // namespace dart
