#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "dart/trace.hpp"

namespace dart {

/// Thresholds for exits 1..N-1; the last exit always accepts.
using ThresholdVector = Eigen::VectorXd;

struct ObjectiveConfig {
    /// Accuracy/cost trade-off weight in [0,1].
    double beta_opt = 0.3;

    void validate() const {
        if (!(beta_opt >= 0.0 && beta_opt <= 1.0))
            throw Error("beta_opt must lie in [0,1]");
    }
};

/// Index of the first exit whose confidence strictly exceeds its threshold,
/// or the last exit.
int first_exit(const Eigen::Ref<const Eigen::VectorXd>& confidences, const Eigen::Ref<const Eigen::VectorXd>& thresholds);

struct ObjectiveBreakdown {
    double value = 0;
    Eigen::VectorXd exit_fraction;  ///< pi_i
    Eigen::VectorXd exit_accuracy;  ///< A_i, 0 for exits nobody takes
    double accuracy = 0;            ///< overall simulated accuracy
};

/// J(tau) = sum_i pi_i (A_i - beta_opt * C_i) with C_i = cum_macs[i] / cum_macs[N].
ObjectiveBreakdown evaluate_objective_detail(const ThresholdVector& tau, const TraceSet& traces,
                                             const ObjectiveConfig& cfg);
double evaluate_objective(const ThresholdVector& tau, const TraceSet& traces, const ObjectiveConfig& cfg);

/// Default quantile levels 0.1, 0.2, ..., 0.9.
std::vector<double> default_quantiles();

/// Type-7 empirical quantile of unsorted data.
double quantile(std::vector<double> values, double q);

/// Sorted, de-duplicated per-exit quantile candidates for exits 1..N-1.
std::vector<std::vector<double>> quantile_candidates(const TraceSet& traces, const std::vector<double>& quantiles);

struct GridSearchOptions {
    std::uint64_t max_combinations = 1'000'000;
    int jobs = 1;
};

struct GridResult {
    ThresholdVector thresholds;
    double objective = 0;
    std::uint64_t evaluated = 0;
};

/// Exhaustive search over the candidate grid (lists are sorted and
/// de-duplicated first). Ties go to the lexicographically smallest vector.
GridResult grid_search(std::vector<std::vector<double>> candidates, const TraceSet& traces,
                       const ObjectiveConfig& cfg, const GridSearchOptions& opts = {});

} // namespace dart
