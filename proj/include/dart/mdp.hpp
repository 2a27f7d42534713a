#pragma once

#include <Eigen/Dense>

#include <vector>

#include "dart/optimizer.hpp"
#include "dart/trace.hpp"

namespace dart {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Bin index of a value in [0,1] under `bins` uniform bins; 1.0 lands in the last bin.
inline int value_bin(double v, int bins) {
    const int b = static_cast<int>(v * bins);
    return b < 0 ? 0 : (b >= bins ? bins - 1 : b);
}

/// Finite-horizon exit MDP over states (exit, alpha bin, confidence bin).
/// Per-exit tables are alpha_bins x conf_bins. The exit action is terminal
/// with reward `exit_reward`; continue has zero reward and moves to the next
/// exit keeping the alpha bin.
struct MdpModel {
    int num_exits = 1;
    int alpha_bins = 10;
    int conf_bins = 10;
    std::vector<Eigen::MatrixXd> exit_reward;
    /// transition[i][a](c, c') = P(conf bin c' at exit i+1 | alpha bin a, conf bin c at exit i)
    std::vector<std::vector<Eigen::MatrixXd>> transition;
    /// False where no calibration sample visited the state.
    std::vector<BoolArray> supported;
    /// Empirical frequency of each alpha bin.
    Eigen::VectorXd alpha_frequency;

    /// Throws unless dimensions agree and every transition row sums to 1.
    void validate() const;
};

struct MdpOptions {
    int alpha_bins = 10;
    int conf_bins = 10;
};

MdpModel build_mdp(const TraceSet& traces, const ObjectiveConfig& cfg, const MdpOptions& opts = {});

struct QTable {
    std::vector<Eigen::MatrixXd> q_exit;      ///< one table per exit
    std::vector<Eigen::MatrixXd> q_continue;  ///< exits 1..N-1 only
    std::vector<Eigen::MatrixXd> value;       ///< V = max over available actions
    int iterations = 0;
};

struct ValueIterationOptions {
    double gamma = 1.0;
    double tolerance = 1e-9;
    int max_iter = 1000;
};

/// Exact solution by one backward sweep over exit indices.
QTable value_iterate(const MdpModel& mdp, const ValueIterationOptions& opts = {});

/// Synchronous Bellman iteration from V = 0 until the value change drops
/// below the tolerance or max_iter sweeps are done.
QTable fixed_point_iterate(const MdpModel& mdp, const ValueIterationOptions& opts = {});

struct ExtractedPolicy {
    ThresholdVector thresholds;
    /// bin_threshold[i](a): lower edge of the lowest exit-preferred bin, 1.0 if none.
    std::vector<Eigen::VectorXd> bin_threshold;
    /// Set where exit is preferred in some bin but continue in a higher one.
    std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> non_monotone;
};

/// Collapses the (alpha, confidence) policy to one threshold per early exit,
/// weighting per-alpha-bin thresholds by alpha-bin frequency. Unsupported
/// states never lower a threshold.
ExtractedPolicy extract_thresholds(const QTable& q, const MdpModel& mdp);

} // namespace dart
