#include "dart/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace dart {
namespace {

void require_labels(const TraceSet& traces) {
    if (traces.samples.empty())
        throw Error("objective needs a non-empty trace");
    if (!traces.all_labeled())
        throw Error("objective needs labels on every sample");
}

// Confidences as an M x N matrix plus a correctness mask, so each grid
// point costs one pass over contiguous memory.
struct PackedTrace {
    Eigen::MatrixXd conf;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> correct;
    Eigen::VectorXd cost;

    explicit PackedTrace(const TraceSet& t)
        : conf(t.samples.size(), t.num_exits()), correct(t.samples.size(), t.num_exits()),
          cost(t.profile.normalized_cost()) {
        for (std::size_t m = 0; m < t.samples.size(); ++m) {
            const auto& s = t.samples[m];
            conf.row(static_cast<Eigen::Index>(m)) = s.confidences.transpose();
            for (int i = 0; i < t.num_exits(); ++i)
                correct(static_cast<Eigen::Index>(m), i) = s.correct_at(i);
        }
    }

    double objective(const ThresholdVector& tau, double beta) const {
        const auto n = conf.cols();
        double total = 0;
        for (Eigen::Index m = 0; m < conf.rows(); ++m) {
            Eigen::Index e = 0;
            while (e < n - 1 && !(conf(m, e) > tau(e)))
                ++e;
            total += (correct(m, e) ? 1.0 : 0.0) - beta * cost(e);
        }
        return total / static_cast<double>(conf.rows());
    }
};

} // namespace

int first_exit(const Eigen::Ref<const Eigen::VectorXd>& confidences, const Eigen::Ref<const Eigen::VectorXd>& thresholds) {
    const auto n = confidences.size();
    if (thresholds.size() != n - 1)
        throw Error("threshold vector has length " + std::to_string(thresholds.size()) + ", expected " +
                    std::to_string(n - 1));
    for (Eigen::Index i = 0; i < n - 1; ++i)
        if (confidences(i) > thresholds(i))
            return static_cast<int>(i);
    return static_cast<int>(n - 1);
}

ObjectiveBreakdown evaluate_objective_detail(const ThresholdVector& tau, const TraceSet& traces,
                                             const ObjectiveConfig& cfg) {
    cfg.validate();
    require_labels(traces);
    const int n = traces.num_exits();
    if (tau.size() != n - 1)
        throw Error("threshold vector has length " + std::to_string(tau.size()) + ", expected " + std::to_string(n - 1));

    Eigen::VectorXd exits = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd hits = Eigen::VectorXd::Zero(n);
    for (const auto& s : traces.samples) {
        const int e = first_exit(s.confidences, tau);
        exits(e) += 1;
        hits(e) += s.correct_at(e) ? 1 : 0;
    }
    const double m = static_cast<double>(traces.samples.size());
    ObjectiveBreakdown out;
    out.exit_fraction = exits / m;
    out.exit_accuracy = (exits.array() > 0).select(hits.array() / exits.array().max(1.0), 0.0);
    out.accuracy = hits.sum() / m;
    const Eigen::VectorXd cost = traces.profile.normalized_cost();
    out.value = out.exit_fraction.dot(out.exit_accuracy - cfg.beta_opt * cost);
    return out;
}

double evaluate_objective(const ThresholdVector& tau, const TraceSet& traces, const ObjectiveConfig& cfg) {
    return evaluate_objective_detail(tau, traces, cfg).value;
}

std::vector<double> default_quantiles() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

double quantile(std::vector<double> values, double q) {
    if (values.empty())
        throw Error("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0))
        throw Error("quantile level must lie in [0,1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<std::vector<double>> quantile_candidates(const TraceSet& traces, const std::vector<double>& quantiles) {
    if (traces.samples.empty())
        throw Error("quantile candidates need a non-empty trace");
    if (quantiles.empty())
        throw Error("no quantile levels given");
    for (double q : quantiles)
        if (!(q > 0.0 && q < 1.0))
            throw Error("quantile levels must lie in (0,1)");

    std::vector<std::vector<double>> out;
    for (int i = 0; i + 1 < traces.num_exits(); ++i) {
        std::vector<double> conf;
        conf.reserve(traces.samples.size());
        for (const auto& s : traces.samples)
            conf.push_back(s.confidences(i));
        std::sort(conf.begin(), conf.end());
        std::vector<double> cands;
        for (double q : quantiles)
            cands.push_back(quantile(conf, q));
        std::sort(cands.begin(), cands.end());
        cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
        out.push_back(std::move(cands));
    }
    return out;
}

GridResult grid_search(std::vector<std::vector<double>> candidates, const TraceSet& traces,
                       const ObjectiveConfig& cfg, const GridSearchOptions& opts) {
    cfg.validate();
    for (auto& c : candidates) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
    }
    require_labels(traces);
    const auto dims = candidates.size();
    if (static_cast<int>(dims) != traces.num_exits() - 1)
        throw Error("candidate lists do not match the number of early exits");

    std::uint64_t total = 1;
    for (const auto& c : candidates) {
        if (c.empty())
            throw Error("empty candidate list");
        if (c.size() > opts.max_combinations / total)
            throw Error("candidate grid exceeds the cap of " + std::to_string(opts.max_combinations) +
                        " combinations");
        total *= c.size();
    }

    const PackedTrace packed(traces);
    // Flat index -> threshold vector, first dimension most significant so that
    // increasing index is lexicographic order.
    auto decode = [&](std::uint64_t idx) {
        ThresholdVector tau(static_cast<Eigen::Index>(dims));
        for (auto d = dims; d-- > 0;) {
            const auto k = candidates[d].size();
            tau(static_cast<Eigen::Index>(d)) = candidates[d][idx % k];
            idx /= k;
        }
        return tau;
    };

    struct Best {
        std::uint64_t index = 0;
        double value = -std::numeric_limits<double>::infinity();
    };
    auto scan = [&](std::uint64_t begin, std::uint64_t end) {
        Best best;
        for (auto idx = begin; idx < end; ++idx) {
            const double j = packed.objective(decode(idx), cfg.beta_opt);
            if (j > best.value) {
                best.value = j;
                best.index = idx;
            }
        }
        return best;
    };

    const auto jobs = static_cast<std::uint64_t>(std::clamp(opts.jobs, 1, 64));
    std::vector<Best> partial(std::min<std::uint64_t>(jobs, total));
    if (partial.size() <= 1) {
        partial.assign(1, scan(0, total));
    } else {
        std::vector<std::thread> workers;
        const auto chunk = (total + partial.size() - 1) / partial.size();
        for (std::size_t w = 0; w < partial.size(); ++w) {
            const auto begin = std::min(total, w * chunk);
            const auto end = std::min(total, begin + chunk);
            workers.emplace_back([&, w, begin, end] { partial[w] = scan(begin, end); });
        }
        for (auto& th : workers)
            th.join();
    }
    // Chunks are in index order, so a strict comparison keeps the earliest tie.
    Best best;
    for (const auto& b : partial)
        if (b.value > best.value)
            best = b;

    GridResult result;
    result.thresholds = decode(best.index);
    result.objective = evaluate_objective(result.thresholds, traces, cfg);
    result.evaluated = total;
    return result;
}

} // namespace dart
