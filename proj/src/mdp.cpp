#include "dart/mdp.hpp"

#include <cmath>

namespace dart {
namespace {

void check_options(const ValueIterationOptions& o) {
    if (!(o.gamma >= 0.0 && o.gamma <= 1.0))
        throw Error("discount must lie in [0,1]");
    if (!(o.tolerance > 0.0))
        throw Error("tolerance must be positive");
    if (o.max_iter < 1)
        throw Error("max_iter must be >= 1");
}

Eigen::MatrixXd continuation(const MdpModel& mdp, int exit, const Eigen::MatrixXd& next_value, double gamma) {
    Eigen::MatrixXd q(mdp.alpha_bins, mdp.conf_bins);
    for (int a = 0; a < mdp.alpha_bins; ++a)
        q.row(a) = gamma * (mdp.transition[exit][a] * next_value.row(a).transpose()).transpose();
    return q;
}

} // namespace

void MdpModel::validate() const {
    if (num_exits < 1 || alpha_bins < 1 || conf_bins < 1)
        throw Error("MDP dimensions must be positive");
    if (static_cast<int>(exit_reward.size()) != num_exits || static_cast<int>(transition.size()) != num_exits - 1)
        throw Error("MDP tables do not match num_exits");
    for (const auto& r : exit_reward)
        if (r.rows() != alpha_bins || r.cols() != conf_bins)
            throw Error("reward table has wrong shape");
    for (const auto& per_alpha : transition) {
        if (static_cast<int>(per_alpha.size()) != alpha_bins)
            throw Error("transition table has wrong shape");
        for (const auto& p : per_alpha) {
            if (p.rows() != conf_bins || p.cols() != conf_bins)
                throw Error("transition table has wrong shape");
            if ((p.array() < 0).any() || ((p.rowwise().sum().array() - 1.0).abs() > 1e-9).any())
                throw Error("non-stochastic transition row");
        }
    }
}

MdpModel build_mdp(const TraceSet& traces, const ObjectiveConfig& cfg, const MdpOptions& opts) {
    cfg.validate();
    if (opts.alpha_bins < 1 || opts.conf_bins < 1)
        throw Error("bin counts must be >= 1");
    if (traces.samples.empty())
        throw Error("MDP construction needs a non-empty trace");
    if (!traces.all_labeled())
        throw Error("MDP construction needs labels on every sample");

    const int n = traces.num_exits();
    const int ba = opts.alpha_bins;
    const int bc = opts.conf_bins;
    std::vector<Eigen::MatrixXd> visits(n, Eigen::MatrixXd::Zero(ba, bc));
    std::vector<Eigen::MatrixXd> hits(n, Eigen::MatrixXd::Zero(ba, bc));
    std::vector<std::vector<Eigen::MatrixXd>> moves(n - 1, std::vector<Eigen::MatrixXd>(ba, Eigen::MatrixXd::Zero(bc, bc)));
    Eigen::VectorXd alpha_count = Eigen::VectorXd::Zero(ba);

    for (const auto& s : traces.samples) {
        if (!s.difficulty)
            throw Error("sample '" + s.id + "' has no difficulty score");
        const int a = value_bin(*s.difficulty, ba);
        alpha_count(a) += 1;
        for (int i = 0; i < n; ++i) {
            const int c = value_bin(s.confidences(i), bc);
            visits[i](a, c) += 1;
            hits[i](a, c) += s.correct_at(i) ? 1 : 0;
            if (i + 1 < n)
                moves[i][a](c, value_bin(s.confidences(i + 1), bc)) += 1;
        }
    }

    MdpModel mdp;
    mdp.num_exits = n;
    mdp.alpha_bins = ba;
    mdp.conf_bins = bc;
    mdp.alpha_frequency = alpha_count / alpha_count.sum();
    const Eigen::VectorXd cost = traces.profile.normalized_cost();
    for (int i = 0; i < n; ++i) {
        const BoolArray seen = visits[i].array() > 0;
        mdp.supported.push_back(seen);
        const Eigen::MatrixXd acc = (hits[i].array() / visits[i].array().max(1.0)).matrix();
        mdp.exit_reward.push_back(seen.select(acc.array() - cfg.beta_opt * cost(i), 0.0).matrix());
    }
    for (int i = 0; i + 1 < n; ++i) {
        std::vector<Eigen::MatrixXd> per_alpha;
        for (int a = 0; a < ba; ++a) {
            Eigen::MatrixXd p = moves[i][a];
            for (int c = 0; c < bc; ++c) {
                const double row = p.row(c).sum();
                if (row > 0)
                    p.row(c) /= row;
                else
                    p.row(c).setConstant(1.0 / bc);
            }
            per_alpha.push_back(std::move(p));
        }
        mdp.transition.push_back(std::move(per_alpha));
    }
    return mdp;
}

QTable value_iterate(const MdpModel& mdp, const ValueIterationOptions& opts) {
    check_options(opts);
    mdp.validate();
    const int n = mdp.num_exits;
    QTable q;
    q.q_exit = mdp.exit_reward;
    q.q_continue.resize(n - 1);
    q.value.resize(n);
    q.value[n - 1] = mdp.exit_reward[n - 1];
    for (int i = n - 2; i >= 0; --i) {
        q.q_continue[i] = continuation(mdp, i, q.value[i + 1], opts.gamma);
        q.value[i] = q.q_exit[i].cwiseMax(q.q_continue[i]);
    }
    q.iterations = 1;
    return q;
}

QTable fixed_point_iterate(const MdpModel& mdp, const ValueIterationOptions& opts) {
    check_options(opts);
    mdp.validate();
    const int n = mdp.num_exits;
    QTable q;
    q.q_exit = mdp.exit_reward;
    q.q_continue.assign(n - 1, Eigen::MatrixXd::Zero(mdp.alpha_bins, mdp.conf_bins));
    q.value.assign(n, Eigen::MatrixXd::Zero(mdp.alpha_bins, mdp.conf_bins));
    for (int it = 1; it <= opts.max_iter; ++it) {
        std::vector<Eigen::MatrixXd> next(n);
        double change = 0;
        for (int i = 0; i < n; ++i) {
            if (i + 1 < n) {
                q.q_continue[i] = continuation(mdp, i, q.value[i + 1], opts.gamma);
                next[i] = q.q_exit[i].cwiseMax(q.q_continue[i]);
            } else {
                next[i] = q.q_exit[i];
            }
            change = std::max(change, (next[i] - q.value[i]).cwiseAbs().maxCoeff());
        }
        q.value = std::move(next);
        q.iterations = it;
        if (change < opts.tolerance)
            break;
    }
    return q;
}

ExtractedPolicy extract_thresholds(const QTable& q, const MdpModel& mdp) {
    mdp.validate();
    const int n = mdp.num_exits;
    if (static_cast<int>(q.q_exit.size()) != n || static_cast<int>(q.q_continue.size()) != n - 1 || q.iterations < 1)
        throw Error("Q-table is missing or does not match the MDP");
    if (mdp.alpha_frequency.size() != mdp.alpha_bins || static_cast<int>(mdp.supported.size()) != n)
        throw Error("MDP lacks alpha-bin frequencies or support masks");

    ExtractedPolicy out;
    out.thresholds = ThresholdVector::Ones(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
        Eigen::VectorXd bin_tau = Eigen::VectorXd::Ones(mdp.alpha_bins);
        Eigen::Array<bool, Eigen::Dynamic, 1> flagged = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(mdp.alpha_bins, false);
        for (int a = 0; a < mdp.alpha_bins; ++a) {
            // Walk down from the top: the threshold opens the highest run of
            // exit-preferred bins; exit-preferred bins below that run are flagged.
            int lowest = -1;
            bool in_run = true;
            for (int c = mdp.conf_bins - 1; c >= 0; --c) {
                if (!mdp.supported[i](a, c))
                    continue;
                const bool exit_preferred = q.q_exit[i](a, c) >= q.q_continue[i](a, c);
                if (in_run && exit_preferred)
                    lowest = c;
                else if (exit_preferred)
                    flagged(a) = true;
                else
                    in_run = false;
            }
            if (lowest >= 0)
                bin_tau(a) = static_cast<double>(lowest) / mdp.conf_bins;
        }
        out.thresholds(i) = mdp.alpha_frequency.dot(bin_tau);
        out.bin_threshold.push_back(std::move(bin_tau));
        out.non_monotone.push_back(std::move(flagged));
    }
    return out;
}

} // namespace dart
