#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dart/outcome.hpp"

namespace dart {

/// T_static / T_m.
double speedup(double t_static_ms, double t_ms);

/// Average power in watts; mJ / ms = W.
double power(double energy_mj, double time_ms);

/// E_static / E_m.
double power_efficiency(double e_static_mj, double e_mj);

/// accuracy * speedup * power_eff / (1 + alpha), accuracy as a fraction.
double daes(double accuracy, double speedup, double power_eff, double alpha);

struct RunReport {
    double accuracy = 0;
    double mean_time_ms = 0;
    double mean_energy_mj = 0;
    double mean_macs = 0;
    double mean_power_w = 0;
    Eigen::VectorXd exit_histogram;
    double mean_difficulty = 0;
    double overhead_ms = 0;
    std::size_t samples = 0;
    std::size_t labeled = 0;
};

/// Means over outcomes; accuracy counts only outcomes with known correctness.
RunReport aggregate(std::span<const ExitOutcome> outcomes);

struct Comparison {
    RunReport baseline;
    RunReport candidate;
    double speedup = 1;
    double power_efficiency = 1;
    double alpha = 0;
    double daes_baseline = 0;
    double daes_candidate = 0;
};

/// Candidate against a static baseline. `alpha` defaults to the candidate's
/// mean difficulty.
Comparison compare(const RunReport& baseline, const RunReport& candidate, std::optional<double> alpha = {});

/// One line of a results table.
struct ReportRow {
    std::string model;
    std::string method;
    RunReport report;
    std::optional<double> speedup;
    std::optional<double> power_efficiency;
    std::optional<double> daes;
    double alpha = 0;
};

/// A published (accuracy, time, energy) result with its dataset difficulty.
struct PublishedResult {
    std::string model;
    std::string method;
    double accuracy = 0;  ///< fraction
    double time_ms = 0;
    double energy_mj = 0;
    double alpha = 0;
};

/// CSV with header model,method,accuracy,time_ms,energy_mj,alpha; '#' lines
/// are comments.
std::vector<PublishedResult> read_published_csv(std::istream& in);

/// Rows per model compared against that model's "Static" entry, or its
/// first entry when none is named so.
std::vector<ReportRow> evaluate_published(const std::vector<PublishedResult>& results);

enum class ReportFormat { Table, Csv, Json };
ReportFormat parse_report_format(const std::string& name);

/// Table output rounds metrics to 2 decimals and DAES to 3; CSV and JSON keep
/// full precision.
void render_report(const std::vector<ReportRow>& rows, ReportFormat format, std::ostream& out);

} // namespace dart
