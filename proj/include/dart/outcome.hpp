#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dart {

/// Result of routing one sample. `exit` is 0-based here and 1-based in the
/// JSON-lines stream.
struct ExitOutcome {
    std::string sample_id;
    int exit = 0;
    int num_exits = 1;
    int prediction = 0;
    std::optional<bool> correct;
    Eigen::VectorXd effective_thresholds;
    double time_ms = 0;
    double energy_mj = 0;
    double macs = 0;
    double alpha = 0;
    double overhead_ms = 0;

    bool operator==(const ExitOutcome&) const;
};

void write_outcomes(const std::vector<ExitOutcome>& outcomes, std::ostream& out);
std::vector<ExitOutcome> read_outcomes(std::istream& in);
std::vector<ExitOutcome> read_outcomes_file(const std::string& path);

} // namespace dart
