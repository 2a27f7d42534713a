#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dart/error.hpp"

namespace dart {

/// Per-exit cumulative costs of a multi-exit model. Exits are 1-based in
/// the domain but stored 0-based here.
struct ExitProfile {
    std::string model_name;
    std::string dataset_name;
    int num_exits = 1;
    int num_classes = 2;
    Eigen::VectorXd cum_macs;
    Eigen::VectorXd cum_time_ms;
    Eigen::VectorXd cum_energy_mj;

    void validate() const;

    /// cum_macs normalized by the final exit's cumulative MACs.
    Eigen::VectorXd normalized_cost() const { return cum_macs / cum_macs(num_exits - 1); }

    bool operator==(const ExitProfile&) const;
};

struct SampleRecord {
    std::string id;
    std::optional<int> label;
    Eigen::VectorXd confidences;
    Eigen::VectorXi predictions;
    std::optional<double> difficulty;
    std::optional<std::string> image;

    bool correct_at(int exit) const { return label && predictions(exit) == *label; }

    bool operator==(const SampleRecord&) const;
};

struct TraceSet {
    ExitProfile profile;
    std::vector<SampleRecord> samples;

    int num_exits() const { return profile.num_exits; }
    bool all_labeled() const;

    /// Checks every sample against the profile and id uniqueness.
    void validate() const;

    bool operator==(const TraceSet&) const = default;
};

/// Parses the JSON-lines interchange format. Errors carry the 1-based line.
TraceSet read_trace(std::istream& in);
TraceSet read_trace_file(const std::string& path);

/// Writes the canonical JSON-lines form; absent optional fields are omitted.
void write_trace(const TraceSet& t, std::ostream& out);

struct SynthConfig {
    int num_exits = 3;
    int num_samples = 1000;
    int num_classes = 10;
    std::uint64_t seed = 0;
    /// Added to the Uniform(0,1) difficulty draw of each class before clamping.
    std::map<int, double> class_offset;
    double base = 0.0;
    double gain = 4.0;
    double difficulty_slope = 2.0;
    double noise_sigma = 0.3;
    double total_macs = 1.0e8;
    double total_time_ms = 1.0;
    double total_energy_mj = 50.0;
    std::string model_name = "synthetic";
    std::string dataset_name = "synthetic";
};

/// Draws a calibrated trace: the prediction at each exit is correct with
/// probability equal to its confidence.
TraceSet synth_trace(const SynthConfig& cfg);

} // namespace dart
