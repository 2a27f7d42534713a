#include "dart/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dart/error.hpp"
#include "json.hpp"

namespace dart {
namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw Error(std::string(what) + " must be positive");
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string full(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

RunReport published_report(const PublishedResult& r) {
    RunReport rep;
    rep.accuracy = r.accuracy;
    rep.mean_time_ms = r.time_ms;
    rep.mean_energy_mj = r.energy_mj;
    rep.mean_power_w = power(r.energy_mj, r.time_ms);
    rep.mean_difficulty = r.alpha;
    return rep;
}

} // namespace

double speedup(double t_static_ms, double t_ms) {
    require_positive(t_static_ms, "static time");
    require_positive(t_ms, "time");
    return t_static_ms / t_ms;
}

double power(double energy_mj, double time_ms) {
    require_positive(time_ms, "time");
    if (!(energy_mj >= 0.0))
        throw Error("energy must be non-negative");
    return energy_mj / time_ms;
}

double power_efficiency(double e_static_mj, double e_mj) {
    require_positive(e_static_mj, "static energy");
    require_positive(e_mj, "energy");
    return e_static_mj / e_mj;
}

double daes(double accuracy, double speedup, double power_eff, double alpha) {
    if (!(accuracy > 0.0 && accuracy <= 1.0))
        throw Error("accuracy must be a fraction in (0,1]");
    require_positive(speedup, "speedup");
    require_positive(power_eff, "power efficiency");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw Error("difficulty must lie in [0,1]");
    return accuracy * speedup * power_eff / (1.0 + alpha);
}

RunReport aggregate(std::span<const ExitOutcome> outcomes) {
    if (outcomes.empty())
        throw Error("cannot aggregate an empty outcome set");
    RunReport r;
    const int n = outcomes.front().num_exits;
    r.exit_histogram = Eigen::VectorXd::Zero(n);
    // Costs are accumulated as offsets from the first outcome so that a run
    // where every sample takes the same exit reports that exit's cost exactly.
    const auto& first = outcomes.front();
    double hits = 0;
    for (const auto& o : outcomes) {
        if (o.num_exits != n || o.exit < 0 || o.exit >= n)
            throw Error("outcomes disagree on the number of exits");
        r.mean_time_ms += o.time_ms - first.time_ms;
        r.mean_energy_mj += o.energy_mj - first.energy_mj;
        r.mean_macs += o.macs - first.macs;
        r.mean_difficulty += o.alpha;
        r.overhead_ms += o.overhead_ms;
        r.exit_histogram(o.exit) += 1;
        if (o.correct) {
            ++r.labeled;
            hits += *o.correct ? 1 : 0;
        }
    }
    const double m = static_cast<double>(outcomes.size());
    r.samples = outcomes.size();
    r.mean_time_ms = first.time_ms + r.mean_time_ms / m;
    r.mean_energy_mj = first.energy_mj + r.mean_energy_mj / m;
    r.mean_macs = first.macs + r.mean_macs / m;
    r.mean_difficulty /= m;
    r.overhead_ms /= m;
    r.exit_histogram /= m;
    r.accuracy = r.labeled > 0 ? hits / static_cast<double>(r.labeled) : 0.0;
    r.mean_power_w = power(r.mean_energy_mj, r.mean_time_ms);
    return r;
}

Comparison compare(const RunReport& baseline, const RunReport& candidate, std::optional<double> alpha) {
    Comparison c;
    c.baseline = baseline;
    c.candidate = candidate;
    c.speedup = speedup(baseline.mean_time_ms, candidate.mean_time_ms);
    c.power_efficiency = power_efficiency(baseline.mean_energy_mj, candidate.mean_energy_mj);
    c.alpha = alpha.value_or(candidate.mean_difficulty);
    c.daes_baseline = daes(baseline.accuracy, 1.0, 1.0, c.alpha);
    c.daes_candidate = daes(candidate.accuracy, c.speedup, c.power_efficiency, c.alpha);
    return c;
}

std::vector<PublishedResult> read_published_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    bool found = false;
    while (!found && std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        found = !line.empty() && line.front() != '#';
    }
    if (!found)
        throw Error("empty results file");
    const auto header = split_csv(line);
    const std::vector<std::string> expected{"model", "method", "accuracy", "time_ms", "energy_mj", "alpha"};
    if (header != expected)
        throw Error("results header must be model,method,accuracy,time_ms,energy_mj,alpha");
    std::vector<PublishedResult> out;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        const auto cells = split_csv(line);
        if (cells.size() != expected.size())
            throw Error("line " + std::to_string(lineno) + ": expected 6 columns");
        try {
            out.push_back({cells[0], cells[1], std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4]),
                           std::stod(cells[5])});
        } catch (const std::logic_error&) {
            throw Error("line " + std::to_string(lineno) + ": malformed number");
        }
    }
    return out;
}

std::vector<ReportRow> evaluate_published(const std::vector<PublishedResult>& results) {
    std::map<std::string, const PublishedResult*> baseline;
    for (const auto& r : results) {
        auto [it, fresh] = baseline.try_emplace(r.model, &r);
        if (!fresh && r.method == "Static" && it->second->method != "Static")
            it->second = &r;
    }
    std::vector<ReportRow> rows;
    for (const auto& r : results) {
        const auto base = published_report(*baseline.at(r.model));
        const auto cmp = compare(base, published_report(r), r.alpha);
        rows.push_back({r.model, r.method, cmp.candidate, cmp.speedup, cmp.power_efficiency, cmp.daes_candidate, r.alpha});
    }
    return rows;
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "table")
        return ReportFormat::Table;
    if (name == "csv")
        return ReportFormat::Csv;
    if (name == "json")
        return ReportFormat::Json;
    throw Error("unknown report format '" + name + "'");
}

void render_report(const std::vector<ReportRow>& rows, ReportFormat format, std::ostream& out) {
    switch (format) {
    case ReportFormat::Csv: {
        out << "model,method,accuracy,time_ms,energy_mj,power_w,speedup,power_eff,daes,mean_alpha\n";
        auto opt = [](const std::optional<double>& v) { return v ? full(*v) : std::string(); };
        for (const auto& r : rows)
            out << r.model << ',' << r.method << ',' << full(r.report.accuracy) << ',' << full(r.report.mean_time_ms)
                << ',' << full(r.report.mean_energy_mj) << ',' << full(r.report.mean_power_w) << ','
                << opt(r.speedup) << ',' << opt(r.power_efficiency) << ',' << opt(r.daes) << ',' << full(r.alpha)
                << '\n';
        break;
    }
    case ReportFormat::Json: {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            nlohmann::ordered_json j;
            j["model"] = r.model;
            j["method"] = r.method;
            j["accuracy"] = r.report.accuracy;
            j["time_ms"] = r.report.mean_time_ms;
            j["energy_mj"] = r.report.mean_energy_mj;
            j["macs"] = r.report.mean_macs;
            j["power_w"] = r.report.mean_power_w;
            j["exit_histogram"] = std::vector<double>(r.report.exit_histogram.data(),
                                                      r.report.exit_histogram.data() + r.report.exit_histogram.size());
            j["mean_alpha"] = r.alpha;
            j["overhead_ms"] = r.report.overhead_ms;
            j["samples"] = r.report.samples;
            j["speedup"] = r.speedup ? nlohmann::ordered_json(*r.speedup) : nullptr;
            j["power_eff"] = r.power_efficiency ? nlohmann::ordered_json(*r.power_efficiency) : nullptr;
            j["daes"] = r.daes ? nlohmann::ordered_json(*r.daes) : nullptr;
            arr.push_back(std::move(j));
        }
        out << arr.dump(2) << '\n';
        break;
    }
    case ReportFormat::Table: {
        std::size_t width = 14;
        for (const auto& r : rows)
            width = std::max(width, r.model.size() + 2);
        const auto w = static_cast<int>(width);
        out << std::left << std::setw(w) << "Architecture" << std::setw(12) << "Method" << std::right
            << std::setw(9) << "Acc.(%)" << std::setw(10) << "Time(ms)" << std::setw(12) << "Energy(mJ)"
            << std::setw(10) << "Power(W)" << std::setw(9) << "Speedup" << std::setw(11) << "Power Eff."
            << std::setw(9) << "DAES" << std::setw(7) << "alpha" << '\n';
        std::string last_model;
        for (const auto& r : rows) {
            out << std::left << std::setw(w) << (r.model == last_model ? "" : r.model) << std::setw(12) << r.method
                << std::right << std::setw(9) << fixed(100.0 * r.report.accuracy, 2) << std::setw(10)
                << fixed(r.report.mean_time_ms, 2) << std::setw(12) << fixed(r.report.mean_energy_mj, 2)
                << std::setw(10) << fixed(r.report.mean_power_w, 2) << std::setw(9)
                << (r.speedup ? fixed(*r.speedup, 2) + "x" : "-") << std::setw(11)
                << (r.power_efficiency ? fixed(*r.power_efficiency, 2) : "-") << std::setw(9)
                << (r.daes ? fixed(*r.daes, 3) : "-") << std::setw(7) << fixed(r.alpha, 2) << '\n';
            last_model = r.model;
        }
        break;
    }
    }
    if (!out)
        throw IoError("write error while rendering report");
}

} // namespace dart
