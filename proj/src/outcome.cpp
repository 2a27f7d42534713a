#include "dart/outcome.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "dart/error.hpp"
#include "json.hpp"

namespace dart {

void write_outcomes(const std::vector<ExitOutcome>& outcomes, std::ostream& out) {
    for (const auto& o : outcomes) {
        nlohmann::ordered_json j;
        j["id"] = o.sample_id;
        j["exit"] = o.exit + 1;
        j["num_exits"] = o.num_exits;
        j["pred"] = o.prediction;
        if (o.correct)
            j["correct"] = *o.correct;
        j["thresholds"] = std::vector<double>(o.effective_thresholds.data(),
                                              o.effective_thresholds.data() + o.effective_thresholds.size());
        j["time_ms"] = o.time_ms;
        j["energy_mj"] = o.energy_mj;
        j["macs"] = o.macs;
        j["alpha"] = o.alpha;
        j["overhead_ms"] = o.overhead_ms;
        out << j.dump() << '\n';
    }
    if (!out)
        throw IoError("write error in outcome stream");
}

bool ExitOutcome::operator==(const ExitOutcome& o) const {
    return sample_id == o.sample_id && exit == o.exit && num_exits == o.num_exits && prediction == o.prediction &&
           correct == o.correct && effective_thresholds.size() == o.effective_thresholds.size() &&
           effective_thresholds == o.effective_thresholds && time_ms == o.time_ms && energy_mj == o.energy_mj &&
           macs == o.macs && alpha == o.alpha && overhead_ms == o.overhead_ms;
}

std::vector<ExitOutcome> read_outcomes(std::istream& in) {
    std::vector<ExitOutcome> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ExitOutcome o;
            o.sample_id = j.at("id").get<std::string>();
            o.num_exits = j.at("num_exits").get<int>();
            o.exit = j.at("exit").get<int>() - 1;
            if (o.num_exits < 1 || o.exit < 0 || o.exit >= o.num_exits)
                throw Error("exit index out of range");
            o.prediction = j.at("pred").get<int>();
            if (j.contains("correct"))
                o.correct = j.at("correct").get<bool>();
            const auto tau = j.at("thresholds").get<std::vector<double>>();
            o.effective_thresholds = Eigen::Map<const Eigen::VectorXd>(tau.data(), static_cast<Eigen::Index>(tau.size()));
            o.time_ms = j.at("time_ms").get<double>();
            o.energy_mj = j.at("energy_mj").get<double>();
            o.macs = j.at("macs").get<double>();
            o.alpha = j.value("alpha", 0.0);
            o.overhead_ms = j.value("overhead_ms", 0.0);
            out.push_back(std::move(o));
        } catch (const nlohmann::json::exception& e) {
            throw Error("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<ExitOutcome> read_outcomes_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open outcomes '" + path + "'");
    return read_outcomes(in);
}

} // namespace dart
