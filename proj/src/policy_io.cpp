#include "dart/policy_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace dart {
namespace {

Eigen::VectorXd vec(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> std_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

PolicyFile read_policy(std::istream& in) {
    PolicyFile out;
    try {
        const auto j = nlohmann::json::parse(in);
        auto& p = out.policy;
        p.thresholds = vec(j.at("thresholds"));
        p.beta_diff = j.value("beta_diff", 0.3);
        p.coefficients = CoefficientSet::ones(static_cast<int>(p.thresholds.size()));
        if (j.contains("coefficients")) {
            const auto& c = j.at("coefficients");
            if (c.contains("global"))
                p.coefficients.global = vec(c.at("global"));
            if (c.contains("per_class"))
                for (const auto& [key, value] : c.at("per_class").items())
                    p.coefficients.per_class[std::stoi(key)] = vec(value);
        }
        if (j.contains("meta"))
            out.meta = nlohmann::ordered_json::parse(j.at("meta").dump());
        p.validate(static_cast<int>(p.thresholds.size()) + 1);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed policy: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw Error("malformed policy: per_class keys must be class indices");
    }
    return out;
}

PolicyFile read_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open policy '" + path + "'");
    try {
        return read_policy(in);
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

void write_policy(const PolicyFile& p, std::ostream& out) {
    nlohmann::ordered_json j;
    j["thresholds"] = std_vec(p.policy.thresholds);
    j["beta_diff"] = p.policy.beta_diff;
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    for (const auto& [cls, c] : p.policy.coefficients.per_class)
        per_class[std::to_string(cls)] = std_vec(c);
    j["coefficients"] = {{"global", std_vec(p.policy.coefficients.global)}, {"per_class", per_class}};
    j["meta"] = p.meta;
    out << j.dump(2) << '\n';
    if (!out)
        throw IoError("write error in policy stream");
}

} // namespace dart
