#include "dart/trace.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "json.hpp"

#include "dart/random.hpp"

namespace dart {
namespace {

using ordered_json = nlohmann::ordered_json;

template <typename V>
bool same_vector(const V& a, const V& b) {
    return a.size() == b.size() && (a.size() == 0 || a == b);
}

Eigen::VectorXd to_vector(const nlohmann::json& j, const char* key) {
    const auto& arr = j.at(key);
    if (!arr.is_array())
        throw Error(std::string("'") + key + "' must be an array");
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number())
            throw Error(std::string("'") + key + "' must contain numbers");
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    return v;
}

Eigen::VectorXi to_int_vector(const nlohmann::json& j, const char* key) {
    const auto& arr = j.at(key);
    if (!arr.is_array())
        throw Error(std::string("'") + key + "' must be an array");
    Eigen::VectorXi v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number_integer())
            throw Error(std::string("'") + key + "' must contain integers");
        v(static_cast<Eigen::Index>(i)) = arr[i].get<int>();
    }
    return v;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void check_increasing(const Eigen::VectorXd& v, int n, const char* name) {
    if (v.size() != n)
        throw Error(std::string(name) + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(v(i)) || v(i) <= 0)
            throw Error(std::string(name) + " must be positive");
        if (i > 0 && v(i) <= v(i - 1))
            throw Error(std::string(name) + " must be strictly increasing");
    }
}

void validate_sample(const SampleRecord& s, const ExitProfile& p) {
    if (s.confidences.size() != p.num_exits || s.predictions.size() != p.num_exits)
        throw Error("sample '" + s.id + "' has " + std::to_string(s.confidences.size()) + " confidences and " +
                    std::to_string(s.predictions.size()) + " predictions, expected " + std::to_string(p.num_exits));
    for (int i = 0; i < p.num_exits; ++i) {
        if (!(s.confidences(i) >= 0.0 && s.confidences(i) <= 1.0))
            throw Error("sample '" + s.id + "' confidence out of range [0,1]");
        if (s.predictions(i) < 0 || s.predictions(i) >= p.num_classes)
            throw Error("sample '" + s.id + "' prediction out of range");
    }
    if (s.label && (*s.label < 0 || *s.label >= p.num_classes))
        throw Error("sample '" + s.id + "' label out of range");
    if (s.difficulty && !(*s.difficulty >= 0.0 && *s.difficulty <= 1.0))
        throw Error("sample '" + s.id + "' difficulty out of range [0,1]");
}

ExitProfile parse_profile(const nlohmann::json& j) {
    if (!j.is_object() || j.value("type", "") != "profile")
        throw Error("first line must be a profile header");
    ExitProfile p;
    p.model_name = j.at("model").get<std::string>();
    p.dataset_name = j.at("dataset").get<std::string>();
    p.num_exits = j.at("num_exits").get<int>();
    p.num_classes = j.at("num_classes").get<int>();
    p.cum_macs = to_vector(j, "cum_macs");
    p.cum_time_ms = to_vector(j, "cum_time_ms");
    p.cum_energy_mj = to_vector(j, "cum_energy_mj");
    p.validate();
    return p;
}

SampleRecord parse_sample(const nlohmann::json& j) {
    if (!j.is_object() || j.value("type", "") != "sample")
        throw Error("expected a sample record");
    SampleRecord s;
    s.id = j.at("id").get<std::string>();
    if (j.contains("label"))
        s.label = j.at("label").get<int>();
    s.confidences = to_vector(j, "conf");
    s.predictions = to_int_vector(j, "pred");
    if (j.contains("difficulty"))
        s.difficulty = j.at("difficulty").get<double>();
    if (j.contains("image"))
        s.image = j.at("image").get<std::string>();
    return s;
}

} // namespace

bool ExitProfile::operator==(const ExitProfile& o) const {
    return model_name == o.model_name && dataset_name == o.dataset_name && num_exits == o.num_exits &&
           num_classes == o.num_classes && same_vector(cum_macs, o.cum_macs) &&
           same_vector(cum_time_ms, o.cum_time_ms) && same_vector(cum_energy_mj, o.cum_energy_mj);
}

bool SampleRecord::operator==(const SampleRecord& o) const {
    return id == o.id && label == o.label && same_vector(confidences, o.confidences) &&
           same_vector(predictions, o.predictions) && difficulty == o.difficulty && image == o.image;
}

void ExitProfile::validate() const {
    if (num_exits < 1)
        throw Error("num_exits must be >= 1");
    if (num_classes < 1)
        throw Error("num_classes must be >= 1");
    check_increasing(cum_macs, num_exits, "cum_macs");
    check_increasing(cum_time_ms, num_exits, "cum_time_ms");
    check_increasing(cum_energy_mj, num_exits, "cum_energy_mj");
}

bool TraceSet::all_labeled() const {
    for (const auto& s : samples)
        if (!s.label)
            return false;
    return true;
}

void TraceSet::validate() const {
    profile.validate();
    std::set<std::string> ids;
    for (const auto& s : samples) {
        validate_sample(s, profile);
        if (!ids.insert(s.id).second)
            throw Error("duplicate sample_id '" + s.id + "'");
    }
}

TraceSet read_trace(std::istream& in) {
    TraceSet t;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        try {
            const auto j = nlohmann::json::parse(line);
            if (!have_header) {
                t.profile = parse_profile(j);
                have_header = true;
                continue;
            }
            auto s = parse_sample(j);
            validate_sample(s, t.profile);
            if (!ids.insert(s.id).second)
                throw Error("duplicate sample_id '" + s.id + "'");
            t.samples.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw Error("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (in.bad())
        throw IoError("read error in trace stream");
    if (!have_header)
        throw Error("line 1: missing profile header");
    return t;
}

TraceSet read_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open trace '" + path + "'");
    try {
        return read_trace(in);
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

void write_trace(const TraceSet& t, std::ostream& out) {
    const auto& p = t.profile;
    ordered_json header;
    header["type"] = "profile";
    header["model"] = p.model_name;
    header["dataset"] = p.dataset_name;
    header["num_exits"] = p.num_exits;
    header["num_classes"] = p.num_classes;
    header["cum_macs"] = to_std(p.cum_macs);
    header["cum_time_ms"] = to_std(p.cum_time_ms);
    header["cum_energy_mj"] = to_std(p.cum_energy_mj);
    out << header.dump() << '\n';
    for (const auto& s : t.samples) {
        ordered_json j;
        j["type"] = "sample";
        j["id"] = s.id;
        if (s.label)
            j["label"] = *s.label;
        j["conf"] = to_std(s.confidences);
        j["pred"] = std::vector<int>(s.predictions.data(), s.predictions.data() + s.predictions.size());
        if (s.difficulty)
            j["difficulty"] = *s.difficulty;
        if (s.image)
            j["image"] = *s.image;
        out << j.dump() << '\n';
    }
    if (!out)
        throw IoError("write error in trace stream");
}

TraceSet synth_trace(const SynthConfig& cfg) {
    if (cfg.num_exits < 1)
        throw Error("num_exits must be >= 1");
    if (cfg.num_samples < 1)
        throw Error("num_samples must be >= 1");
    if (cfg.num_classes < 2)
        throw Error("num_classes must be >= 2");
    if (cfg.total_macs <= 0 || cfg.total_time_ms <= 0 || cfg.total_energy_mj <= 0)
        throw Error("cost totals must be positive");

    const int n = cfg.num_exits;
    TraceSet t;
    t.profile.model_name = cfg.model_name;
    t.profile.dataset_name = cfg.dataset_name;
    t.profile.num_exits = n;
    t.profile.num_classes = cfg.num_classes;
    const Eigen::VectorXd frac = Eigen::VectorXd::LinSpaced(n, 1, n) / n;
    t.profile.cum_macs = cfg.total_macs * frac;
    t.profile.cum_time_ms = cfg.total_time_ms * frac;
    t.profile.cum_energy_mj = cfg.total_energy_mj * frac;

    Rng rng(cfg.seed);
    t.samples.reserve(cfg.num_samples);
    for (int m = 0; m < cfg.num_samples; ++m) {
        SampleRecord s;
        s.id = "s" + std::to_string(m);
        const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.num_classes)));
        s.label = label;
        const auto off = cfg.class_offset.find(label);
        const double alpha =
            std::clamp(rng.uniform() + (off == cfg.class_offset.end() ? 0.0 : off->second), 0.0, 1.0);
        s.difficulty = alpha;
        s.confidences.resize(n);
        s.predictions.resize(n);
        for (int i = 0; i < n; ++i) {
            const double z = cfg.base + cfg.gain * (i + 1) / n - cfg.difficulty_slope * alpha +
                             cfg.noise_sigma * rng.normal();
            const double conf = std::clamp(1.0 / (1.0 + std::exp(-z)), 0.0, 1.0);
            s.confidences(i) = conf;
            if (rng.uniform() < conf) {
                s.predictions(i) = label;
            } else {
                const int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.num_classes - 1)));
                s.predictions(i) = other >= label ? other + 1 : other;
            }
        }
        t.samples.push_back(std::move(s));
    }
    return t;
}

} // namespace dart
