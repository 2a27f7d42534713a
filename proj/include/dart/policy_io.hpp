#pragma once

#include <iosfwd>
#include <string>

#include "dart/engine.hpp"
#include "json.hpp"

namespace dart {

struct PolicyFile {
    ExitPolicy policy;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

/// {"thresholds":[..],"beta_diff":f,"coefficients":{"global":[..],"per_class":{"k":[..]}},"meta":{..}}
/// Missing coefficients default to ones and missing beta_diff to 0.3.
PolicyFile read_policy(std::istream& in);
PolicyFile read_policy_file(const std::string& path);
void write_policy(const PolicyFile& p, std::ostream& out);

} // namespace dart
