#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

namespace sentinel {

// nlohmann::json keeps object keys in a std::map, so dump() is already
// field-name sorted. Every digest in the system is taken over dump() output.
using Json = nlohmann::json;

inline std::string canonical(const Json& value) { return value.dump(); }

/// Rounds to a fixed grid so floating output does not depend on the last ulp.
double quantize(double value, double step = 1e-6);

/// Flat scalar carried by import rows and CI attributes.
using Scalar = std::variant<bool, double, std::string>;
using FieldMap = std::map<std::string, Scalar>;

Json scalar_to_json(const Scalar& value);
/// Returns nullopt for objects, arrays and null.
std::optional<Scalar> scalar_from_json(const Json& value);
std::string scalar_to_string(const Scalar& value);

Json fields_to_json(const FieldMap& fields);
FieldMap fields_from_json(const Json& object);

/// "INC" + 7-digit zero-padded counter and friends.
std::string format_reference(std::string_view prefix, std::uint64_t number);

}  // namespace sentinel
