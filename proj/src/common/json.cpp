#include "sentinel/common/json.hpp"

#include <cmath>
#include <cstdio>

namespace sentinel {

double quantize(double value, double step) {
  double q = std::round(value / step) * step;
  // Avoid emitting "-0.0".
  return q == 0.0 ? 0.0 : q;
}

Json scalar_to_json(const Scalar& value) {
  return std::visit([](const auto& v) { return Json(v); }, value);
}

std::optional<Scalar> scalar_from_json(const Json& value) {
  if (value.is_boolean()) return Scalar{value.get<bool>()};
  if (value.is_number()) return Scalar{value.get<double>()};
  if (value.is_string()) return Scalar{value.get<std::string>()};
  return std::nullopt;
}

std::string scalar_to_string(const Scalar& value) {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return scalar_to_json(value).dump();
}

Json fields_to_json(const FieldMap& fields) {
  Json out = Json::object();
  for (const auto& [name, value] : fields) out[name] = scalar_to_json(value);
  return out;
}

FieldMap fields_from_json(const Json& object) {
  FieldMap out;
  for (const auto& [name, value] : object.items()) {
    if (auto s = scalar_from_json(value)) out.emplace(name, std::move(*s));
  }
  return out;
}

std::string format_reference(std::string_view prefix, std::uint64_t number) {
  char digits[32];
  std::snprintf(digits, sizeof digits, "%07llu",
                static_cast<unsigned long long>(number));
  return std::string(prefix) + digits;
}

}  // namespace sentinel
