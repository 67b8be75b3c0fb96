#include "sentinel/ingest/import_set.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "sentinel/common/error.hpp"

namespace sentinel::ingest {

StagedSet StagingArea::stage(std::string_view table, std::vector<FieldMap> rows,
                             std::int64_t received_ms) {
  if (table.empty()) throw Error(ErrorCode::InvalidArgument, "staging table name is empty");
  auto it = next_row_id_.find(table);
  if (it == next_row_id_.end()) it = next_row_id_.emplace(std::string(table), 1).first;
  StagedSet set{std::string(table), {}};
  set.rows.reserve(rows.size());
  for (auto& fields : rows) {
    set.rows.push_back({set.table, it->second++, std::move(fields), received_ms});
  }
  return set;
}

namespace {

std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<double> as_number(const Scalar& value) {
  if (const auto* d = std::get_if<double>(&value)) {
    return std::isfinite(*d) ? std::optional<double>(*d) : std::nullopt;
  }
  if (const auto* s = std::get_if<std::string>(&value)) return parse_number(*s);
  return std::nullopt;
}

std::string_view coercion_name(Coercion::Kind k) {
  switch (k) {
    case Coercion::Kind::Identity: return "identity";
    case Coercion::Kind::ToNumber: return "to_number";
    case Coercion::Kind::FahrenheitToCelsius: return "f_to_c";
    case Coercion::Kind::Scale: return "scale";
    case Coercion::Kind::Rename: return "rename";
  }
  return "identity";
}

}  // namespace

std::string_view to_string(RowErrorCode code) {
  switch (code) {
    case RowErrorCode::MissingCoalesce: return "MissingCoalesce";
    case RowErrorCode::CoercionFailed: return "CoercionFailed";
    case RowErrorCode::Rejected: return "Rejected";
  }
  return "Rejected";
}

std::optional<Scalar> coerce(const Scalar& value, const Coercion& c) {
  switch (c.kind) {
    case Coercion::Kind::Identity:
    case Coercion::Kind::Rename:
      return value;
    case Coercion::Kind::ToNumber:
      if (auto v = as_number(value)) return Scalar{*v};
      return std::nullopt;
    case Coercion::Kind::FahrenheitToCelsius:
      if (auto v = as_number(value)) return Scalar{(*v - 32.0) * 5.0 / 9.0};
      return std::nullopt;
    case Coercion::Kind::Scale:
      if (auto v = as_number(value)) return Scalar{*v * c.factor};
      return std::nullopt;
  }
  return std::nullopt;
}

void TransformMap::validate() const {
  auto fail = [this](const std::string& why) {
    throw Error(ErrorCode::InvalidArgument, "transform map for '" + source_table + "': " + why);
  };
  if (source_table.empty()) fail("source_table is empty");
  if (field_maps.empty()) fail("no field maps");
  std::set<std::string> targets;
  for (const auto& fm : field_maps) {
    if (fm.source_field.empty() || fm.target_field.empty()) fail("field map with an empty name");
    if (!targets.insert(fm.target_field).second) fail("target field '" + fm.target_field + "' mapped twice");
    if (fm.coercion.kind == Coercion::Kind::Scale && !std::isfinite(fm.coercion.factor)) {
      fail("scale factor must be finite");
    }
  }
  if (coalesce_keys.empty()) fail("coalesce_keys must not be empty");
  for (const auto& k : coalesce_keys) {
    if (!targets.count(k)) fail("coalesce key '" + k + "' is not a mapped target field");
  }
}

TransformMap transform_map_from_json(const Json& j) {
  TransformMap m;
  m.source_table = j.at("source_table").get<std::string>();
  const std::string target = j.value("target", std::string{"cmdb_ci"});
  if (target == "cmdb_ci") {
    m.target = TargetKind::CmdbCi;
  } else if (target == "telemetry") {
    m.target = TargetKind::Telemetry;
  } else {
    throw Error(ErrorCode::InvalidArgument, "target must be cmdb_ci or telemetry, got '" + target + "'");
  }
  const std::string on_missing = j.value("on_missing", std::string{"error_row"});
  if (on_missing == "error_row") {
    m.on_missing = OnMissing::ErrorRow;
  } else if (on_missing == "skip_row") {
    m.on_missing = OnMissing::SkipRow;
  } else {
    throw Error(ErrorCode::InvalidArgument, "on_missing must be skip_row or error_row");
  }
  if (j.contains("ci_class")) {
    const auto c = cmdb::parse_ci_class(j.at("ci_class").get<std::string>());
    if (!c) throw Error(ErrorCode::InvalidArgument, "unknown ci_class");
    m.ci_class = *c;
  }
  for (const auto& f : j.at("field_maps")) {
    FieldMapping fm;
    fm.source_field = f.at("source").get<std::string>();
    fm.target_field = f.value("target", fm.source_field);
    const std::string c = f.value("coercion", std::string{"identity"});
    if (c == "identity") {
      fm.coercion.kind = Coercion::Kind::Identity;
    } else if (c == "to_number") {
      fm.coercion.kind = Coercion::Kind::ToNumber;
    } else if (c == "f_to_c") {
      fm.coercion.kind = Coercion::Kind::FahrenheitToCelsius;
    } else if (c == "scale") {
      fm.coercion.kind = Coercion::Kind::Scale;
      fm.coercion.factor = f.at("factor").get<double>();
    } else if (c == "rename") {
      fm.coercion.kind = Coercion::Kind::Rename;
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown coercion '" + c + "'");
    }
    m.field_maps.push_back(std::move(fm));
  }
  m.coalesce_keys = j.at("coalesce_keys").get<std::vector<std::string>>();
  m.validate();
  return m;
}

Json to_json(const TransformMap& m) {
  Json fms = Json::array();
  for (const auto& fm : m.field_maps) {
    Json f = {{"source", fm.source_field},
              {"target", fm.target_field},
              {"coercion", coercion_name(fm.coercion.kind)}};
    if (fm.coercion.kind == Coercion::Kind::Scale) f["factor"] = fm.coercion.factor;
    fms.push_back(std::move(f));
  }
  return {{"source_table", m.source_table},
          {"target", m.target == TargetKind::CmdbCi ? "cmdb_ci" : "telemetry"},
          {"on_missing", m.on_missing == OnMissing::ErrorRow ? "error_row" : "skip_row"},
          {"ci_class", cmdb::to_string(m.ci_class)},
          {"coalesce_keys", m.coalesce_keys},
          {"field_maps", fms}};
}

TransformOutput transform(const TransformMap& map, const ImportRow& row) {
  if (row.staging_table != map.source_table) {
    throw Error(ErrorCode::InvalidArgument,
                "row from '" + row.staging_table + "' given to the map for '" + map.source_table + "'");
  }
  TargetRecord out;
  out.row_id = row.row_id;
  out.target = map.target;
  out.coalesce_keys = map.coalesce_keys;
  out.ci_class = map.ci_class;

  std::set<std::string_view> used;
  for (const auto& fm : map.field_maps) {
    const auto it = row.fields.find(fm.source_field);
    const bool is_key = std::find(map.coalesce_keys.begin(), map.coalesce_keys.end(), fm.target_field) !=
                        map.coalesce_keys.end();
    if (it == row.fields.end()) {
      if (is_key) {
        return RowError{row.row_id, RowErrorCode::MissingCoalesce,
                        "coalesce field '" + fm.source_field + "' missing"};
      }
      continue;
    }
    used.insert(fm.source_field);
    auto value = coerce(it->second, fm.coercion);
    if (!value) {
      return RowError{row.row_id, RowErrorCode::CoercionFailed,
                      "cannot apply " + std::string(coercion_name(fm.coercion.kind)) + " to '" +
                          fm.source_field + "' = " + scalar_to_json(it->second).dump()};
    }
    out.fields.emplace(fm.target_field, std::move(*value));
  }
  for (const auto& [name, _] : row.fields) {
    if (!used.count(name)) ++out.dropped_fields;
  }
  return out;
}

cmdb::CiDraft to_ci_draft(const TargetRecord& record) {
  cmdb::CiDraft draft;
  draft.ci_class = record.ci_class;
  draft.identity_fields = record.coalesce_keys;
  for (const auto& [name, value] : record.fields) {
    if (name == "class") {
      const auto c = cmdb::parse_ci_class(scalar_to_string(value));
      if (!c) throw Error(ErrorCode::InvalidClass, "unknown class " + scalar_to_string(value));
      draft.ci_class = *c;
    } else if (name == "operational_status") {
      const auto s = cmdb::parse_operational_status(scalar_to_string(value));
      if (!s) throw Error(ErrorCode::InvalidArgument, "unknown operational_status " + scalar_to_string(value));
      draft.operational_status = *s;
    } else {
      draft.attributes.emplace(name, value);
    }
  }
  return draft;
}

sim::TelemetryRecord to_telemetry(const TargetRecord& record, std::int64_t arrival_ms) {
  sim::TelemetryRecord t;
  const auto src = record.fields.find("source_id");
  const auto val = record.fields.find("value");
  if (src == record.fields.end() || !std::holds_alternative<std::string>(src->second)) {
    throw Error(ErrorCode::InvalidArgument, "telemetry needs a string source_id");
  }
  if (val == record.fields.end() || !std::holds_alternative<double>(val->second)) {
    throw Error(ErrorCode::InvalidArgument, "telemetry needs a numeric value");
  }
  t.source_id = std::get<std::string>(src->second);
  t.value = std::get<double>(val->second);
  t.emitted_ms = arrival_ms;
  t.sink_arrival_ms = arrival_ms;
  if (const auto k = record.fields.find("sensor_kind"); k != record.fields.end()) {
    const auto kind = sim::parse_sensor_kind(scalar_to_string(k->second));
    if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown sensor_kind " + scalar_to_string(k->second));
    t.sensor_kind = *kind;
  }
  if (const auto c = record.fields.find("checksum_ok"); c != record.fields.end()) {
    if (!std::holds_alternative<bool>(c->second)) {
      throw Error(ErrorCode::InvalidArgument, "checksum_ok must be boolean");
    }
    t.checksum_ok = std::get<bool>(c->second);
  }
  return t;
}

ImportResult reconcile(std::span<const TargetRecord> records, cmdb::Cmdb& db) {
  ImportResult result;
  for (const auto& rec : records) {
    result.dropped_fields += rec.dropped_fields;
    try {
      const auto draft = to_ci_draft(rec);
      switch (db.upsert_ci(draft).outcome) {
        case cmdb::UpsertOutcome::Inserted: ++result.inserted; break;
        case cmdb::UpsertOutcome::Updated: ++result.updated; break;
        case cmdb::UpsertOutcome::Unchanged:
          ++result.updated;
          ++result.unchanged;
          break;
      }
    } catch (const Error& e) {
      ++result.errored;
      result.row_errors.push_back({rec.row_id, RowErrorCode::Rejected, e.what()});
    }
  }
  return result;
}

ImportOutcome run_import(const TransformMap& map, const StagedSet& staged, cmdb::Cmdb& db) {
  ImportOutcome out;
  std::vector<TargetRecord> records;
  for (const auto& row : staged.rows) {
    auto t = transform(map, row);
    if (auto* err = std::get_if<RowError>(&t)) {
      if (err->code == RowErrorCode::MissingCoalesce && map.on_missing == OnMissing::SkipRow) {
        ++out.result.skipped;
      } else {
        ++out.result.errored;
        out.result.row_errors.push_back(std::move(*err));
      }
      continue;
    }
    records.push_back(std::get<TargetRecord>(std::move(t)));
  }

  if (map.target == TargetKind::CmdbCi) {
    const ImportResult applied = reconcile(records, db);
    out.result.inserted += applied.inserted;
    out.result.updated += applied.updated;
    out.result.unchanged += applied.unchanged;
    out.result.errored += applied.errored;
    out.result.dropped_fields += applied.dropped_fields;
    for (const auto& e : applied.row_errors) out.result.row_errors.push_back(e);
    std::set<std::uint64_t> failed;
    for (const auto& e : applied.row_errors) failed.insert(e.row_id);
    for (auto& r : records) {
      if (!failed.count(r.row_id)) out.accepted.push_back(std::move(r));
    }
  } else {
    for (auto& r : records) {
      out.result.dropped_fields += r.dropped_fields;
      try {
        (void)to_telemetry(r, 0);
        ++out.result.inserted;
        out.accepted.push_back(std::move(r));
      } catch (const Error& e) {
        ++out.result.errored;
        out.result.row_errors.push_back({r.row_id, RowErrorCode::Rejected, e.what()});
      }
    }
  }
  std::sort(out.result.row_errors.begin(), out.result.row_errors.end(),
            [](const RowError& a, const RowError& b) { return a.row_id < b.row_id; });
  return out;
}

Json to_json(const ImportResult& r) {
  Json errors = Json::array();
  for (const auto& e : r.row_errors) {
    errors.push_back({{"row_id", e.row_id}, {"code", to_string(e.code)}, {"reason", e.reason}});
  }
  return {{"inserted", r.inserted},
          {"updated", r.updated},
          {"skipped", r.skipped},
          {"errored", r.errored},
          {"unchanged", r.unchanged},
          {"dropped_fields", r.dropped_fields},
          {"row_errors", errors}};
}

Json to_json(const TargetRecord& r) {
  return {{"row_id", r.row_id},
          {"target", r.target == TargetKind::CmdbCi ? "cmdb_ci" : "telemetry"},
          {"fields", fields_to_json(r.fields)},
          {"coalesce_keys", r.coalesce_keys},
          {"ci_class", cmdb::to_string(r.ci_class)},
          {"dropped_fields", r.dropped_fields}};
}

TargetRecord target_record_from_json(const Json& j) {
  TargetRecord r;
  r.row_id = j.at("row_id").get<std::uint64_t>();
  r.target = j.at("target").get<std::string>() == "cmdb_ci" ? TargetKind::CmdbCi : TargetKind::Telemetry;
  r.fields = fields_from_json(j.at("fields"));
  r.coalesce_keys = j.at("coalesce_keys").get<std::vector<std::string>>();
  r.ci_class = cmdb::parse_ci_class(j.at("ci_class").get<std::string>()).value();
  r.dropped_fields = j.value("dropped_fields", std::size_t{0});
  return r;
}

}  // namespace sentinel::ingest
