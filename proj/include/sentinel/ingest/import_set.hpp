#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sentinel/cmdb/cmdb.hpp"
#include "sentinel/common/json.hpp"
#include "sentinel/sim/types.hpp"

namespace sentinel::ingest {

struct ImportRow {
  std::string staging_table;
  std::uint64_t row_id = 0;
  FieldMap fields;
  std::int64_t received_ms = 0;
};

struct StagedSet {
  std::string table;
  std::vector<ImportRow> rows;

  std::size_t size() const { return rows.size(); }
};

/// Import-set staging area. Row ids are consecutive per staging table across
/// every stage() call.
class StagingArea {
 public:
  /// Throws InvalidArgument for an empty table name.
  StagedSet stage(std::string_view table, std::vector<FieldMap> rows, std::int64_t received_ms = 0);

 private:
  std::map<std::string, std::uint64_t, std::less<>> next_row_id_;
};

enum class TargetKind { CmdbCi, Telemetry };
enum class OnMissing { SkipRow, ErrorRow };

struct Coercion {
  enum class Kind { Identity, ToNumber, FahrenheitToCelsius, Scale, Rename };
  Kind kind = Kind::Identity;
  double factor = 1.0;  // Scale only
};

struct FieldMapping {
  std::string source_field;
  std::string target_field;
  Coercion coercion;
};

struct TransformMap {
  std::string source_table;
  TargetKind target = TargetKind::CmdbCi;
  std::vector<FieldMapping> field_maps;
  std::vector<std::string> coalesce_keys;
  OnMissing on_missing = OnMissing::ErrorRow;
  cmdb::CiClass ci_class = cmdb::CiClass::SensorNode;  // unless a row maps "class"

  /// Throws InvalidArgument: unique target fields, non-empty coalesce keys
  /// drawn from the mapped targets.
  void validate() const;
};

TransformMap transform_map_from_json(const Json& j);
Json to_json(const TransformMap& map);

struct TargetRecord {
  std::uint64_t row_id = 0;
  TargetKind target = TargetKind::CmdbCi;
  FieldMap fields;
  std::vector<std::string> coalesce_keys;
  cmdb::CiClass ci_class = cmdb::CiClass::SensorNode;
  std::size_t dropped_fields = 0;  // unmapped source fields (schema drift)
};

enum class RowErrorCode { MissingCoalesce, CoercionFailed, Rejected };
std::string_view to_string(RowErrorCode code);

struct RowError {
  std::uint64_t row_id = 0;
  RowErrorCode code = RowErrorCode::Rejected;
  std::string reason;
};

using TransformOutput = std::variant<TargetRecord, RowError>;

/// Applies the map to one row. Pure. Throws InvalidArgument if the row does
/// not belong to map.source_table.
TransformOutput transform(const TransformMap& map, const ImportRow& row);

std::optional<Scalar> coerce(const Scalar& value, const Coercion& coercion);

struct ImportResult {
  std::uint64_t inserted = 0;
  std::uint64_t updated = 0;
  std::uint64_t skipped = 0;
  std::uint64_t errored = 0;
  std::uint64_t unchanged = 0;       // subset of updated: matched, nothing to write
  std::uint64_t dropped_fields = 0;  // drift metric
  std::vector<RowError> row_errors;

  std::uint64_t total() const { return inserted + updated + skipped + errored; }
};

Json to_json(const ImportResult& r);

/// Upserts CMDB-target records by coalesce key. Each row applies fully or
/// not at all; a rejected row is counted as errored and leaves the CMDB as
/// it was.
ImportResult reconcile(std::span<const TargetRecord> records, cmdb::Cmdb& db);

cmdb::CiDraft to_ci_draft(const TargetRecord& record);
/// Throws InvalidArgument if source_id or value is missing or mistyped.
sim::TelemetryRecord to_telemetry(const TargetRecord& record, std::int64_t arrival_ms);

struct ImportOutcome {
  ImportResult result;
  std::vector<TargetRecord> accepted;  // records that reached the target
};

/// transform + reconcile over a staged set. Telemetry-target records are
/// validated and returned in `accepted` for the caller to feed onwards.
ImportOutcome run_import(const TransformMap& map, const StagedSet& staged, cmdb::Cmdb& db);

Json to_json(const TargetRecord& record);
TargetRecord target_record_from_json(const Json& j);

}  // namespace sentinel::ingest
