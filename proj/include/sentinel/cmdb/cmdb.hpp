#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sentinel/common/json.hpp"

namespace sentinel::cmdb {

enum class CiClass { SensorNode, BaseStation, Gateway, BusinessService };
enum class OperationalStatus { Operational, Degraded, Retired };
enum class RelType { DependsOn, ConnectsTo, Monitors };
enum class AuthorizationStatus { Authorized, Exception, Unknown };

std::string_view to_string(CiClass c);
std::string_view to_string(OperationalStatus s);
std::string_view to_string(RelType t);
std::string_view to_string(AuthorizationStatus s);
std::optional<CiClass> parse_ci_class(std::string_view text);
std::optional<OperationalStatus> parse_operational_status(std::string_view text);
std::optional<RelType> parse_rel_type(std::string_view text);

using Attributes = FieldMap;

struct ConfigurationItem {
  std::string ci_id;
  CiClass ci_class = CiClass::SensorNode;
  Attributes attributes;
  OperationalStatus operational_status = OperationalStatus::Operational;
};

/// Write request for upsert_ci. The identity fields select the existing CI
/// to merge into; when empty, the class default applies (node_id for
/// devices, name for business services).
struct CiDraft {
  CiClass ci_class = CiClass::SensorNode;
  Attributes attributes;
  std::vector<std::string> identity_fields;
  std::optional<OperationalStatus> operational_status;
};

enum class UpsertOutcome { Inserted, Updated, Unchanged };

struct UpsertResult {
  std::string ci_id;
  UpsertOutcome outcome = UpsertOutcome::Inserted;
};

struct Relationship {
  std::string parent_ci;
  std::string child_ci;
  RelType rel_type = RelType::DependsOn;
};

struct ExceptionEntry {
  std::string source_id;
  std::string reason;
  std::optional<std::int64_t> expires_ms;  // nullopt: never expires
};

struct AuditEntry {
  std::uint64_t seq = 0;
  std::string ci_id;
  std::string action;  // insert | update
  std::vector<std::string> changed;
};

/// Configuration management database. Single writer; every mutation is
/// validated in full before any field is touched.
class Cmdb {
 public:
  /// Throws InvalidClass / ClassChange / InvalidArgument.
  UpsertResult upsert_ci(const CiDraft& draft);

  /// Dry run of upsert_ci: throws exactly when upsert_ci would.
  void check_upsert(const CiDraft& draft) const;

  AuthorizationStatus authorization_status(std::string_view source_id, std::int64_t now_ms) const;

  /// Throws NotFound / SelfRelation / DependencyCycle.
  const Relationship& relate(std::string_view parent, std::string_view child, RelType rel_type);

  /// Inserts or replaces the entry for entry.source_id.
  void add_exception(ExceptionEntry entry);

  const ConfigurationItem* find(std::string_view ci_id) const;
  const ConfigurationItem* find_by_node(std::string_view node_id) const;
  const std::map<std::string, ConfigurationItem>& items() const { return items_; }
  const std::vector<Relationship>& relationships() const { return relationships_; }
  const std::map<std::string, ExceptionEntry>& exceptions() const { return exceptions_; }
  const std::vector<AuditEntry>& audit() const { return audit_; }
  std::size_t size() const { return items_.size(); }

  Json to_json() const;
  static Cmdb from_json(const Json& j);

 private:
  std::string identity_key(const CiDraft& draft) const;
  bool depends_on_path(const std::string& from, const std::string& to) const;

  std::map<std::string, ConfigurationItem> items_;
  std::map<std::string, std::string> identity_index_;  // identity key -> ci_id
  std::map<std::string, std::string> node_index_;      // node_id -> ci_id
  std::vector<Relationship> relationships_;
  std::map<std::string, ExceptionEntry> exceptions_;
  std::vector<AuditEntry> audit_;
  std::uint64_t next_ci_ = 1;
};

Json to_json(const ConfigurationItem& ci);
Json to_json(const ExceptionEntry& e);
ExceptionEntry exception_from_json(const Json& j);

}  // namespace sentinel::cmdb
