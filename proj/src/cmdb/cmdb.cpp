#include "sentinel/cmdb/cmdb.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "sentinel/common/error.hpp"

namespace sentinel::cmdb {

std::string_view to_string(CiClass c) {
  switch (c) {
    case CiClass::SensorNode: return "SensorNode";
    case CiClass::BaseStation: return "BaseStation";
    case CiClass::Gateway: return "Gateway";
    case CiClass::BusinessService: return "BusinessService";
  }
  return "Unknown";
}

std::string_view to_string(OperationalStatus s) {
  switch (s) {
    case OperationalStatus::Operational: return "Operational";
    case OperationalStatus::Degraded: return "Degraded";
    case OperationalStatus::Retired: return "Retired";
  }
  return "Unknown";
}

std::string_view to_string(RelType t) {
  switch (t) {
    case RelType::DependsOn: return "DependsOn";
    case RelType::ConnectsTo: return "ConnectsTo";
    case RelType::Monitors: return "Monitors";
  }
  return "Unknown";
}

std::string_view to_string(AuthorizationStatus s) {
  switch (s) {
    case AuthorizationStatus::Authorized: return "Authorized";
    case AuthorizationStatus::Exception: return "Exception";
    case AuthorizationStatus::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::optional<CiClass> parse_ci_class(std::string_view text) {
  for (auto c : {CiClass::SensorNode, CiClass::BaseStation, CiClass::Gateway, CiClass::BusinessService}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

std::optional<OperationalStatus> parse_operational_status(std::string_view text) {
  for (auto s : {OperationalStatus::Operational, OperationalStatus::Degraded, OperationalStatus::Retired}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::optional<RelType> parse_rel_type(std::string_view text) {
  for (auto t : {RelType::DependsOn, RelType::ConnectsTo, RelType::Monitors}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> default_identity(CiClass c) {
  if (c == CiClass::BusinessService) return {"name"};
  return {"node_id"};
}

std::optional<std::string> node_id_of(const Attributes& attrs) {
  const auto it = attrs.find("node_id");
  if (it == attrs.end()) return std::nullopt;
  return scalar_to_string(it->second);
}

}  // namespace

std::string Cmdb::identity_key(const CiDraft& draft) const {
  std::vector<std::string> fields =
      draft.identity_fields.empty() ? default_identity(draft.ci_class) : draft.identity_fields;
  std::sort(fields.begin(), fields.end());
  fields.erase(std::unique(fields.begin(), fields.end()), fields.end());
  std::string key;
  for (const auto& f : fields) {
    const auto it = draft.attributes.find(f);
    if (it == draft.attributes.end()) {
      throw Error(ErrorCode::InvalidArgument, "identity field '" + f + "' missing");
    }
    key += f + "=" + scalar_to_json(it->second).dump() + ";";
  }
  return key;
}

void Cmdb::check_upsert(const CiDraft& draft) const {
  const std::string key = identity_key(draft);
  if (draft.ci_class != CiClass::BusinessService) {
    const auto nid = node_id_of(draft.attributes);
    if (!nid || nid->empty()) {
      throw Error(ErrorCode::InvalidClass,
                  std::string(to_string(draft.ci_class)) + " requires a non-empty node_id");
    }
  } else if (!draft.attributes.count("name")) {
    throw Error(ErrorCode::InvalidClass, "BusinessService requires a name");
  }
  const auto hit = identity_index_.find(key);
  if (hit != identity_index_.end()) {
    const auto& existing = items_.at(hit->second);
    if (existing.ci_class != draft.ci_class) {
      throw Error(ErrorCode::ClassChange, "class of " + existing.ci_id + " is " +
                                              std::string(to_string(existing.ci_class)) +
                                              " and cannot become " +
                                              std::string(to_string(draft.ci_class)));
    }
  }
  if (const auto nid = node_id_of(draft.attributes)) {
    const auto owner = node_index_.find(*nid);
    const std::string self = hit == identity_index_.end() ? std::string{} : hit->second;
    if (owner != node_index_.end() && owner->second != self) {
      throw Error(ErrorCode::DuplicateId, "node_id " + *nid + " already belongs to " + owner->second);
    }
  }
}

UpsertResult Cmdb::upsert_ci(const CiDraft& draft) {
  check_upsert(draft);
  const std::string key = identity_key(draft);
  const auto hit = identity_index_.find(key);

  if (hit == identity_index_.end()) {
    ConfigurationItem ci;
    ci.ci_id = format_reference("CI", next_ci_++);
    ci.ci_class = draft.ci_class;
    ci.attributes = draft.attributes;
    ci.operational_status = draft.operational_status.value_or(OperationalStatus::Operational);
    AuditEntry audit{audit_.size() + 1, ci.ci_id, "insert", {}};
    for (const auto& [name, _] : ci.attributes) audit.changed.push_back(name);
    identity_index_.emplace(key, ci.ci_id);
    if (const auto nid = node_id_of(ci.attributes)) node_index_.emplace(*nid, ci.ci_id);
    audit_.push_back(std::move(audit));
    const std::string id = ci.ci_id;
    items_.emplace(id, std::move(ci));
    return {id, UpsertOutcome::Inserted};
  }

  ConfigurationItem& ci = items_.at(hit->second);
  std::vector<std::string> changed;
  for (const auto& [name, value] : draft.attributes) {
    const auto it = ci.attributes.find(name);
    if (it == ci.attributes.end() || it->second != value) changed.push_back(name);
  }
  const bool status_change =
      draft.operational_status && *draft.operational_status != ci.operational_status;
  if (changed.empty() && !status_change) return {ci.ci_id, UpsertOutcome::Unchanged};

  if (const auto old_nid = node_id_of(ci.attributes)) node_index_.erase(*old_nid);
  for (const auto& name : changed) ci.attributes[name] = draft.attributes.at(name);
  if (const auto nid = node_id_of(ci.attributes)) node_index_[*nid] = ci.ci_id;
  if (status_change) {
    ci.operational_status = *draft.operational_status;
    changed.push_back("operational_status");
  }
  audit_.push_back({audit_.size() + 1, ci.ci_id, "update", std::move(changed)});
  return {ci.ci_id, UpsertOutcome::Updated};
}

AuthorizationStatus Cmdb::authorization_status(std::string_view source_id, std::int64_t now_ms) const {
  if (node_index_.count(std::string(source_id))) return AuthorizationStatus::Authorized;
  const auto it = exceptions_.find(std::string(source_id));
  if (it != exceptions_.end() && (!it->second.expires_ms || now_ms < *it->second.expires_ms)) {
    return AuthorizationStatus::Exception;
  }
  return AuthorizationStatus::Unknown;
}

bool Cmdb::depends_on_path(const std::string& from, const std::string& to) const {
  std::set<std::string> seen;
  std::vector<std::string> stack{from};
  while (!stack.empty()) {
    const std::string cur = stack.back();
    stack.pop_back();
    if (cur == to) return true;
    if (!seen.insert(cur).second) continue;
    for (const auto& r : relationships_) {
      if (r.rel_type == RelType::DependsOn && r.parent_ci == cur) stack.push_back(r.child_ci);
    }
  }
  return false;
}

const Relationship& Cmdb::relate(std::string_view parent, std::string_view child, RelType rel_type) {
  const std::string p(parent), c(child);
  if (!items_.count(p)) throw Error(ErrorCode::NotFound, "no CI " + p);
  if (!items_.count(c)) throw Error(ErrorCode::NotFound, "no CI " + c);
  if (p == c) throw Error(ErrorCode::SelfRelation, "a CI cannot relate to itself");
  for (const auto& r : relationships_) {
    if (r.parent_ci == p && r.child_ci == c && r.rel_type == rel_type) return r;
  }
  if (rel_type == RelType::DependsOn && depends_on_path(c, p)) {
    throw Error(ErrorCode::DependencyCycle, p + " DependsOn " + c + " would close a cycle");
  }
  relationships_.push_back({p, c, rel_type});
  return relationships_.back();
}

void Cmdb::add_exception(ExceptionEntry entry) {
  if (entry.source_id.empty()) throw Error(ErrorCode::InvalidArgument, "exception needs a source_id");
  const std::string key = entry.source_id;
  exceptions_[key] = std::move(entry);
}

const ConfigurationItem* Cmdb::find(std::string_view ci_id) const {
  const auto it = items_.find(std::string(ci_id));
  return it == items_.end() ? nullptr : &it->second;
}

const ConfigurationItem* Cmdb::find_by_node(std::string_view node_id) const {
  const auto it = node_index_.find(std::string(node_id));
  return it == node_index_.end() ? nullptr : find(it->second);
}

Json to_json(const ConfigurationItem& ci) {
  return {{"ci_id", ci.ci_id},
          {"class", to_string(ci.ci_class)},
          {"attributes", fields_to_json(ci.attributes)},
          {"operational_status", to_string(ci.operational_status)}};
}

Json to_json(const ExceptionEntry& e) {
  return {{"source_id", e.source_id},
          {"reason", e.reason},
          {"expires_ms", e.expires_ms ? Json(*e.expires_ms) : Json("never")}};
}

ExceptionEntry exception_from_json(const Json& j) {
  ExceptionEntry e;
  e.source_id = j.at("source_id").get<std::string>();
  e.reason = j.value("reason", std::string{});
  if (!j.contains("expires_ms")) {
    throw Error(ErrorCode::InvalidArgument, "exception entry needs expires_ms (a time or \"never\")");
  }
  const Json& exp = j.at("expires_ms");
  if (exp.is_string() && exp.get<std::string>() == "never") {
    e.expires_ms = std::nullopt;
  } else if (exp.is_number_integer()) {
    e.expires_ms = exp.get<std::int64_t>();
  } else {
    throw Error(ErrorCode::InvalidArgument, "expires_ms must be an integer or \"never\"");
  }
  return e;
}

Json Cmdb::to_json() const {
  Json items = Json::object();
  for (const auto& [id, ci] : items_) items[id] = cmdb::to_json(ci);
  Json rels = Json::array();
  for (const auto& r : relationships_) {
    rels.push_back({{"parent_ci", r.parent_ci}, {"child_ci", r.child_ci}, {"rel_type", to_string(r.rel_type)}});
  }
  Json exc = Json::object();
  for (const auto& [id, e] : exceptions_) exc[id] = cmdb::to_json(e);
  Json audit = Json::array();
  for (const auto& a : audit_) {
    audit.push_back({{"seq", a.seq}, {"ci_id", a.ci_id}, {"action", a.action}, {"changed", a.changed}});
  }
  return {{"items", items},
          {"identity_index", identity_index_},
          {"relationships", rels},
          {"exceptions", exc},
          {"audit", audit},
          {"next_ci", next_ci_}};
}

Cmdb Cmdb::from_json(const Json& j) {
  Cmdb db;
  for (const auto& [id, c] : j.at("items").items()) {
    ConfigurationItem ci;
    ci.ci_id = c.at("ci_id").get<std::string>();
    ci.ci_class = parse_ci_class(c.at("class").get<std::string>()).value();
    ci.attributes = fields_from_json(c.at("attributes"));
    ci.operational_status =
        parse_operational_status(c.at("operational_status").get<std::string>()).value();
    if (const auto nid = node_id_of(ci.attributes)) db.node_index_.emplace(*nid, ci.ci_id);
    db.items_.emplace(id, std::move(ci));
  }
  db.identity_index_ = j.at("identity_index").get<std::map<std::string, std::string>>();
  for (const auto& r : j.at("relationships")) {
    db.relationships_.push_back({r.at("parent_ci").get<std::string>(), r.at("child_ci").get<std::string>(),
                                 parse_rel_type(r.at("rel_type").get<std::string>()).value()});
  }
  for (const auto& [id, e] : j.at("exceptions").items()) db.exceptions_.emplace(id, exception_from_json(e));
  for (const auto& a : j.at("audit")) {
    db.audit_.push_back({a.at("seq").get<std::uint64_t>(), a.at("ci_id").get<std::string>(),
                         a.at("action").get<std::string>(), a.at("changed").get<std::vector<std::string>>()});
  }
  db.next_ci_ = j.at("next_ci").get<std::uint64_t>();
  return db;
}

}  // namespace sentinel::cmdb
