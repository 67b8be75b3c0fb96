#include "sentinel/harness/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "sentinel/common/error.hpp"
#include "sentinel/common/rng.hpp"

namespace sentinel::harness {

namespace fs = std::filesystem;

std::string format(const Diagnostic& d, const std::string& file) {
  std::string s = file;
  if (d.line > 0) s += ":" + std::to_string(d.line);
  s += ": ";
  if (!d.field.empty()) s += d.field + ": ";
  return s + d.message;
}

namespace {

std::string join_messages(const std::string& file, const std::vector<Diagnostic>& ds) {
  std::string out;
  for (const auto& d : ds) {
    if (!out.empty()) out += '\n';
    out += format(d, file);
  }
  return out;
}

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

Json yaml_scalar(const YAML::Node& node) {
  const std::string& s = node.Scalar();
  if (node.Tag() == "!") return s;  // quoted: always a string
  if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  static const std::regex integer(R"([-+]?[0-9]+)");
  if (std::regex_match(s, integer)) {
    std::int64_t v = 0;
    const char* begin = s.data() + (s[0] == '+' ? 1 : 0);
    if (std::from_chars(begin, s.data() + s.size(), v).ec == std::errc{}) return v;
  }
  double d = 0.0;
  const char* begin = s.data() + (s[0] == '+' ? 1 : 0);
  const auto r = std::from_chars(begin, s.data() + s.size(), d);
  if (r.ec == std::errc{} && r.ptr == s.data() + s.size() && std::isfinite(d)) return d;
  return s;
}

Json yaml_to_json(const YAML::Node& node, const std::string& path, std::map<std::string, int>& lines) {
  lines[path] = node.Mark().line + 1;
  switch (node.Type()) {
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        const std::string child = path + "/" + escape_pointer(key);
        lines[child] = kv.first.Mark().line + 1;
        obj[key] = yaml_to_json(kv.second, child, lines);
        lines[child] = kv.first.Mark().line + 1;
      }
      return obj;
    }
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      std::size_t i = 0;
      for (const auto& item : node) arr.push_back(yaml_to_json(item, path + "/" + std::to_string(i++), lines));
      return arr;
    }
    case YAML::NodeType::Scalar:
      return yaml_scalar(node);
    default:
      return nullptr;
  }
}

int line_of(std::size_t byte, const std::string& text) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

// ---- validation helpers ----

struct Ctx {
  std::vector<Diagnostic> diags;
  void error(std::string field, std::string message) { diags.push_back({0, std::move(field), std::move(message)}); }
};

std::int64_t seconds_to_ms(double s) { return std::llround(s * 1000.0); }

/// One JSON object being validated: typed getters, every consumed key is
/// remembered so leftovers can be reported as unknown fields.
class Section {
 public:
  Section(Ctx& ctx, const Json* j, std::string path) : ctx_(ctx), path_(std::move(path)) {
    if (j && !j->is_object()) {
      ctx_.error(path_.empty() ? "/" : path_, "expected an object");
    } else {
      j_ = j;
    }
  }

  bool present() const { return j_ != nullptr; }
  bool has(const std::string& key) const { return j_ && j_->contains(key); }
  std::string at(const std::string& key) const { return path_ + "/" + escape_pointer(key); }
  void error(const std::string& key, std::string msg) { ctx_.error(key.empty() ? path_ : at(key), std::move(msg)); }

  const Json* raw(const std::string& key) {
    used_.insert(key);
    if (!j_) return nullptr;
    const auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  std::optional<double> number(const std::string& key, bool required = false) {
    const Json* v = raw(key);
    if (!v) {
      if (required && j_) error(key, "required number is missing");
      return std::nullopt;
    }
    if (!v->is_number() || !std::isfinite(v->get<double>())) {
      error(key, "expected a number");
      return std::nullopt;
    }
    return v->get<double>();
  }
  double number_or(const std::string& key, double fallback) { return number(key).value_or(fallback); }

  std::optional<std::int64_t> integer(const std::string& key, bool required = false) {
    const Json* v = raw(key);
    if (!v) {
      if (required && j_) error(key, "required integer is missing");
      return std::nullopt;
    }
    if (!v->is_number_integer()) {
      error(key, "expected an integer");
      return std::nullopt;
    }
    return v->get<std::int64_t>();
  }

  std::optional<std::string> string(const std::string& key, bool required = false) {
    const Json* v = raw(key);
    if (!v) {
      if (required && j_) error(key, "required string is missing");
      return std::nullopt;
    }
    if (!v->is_string()) {
      error(key, "expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  bool boolean_or(const std::string& key, bool fallback) {
    const Json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      error(key, "expected true or false");
      return fallback;
    }
    return v->get<bool>();
  }

  /// Seconds field converted to ms, checked >= min_s (or > when strict).
  std::optional<std::int64_t> seconds(const std::string& key, bool required, double min_s, bool strict) {
    auto v = number(key, required);
    if (!v) return std::nullopt;
    if (strict ? !(*v > min_s) : !(*v >= min_s)) {
      error(key, std::string("must be ") + (strict ? "> " : ">= ") + std::to_string(static_cast<int>(min_s)));
      return std::nullopt;
    }
    return seconds_to_ms(*v);
  }

  const Json* array(const std::string& key) {
    const Json* v = raw(key);
    if (v && !v->is_array()) {
      error(key, "expected a list");
      return nullptr;
    }
    return v;
  }

  void done() {
    if (!j_) return;
    for (const auto& [k, v] : j_->items()) {
      if (!used_.count(k)) ctx_.error(at(k), "unknown field");
    }
  }

 private:
  Ctx& ctx_;
  const Json* j_ = nullptr;
  std::string path_;
  std::set<std::string> used_;
};

template <typename T>
std::optional<T> guard(Ctx& ctx, const std::string& field, const std::function<T()>& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    ctx.error(field, e.what());
  } catch (const Json::exception& e) {
    ctx.error(field, e.what());
  }
  return std::nullopt;
}

std::optional<sim::Position> position(Ctx& ctx, const Json* j, const std::string& path) {
  Section s(ctx, j, path);
  auto x = s.number("x", true);
  auto y = s.number("y", true);
  s.done();
  if (!x || !y) return std::nullopt;
  return sim::Position{*x, *y};
}

FieldMap scalar_fields(Ctx& ctx, const Json* j, const std::string& path) {
  FieldMap out;
  if (!j) return out;
  if (!j->is_object()) {
    ctx.error(path, "expected an object of scalars");
    return out;
  }
  for (const auto& [k, v] : j->items()) {
    auto s = scalar_from_json(v);
    if (!s) {
      ctx.error(path + "/" + escape_pointer(k), "expected a string, number or boolean");
      continue;
    }
    out.emplace(k, *s);
  }
  return out;
}

}  // namespace

ScenarioError::ScenarioError(std::string file, std::vector<Diagnostic> diagnostics)
    : std::runtime_error(join_messages(file, diagnostics)), file_(std::move(file)), diagnostics_(std::move(diagnostics)) {}

ScenarioDocument parse_document(const std::string& text, bool yaml, const std::string& file) {
  ScenarioDocument doc;
  if (yaml) {
    try {
      const YAML::Node root = YAML::Load(text);
      doc.json = yaml_to_json(root, "", doc.lines);
    } catch (const YAML::Exception& e) {
      throw ScenarioError(file, {{e.mark.line + 1, "", "YAML syntax error: " + e.msg}});
    }
  } else {
    try {
      doc.json = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ScenarioError(file, {{line_of(e.byte == 0 ? 0 : e.byte - 1, text), "", "JSON syntax error"}});
    }
    // Field line numbers: JSON is (nearly) YAML, so borrow its source marks.
    try {
      std::map<std::string, int> lines;
      (void)yaml_to_json(YAML::Load(text), "", lines);
      doc.lines = std::move(lines);
    } catch (const YAML::Exception&) {
    }
  }
  if (!doc.json.is_object()) throw ScenarioError(file, {{1, "", "scenario must be an object"}});
  return doc;
}

ScenarioDocument load_document(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path.string(), {{0, "", "cannot read file"}});
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string ext = path.extension().string();
  return parse_document(ss.str(), ext == ".yaml" || ext == ".yml", path.string());
}

std::vector<sim::Placement> generate_grid(std::size_t n, double area_m, const std::string& prefix, double jitter_m,
                                          std::uint64_t seed) {
  std::vector<sim::Placement> out;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const double spacing = area_m / static_cast<double>(std::max<std::size_t>(cols, 1));
  Rng rng(stream_seed(seed, "topology"));
  for (std::size_t i = 0; i < n; ++i) {
    const double cx = (static_cast<double>(i % cols) + 0.5) * spacing;
    const double cy = (static_cast<double>(i / cols) + 0.5) * spacing;
    const double jx = jitter_m > 0 ? rng.uniform(-jitter_m, jitter_m) : 0.0;
    const double jy = jitter_m > 0 ? rng.uniform(-jitter_m, jitter_m) : 0.0;
    out.push_back({prefix + std::to_string(i + 1), {quantize(cx + jx, 1e-3), quantize(cy + jy, 1e-3)}});
  }
  return out;
}

core::EngineConfig build_config(const ScenarioDocument& doc, std::optional<std::uint64_t> seed_override,
                                const std::string& file) {
  Ctx ctx;
  core::EngineConfig cfg;
  Section root(ctx, &doc.json, "");

  cfg.name = root.string("name").value_or(fs::path(file).stem().string());
  if (auto seed = root.integer("seed", true)) {
    if (*seed < 0) root.error("seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(*seed);
  }
  if (seed_override) cfg.seed = *seed_override;
  cfg.duration_ms = root.seconds("duration_s", true, 0.0, true).value_or(0);
  cfg.sim.seed = cfg.seed;
  if (auto m = root.integer("max_import_rows")) {
    if (*m < 1) root.error("max_import_rows", "must be >= 1");
    cfg.max_import_rows = static_cast<std::size_t>(std::max<std::int64_t>(*m, 1));
  }

  // topology
  std::vector<sim::Placement> placements;
  {
    Section topo(ctx, root.raw("topology"), "/topology");
    if (!topo.present()) root.error("topology", "required object is missing");
    cfg.sink_id = topo.string("sink").value_or("sink");
    std::optional<double> range = topo.number("radio_range_m");
    const Json* list = topo.array("placements");
    const Json* gen = topo.raw("generator");
    if (list && gen) topo.error("", "give either placements or generator, not both");
    if (!list && !gen && topo.present()) topo.error("", "needs placements or generator");
    if (list) {
      for (std::size_t i = 0; i < list->size(); ++i) {
        const std::string p = "/topology/placements/" + std::to_string(i);
        Section pl(ctx, &(*list)[i], p);
        auto id = pl.string("id", true);
        auto x = pl.number("x", true);
        auto y = pl.number("y", true);
        pl.done();
        if (id && x && y) placements.push_back({*id, {*x, *y}});
      }
      if (!range) range = 100.0;
    }
    if (gen) {
      Section g(ctx, gen, "/topology/generator");
      auto n = g.integer("n", true);
      auto area = g.number("area_m", true);
      const std::string prefix = g.string("prefix").value_or("n");
      const double jitter = g.number_or("jitter_m", 0.0);
      g.done();
      if (n && *n < 1) g.error("n", "must be >= 1");
      if (area && !(*area > 0)) g.error("area_m", "must be > 0");
      if (jitter < 0) g.error("jitter_m", "must be >= 0");
      if (n && *n >= 1 && area && *area > 0) {
        placements = generate_grid(static_cast<std::size_t>(*n), *area, prefix, std::max(jitter, 0.0), cfg.seed);
        placements.push_back({cfg.sink_id, {*area / 2.0, *area / 2.0}});
        const double spacing = *area / std::ceil(std::sqrt(static_cast<double>(*n)));
        if (!range) range = 1.5 * spacing + 2.0 * std::max(jitter, 0.0);
      }
    }
    if (range && !(*range > 0)) topo.error("radio_range_m", "must be > 0");
    cfg.sim.radio_range_m = range.value_or(100.0);
    topo.done();
  }
  std::set<std::string> ids;
  for (const auto& p : placements) {
    if (!ids.insert(p.id).second) ctx.error("/topology", "duplicate node id " + p.id);
  }
  if (!placements.empty() && !ids.count(cfg.sink_id)) ctx.error("/topology/sink", "sink " + cfg.sink_id + " is not placed");

  // nodes
  {
    Section nodes(ctx, root.raw("nodes"), "/nodes");
    const double period = nodes.number_or("emit_period_s", 10.0);
    if (!(period > 0)) nodes.error("emit_period_s", "must be > 0");
    auto kind_text = nodes.string("sensor_kind").value_or("temperature");
    auto kind = sim::parse_sensor_kind(kind_text);
    if (!kind) nodes.error("sensor_kind", "unknown sensor kind " + kind_text);
    cfg.sim.jitter = nodes.boolean_or("jitter", false);
    if (auto h = nodes.integer("hop_latency_ms")) {
      if (*h < 0) nodes.error("hop_latency_ms", "must be >= 0");
      cfg.sim.hop_latency_ms = std::max<std::int64_t>(*h, 0);
    }
    if (auto tick = nodes.seconds("energy_tick_s", false, 0.0, true)) cfg.sim.energy_tick_ms = *tick;

    std::map<std::string, sim::NodeSpec> overrides;
    if (const Json* list = nodes.array("overrides")) {
      for (std::size_t i = 0; i < list->size(); ++i) {
        const std::string p = "/nodes/overrides/" + std::to_string(i);
        Section o(ctx, &(*list)[i], p);
        auto id = o.string("id", true);
        sim::NodeSpec spec;
        spec.emit_period_s = o.number_or("emit_period_s", period);
        if (!(spec.emit_period_s > 0)) o.error("emit_period_s", "must be > 0");
        spec.sensor_kind = kind.value_or(sim::SensorKind::Temperature);
        if (auto k = o.string("sensor_kind")) {
          if (auto pk = sim::parse_sensor_kind(*k)) {
            spec.sensor_kind = *pk;
          } else {
            o.error("sensor_kind", "unknown sensor kind " + *k);
          }
        }
        spec.baseline_value = o.number("baseline_value");
        o.done();
        if (id && !ids.count(*id)) o.error("id", "no node " + *id + " in the topology");
        if (id) overrides[*id] = spec;
      }
    }
    nodes.done();
    for (const auto& p : placements) {
      if (p.id == cfg.sink_id) continue;
      sim::NodeSpec spec;
      const auto it = overrides.find(p.id);
      if (it != overrides.end()) spec = it->second;
      else {
        spec.emit_period_s = period;
        spec.sensor_kind = kind.value_or(sim::SensorKind::Temperature);
      }
      spec.placement = p;
      cfg.nodes.push_back(std::move(spec));
    }
    // The sink is a node too; the simulation marks it by id.
    for (const auto& p : placements) {
      if (p.id == cfg.sink_id) cfg.nodes.push_back({p, period, sim::SensorKind::Generic, std::nullopt});
    }
  }

  // energy
  {
    Section e(ctx, root.raw("energy"), "/energy");
    cfg.sim.energy.e_tx_j = e.number_or("e_tx_j", cfg.sim.energy.e_tx_j);
    cfg.sim.energy.e_rx_j = e.number_or("e_rx_j", cfg.sim.energy.e_rx_j);
    cfg.sim.energy.idle_w = e.number_or("idle_w", cfg.sim.energy.idle_w);
    cfg.sim.energy.initial_battery_j = e.number_or("initial_battery_j", cfg.sim.energy.initial_battery_j);
    e.done();
    guard<int>(ctx, "/energy", [&] {
      cfg.sim.energy.validate();
      return 0;
    });
    cfg.detectors.drain.model = cfg.sim.energy;
  }

  // detectors
  {
    Section d(ctx, root.raw("detectors"), "/detectors");
    Section f(ctx, d.raw("flood"), "/detectors/flood");
    auto& fl = cfg.detectors.flood;
    fl.k = f.number_or("k", fl.k);
    if (auto w = f.integer("w")) fl.w = static_cast<int>(*w);
    if (auto win = f.seconds("window_s", false, 0.0, true)) fl.window_ms = *win;
    fl.alpha = f.number_or("alpha", fl.alpha);
    if (auto wu = f.integer("warmup_windows")) fl.warmup_windows = static_cast<int>(*wu);
    f.done();
    guard<int>(ctx, "/detectors/flood", [&] {
      fl.validate();
      return 0;
    });
    if (const Json* b = d.raw("bounds")) {
      if (!b->is_object()) d.error("bounds", "expected an object");
      else {
        for (const auto& [k, v] : b->items()) {
          const std::string p = "/detectors/bounds/" + escape_pointer(k);
          auto kind = sim::parse_sensor_kind(k);
          if (!kind) {
            ctx.error(p, "unknown sensor kind");
            continue;
          }
          if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number() ||
              !(v[0].get<double>() <= v[1].get<double>())) {
            ctx.error(p, "expected [min, max] with min <= max");
            continue;
          }
          cfg.detectors.bounds[*kind] = {v[0].get<double>(), v[1].get<double>()};
        }
      }
    }
    cfg.detectors.overheat_c = d.number_or("overheat_c", cfg.detectors.overheat_c);
    cfg.detectors.drain.d = d.number_or("drain_ratio", cfg.detectors.drain.d);
    if (!(cfg.detectors.drain.d > 0)) d.error("drain_ratio", "must be > 0");
    if (auto dw = d.seconds("dedup_window_s", false, 0.0, false)) cfg.detectors.dedup_window_ms = *dw;
    d.done();
  }

  // transform maps
  if (const Json* maps = root.array("transform_maps")) {
    for (std::size_t i = 0; i < maps->size(); ++i) {
      const std::string p = "/transform_maps/" + std::to_string(i);
      auto m = guard<ingest::TransformMap>(ctx, p, [&] {
        auto tm = ingest::transform_map_from_json((*maps)[i]);
        tm.validate();
        return tm;
      });
      if (!m) continue;
      if (cfg.transform_maps.count(m->source_table)) {
        ctx.error(p + "/source_table", "second map for table " + m->source_table);
        continue;
      }
      cfg.transform_maps.emplace(m->source_table, std::move(*m));
    }
  }

  // assets: the inventory the CMDB is seeded with
  {
    const Json* a = root.raw("assets");
    const bool disabled = a && a->is_boolean() && !a->get<bool>();
    Section s(ctx, disabled ? nullptr : a, "/assets");
    const bool from_topology = s.boolean_or("from_topology", true);
    const std::string table = s.string("table").value_or("wsn_assets");
    const FieldMap extra = scalar_fields(ctx, s.raw("attributes"), "/assets/attributes");
    std::set<std::string> exclude;
    if (const Json* ex = s.array("exclude")) {
      for (const auto& v : *ex) {
        if (v.is_string()) exclude.insert(v.get<std::string>());
        else ctx.error("/assets/exclude", "expected node ids");
      }
    }
    s.done();
    if (!disabled && from_topology) {
      core::AssetImport imp;
      imp.table = table;
      for (const auto& n : cfg.nodes) {
        const auto& p = n.placement;
        if (exclude.count(p.id)) continue;
        const bool sink = p.id == cfg.sink_id;
        FieldMap row = extra;
        row["node_id"] = p.id;
        row["name"] = p.id;
        row["class"] = std::string(sink ? "BaseStation" : "SensorNode");
        row["sensor_kind"] = std::string(sim::to_string(n.sensor_kind));
        row["x"] = p.position.x;
        row["y"] = p.position.y;
        imp.rows.push_back(std::move(row));
      }
      std::sort(imp.rows.begin(), imp.rows.end(), [](const FieldMap& l, const FieldMap& r) {
        return std::get<std::string>(l.at("node_id")) < std::get<std::string>(r.at("node_id"));
      });
      if (!cfg.transform_maps.count(table)) {
        ingest::TransformMap tm;
        tm.source_table = table;
        tm.target = ingest::TargetKind::CmdbCi;
        tm.coalesce_keys = {"node_id"};
        for (const char* f : {"node_id", "name", "class", "sensor_kind"}) tm.field_maps.push_back({f, f, {}});
        for (const char* f : {"x", "y"}) tm.field_maps.push_back({f, f, {ingest::Coercion::Kind::ToNumber}});
        for (const auto& [k, v] : extra) {
          if (k == "node_id" || k == "name" || k == "class" || k == "x" || k == "y" || k == "sensor_kind") continue;
          tm.field_maps.push_back({k, k, {}});
        }
        cfg.transform_maps.emplace(table, std::move(tm));
      }
      if (imp.rows.size() > cfg.max_import_rows) cfg.max_import_rows = imp.rows.size();
      cfg.assets = std::move(imp);
    }
  }

  auto known_node = [&](const std::string& id) { return ids.count(id) != 0; };

  // attacks
  if (const Json* list = root.array("attacks")) {
    for (std::size_t i = 0; i < list->size(); ++i) {
      const std::string p = "/attacks/" + std::to_string(i);
      Section a(ctx, &(*list)[i], p);
      sim::AttackSpec spec;
      auto kind_text = a.string("kind", true);
      auto kind = kind_text ? sim::parse_attack_kind(*kind_text) : std::nullopt;
      if (kind_text && !kind) a.error("kind", "unknown attack kind " + *kind_text);
      spec.kind = kind.value_or(sim::AttackKind::Flood);
      spec.target = a.string("target").value_or("");
      spec.start_ms = a.seconds("start_s", true, 0.0, false).value_or(0);
      spec.duration_ms = a.seconds("duration_s", false, 0.0, true).value_or(cfg.duration_ms - spec.start_ms);
      spec.multiplier = a.number_or("multiplier", spec.multiplier);
      spec.drop_prob = a.number_or("drop_prob", spec.drop_prob);
      spec.offset = a.number_or("offset", spec.offset);
      spec.idle_multiplier = a.number_or("idle_multiplier", spec.idle_multiplier);
      spec.source_id = a.string("source_id").value_or("");
      spec.rogue_period_s = a.number_or("period_s", spec.rogue_period_s);
      if (const Json* pos = a.raw("position")) spec.position = position(ctx, pos, p + "/position");
      if (const Json* reg = a.raw("region")) {
        Section r(ctx, reg, p + "/region");
        auto x = r.number("x", true);
        auto y = r.number("y", true);
        auto radius = r.number("radius_m", true);
        r.done();
        if (x && y && radius) spec.region = sim::Region{{*x, *y}, *radius};
      }
      a.done();
      const std::size_t before = ctx.diags.size();
      if (!spec.target.empty() && !known_node(spec.target)) a.error("target", "no node " + spec.target);
      if (!kind) continue;
      // Field-level checks first so the diagnostic names the offending key.
      switch (spec.kind) {
        case sim::AttackKind::Flood:
          if (!(spec.multiplier > 1.0)) a.error("multiplier", "must be > 1");
          break;
        case sim::AttackKind::Jam:
          if (!(spec.drop_prob >= 0.0 && spec.drop_prob <= 1.0)) a.error("drop_prob", "must lie in [0, 1]");
          break;
        case sim::AttackKind::RogueJoin:
          if (!(spec.rogue_period_s > 0.0)) a.error("period_s", "must be > 0");
          break;
        case sim::AttackKind::Drain:
          if (!(spec.idle_multiplier >= 0.0)) a.error("idle_multiplier", "must be >= 0");
          break;
        default:
          break;
      }
      if (spec.kind == sim::AttackKind::RogueJoin && known_node(spec.source_id)) {
        a.error("source_id", spec.source_id + " is already a topology node");
      }
      if (spec.start_ms > cfg.duration_ms) a.error("start_s", "starts after the run ends");
      if (ctx.diags.size() != before) continue;
      guard<int>(ctx, p, [&] {
        spec.validate();
        return 0;
      });
      cfg.attacks.push_back(std::move(spec));
    }
  }

  // faults
  if (const Json* list = root.array("faults")) {
    for (std::size_t i = 0; i < list->size(); ++i) {
      const std::string p = "/faults/" + std::to_string(i);
      Section f(ctx, &(*list)[i], p);
      auto kind = f.string("kind", true);
      if (kind && *kind != "overheat_ramp") f.error("kind", "unknown fault kind " + *kind + " (expected overheat_ramp)");
      sim::RampSpec ramp;
      ramp.target = f.string("target", true).value_or("");
      ramp.start_ms = f.seconds("start_s", true, 0.0, false).value_or(0);
      ramp.rate_per_s = f.number("rate_per_s", true).value_or(0.0);
      f.done();
      if (!ramp.target.empty() && !known_node(ramp.target)) f.error("target", "no node " + ramp.target);
      cfg.ramps.push_back(std::move(ramp));
    }
  }

  // event bursts
  if (const Json* list = root.array("event_bursts")) {
    for (std::size_t i = 0; i < list->size(); ++i) {
      const std::string p = "/event_bursts/" + std::to_string(i);
      Section b(ctx, &(*list)[i], p);
      core::EventBurst burst;
      burst.at_ms = b.seconds("at_s", true, 0.0, false).value_or(0);
      auto count = b.integer("count", true);
      if (count && *count < 1) b.error("count", "must be >= 1");
      burst.count = static_cast<std::uint64_t>(std::max<std::int64_t>(count.value_or(1), 1));
      auto type_text = b.string("type", true);
      auto type = type_text ? events::parse_event_type(*type_text) : std::nullopt;
      if (type_text && !type) b.error("type", "unknown event type " + *type_text);
      burst.type = type.value_or(events::EventType::DataIntegrity);
      burst.source_id = b.string("source", true).value_or("");
      burst.resource = b.string("resource").value_or("feed");
      b.done();
      cfg.bursts.push_back(std::move(burst));
    }
  }

  // incident rules and SLA
  {
    Section r(ctx, root.raw("incident_rules"), "/incident_rules");
    if (auto s = r.integer("auto_incident_severity")) {
      if (*s < 1 || *s > 5) r.error("auto_incident_severity", "must lie in 1..5");
      cfg.rules.auto_incident_severity = static_cast<int>(*s);
    }
    auto pair = [&](const Json& v, const std::string& path) -> std::optional<incidents::ImpactUrgency> {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer() ||
          v[0].get<int>() < 1 || v[0].get<int>() > 3 || v[1].get<int>() < 1 || v[1].get<int>() > 3) {
        ctx.error(path, "expected [impact, urgency], each 1..3");
        return std::nullopt;
      }
      return incidents::ImpactUrgency{v[0].get<int>(), v[1].get<int>()};
    };
    if (const Json* m = r.raw("matrix")) {
      if (!m->is_object()) r.error("matrix", "expected an object");
      else {
        for (const auto& [k, v] : m->items()) {
          const std::string p = "/incident_rules/matrix/" + escape_pointer(k);
          auto type = events::parse_event_type(k);
          if (!type) {
            ctx.error(p, "unknown event type");
            continue;
          }
          if (auto iu = pair(v, p)) cfg.rules.table[*type] = *iu;
        }
      }
    }
    if (const Json* fb = r.raw("fallback")) {
      if (auto iu = pair(*fb, "/incident_rules/fallback")) cfg.rules.fallback = *iu;
    }
    r.done();

    Section s(ctx, root.raw("sla"), "/sla");
    for (int prio = 1; prio <= 5; ++prio) {
      const std::string key = "P" + std::to_string(prio);
      Section t(ctx, s.raw(key), "/sla/" + key);
      auto& target = cfg.sla.by_priority[static_cast<std::size_t>(prio - 1)];
      if (auto v = t.seconds("response_s", false, 0.0, true)) target.response_ms = *v;
      if (auto v = t.seconds("resolve_s", false, 0.0, true)) target.resolve_ms = *v;
      t.done();
    }
    s.done();
    guard<int>(ctx, "/sla", [&] {
      cfg.sla.validate();
      return 0;
    });
  }

  // response script
  if (const Json* list = root.array("responses")) {
    for (std::size_t i = 0; i < list->size(); ++i) {
      const std::string p = "/responses/" + std::to_string(i);
      Section r(ctx, &(*list)[i], p);
      core::ScriptedResponse resp;
      auto action_text = r.string("action", true);
      auto action = action_text ? parse_action_kind(*action_text) : std::nullopt;
      if (action_text && !action) r.error("action", "unknown action " + *action_text);
      resp.action = action.value_or(ActionKind::Quarantine);
      resp.target = r.string("target", true).value_or("");
      resp.at_ms = r.seconds("at_s", false, 0.0, false);
      if (const Json* ae = r.raw("after_event")) {
        Section e(ctx, ae, p + "/after_event");
        auto type_text = e.string("type", true);
        auto type = type_text ? events::parse_event_type(*type_text) : std::nullopt;
        if (type_text && !type) e.error("type", "unknown event type " + *type_text);
        core::ResponseTrigger trig;
        trig.type = type.value_or(events::EventType::DosFlood);
        trig.source_id = e.string("source").value_or(resp.target);
        e.done();
        resp.after_event = trig;
      }
      if (auto delay = r.seconds("delay_s", false, 0.0, false)) {
        if (resp.after_event) resp.after_event->delay_ms = *delay;
        else r.error("delay_s", "only meaningful with after_event");
      }
      resp.incident_ref = r.string("incident").value_or("");
      resp.expires_ms = r.seconds("expires_at_s", false, 0.0, false);
      resp.reason = r.string("reason").value_or("");
      resp.requested_by = r.string("requested_by").value_or("responder");
      resp.resolve = r.boolean_or("resolve", false);
      r.done();
      if (resp.at_ms.has_value() == resp.after_event.has_value()) r.error("", "needs exactly one of at_s / after_event");
      if (resp.at_ms && resp.incident_ref.empty()) r.error("incident", "timed responses must name an incident");
      cfg.responses.push_back(std::move(resp));
    }
  }

  root.done();

  if (!ctx.diags.empty()) {
    for (auto& d : ctx.diags) {
      std::string probe = d.field;
      while (true) {
        const auto it = doc.lines.find(probe == "/" ? "" : probe);
        if (it != doc.lines.end()) {
          d.line = it->second;
          break;
        }
        const auto slash = probe.rfind('/');
        if (slash == std::string::npos || probe.empty()) break;
        probe = probe.substr(0, slash);
      }
    }
    throw ScenarioError(file, std::move(ctx.diags));
  }
  return cfg;
}

core::EngineConfig load_scenario(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  return build_config(load_document(path), seed_override, path.string());
}

}  // namespace sentinel::harness
