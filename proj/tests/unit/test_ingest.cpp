#include <doctest.h>

#include <cmath>

#include "sentinel/common/error.hpp"
#include "sentinel/ingest/import_set.hpp"
#include "support.hpp"

using namespace sentinel;
using namespace sentinel::ingest;

namespace {

TransformMap asset_map() {
  return transform_map_from_json(Json::parse(R"({
    "source_table": "assets",
    "field_maps": [
      {"source": "node_id"},
      {"source": "site", "target": "location", "coercion": "rename"},
      {"source": "limit_f", "target": "overheat_c", "coercion": "f_to_c"}
    ],
    "coalesce_keys": ["node_id"]
  })"));
}

ImportRow row(const std::string& table, std::uint64_t id, FieldMap fields) {
  return {table, id, std::move(fields), 0};
}

}  // namespace

TEST_CASE("stage: empty list gives an empty set") {
  StagingArea area;
  CHECK(area.stage("sensor_feed", {}).size() == 0);
}

TEST_CASE("stage: ids are consecutive per table across calls, values kept verbatim") {
  StagingArea area;
  const auto a = area.stage("t", {{{"x", std::string(" 01 ")}}, {{"x", 2.0}}});
  REQUIRE(a.size() == 2);
  CHECK(a.rows[0].row_id == 1);
  CHECK(a.rows[1].row_id == 2);
  CHECK(std::get<std::string>(a.rows[0].fields.at("x")) == " 01 ");
  CHECK(area.stage("t", {{{"x", true}}}).rows[0].row_id == 3);
  CHECK(area.stage("other", {{{"x", true}}}).rows[0].row_id == 1);
  CHECK_THROWS_AS(area.stage("", {}), Error);
}

TEST_CASE("stage: 130 asset rows stage as 130 rows") {
  StagingArea area;
  std::vector<FieldMap> rows;
  for (int i = 1; i <= 130; ++i) rows.push_back({{"node_id", "dc-unit-" + std::to_string(i)}});
  CHECK(area.stage("wsn_assets", rows).size() == 130);
}

TEST_CASE("transform: identity keeps the field") {
  const auto m = transform_map_from_json(Json::parse(
      R"({"source_table":"t","field_maps":[{"source":"node_id"}],"coalesce_keys":["node_id"]})"));
  const auto out = transform(m, row("t", 1, {{"node_id", std::string("n1")}}));
  const auto& rec = std::get<TargetRecord>(out);
  CHECK(rec.fields == FieldMap{{"node_id", std::string("n1")}});
}

TEST_CASE("transform: f_to_c on \"98.6\" gives 37.0") {
  const auto m = transform_map_from_json(Json::parse(R"({"source_table":"t",
      "field_maps":[{"source":"id"},{"source":"temp_f","target":"temperature_c","coercion":"f_to_c"}],
      "coalesce_keys":["id"]})"));
  const auto out = transform(m, row("t", 1, {{"id", std::string("a")}, {"temp_f", std::string("98.6")}}));
  const double c = std::get<double>(std::get<TargetRecord>(out).fields.at("temperature_c"));
  CHECK(c == doctest::Approx((98.6 - 32.0) * 5.0 / 9.0).epsilon(1e-12));
  CHECK(c == doctest::Approx(37.0).epsilon(1e-12));
}

TEST_CASE("transform: coercion vocabulary") {
  CHECK(std::get<double>(*coerce(std::string(" 12.5 "), {Coercion::Kind::ToNumber})) == 12.5);
  CHECK(std::get<double>(*coerce(3.0, {Coercion::Kind::Scale, 0.001})) == doctest::Approx(0.003));
  CHECK(!coerce(std::string("warm"), {Coercion::Kind::ToNumber}));
  CHECK(!coerce(true, {Coercion::Kind::FahrenheitToCelsius}));
  CHECK(std::get<bool>(*coerce(true, {Coercion::Kind::Rename})));
}

TEST_CASE("transform: missing coalesce field is a MissingCoalesce error") {
  const auto out = transform(asset_map(), row("assets", 4, {{"site", std::string("hall")}}));
  const auto& err = std::get<RowError>(out);
  CHECK(err.code == RowErrorCode::MissingCoalesce);
  CHECK(err.row_id == 4);
}

TEST_CASE("transform: uncoercible value is CoercionFailed; unmapped fields are counted as drift") {
  const auto bad = transform(asset_map(), row("assets", 1, {{"node_id", std::string("n1")},
                                                             {"limit_f", std::string("hot")}}));
  CHECK(std::get<RowError>(bad).code == RowErrorCode::CoercionFailed);
  const auto ok = transform(asset_map(), row("assets", 2, {{"node_id", std::string("n1")},
                                                            {"serial", std::string("x")},
                                                            {"firmware", 3.0}}));
  CHECK(std::get<TargetRecord>(ok).dropped_fields == 2);
  CHECK_THROWS_AS(transform(asset_map(), row("elsewhere", 1, {{"node_id", std::string("n1")}})), Error);
}

TEST_CASE("transform map validation") {
  CHECK_THROWS_AS(transform_map_from_json(Json::parse(
                      R"({"source_table":"t","field_maps":[{"source":"a"}],"coalesce_keys":["b"]})")),
                  Error);
  CHECK_THROWS_AS(transform_map_from_json(Json::parse(
                      R"({"source_table":"t","field_maps":[{"source":"a"},{"source":"b","target":"a"}],
                          "coalesce_keys":["a"]})")),
                  Error);
  CHECK_THROWS_AS(transform_map_from_json(Json::parse(
                      R"({"source_table":"t","field_maps":[{"source":"a"}],"coalesce_keys":[]})")),
                  Error);
  const auto m = asset_map();
  CHECK(transform_map_from_json(to_json(m)).field_maps.size() == m.field_maps.size());
}

TEST_CASE("reconcile: empty list counts nothing") {
  cmdb::Cmdb db;
  const auto r = reconcile({}, db);
  CHECK(r.total() == 0);
}

TEST_CASE("reconcile: two records with the same key insert then update") {
  cmdb::Cmdb db;
  StagingArea area;
  const auto staged = area.stage("assets", {{{"node_id", std::string("n1")}, {"site", std::string("a")}},
                                            {{"node_id", std::string("n1")}, {"site", std::string("b")}}});
  const auto out = run_import(asset_map(), staged, db);
  CHECK(out.result.inserted == 1);
  CHECK(out.result.updated == 1);
  CHECK(db.size() == 1);
  CHECK(std::get<std::string>(db.find_by_node("n1")->attributes.at("location")) == "b");
}

TEST_CASE("reconcile: 130 assets into an empty CMDB are all inserts") {
  cmdb::Cmdb db;
  StagingArea area;
  std::vector<FieldMap> rows;
  for (int i = 1; i <= 130; ++i) rows.push_back({{"node_id", "dc-unit-" + std::to_string(i)}});
  const auto out = run_import(asset_map(), area.stage("assets", rows), db);
  CHECK(out.result.inserted == 130);
  CHECK(out.result.updated == 0);
  CHECK(db.size() == 130);
}

TEST_CASE("reconcile: a rejected row is errored and the rest still apply") {
  cmdb::Cmdb db;
  cmdb::CiDraft gw;
  gw.ci_class = cmdb::CiClass::Gateway;
  gw.attributes = {{"node_id", std::string("gw1")}};
  db.upsert_ci(gw);
  StagingArea area;
  const auto staged = area.stage("assets", {{{"node_id", std::string("gw1")}, {"site", std::string("x")}},
                                            {{"node_id", std::string("n2")}}});
  const auto before = db.to_json();
  const auto out = run_import(asset_map(), staged, db);
  CHECK(out.result.errored == 1);
  CHECK(out.result.inserted == 1);
  REQUIRE(out.result.row_errors.size() == 1);
  CHECK(out.result.row_errors[0].row_id == 1);
  CHECK(db.find_by_node("gw1")->attributes.count("location") == 0);
  CHECK(before["items"].size() + 1 == db.to_json()["items"].size());
}

TEST_CASE("skip_row turns a missing key into a skip") {
  auto m = asset_map();
  m.on_missing = OnMissing::SkipRow;
  cmdb::Cmdb db;
  StagingArea area;
  const auto out = run_import(m, area.stage("assets", {{{"site", std::string("x")}}, {{"node_id", std::string("n")}}}), db);
  CHECK(out.result.skipped == 1);
  CHECK(out.result.inserted == 1);
  CHECK(out.result.total() == 2);
}

TEST_CASE("telemetry-target maps validate records without touching the CMDB") {
  const auto m = transform_map_from_json(Json::parse(R"({"source_table":"feed","target":"telemetry",
      "field_maps":[{"source":"src","target":"source_id"},{"source":"v","target":"value","coercion":"to_number"}],
      "coalesce_keys":["source_id"]})"));
  cmdb::Cmdb db;
  StagingArea area;
  const auto out = run_import(m, area.stage("feed", {{{"src", std::string("a")}, {"v", std::string("1.5")}},
                                                     {{"src", 4.0}, {"v", 2.0}}}), db);
  CHECK(out.result.inserted == 1);
  CHECK(out.result.errored == 1);
  CHECK(db.size() == 0);
  REQUIRE(out.accepted.size() == 1);
  CHECK(to_telemetry(out.accepted[0], 5).value == 1.5);
}

TEST_CASE("property: accounting, idempotence and no partial writes under fuzzed rows") {
  Rng rng(2024);
  const auto m = asset_map();
  for (int trial = 0; trial < 50; ++trial) {
    cmdb::Cmdb db;
    // A few pre-existing CIs of another class make some rows collide.
    for (int g = 0; g < 3; ++g) {
      cmdb::CiDraft d;
      d.ci_class = cmdb::CiClass::Gateway;
      d.attributes = {{"node_id", "k" + std::to_string(g)}};
      db.upsert_ci(d);
    }
    std::vector<FieldMap> rows;
    const int n = testing::pick(rng, 0, 40);
    for (int i = 0; i < n; ++i) {
      FieldMap f;
      if (rng.uniform() < 0.9) f["node_id"] = "k" + std::to_string(testing::pick(rng, 0, 12));
      if (rng.uniform() < 0.7) f["site"] = "s" + std::to_string(testing::pick(rng, 0, 3));
      if (rng.uniform() < 0.5) f["limit_f"] = rng.uniform() < 0.8 ? Scalar{rng.uniform(100, 200)} : Scalar{std::string("?")};
      if (rng.uniform() < 0.3) f["noise"] = true;
      rows.push_back(std::move(f));
    }
    StagingArea area;
    const auto staged = area.stage("assets", rows);
    const auto snapshot_before = db.items();
    const auto first = run_import(m, staged, db);
    CHECK(first.result.total() == staged.size());
    // Errored rows changed nothing: every errored row's CI (if any) is as before.
    for (const auto& e : first.result.row_errors) {
      const auto& fields = staged.rows[e.row_id - 1].fields;
      const auto it = fields.find("node_id");
      if (it == fields.end()) continue;
      const auto* ci = db.find_by_node(scalar_to_string(it->second));
      if (ci && ci->ci_class == cmdb::CiClass::Gateway) {
        CHECK(ci->attributes == snapshot_before.at(ci->ci_id).attributes);
      }
    }
    const auto state = db.to_json();
    StagingArea again;
    const auto second = run_import(m, again.stage("assets", rows), db);
    CHECK(second.result.total() == staged.size());
    CHECK(second.result.inserted == 0);
    // Rows apply in order, so repeating the batch replays the same final
    // write for every key.
    CHECK(db.to_json()["items"] == state["items"]);
  }
}
