#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <json.hpp>

#include "cytobench/dataset.hpp"
#include "cytobench/error.hpp"

using namespace cytobench;
using namespace cytobench::io;

namespace {

std::string flat(std::initializer_list<double> xy) {
  std::string s = "[[";
  bool first = true;
  for (double v : xy) {
    if (!first) s += ",";
    s += std::to_string(v);
    first = false;
  }
  return s + "]]";
}

std::string coco(const std::string& annotations) {
  return R"({"images":[{"id":1,"file_name":"P7/p7_0001.png","width":64,"height":64}],
  "categories":[{"id":1,"name":"Nucleus"},{"id":2,"name":"Cell"}],
  "annotations":[)" + annotations + "]}";
}

std::string ann(int id, int cat, const std::string& seg) {
  return R"({"id":)" + std::to_string(id) + R"(,"image_id":1,"category_id":)" + std::to_string(cat) +
         R"(,"segmentation":)" + seg + "}";
}

std::vector<PatchInfo> patients(int n, int patches_each = 1) {
  std::vector<PatchInfo> out;
  for (int p = 0; p < n; ++p) {
    for (int k = 0; k < patches_each; ++k) {
      PatchInfo info;
      info.patient_id = "pt" + std::to_string(p);
      info.patch_id = info.patient_id + "_" + std::to_string(k);
      out.push_back(info);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("empty annotations give no instances and no errors") {
  const CocoDataset ds = parse_coco(coco(""));
  CHECK(ds.patches.size() == 1);
  CHECK(ds.instances.empty());
  CHECK(ds.rejected.empty());
  CHECK(ds.warnings.empty());
  CHECK(ds.patches[0].patch_id == "p7_0001");
  CHECK(ds.patches[0].patient_id == "P7");
}

TEST_CASE("square nucleus in a square cell is paired") {
  const CocoDataset ds = parse_coco(coco(ann(1, 1, flat({10, 10, 14, 10, 14, 14, 10, 14})) + "," +
                                         ann(2, 2, flat({4, 4, 20, 4, 20, 20, 4, 20}))));
  REQUIRE(ds.instances.size() == 1);
  CHECK(ds.instances[0].kind() == InstanceClass::WholeCell);
  CHECK(ds.instances[0].id == "1");
  CHECK(ds.instances[0].source == Source::Gold);
  CHECK(ds.instances[0].cell->area() == doctest::Approx(256));
  CHECK(ds.unpaired_cells.empty());
  CHECK(ds.nucleus_count() == 1);
  CHECK(ds.cell_count() == 1);
}

TEST_CASE("nucleus centroid in two cells stays unpaired and is logged") {
  const CocoDataset ds = parse_coco(coco(ann(1, 1, flat({10, 10, 14, 10, 14, 14, 10, 14})) + "," +
                                         ann(2, 2, flat({4, 4, 20, 4, 20, 20, 4, 20})) + "," +
                                         ann(3, 2, flat({8, 8, 30, 8, 30, 30, 8, 30}))));
  REQUIRE(ds.instances.size() == 1);
  CHECK(ds.instances[0].kind() == InstanceClass::NucleusOnly);
  CHECK(ds.unpaired_cells.size() == 2);
  CHECK(ds.cell_count() == 2);
  REQUIRE(ds.warnings.size() == 1);
  CHECK(ds.warnings[0].find("nucleus 1") != std::string::npos);
}

TEST_CASE("two nuclei in one cell leave the cell unpaired") {
  const CocoDataset ds = parse_coco(coco(ann(1, 1, flat({6, 6, 9, 6, 9, 9, 6, 9})) + "," +
                                         ann(2, 1, flat({14, 14, 17, 14, 17, 17, 14, 17})) + "," +
                                         ann(3, 2, flat({4, 4, 20, 4, 20, 20, 4, 20}))));
  CHECK(ds.instances.size() == 2);
  for (const auto& c : ds.instances) CHECK_FALSE(c.cell);
  CHECK(ds.unpaired_cells.size() == 1);
  CHECK(ds.warnings.size() == 2);
}

TEST_CASE("malformed JSON reports a byte offset") {
  const std::string text = R"({"images": [ , ]})";
  try {
    parse_coco(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    
    CHECK(e.byte_offset() == 13);
  }
  CHECK_THROWS_AS(parse_coco(R"({"images":[]})"), ParseError);
}

TEST_CASE("self-intersecting polygon is rejected by id") {
  const CocoDataset ds = parse_coco(coco(ann(41, 1, flat({0, 0, 10, 10, 10, 0, 0, 10})) + "," +
                                         ann(42, 1, flat({20, 20, 24, 20, 24, 24}))));
  REQUIRE(ds.rejected.size() == 1);
  CHECK(ds.rejected[0].id == "41");
  REQUIRE(ds.instances.size() == 1);
  CHECK(ds.instances[0].id == "42");
}

TEST_CASE("RLE and unknown categories are rejected") {
  std::string text = coco(R"({"id":5,"image_id":1,"category_id":1,"segmentation":{"counts":[1,2],"size":[64,64]}},)" +
                          ann(6, 9, flat({1, 1, 5, 1, 5, 5})));
  const CocoDataset ds = parse_coco(text);
  CHECK(ds.rejected.size() == 2);
  CHECK(ds.instances.empty());
}

TEST_CASE("write_coco round trips through parse_coco") {
  PatchInfo p{3, "a1", "pt", "pt/a1.png", 64, 64};
  std::vector<CellInstance> in;
  in.push_back({"x", "a1", make_rectangle(10, 10, 4, 4), make_rectangle(5, 5, 15, 15), 0.75, Source::Predicted});
  in.push_back({"y", "a1", make_rectangle(40, 40, 5, 3), std::nullopt, 0.5, Source::Predicted});
  const CocoDataset ds = parse_coco(write_coco(std::span(&p, 1), in), Source::Predicted);
  REQUIRE(ds.instances.size() == 2);
  CHECK(ds.rejected.empty());
  CHECK(ds.instances[0].id == "y");  // nested pairs follow the plain nuclei
  CHECK(ds.instances[1].id == "x");
  CHECK(ds.instances[1].cell == in[0].cell);
  CHECK(ds.instances[1].nucleus == in[0].nucleus);
  CHECK(*ds.instances[1].confidence == 0.75);
  CHECK(ds.patches[0].patient_id == "pt");
}

TEST_CASE("parsed whole cells satisfy centroid containment") {
  std::string anns;
  int id = 1;
  for (int k = 0; k < 6; ++k) {
    const double x = 2 + 10 * k;
    if (!anns.empty()) anns += ",";
    anns += ann(id++, 1, flat({x + 3, 3, x + 6, 3, x + 6, 6, x + 3, 6})) + ",";
    anns += ann(id++, 2, flat({x, 0, x + 9, 0, x + 9, 9, x, 9}));
  }
  const CocoDataset ds = parse_coco(coco(anns));
  CHECK(ds.instances.size() == 6);
  for (const auto& c : ds.instances) {
    REQUIRE(c.cell);
    CHECK(c.cell->contains(c.nucleus.centroid()));
  }
}

TEST_CASE("ten single-patch patients split 7/2/1 or 7/1/2") {
  const auto ps = patients(10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DatasetSplit s = split_by_patient(ps, {0.7, 0.15, 0.15}, seed);
    CHECK(s.train.size() == 7);
    const bool ok = (s.validation.size() == 2 && s.test.size() == 1) || (s.validation.size() == 1 && s.test.size() == 2);
    CHECK(ok);
  }
}

TEST_CASE("split is deterministic, disjoint and patient-atomic") {
  std::vector<PatchInfo> ps;
  for (int p = 0; p < 23; ++p) {
    for (int k = 0; k <= p % 5; ++k) {
      ps.push_back({0, "pt" + std::to_string(p) + "_" + std::to_string(k), "pt" + std::to_string(p), "", 0, 0});
    }
  }
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    const DatasetSplit a = split_by_patient(ps, {0.7, 0.15, 0.15}, seed);
    const DatasetSplit b = split_by_patient(ps, {0.7, 0.15, 0.15}, seed);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
    CHECK(a.train.size() + a.validation.size() + a.test.size() == ps.size());

    std::map<std::string, std::string> patient_of;
    for (const auto& p : ps) patient_of[p.patch_id] = p.patient_id;
    std::array<std::set<std::string>, 3> pats;
    std::set<std::string> all;
    int k = 0;
    for (const auto* list : {&a.train, &a.validation, &a.test}) {
      for (const auto& id : *list) {
        pats[static_cast<std::size_t>(k)].insert(patient_of[id]);
        CHECK(all.insert(id).second);
      }
      ++k;
    }
    for (int i = 0; i < 3; ++i) {
      CHECK_FALSE(pats[static_cast<std::size_t>(i)].empty());
      for (int j = i + 1; j < 3; ++j) {
        for (const auto& pt : pats[static_cast<std::size_t>(i)]) CHECK(pats[static_cast<std::size_t>(j)].count(pt) == 0);
      }
    }
    // Within one patient group (at most 5 patches) of the target.
    const double n = static_cast<double>(ps.size());
    CHECK(std::abs(a.train.size() - 0.7 * n) <= 5.0);
    CHECK(std::abs(a.validation.size() - 0.15 * n) <= 5.0);
    CHECK(std::abs(a.test.size() - 0.15 * n) <= 5.0);
  }
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(split_by_patient(patients(1, 4), {0.7, 0.15, 0.15}, 0), InvalidArgument);
  CHECK_THROWS_AS(split_by_patient(patients(2), {0.7, 0.15, 0.15}, 0), InvalidArgument);
  CHECK_THROWS_AS(split_by_patient(patients(5), {0.7, 0.2, 0.2}, 0), InvalidArgument);
  CHECK(parse_split_name("val") == SplitName::Validation);
  CHECK(to_string(SplitName::Test) == "test");
  CHECK_THROWS_AS(parse_split_name("dev"), InvalidArgument);
}

TEST_CASE("geojson structure") {
  const std::string empty = export_geojson({});
  const auto j = nlohmann::json::parse(empty);
  CHECK(j["type"] == "FeatureCollection");
  CHECK(j["features"].is_array());
  CHECK(j["features"].empty());
  CHECK(parse_geojson(empty).empty());

  std::vector<CellInstance> one{{"c1", "p", make_rectangle(2, 2, 3, 3), make_rectangle(0, 0, 8, 8), 0.9, Source::Predicted}};
  const auto g = nlohmann::json::parse(export_geojson(one));
  REQUIRE(g["features"].size() == 1);
  const auto& ring = g["features"][0]["geometry"]["coordinates"][0];
  CHECK(ring.size() == 5);
  CHECK(ring.front() == ring.back());
  CHECK(g["features"][0]["properties"]["objectType"] == "cell");
  const auto& nring = g["features"][0]["nucleusGeometry"]["coordinates"][0];
  CHECK(nring.front() == nring.back());
}

TEST_CASE("geojson round trip is bit-exact") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CellInstance> in;
  for (int i = 0; i < 100; ++i) {
    const Point c{u(rng) * 256, u(rng) * 256};
    const double r = 1 + u(rng) * 10;
    Polygon nuc = make_regular_polygon(c, r, 5 + i % 7, u(rng));
    std::optional<Polygon> cell;
    if (i % 2 == 0) cell = make_regular_polygon(c, r * (1.5 + u(rng)), 8 + i % 5, u(rng));
    std::optional<double> conf;
    if (i % 3 != 0) conf = u(rng);
    in.push_back({"i" + std::to_string(i), "patch,\"" + std::to_string(i % 4), std::move(nuc), std::move(cell), conf,
                  i % 5 == 0 ? Source::Gold : Source::Predicted});
  }
  const auto out = parse_geojson(export_geojson(in));
  REQUIRE(out.size() == in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(out[i].id == in[i].id);
    CHECK(out[i].patch_id == in[i].patch_id);
    CHECK(out[i].nucleus == in[i].nucleus);
    CHECK(out[i].cell.has_value() == in[i].cell.has_value());
    if (in[i].cell) CHECK(out[i].cell == in[i].cell);
    CHECK(out[i].confidence == in[i].confidence);
    CHECK(out[i].source == in[i].source);
  }
}

TEST_CASE("feature csv") {
  const std::string header_only = export_feature_csv({});
  CHECK(std::count(header_only.begin(), header_only.end(), '\n') == 1);
  CHECK(header_only.rfind("instance_id,patch_id,area_um2,perimeter_um,", 0) == 0);
  CHECK(std::count(header_only.begin(), header_only.end(), ',') == 18);
  CHECK(parse_feature_csv(header_only).empty());

  morph::FeatureRecord r;
  r.instance_id = "n,1";
  r.patch_id = "say \"hi\"";
  for (std::size_t i = 0; i < morph::kFeatureCount; ++i) r.values[i] = 1234567.125 / static_cast<double>(i + 1) - 3.0;
  const std::string one = export_feature_csv(std::span(&r, 1));
  CHECK(std::count(one.begin(), one.end(), '\n') == 2);
  CHECK(one.find("\"n,1\",\"say \"\"hi\"\"\"") != std::string::npos);
  CHECK(one.find("1234564.125") != std::string::npos);  // no thousands separator
  const auto back = parse_feature_csv(one);
  REQUIRE(back.size() == 1);
  CHECK(back[0].instance_id == r.instance_id);
  CHECK(back[0].patch_id == r.patch_id);
  CHECK(back[0].values == r.values);
  CHECK_THROWS_AS(parse_feature_csv("a,b\n"), ParseError);
}

TEST_CASE("write_file replaces atomically") {
  const auto dir = std::filesystem::temp_directory_path() / "cytobench_test_dataset";
  std::filesystem::remove_all(dir);
  write_file(dir / "sub" / "x.txt", "one");
  write_file(dir / "sub" / "x.txt", "two");
  CHECK(read_file(dir / "sub" / "x.txt") == "two");
  CHECK_FALSE(std::filesystem::exists(dir / "sub" / "x.txt.tmp"));
  CHECK_THROWS_AS(read_file(dir / "missing"), InvalidArgument);
  std::filesystem::remove_all(dir);
}
