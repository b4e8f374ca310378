#include <charconv>
#include <json.hpp>

#include "cytobench/config.hpp"
#include "cytobench/dataset.hpp"
#include "cytobench/error.hpp"

namespace cytobench::io {

using Json = nlohmann::ordered_json;

namespace {

Json polygon_geometry(const Polygon& p) {
  Json ring = Json::array();
  for (const Point& v : p.vertices()) ring.push_back({v.x, v.y});
  ring.push_back({p.vertices().front().x, p.vertices().front().y});
  return {{"type", "Polygon"}, {"coordinates", Json::array({ring})}};
}

Polygon polygon_from_geometry(const Json& g) {
  if (!g.is_object() || g.value("type", "") != "Polygon") throw ParseError("geometry must be a Polygon");
  const Json& rings = g.at("coordinates");
  if (!rings.is_array() || rings.empty()) throw ParseError("Polygon without rings");
  std::vector<Point> pts;
  for (const Json& v : rings.front()) pts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  return Polygon(pts);
}

// RFC 4180: quote fields holding a comma, quote or line break.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> csv_rows(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted CSV field", text.size());
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string export_geojson(std::span<const CellInstance> instances) {
  Json features = Json::array();
  for (const CellInstance& c : instances) {
    Json f;
    f["type"] = "Feature";
    f["id"] = c.id;
    f["geometry"] = polygon_geometry(c.cell ? *c.cell : c.nucleus);
    if (c.cell) f["nucleusGeometry"] = polygon_geometry(c.nucleus);
    Json props;
    props["objectType"] = c.cell ? "cell" : "detection";
    props["name"] = c.id;
    props["patch_id"] = c.patch_id;
    props["source"] = std::string(to_string(c.source));
    if (c.confidence) props["confidence"] = *c.confidence;
    f["properties"] = std::move(props);
    features.push_back(std::move(f));
  }
  Json root;
  root["type"] = "FeatureCollection";
  root["features"] = std::move(features);
  return root.dump(1) + "\n";
}

std::vector<CellInstance> parse_geojson(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed GeoJSON: ") + e.what(), e.byte == 0 ? 0 : e.byte - 1);
  }
  std::vector<CellInstance> out;
  try {
    if (root.value("type", "") != "FeatureCollection") throw ParseError("expected a FeatureCollection");
    for (const Json& f : root.at("features")) {
      const Json& props = f.contains("properties") ? f.at("properties") : Json::object();
      const bool is_cell = f.contains("nucleusGeometry");
      Polygon outer = polygon_from_geometry(f.at("geometry"));
      CellInstance c{props.contains("name") ? props.at("name").get<std::string>() : f.value("id", ""),
                     props.value("patch_id", ""),
                     is_cell ? polygon_from_geometry(f.at("nucleusGeometry")) : outer,
                     std::nullopt,
                     std::nullopt,
                     props.value("source", "predicted") == "gold" ? Source::Gold : Source::Predicted};
      if (is_cell) c.cell = std::move(outer);
      if (props.contains("confidence")) c.confidence = props.at("confidence").get<double>();
      out.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("unexpected GeoJSON structure: ") + e.what());
  } catch (const GeometryError& e) {
    throw ParseError(std::string("invalid polygon in GeoJSON: ") + e.what());
  }
  return out;
}

std::string export_feature_csv(std::span<const morph::FeatureRecord> records) {
  std::string out = "instance_id,patch_id";
  for (std::string_view n : morph::kFeatureNames) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (const morph::FeatureRecord& r : records) {
    out += csv_field(r.instance_id);
    out += ',';
    out += csv_field(r.patch_id);
    for (double v : r.values) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<morph::FeatureRecord> parse_feature_csv(std::string_view text) {
  const auto rows = csv_rows(text);
  if (rows.empty()) throw ParseError("feature CSV without header");
  const auto& header = rows.front();
  if (header.size() != morph::kFeatureCount + 2 || header[0] != "instance_id" || header[1] != "patch_id") {
    throw ParseError("unexpected feature CSV header");
  }
  for (std::size_t f = 0; f < morph::kFeatureCount; ++f) {
    if (header[f + 2] != morph::kFeatureNames[f]) throw ParseError("unexpected feature column " + header[f + 2]);
  }
  std::vector<morph::FeatureRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) throw ParseError("feature CSV row " + std::to_string(r) + " has wrong width");
    morph::FeatureRecord rec;
    rec.instance_id = row[0];
    rec.patch_id = row[1];
    for (std::size_t f = 0; f < morph::kFeatureCount; ++f) {
      const std::string& s = row[f + 2];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), rec.values[f]);
      if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "' in feature CSV");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace cytobench::io
