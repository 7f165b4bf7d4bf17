// JSON (de)serialization of meshes and displacement/reaction datasets.

#include <istream>
#include <ostream>

#include <json.hpp>

#include "hyperfit/error.hpp"
#include "hyperfit/kinematics.hpp"

namespace hyperfit {

using nlohmann::json;

namespace {

json parse(std::istream& in, const char* what) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("parse error in ") + what + ": " + e.what());
  }
}

Vec2 to_vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected a 2-component array");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Mesh load_mesh(std::istream& in) {
  const json doc = parse(in, "mesh");
  Mesh mesh;
  try {
    for (const auto& p : doc.at("nodes")) mesh.nodes.push_back(to_vec2(p));
    const auto& elements = doc.at("elements");
    const auto kind = elements.at("kind").get<std::string>();
    if (kind == "quad4") {
      mesh.kind = ElementKind::Quad4;
    } else if (kind == "tri3") {
      mesh.kind = ElementKind::Tri3;
    } else {
      throw ConfigError("unknown element kind '" + kind + "'");
    }
    const auto npe = static_cast<std::size_t>(nodes_per_element(mesh.kind));
    for (const auto& conn : elements.at("connectivity")) {
      if (conn.size() != npe) throw ConfigError("element connectivity of wrong length");
      for (const auto& id : conn) mesh.connectivity.push_back(id.get<int>());
    }
    if (doc.contains("node_sets")) {
      for (const auto& [name, ids] : doc.at("node_sets").items()) {
        mesh.node_sets[name] = ids.get<std::vector<int>>();
      }
    }
    mesh.thickness = doc.at("thickness").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parse error in mesh: ") + e.what());
  }
  normalize_mesh(mesh);
  return mesh;
}

void save_mesh(const Mesh& mesh, std::ostream& out) {
  json doc;
  doc["nodes"] = json::array();
  for (const Vec2& p : mesh.nodes) doc["nodes"].push_back({p.x(), p.y()});
  json conn = json::array();
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.element(e);
    conn.push_back(std::vector<int>(el.begin(), el.end()));
  }
  doc["elements"] = {{"kind", to_string(mesh.kind)}, {"connectivity", conn}};
  doc["node_sets"] = json::object();
  for (const auto& [name, ids] : mesh.node_sets) doc["node_sets"][name] = ids;
  doc["thickness"] = mesh.thickness;
  out << doc.dump() << '\n';
}

Dataset load_dataset(std::istream& in) {
  const json doc = parse(in, "dataset");
  Dataset data;
  try {
    for (const auto& s : doc.at("steps")) {
      LoadStep step;
      step.step_id = s.at("step_id").get<int>();
      for (const auto& u : s.at("displacements")) step.displacements.push_back(to_vec2(u));
      if (s.contains("reactions")) {
        for (const auto& [name, r] : s.at("reactions").items()) {
          Reaction reaction;
          reaction.force = to_vec2(r.at("force"));
          const auto mask = r.at("mask").get<std::vector<bool>>();
          if (mask.size() != 2) throw ConfigError("reaction mask must have 2 entries");
          reaction.mask = {mask[0], mask[1]};
          step.reactions[name] = reaction;
        }
      }
      data.steps.push_back(std::move(step));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parse error in dataset: ") + e.what());
  }
  return data;
}

void save_dataset(const Dataset& data, std::ostream& out) {
  json steps = json::array();
  for (const auto& step : data.steps) {
    json s;
    s["step_id"] = step.step_id;
    s["displacements"] = json::array();
    for (const Vec2& u : step.displacements) s["displacements"].push_back({u.x(), u.y()});
    s["reactions"] = json::object();
    for (const auto& [name, r] : step.reactions) {
      s["reactions"][name] = {{"force", {r.force.x(), r.force.y()}}, {"mask", {r.mask[0], r.mask[1]}}};
    }
    steps.push_back(std::move(s));
  }
  out << json{{"steps", steps}}.dump() << '\n';
}

}  // namespace hyperfit
