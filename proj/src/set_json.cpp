#include "doubling/set_json.hpp"

#include <cmath>
#include <fstream>

#include "doubling/errors.hpp"

namespace doubling {
namespace {

double finite_number(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw InvalidArgument(std::string("set spec: missing numeric field '") + key + "'");
  }
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw InvalidArgument(std::string("set spec: non-finite '") + key + "'");
  return v;
}

std::vector<SetSpec> parts_from_json(const Json& j) {
  if (!j.contains("parts") || !j.at("parts").is_array()) throw InvalidArgument("set spec: 'parts' must be an array");
  std::vector<SetSpec> parts;
  for (const auto& p : j.at("parts")) parts.push_back(set_from_json(p));
  return parts;
}

}  // namespace

Json set_to_json(const SetSpec& s) {
  Json j;
  if (const auto* c = std::get_if<Cap>(&s.node)) {
    j["type"] = "cap";
    j["axis"] = {c->axis.x(), c->axis.y(), c->axis.z()};
    j["theta"] = c->theta;
  } else if (const auto* b = std::get_if<Ball>(&s.node)) {
    j["type"] = "ball";
    j["radius"] = b->radius;
  } else {
    const auto& parts = std::holds_alternative<Union>(s.node) ? std::get<Union>(s.node).parts
                                                               : std::get<Intersection>(s.node).parts;
    j["type"] = std::holds_alternative<Union>(s.node) ? "union" : "intersection";
    j["parts"] = Json::array();
    for (const auto& p : parts) j["parts"].push_back(set_to_json(p));
  }
  return j;
}

SetSpec set_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw InvalidArgument("set spec: node must be an object with a string 'type'");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "cap") {
    const Json& a = j.contains("axis") ? j.at("axis") : Json();
    if (!a.is_array() || a.size() != 3) throw InvalidArgument("set spec: cap 'axis' must be [x, y, z]");
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) {
      if (!a[i].is_number()) throw InvalidArgument("set spec: cap axis entries must be numbers");
      v[i] = a[i].get<double>();
      if (!std::isfinite(v[i])) throw InvalidArgument("set spec: non-finite axis component");
    }
    return make_cap(UnitVec3::normalized(v), finite_number(j, "theta"));
  }
  if (type == "ball") return make_ball(finite_number(j, "radius"));
  if (type == "union") return make_union(parts_from_json(j));
  if (type == "intersection") return make_intersection(parts_from_json(j));
  throw InvalidArgument("set spec: unknown node type '" + type + "'");
}

SetSpec load_set_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open set spec file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("set spec file " + path + ": " + e.what());
  }
  return set_from_json(j);
}

}  // namespace doubling
