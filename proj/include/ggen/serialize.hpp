#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "ggen/bvh.hpp"
#include "ggen/common.hpp"
#include "ggen/features.hpp"

namespace ggen {

using json = nlohmann::ordered_json;

inline json skeleton_to_json(const Skeleton& skel) {
  json joints = json::array();
  for (const Joint& j : skel.joints) {
    json channels = json::array();
    for (Channel c : j.channels) channels.push_back(channel_name(c));
    json entry = {{"name", j.name},
                  {"parent", j.parent},
                  {"offset", {j.offset.x(), j.offset.y(), j.offset.z()}},
                  {"channels", channels}};
    if (j.has_end_site) entry["end_site"] = {j.end_site.x(), j.end_site.y(), j.end_site.z()};
    joints.push_back(std::move(entry));
  }
  return json{{"joints", std::move(joints)}};
}

inline Skeleton skeleton_from_json(const json& doc) {
  if (!doc.contains("joints") || !doc["joints"].is_array())
    throw input_error("skeleton: missing joints array");
  Skeleton skel;
  for (const json& entry : doc["joints"]) {
    Joint j;
    j.name = entry.at("name").get<std::string>();
    j.parent = entry.at("parent").get<int>();
    const auto& off = entry.at("offset");
    if (off.size() != 3) throw input_error("skeleton: offset needs three numbers");
    j.offset = Vec3(off[0].get<double>(), off[1].get<double>(), off[2].get<double>());
    for (const json& c : entry.at("channels"))
      j.channels.push_back(detail::parse_channel(c.get<std::string>()));
    if (entry.contains("end_site")) {
      const auto& es = entry["end_site"];
      if (es.size() != 3) throw input_error("skeleton: end_site needs three numbers");
      j.has_end_site = true;
      j.end_site = Vec3(es[0].get<double>(), es[1].get<double>(), es[2].get<double>());
    }
    skel.joints.push_back(std::move(j));
  }
  if (skel.joints.empty()) throw input_error("skeleton: no joints");
  if (skel.joints[0].parent != -1) throw input_error("skeleton: first joint must be the root");
  for (std::size_t i = 1; i < skel.joints.size(); ++i) {
    const int p = skel.joints[i].parent;
    if (p < 0 || p >= static_cast<int>(i))
      throw input_error("skeleton: joint parents must precede their children");
  }
  return skel;
}

}  // namespace ggen
