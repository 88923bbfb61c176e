#include "taxelsim/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "taxelsim/signals.hpp"

namespace taxelsim {

using nlohmann::json;

SceneError::SceneError(Kind kind, const std::string& what, std::string path, std::size_t line,
                       std::size_t column, std::vector<Violation> violations)
    : std::runtime_error(what),
      kind_(kind),
      path_(std::move(path)),
      line_(line),
      column_(column),
      violations_(std::move(violations)) {}

namespace {

// ---------------------------------------------------------------------------
// Scene reading

[[noreturn]] void schema_error(const std::string& path, const std::string& message) {
  throw SceneError(SceneError::Kind::Schema, path + ": " + message, path);
}

std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

std::string dot(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void only_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) schema_error(path, "expected an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      schema_error(dot(path, k), "unknown field");
    }
  }
}

const json& required(const json& j, const std::string& path, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) schema_error(dot(path, key), "missing required field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  return j.get<double>();
}

double number_field(const json& j, const std::string& path, const std::string& key) {
  return number(required(j, path, key), dot(path, key));
}

double number_or(const json& j, const std::string& path, const std::string& key, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, dot(path, key));
}

std::size_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    schema_error(path, "expected a nonnegative integer");
  }
  return j.get<std::size_t>();
}

std::string string_field(const json& j, const std::string& path, const std::string& key) {
  const json& v = required(j, path, key);
  if (!v.is_string()) schema_error(dot(path, key), "expected a string");
  return v.get<std::string>();
}

const json& array_field(const json& j, const std::string& path, const std::string& key) {
  const json& v = required(j, path, key);
  if (!v.is_array()) schema_error(dot(path, key), "expected an array");
  return v;
}

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) schema_error(path, "expected an array of 3 numbers");
  return Vec3(number(j[0], at(path, 0)), number(j[1], at(path, 1)), number(j[2], at(path, 2)));
}

Pose pose(const json& j, const std::string& path) {
  only_keys(j, path, {"translation", "rotation"});
  Vec3 t = Vec3::Zero();
  Quaternion q = Quaternion::Identity();
  if (auto it = j.find("translation"); it != j.end()) t = vec3(*it, dot(path, "translation"));
  if (auto it = j.find("rotation"); it != j.end()) {
    const std::string rp = dot(path, "rotation");
    if (!it->is_array() || it->size() != 4) schema_error(rp, "expected a quaternion [w, x, y, z]");
    q = Quaternion(number((*it)[0], at(rp, 0)), number((*it)[1], at(rp, 1)),
                   number((*it)[2], at(rp, 2)), number((*it)[3], at(rp, 3)));
  }
  try {
    return Pose(q, t);
  } catch (const std::invalid_argument& e) {
    schema_error(path, e.what());
  }
}

Pose pose_or_identity(const json& j, const std::string& path, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? Pose() : pose(*it, dot(path, key));
}

Taxel taxel_params(const json& j, const std::string& path) {
  Taxel t;
  t.radius = number_field(j, path, "radius");
  t.stiffness = number_field(j, path, "stiffness");
  t.damping = number_or(j, path, "damping", 0.0);
  t.max_deflection = number_field(j, path, "max_deflection");
  return t;
}

Attachment attachment(const json& j, const std::string& path) {
  const std::string type = string_field(j, path, "type");
  if (type == "world") {
    only_keys(j, path, {"type", "pose"});
    return WorldFixed{pose_or_identity(j, path, "pose")};
  }
  if (type == "link") {
    only_keys(j, path, {"type", "robot", "link", "pose"});
    return LinkAttached{string_field(j, path, "robot"), string_field(j, path, "link"),
                        pose_or_identity(j, path, "pose")};
  }
  schema_error(dot(path, "type"), "expected \"world\" or \"link\"");
}

SkinPatch patch(const json& j, const std::string& path) {
  only_keys(j, path, {"id", "attachment", "grid", "taxels", "grid_dims"});
  SkinPatch p;
  p.id = string_field(j, path, "id");
  if (auto it = j.find("attachment"); it != j.end()) p.attachment = attachment(*it, dot(path, "attachment"));

  const bool has_grid = j.contains("grid");
  const bool has_taxels = j.contains("taxels");
  if (has_grid == has_taxels) schema_error(path, "exactly one of \"grid\" or \"taxels\" is required");

  if (has_grid) {
    if (j.contains("grid_dims")) schema_error(dot(path, "grid_dims"), "not allowed with \"grid\"");
    const std::string gp = dot(path, "grid");
    const json& g = j["grid"];
    only_keys(g, gp, {"rows", "cols", "spacing", "taxel"});
    const std::size_t rows = count(required(g, gp, "rows"), dot(gp, "rows"));
    const std::size_t cols = count(required(g, gp, "cols"), dot(gp, "cols"));
    const double spacing = number_field(g, gp, "spacing");
    const std::string tp = dot(gp, "taxel");
    const json& tj = required(g, gp, "taxel");
    only_keys(tj, tp, {"radius", "stiffness", "damping", "max_deflection"});
    const Taxel proto = taxel_params(tj, tp);
    p.grid_dims = GridDims{rows, cols};
    p.taxels.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        Taxel t = proto;
        t.rest_center = Vec3(static_cast<double>(c) * spacing, static_cast<double>(r) * spacing, 0.0);
        t.normal = Vec3::UnitZ();
        t.grid_index = GridIndex{r, c};
        p.taxels.push_back(t);
      }
    }
    return p;
  }

  const std::string tsp = dot(path, "taxels");
  const json& ts = array_field(j, path, "taxels");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::string tp = at(tsp, i);
    only_keys(ts[i], tp, {"center", "normal", "radius", "stiffness", "damping", "max_deflection",
                          "grid_index"});
    Taxel t = taxel_params(ts[i], tp);
    t.rest_center = vec3(required(ts[i], tp, "center"), dot(tp, "center"));
    if (auto it = ts[i].find("normal"); it != ts[i].end()) t.normal = vec3(*it, dot(tp, "normal"));
    if (auto it = ts[i].find("grid_index"); it != ts[i].end()) {
      const std::string gp = dot(tp, "grid_index");
      if (!it->is_array() || it->size() != 2) schema_error(gp, "expected [row, col]");
      t.grid_index = GridIndex{count((*it)[0], at(gp, 0)), count((*it)[1], at(gp, 1))};
    }
    p.taxels.push_back(t);
  }
  if (auto it = j.find("grid_dims"); it != j.end()) {
    const std::string gp = dot(path, "grid_dims");
    if (!it->is_array() || it->size() != 2) schema_error(gp, "expected [rows, cols]");
    p.grid_dims = GridDims{count((*it)[0], at(gp, 0)), count((*it)[1], at(gp, 1))};
  }
  return p;
}

SphereUnionObject object(const json& j, const std::string& path) {
  only_keys(j, path, {"id", "spheres", "mode", "pose", "waypoints", "mass"});
  SphereUnionObject o;
  o.id = string_field(j, path, "id");
  const std::string sp = dot(path, "spheres");
  const json& spheres = array_field(j, path, "spheres");
  for (std::size_t i = 0; i < spheres.size(); ++i) {
    const std::string p = at(sp, i);
    only_keys(spheres[i], p, {"center", "radius"});
    o.spheres.push_back({vec3(required(spheres[i], p, "center"), dot(p, "center")),
                         number_field(spheres[i], p, "radius")});
  }

  const std::string mode = string_field(j, path, "mode");
  auto forbid = [&](const char* key) {
    if (j.contains(key)) schema_error(dot(path, key), "not allowed for mode \"" + mode + "\"");
  };
  if (mode == "fixed") {
    forbid("waypoints");
    forbid("mass");
    o.mode = FixedMode{pose_or_identity(j, path, "pose")};
  } else if (mode == "trajectory") {
    forbid("pose");
    forbid("mass");
    const std::string wp = dot(path, "waypoints");
    const json& ws = array_field(j, path, "waypoints");
    ScriptedMode m;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      const std::string p = at(wp, i);
      only_keys(ws[i], p, {"time", "pose"});
      m.trajectory.waypoints.push_back({number_field(ws[i], p, "time"), pose_or_identity(ws[i], p, "pose")});
    }
    o.mode = std::move(m);
  } else if (mode == "settle") {
    forbid("waypoints");
    SettleMode m{pose_or_identity(j, path, "pose"), std::nullopt};
    if (auto it = j.find("mass"); it != j.end()) m.mass = number(*it, dot(path, "mass"));
    o.mode = m;
  } else {
    schema_error(dot(path, "mode"), "expected \"fixed\", \"trajectory\" or \"settle\"");
  }
  return o;
}

Robot robot(const json& j, const std::string& path) {
  only_keys(j, path, {"id", "base_pose", "links", "joints", "trajectories"});
  Robot r;
  r.id = string_field(j, path, "id");
  r.base_pose = pose_or_identity(j, path, "base_pose");
  const json& links = array_field(j, path, "links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (!links[i].is_string()) schema_error(at(dot(path, "links"), i), "expected a string");
    r.links.push_back(links[i].get<std::string>());
  }
  if (auto it = j.find("joints"); it != j.end()) {
    const std::string jsp = dot(path, "joints");
    if (!it->is_array()) schema_error(jsp, "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& jj = (*it)[i];
      const std::string p = at(jsp, i);
      only_keys(jj, p, {"id", "type", "parent", "child", "origin", "axis"});
      Joint joint;
      joint.id = string_field(jj, p, "id");
      const std::string type = string_field(jj, p, "type");
      if (type == "revolute") {
        joint.kind = JointKind::Revolute;
      } else if (type == "prismatic") {
        joint.kind = JointKind::Prismatic;
      } else {
        schema_error(dot(p, "type"), "expected \"revolute\" or \"prismatic\"");
      }
      joint.parent_link = string_field(jj, p, "parent");
      joint.child_link = string_field(jj, p, "child");
      joint.origin = pose_or_identity(jj, p, "origin");
      joint.axis = vec3(required(jj, p, "axis"), dot(p, "axis"));
      r.joints.push_back(std::move(joint));
    }
  }
  if (auto it = j.find("trajectories"); it != j.end()) {
    const std::string tp = dot(path, "trajectories");
    if (!it->is_object()) schema_error(tp, "expected an object keyed by joint id");
    for (const auto& [jid, pts] : it->items()) {
      const std::string p = dot(tp, jid);
      if (!pts.is_array()) schema_error(p, "expected an array of [time, q] pairs");
      std::vector<ScalarWaypoint> w;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!pts[i].is_array() || pts[i].size() != 2) schema_error(at(p, i), "expected [time, q]");
        w.push_back({number(pts[i][0], at(at(p, i), 0)), number(pts[i][1], at(at(p, i), 1))});
      }
      r.joint_trajectories.emplace(jid, std::move(w));
    }
  }
  return r;
}

template <typename F>
void each(const json& root, const std::string& key, F&& fn) {
  auto it = root.find(key);
  if (it == root.end()) return;
  if (!it->is_array()) schema_error(key, "expected an array");
  for (std::size_t i = 0; i < it->size(); ++i) fn((*it)[i], at(key, i));
}

// ---------------------------------------------------------------------------
// Scene writing

using ojson = nlohmann::ordered_json;

ojson to_json(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

ojson to_json(const Pose& p) {
  const auto& q = p.rotation();
  return ojson{{"translation", to_json(p.translation())},
               {"rotation", ojson::array({q.w(), q.x(), q.y(), q.z()})}};
}

}  // namespace

World parse_scene_unvalidated(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points at the offending character.
    const std::size_t offset = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw SceneError(SceneError::Kind::Syntax,
                     "syntax error at line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + e.what(),
                     {}, line, column);
  }

  only_keys(root, "", {"world", "patches", "objects", "robots"});
  World world;
  const json& w = required(root, "", "world");
  only_keys(w, "world", {"gravity", "dt", "duration"});
  world.gravity = vec3(required(w, "world", "gravity"), "world.gravity");
  world.dt = number_field(w, "world", "dt");
  world.duration = number_field(w, "world", "duration");

  each(root, "robots", [&](const json& j, const std::string& p) { world.robots.push_back(robot(j, p)); });
  each(root, "patches", [&](const json& j, const std::string& p) { world.patches.push_back(patch(j, p)); });
  each(root, "objects", [&](const json& j, const std::string& p) { world.objects.push_back(object(j, p)); });
  return world;
}

World parse_scene(std::string_view text) {
  World world = parse_scene_unvalidated(text);
  auto violations = validate_world(world);
  if (!violations.empty()) {
    std::string what = "scene failed validation:";
    for (const auto& v : violations) what += "\n  " + v.path + ": " + v.message;
    const std::string first = violations.front().path;
    throw SceneError(SceneError::Kind::Validation, what, first, 0, 0, std::move(violations));
  }
  return world;
}

std::string serialize_scene(const World& world) {
  ojson root;
  root["world"] = ojson{{"gravity", to_json(world.gravity)},
                        {"dt", world.dt},
                        {"duration", world.duration}};

  ojson robots = ojson::array();
  for (const auto& r : world.robots) {
    ojson joints = ojson::array();
    for (const auto& j : r.joints) {
      joints.push_back(ojson{{"id", j.id},
                             {"type", j.kind == JointKind::Revolute ? "revolute" : "prismatic"},
                             {"parent", j.parent_link},
                             {"child", j.child_link},
                             {"origin", to_json(j.origin)},
                             {"axis", to_json(j.axis)}});
    }
    ojson trajectories = ojson::object();
    for (const auto& [jid, pts] : r.joint_trajectories) {
      ojson arr = ojson::array();
      for (const auto& p : pts) arr.push_back(ojson::array({p.time, p.value}));
      trajectories[jid] = std::move(arr);
    }
    robots.push_back(ojson{{"id", r.id},
                           {"base_pose", to_json(r.base_pose)},
                           {"links", r.links},
                           {"joints", std::move(joints)},
                           {"trajectories", std::move(trajectories)}});
  }
  root["robots"] = std::move(robots);

  ojson patches = ojson::array();
  for (const auto& p : world.patches) {
    ojson att;
    if (const auto* fixed = std::get_if<WorldFixed>(&p.attachment)) {
      att = ojson{{"type", "world"}, {"pose", to_json(fixed->pose)}};
    } else {
      const auto& la = std::get<LinkAttached>(p.attachment);
      att = ojson{{"type", "link"}, {"robot", la.robot}, {"link", la.link}, {"pose", to_json(la.relative)}};
    }
    ojson taxels = ojson::array();
    for (const auto& t : p.taxels) {
      ojson tj{{"center", to_json(t.rest_center)},
               {"normal", to_json(t.normal)},
               {"radius", t.radius},
               {"stiffness", t.stiffness},
               {"damping", t.damping},
               {"max_deflection", t.max_deflection}};
      if (t.grid_index) tj["grid_index"] = ojson::array({t.grid_index->row, t.grid_index->col});
      taxels.push_back(std::move(tj));
    }
    ojson pj{{"id", p.id}, {"attachment", std::move(att)}, {"taxels", std::move(taxels)}};
    if (p.grid_dims) pj["grid_dims"] = ojson::array({p.grid_dims->rows, p.grid_dims->cols});
    patches.push_back(std::move(pj));
  }
  root["patches"] = std::move(patches);

  ojson objects = ojson::array();
  for (const auto& o : world.objects) {
    ojson spheres = ojson::array();
    for (const auto& s : o.spheres) spheres.push_back(ojson{{"center", to_json(s.center)}, {"radius", s.radius}});
    ojson oj{{"id", o.id}, {"spheres", std::move(spheres)}};
    std::visit(
        [&](const auto& mode) {
          using M = std::decay_t<decltype(mode)>;
          if constexpr (std::is_same_v<M, FixedMode>) {
            oj["mode"] = "fixed";
            oj["pose"] = to_json(mode.pose);
          } else if constexpr (std::is_same_v<M, ScriptedMode>) {
            oj["mode"] = "trajectory";
            ojson ws = ojson::array();
            for (const auto& w : mode.trajectory.waypoints) {
              ws.push_back(ojson{{"time", w.time}, {"pose", to_json(w.pose)}});
            }
            oj["waypoints"] = std::move(ws);
          } else {
            oj["mode"] = "settle";
            oj["pose"] = to_json(mode.initial);
            if (mode.mass) oj["mass"] = *mode.mass;
          }
        },
        o.mode);
    objects.push_back(std::move(oj));
  }
  root["objects"] = std::move(objects);
  return root.dump(2) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error while writing '" + path.string() + "'");
}

World load_scene(const std::filesystem::path& path) { return parse_scene(read_file(path)); }

// ---------------------------------------------------------------------------
// Trace encoding

namespace {

constexpr std::string_view kMagic = "TXTR";
constexpr std::uint32_t kFlagNoise = 1;

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw TraceFormatError("trace file is truncated");
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string encode_binary(const Trace& trace) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kTraceVersion);
  w.u32(static_cast<std::uint32_t>(trace.quantity));
  w.u32(trace.noise ? kFlagNoise : 0);
  w.f64(trace.dt);
  w.u64(trace.taxels());
  w.u64(trace.steps());
  for (const auto& ref : trace.catalog) {
    w.str(ref.patch_id);
    w.u64(ref.index);
  }
  for (double t : trace.times) w.f64(t);
  for (double v : trace.values) w.f64(v);
  w.u64(trace.saturated.size());
  for (const auto& s : trace.saturated) {
    w.u64(s.step);
    w.u64(s.taxel);
  }
  if (trace.noise) {
    w.str(trace.noise->algorithm);
    w.u64(trace.noise->seed);
    w.f64(trace.noise->sigma);
  }
  return w.take();
}

Trace decode_binary(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.raw(4) != kMagic) throw TraceFormatError("not a trace file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kTraceVersion) {
    throw TraceFormatError("unsupported trace format version " + std::to_string(version) +
                           " (this build reads version " + std::to_string(kTraceVersion) + ")");
  }
  Trace t;
  const std::uint32_t quantity = r.u32();
  if (quantity > 1) throw TraceFormatError("unknown trace quantity " + std::to_string(quantity));
  t.quantity = static_cast<Quantity>(quantity);
  const std::uint32_t flags = r.u32();
  t.dt = r.f64();
  const std::uint64_t n = r.u64();
  const std::uint64_t steps = r.u64();
  // Each catalog entry takes at least 12 bytes and each row 8 (1 + n) bytes.
  if (n > r.remaining() / 12 || steps > r.remaining() / (8 * (n + 1))) {
    throw TraceFormatError("trace file is truncated");
  }
  t.catalog.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    TaxelRef ref;
    ref.patch_id = r.str();
    ref.index = r.u64();
    t.catalog.push_back(std::move(ref));
  }
  if (steps > r.remaining() / (8 * (n + 1))) throw TraceFormatError("trace file is truncated");
  t.times.resize(steps);
  for (auto& v : t.times) v = r.f64();
  t.values.resize(steps * n);
  for (auto& v : t.values) v = r.f64();
  const std::uint64_t sat = r.u64();
  if (sat > r.remaining() / 16) throw TraceFormatError("trace file is truncated");
  t.saturated.reserve(sat);
  for (std::uint64_t i = 0; i < sat; ++i) {
    SaturationFlag f;
    f.step = r.u64();
    f.taxel = r.u64();
    if (f.step >= steps || f.taxel >= n) throw TraceFormatError("saturation flag out of range");
    t.saturated.push_back(f);
  }
  if (flags & kFlagNoise) {
    NoiseRecord rec;
    rec.algorithm = r.str();
    rec.seed = r.u64();
    rec.sigma = r.f64();
    t.noise = std::move(rec);
  }
  if (r.remaining() != 0) throw TraceFormatError("trailing bytes after trace payload");
  return t;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw TraceFormatError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view s, std::size_t line) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw TraceFormatError("line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

std::string encode_csv(const Trace& trace) {
  std::string out = "# taxelsim trace v1\n";
  out += "# quantity=";
  out += trace.quantity == Quantity::Force ? "force" : "displacement";
  out += "\n# dt=" + format_double(trace.dt) + "\n";
  if (!trace.saturated.empty()) {
    out += "# saturated=";
    for (std::size_t i = 0; i < trace.saturated.size(); ++i) {
      if (i > 0) out += ' ';
      out += std::to_string(trace.saturated[i].step) + ":" + std::to_string(trace.saturated[i].taxel);
    }
    out += "\n";
  }
  if (trace.noise) {
    out += "# noise=" + trace.noise->algorithm + "," + std::to_string(trace.noise->seed) + "," +
           format_double(trace.noise->sigma) + "\n";
  }
  out += "time";
  for (const auto& ref : trace.catalog) {
    if (ref.patch_id.find_first_of(",\n\r") != std::string::npos) {
      throw TraceFormatError("patch id '" + ref.patch_id + "' cannot be written to CSV");
    }
    out += "," + ref.patch_id + ":" + std::to_string(ref.index);
  }
  out += "\n";
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    out += format_double(trace.times[k]);
    for (double v : trace.row(k)) {
      out += ',';
      out += format_double(v);
    }
    out += "\n";
  }
  return out;
}

Trace decode_csv(std::string_view text) {
  Trace t;
  bool have_dt = false;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    if (line.front() == '#') {
      if (have_header) continue;
      line.remove_prefix(1);
      while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string_view key = line.substr(0, eq);
      const std::string_view value = line.substr(eq + 1);
      if (key == "quantity") {
        if (value == "force") {
          t.quantity = Quantity::Force;
        } else if (value == "displacement") {
          t.quantity = Quantity::Displacement;
        } else {
          throw TraceFormatError("line " + std::to_string(line_no) + ": unknown quantity");
        }
      } else if (key == "dt") {
        t.dt = parse_double(value, line_no);
        have_dt = true;
      } else if (key == "saturated") {
        for (auto item : split(value, ' ')) {
          if (item.empty()) continue;
          const std::size_t colon = item.find(':');
          if (colon == std::string_view::npos) {
            throw TraceFormatError("line " + std::to_string(line_no) + ": bad saturation flag");
          }
          t.saturated.push_back({parse_u64(item.substr(0, colon), line_no),
                                 parse_u64(item.substr(colon + 1), line_no)});
        }
      } else if (key == "noise") {
        const auto parts = split(value, ',');
        if (parts.size() != 3) throw TraceFormatError("line " + std::to_string(line_no) + ": bad noise record");
        t.noise = NoiseRecord{std::string(parts[0]), parse_u64(parts[1], line_no),
                              parse_double(parts[2], line_no)};
      }
      continue;
    }

    const auto cells = split(line, ',');
    if (!have_header) {
      if (cells.front() != "time") {
        throw TraceFormatError("line " + std::to_string(line_no) + ": header must start with \"time\"");
      }
      for (std::size_t c = 1; c < cells.size(); ++c) {
        const std::size_t colon = cells[c].rfind(':');
        if (colon == std::string_view::npos) {
          throw TraceFormatError("line " + std::to_string(line_no) + ": column '" +
                                 std::string(cells[c]) + "' is not <patch>:<index>");
        }
        t.catalog.push_back({std::string(cells[c].substr(0, colon)),
                             static_cast<std::size_t>(parse_u64(cells[c].substr(colon + 1), line_no))});
      }
      have_header = true;
      continue;
    }
    if (cells.size() != t.catalog.size() + 1) {
      throw TraceFormatError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(t.catalog.size() + 1) + " columns, found " +
                             std::to_string(cells.size()));
    }
    t.times.push_back(parse_double(cells[0], line_no));
    for (std::size_t c = 1; c < cells.size(); ++c) t.values.push_back(parse_double(cells[c], line_no));
  }
  if (!have_header) throw TraceFormatError("CSV trace has no header row");
  if (!have_dt && t.times.size() >= 2) t.dt = t.times[1] - t.times[0];
  for (const auto& s : t.saturated) {
    if (s.step >= t.steps() || s.taxel >= t.taxels()) throw TraceFormatError("saturation flag out of range");
  }
  return t;
}

}  // namespace

std::string encode_trace(const Trace& trace, TraceFormat format) {
  if (trace.values.size() != trace.steps() * trace.taxels()) {
    throw TraceFormatError("trace matrix size does not match its catalog and times");
  }
  return format == TraceFormat::Binary ? encode_binary(trace) : encode_csv(trace);
}

void write_trace(const Trace& trace, std::ostream& out, TraceFormat format) {
  const std::string bytes = encode_trace(trace, format);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error while writing trace");
}

Trace decode_trace(std::string_view bytes) {
  if (bytes.substr(0, 4) == kMagic) return decode_binary(bytes);
  if (bytes.substr(0, 64).find('\0') != std::string_view::npos) {
    throw TraceFormatError("not a trace file (bad magic)");
  }
  return decode_csv(bytes);
}

Trace read_trace(std::istream& in) {
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_trace(bytes);
}

void write_trace_file(const Trace& trace, const std::filesystem::path& path, TraceFormat format) {
  write_file(path, encode_trace(trace, format));
}

Trace read_trace_file(const std::filesystem::path& path) { return decode_trace(read_file(path)); }

TraceFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? TraceFormat::Csv : TraceFormat::Binary;
}

// ---------------------------------------------------------------------------
// Heat maps

std::vector<std::uint8_t> export_heatmap(const SignalFrame& frame, const SkinPatch& patch,
                                         const HeatmapScaling& scaling) {
  if (!patch.grid_dims) {
    throw std::invalid_argument("patch '" + patch.id + "' has no grid layout; cannot render a heat map");
  }
  if (frame.values.size() != patch.taxels.size()) {
    throw CatalogMismatch("frame has " + std::to_string(frame.values.size()) + " values but patch '" +
                          patch.id + "' has " + std::to_string(patch.taxels.size()) + " taxels");
  }
  double lo = 0.0;
  double hi = 0.0;
  if (const auto* fixed = std::get_if<FixedScaling>(&scaling)) {
    lo = fixed->lo;
    hi = fixed->hi;
    if (!(hi > lo)) throw std::invalid_argument("heat map scaling needs hi > lo");
  } else if (!frame.values.empty()) {
    const auto [mn, mx] = std::minmax_element(frame.values.begin(), frame.values.end());
    lo = *mn;
    hi = *mx;
  }

  const auto [rows, cols] = *patch.grid_dims;
  const std::string header = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  std::vector<std::uint8_t> image(header.begin(), header.end());
  const std::size_t base = image.size();
  image.resize(base + rows * cols, 0);
  if (!(hi > lo)) return image;  // flat frame maps to black

  for (std::size_t i = 0; i < patch.taxels.size(); ++i) {
    const auto& gi = patch.taxels[i].grid_index;
    if (!gi || gi->row >= rows || gi->col >= cols) continue;
    double u = (frame.values[i] - lo) / (hi - lo);
    u = std::isnan(u) ? 0.0 : std::clamp(u, 0.0, 1.0);
    image[base + gi->row * cols + gi->col] = static_cast<std::uint8_t>(std::round(255.0 * u));
  }
  return image;
}

}  // namespace taxelsim
