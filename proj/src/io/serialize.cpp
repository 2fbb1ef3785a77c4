#include "io/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace mogaf::io {

namespace {

using nlohmann::json;

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json quat_to_json(const Quat& q) { return json::array({q.w, q.x, q.y, q.z}); }

Quat quat_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("expected a quaternion [w,x,y,z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json se3_to_json(const SE3Transform& tf) {
  return {{"q", quat_to_json(tf.rotation)}, {"t", vec3_to_json(tf.translation)}};
}

SE3Transform se3_from_json(const json& j) {
  SE3Transform tf;
  tf.rotation = quat_from_json(j.at("q"));
  tf.translation = vec3_from_json(j.at("t"));
  return tf;
}

json config_to_json(const forecast::ForecasterConfig& c) {
  return {{"d_model", c.d_model},       {"heads", c.heads},
          {"ff_dim", c.ff_dim},         {"layers", c.layers},
          {"dropout", c.dropout},       {"window", c.window},
          {"lambda_acc", c.lambda_acc}, {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"mask_start", c.mask_start}, {"mask_end", c.mask_end},
          {"seed", c.seed}};
}

forecast::ForecasterConfig config_from_json(const json& j) {
  forecast::ForecasterConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.window = j.at("window").get<int>();
  c.lambda_acc = j.at("lambda_acc").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.mask_start = j.at("mask_start").get<double>();
  c.mask_end = j.at("mask_end").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

json scene_to_json(const DynamicScene& scene) {
  json gaussians = json::array();
  for (const auto& g : scene.gaussians) {
    gaussians.push_back({{"id", g.id},
                         {"mean", vec3_to_json(g.mean_c)},
                         {"rot", quat_to_json(g.rot_c)},
                         {"weights", g.weights}});
  }
  json bases = json::array();
  for (const auto& basis : scene.motion.bases) {
    json traj = json::array();
    for (const auto& tf : basis) traj.push_back(se3_to_json(tf));
    bases.push_back(std::move(traj));
  }
  json cameras = json::array();
  for (const auto& cam : scene.cameras) {
    std::vector<double> k(cam.intrinsics.data(), cam.intrinsics.data() + 9);
    cameras.push_back({{"intrinsics_colmajor", k},
                       {"extrinsics", se3_to_json(cam.extrinsics)},
                       {"width", cam.width},
                       {"height", cam.height}});
  }
  return {{"format_version", 1},
          {"gaussians", std::move(gaussians)},
          {"bases", std::move(bases)},
          {"cameras", std::move(cameras)}};
}

DynamicScene scene_from_json(const json& j) {
  if (j.value("format_version", 0) != 1) {
    throw ConfigError("scene_from_json: unsupported format_version");
  }
  DynamicScene scene;
  for (const auto& gj : j.at("gaussians")) {
    GaussianCanonical g;
    g.id = gj.at("id").get<GaussianId>();
    g.mean_c = vec3_from_json(gj.at("mean"));
    g.rot_c = quat_from_json(gj.at("rot"));
    g.weights = gj.at("weights").get<std::vector<double>>();
    scene.gaussians.push_back(std::move(g));
  }
  for (const auto& bj : j.at("bases")) {
    std::vector<SE3Transform> basis;
    for (const auto& tj : bj) basis.push_back(se3_from_json(tj));
    scene.motion.bases.push_back(std::move(basis));
  }
  for (const auto& cj : j.at("cameras")) {
    Camera cam;
    const auto k = cj.at("intrinsics_colmajor").get<std::vector<double>>();
    if (k.size() != 9) throw ConfigError("camera intrinsics must have 9 entries");
    cam.intrinsics = Eigen::Map<const Eigen::Matrix3d>(k.data());
    cam.extrinsics = se3_from_json(cj.at("extrinsics"));
    cam.width = cj.at("width").get<int>();
    cam.height = cj.at("height").get<int>();
    scene.cameras.push_back(std::move(cam));
  }
  scene.validate();
  return scene;
}

json ground_truth_to_json(const synth::GroundTruth& gt) {
  json labels = json::array();
  for (const auto& [id, label] : gt.labels) labels.push_back(json::array({id, label}));
  json rigid = json::array();
  for (const auto& traj : gt.rigid_trajectories) {
    json t = json::array();
    for (const auto& tf : traj) t.push_back(se3_to_json(tf));
    rigid.push_back(std::move(t));
  }
  json occlusion = json::array();
  for (const auto& row : gt.occlusion) {
    occlusion.push_back(std::vector<int>(row.begin(), row.end()));
  }
  return {{"format_version", 1},
          {"labels", std::move(labels)},
          {"tau", gt.tau},
          {"rigid_trajectories", std::move(rigid)},
          {"occlusion", std::move(occlusion)}};
}

synth::GroundTruth ground_truth_from_json(const json& j) {
  synth::GroundTruth gt;
  for (const auto& pair : j.at("labels")) {
    gt.labels[pair[0].get<GaussianId>()] = pair[1].get<int>();
  }
  gt.tau = j.at("tau").get<std::vector<int>>();
  for (const auto& tj : j.at("rigid_trajectories")) {
    std::vector<SE3Transform> traj;
    for (const auto& tf : tj) traj.push_back(se3_from_json(tf));
    gt.rigid_trajectories.push_back(std::move(traj));
  }
  for (const auto& row : j.at("occlusion")) {
    const auto ints = row.get<std::vector<int>>();
    gt.occlusion.emplace_back(ints.begin(), ints.end());
  }
  return gt;
}

json bank_to_json(const grouping::MemoryBank& bank) {
  json groups = json::array();
  for (const auto& g : bank.groups) {
    groups.push_back({{"members", std::vector<GaussianId>(g.member_ids.begin(),
                                                          g.member_ids.end())},
                      {"tau", g.tau}});
  }
  return {{"format_version", 1}, {"groups", std::move(groups)}};
}

grouping::MemoryBank bank_from_json(const json& j) {
  grouping::MemoryBank bank;
  for (const auto& gj : j.at("groups")) {
    grouping::MotionGroup g;
    for (const auto& id : gj.at("members")) g.member_ids.insert(id.get<GaussianId>());
    g.tau = gj.at("tau").get<int>();
    bank.groups.push_back(std::move(g));
  }
  bank.check_disjoint();
  return bank;
}

json report_to_json(const metrics::TrackingReport& report) {
  json j = {{"epe", report.epe},
            {"delta3d_10", report.delta3d_10},
            {"delta3d_05", report.delta3d_05},
            {"delta_avg_2d", report.delta_avg_2d},
            {"evaluated_points", report.evaluated_points}};
  j["aj"] = report.aj ? json(*report.aj) : json(nullptr);
  j["oa"] = report.oa ? json(*report.oa) : json(nullptr);
  return j;
}

json checkpoint_to_json(const forecast::ForecasterModel& model) {
  json params = json::array();
  for (const auto& [name, value] : model.params) {
    std::vector<double> data;
    data.reserve(value.size());
    for (Eigen::Index i = 0; i < value.rows(); ++i) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) data.push_back(value(i, c));
    }
    params.push_back({{"name", name},
                      {"rows", value.rows()},
                      {"cols", value.cols()},
                      {"data", std::move(data)}});
  }
  return {{"format_version", 1},
          {"config", config_to_json(model.config)},
          {"params", std::move(params)}};
}

forecast::ForecasterModel checkpoint_from_json(const json& j) {
  if (j.value("format_version", 0) != 1) {
    throw ConfigError("checkpoint_from_json: unsupported format_version");
  }
  forecast::ForecasterModel model;
  model.config = config_from_json(j.at("config"));
  for (const auto& pj : j.at("params")) {
    const auto rows = pj.at("rows").get<Eigen::Index>();
    const auto cols = pj.at("cols").get<Eigen::Index>();
    const auto data = pj.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw ConfigError("checkpoint_from_json: parameter size mismatch");
    }
    Eigen::MatrixXd value(rows, cols);
    size_t idx = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) value(i, c) = data[idx++];
    }
    model.params.emplace_back(pj.at("name").get<std::string>(), std::move(value));
  }
  return model;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryTensor& traj) {
  std::ofstream out = open_out(path);
  out << "gaussian_id,t,mx,my,mz,qw,qx,qy,qz\n";
  for (size_t i = 0; i < traj.gaussian_ids.size(); ++i) {
    for (int t = 0; t < traj.length(); ++t) {
      out << traj.gaussian_ids[i] << "," << (traj.start_timestep + t);
      for (double v : traj.values[i][t]) out << "," << format_double(v);
      out << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TrajectoryTensor read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "gaussian_id,t,mx,my,mz,qw,qx,qy,qz") {
    throw IoError("bad trajectory CSV header in " + path.string());
  }
  std::map<GaussianId, std::map<int, std::array<double, 7>>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9) throw IoError("bad trajectory CSV row in " + path.string());
    const GaussianId id = std::stoll(fields[0]);
    const int t = std::stoi(fields[1]);
    std::array<double, 7> v;
    for (int c = 0; c < 7; ++c) v[c] = std::stod(fields[2 + c]);
    rows[id][t] = v;
  }
  if (rows.empty()) throw IoError("empty trajectory CSV: " + path.string());

  TrajectoryTensor traj;
  traj.start_timestep = rows.begin()->second.begin()->first;
  int length = -1;
  for (const auto& [id, by_t] : rows) {
    if (by_t.begin()->first != traj.start_timestep) {
      throw IoError("trajectory CSV rows do not share a start timestep");
    }
    const int len = static_cast<int>(by_t.size());
    if (by_t.rbegin()->first != traj.start_timestep + len - 1) {
      throw IoError("trajectory CSV has timestep gaps");
    }
    if (length == -1) length = len;
    if (len != length) throw IoError("trajectory CSV rows have unequal lengths");
    traj.gaussian_ids.push_back(id);
    std::vector<std::array<double, 7>> seq;
    seq.reserve(len);
    for (const auto& [t, v] : by_t) seq.push_back(v);
    traj.values.push_back(std::move(seq));
  }
  return traj;
}

void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<double>& losses) {
  std::ofstream out = open_out(path);
  out << "epoch,loss\n";
  for (size_t e = 0; e < losses.size(); ++e) {
    out << e << "," << format_double(losses[e]) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_masks(const std::filesystem::path& dir,
                 const std::vector<synth::MaskFrame>& frames) {
  json index = {{"format_version", 1}, {"frames", json::array()}};
  for (const auto& frame : frames) {
    json entry = {{"t", frame.t},
                  {"width", frame.width},
                  {"height", frame.height},
                  {"tau", frame.tau_mask},
                  {"files", json::array()}};
    for (size_t k = 0; k < frame.masks.size(); ++k) {
      const std::string name =
          "mask_t" + std::to_string(frame.t) + "_g" + std::to_string(k) + ".pgm";
      std::ofstream out = open_out(dir / name, true);
      out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
      out.write(reinterpret_cast<const char*>(frame.masks[k].data()),
                static_cast<std::streamsize>(frame.masks[k].size()));
      if (!out) throw IoError("write failed: " + (dir / name).string());
      entry["files"].push_back(name);
    }
    index["frames"].push_back(std::move(entry));
  }
  write_json_file(dir / "masks.json", index);
}

std::vector<synth::MaskFrame> read_masks(const std::filesystem::path& dir) {
  const json index = read_json_file(dir / "masks.json");
  std::vector<synth::MaskFrame> frames;
  for (const auto& entry : index.at("frames")) {
    synth::MaskFrame frame;
    frame.t = entry.at("t").get<int>();
    frame.width = entry.at("width").get<int>();
    frame.height = entry.at("height").get<int>();
    frame.tau_mask = entry.at("tau").get<std::vector<int>>();
    for (const auto& name : entry.at("files")) {
      std::ifstream in = open_in(dir / name.get<std::string>(), true);
      std::string magic;
      int w = 0, h = 0, maxval = 0;
      in >> magic >> w >> h >> maxval;
      if (magic != "P5" || w != frame.width || h != frame.height || maxval != 255) {
        throw IoError("bad PGM mask: " + (dir / name.get<std::string>()).string());
      }
      in.get();  // single whitespace after the header
      std::vector<uint8_t> pixels(static_cast<size_t>(w) * h);
      in.read(reinterpret_cast<char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
      if (!in) throw IoError("truncated PGM mask in " + dir.string());
      frame.masks.push_back(std::move(pixels));
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

void write_ply(const std::filesystem::path& path, const DynamicScene& scene,
               const grouping::MemoryBank* bank) {
  static const int palette[][3] = {
      {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
      {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
      {210, 245, 60}, {250, 190, 212}, {0, 128, 128},  {220, 190, 255}};
  constexpr int palette_size = 12;

  std::ofstream out = open_out(path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << scene.gaussians.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (const auto& g : scene.gaussians) {
    int color[3] = {200, 200, 200};  // unassigned
    if (bank) {
      const int k = bank->group_of(g.id);
      if (k >= 0) {
        const int* c = palette[k % palette_size];
        color[0] = c[0];
        color[1] = c[1];
        color[2] = c[2];
      }
    }
    out << static_cast<float>(g.mean_c.x()) << " "
        << static_cast<float>(g.mean_c.y()) << " "
        << static_cast<float>(g.mean_c.z()) << " " << color[0] << " "
        << color[1] << " " << color[2] << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace mogaf::io
