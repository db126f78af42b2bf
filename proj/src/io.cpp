#include "manibox/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "manibox/error.hpp"

namespace manibox::io {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

constexpr const char* kParamsMagic = "manibox-policy-params";

void append_array(std::string& out, const Eigen::VectorXd& v) {
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_double(v(i));
  }
  out += ']';
}

Eigen::VectorXd to_vector(const json& arr) {
  if (!arr.is_array()) throw Error(ErrorKind::ParseError, "expected a numeric array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

void put_le_double(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

double get_le_double(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw Error(ErrorKind::ParseError, "truncated parameter payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string episode_to_line(const gripworld::Episode& ep) {
  const auto& m = ep.meta;
  std::string out;
  out.reserve(ep.steps.size() * 400);
  out += "{\"meta\":{\"range\":" + json(m.range).dump() + ",\"seed\":" + std::to_string(m.seed) +
         ",\"success\":" + (m.success ? "true" : "false") + ",\"horizon\":" + std::to_string(m.horizon) +
         ",\"obs_dim\":" + std::to_string(m.obs_dim) + ",\"proprio_dim\":" + std::to_string(m.proprio_dim) +
         ",\"action_dim\":" + std::to_string(m.action_dim) + "},\"steps\":[";
  for (std::size_t i = 0; i < ep.steps.size(); ++i) {
    const auto& s = ep.steps[i];
    if (i) out += ',';
    out += "{\"obs\":";
    append_array(out, s.obs);
    out += ",\"proprio\":";
    append_array(out, s.proprio);
    out += ",\"action\":";
    append_array(out, s.action);
    out += '}';
  }
  out += "]}";
  return out;
}

gripworld::Episode episode_from_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("episode line: ") + e.what());
  }
  try {
    gripworld::Episode ep;
    const auto& m = j.at("meta");
    ep.meta.range = m.at("range").get<std::string>();
    ep.meta.seed = m.at("seed").get<std::uint64_t>();
    ep.meta.success = m.at("success").get<bool>();
    ep.meta.horizon = m.at("horizon").get<int>();
    ep.meta.obs_dim = m.at("obs_dim").get<int>();
    ep.meta.proprio_dim = m.at("proprio_dim").get<int>();
    ep.meta.action_dim = m.at("action_dim").get<int>();
    for (const auto& s : j.at("steps")) {
      gripworld::StepRecord rec;
      rec.obs = to_vector(s.at("obs"));
      rec.proprio = to_vector(s.at("proprio"));
      rec.action = to_vector(s.at("action"));
      if (rec.obs.size() != ep.meta.obs_dim || rec.proprio.size() != ep.meta.proprio_dim ||
          rec.action.size() != ep.meta.action_dim)
        throw Error(ErrorKind::ShapeMismatch, "step vector length differs from the declared dimension");
      ep.steps.push_back(std::move(rec));
    }
    return ep;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("episode record: ") + e.what());
  }
}

void write_episodes(const std::string& path, const std::vector<gripworld::Episode>& episodes) {
  std::string text;
  for (const auto& ep : episodes) {
    text += episode_to_line(ep);
    text += '\n';
  }
  write_text(path, text);
}

std::vector<gripworld::Episode> read_episodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::vector<gripworld::Episode> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(episode_from_line(line));
  return out;
}

void write_params(std::ostream& out, const policy::PolicyParams& params) {
  const auto& c = params.config();
  out << kParamsMagic << " 1\n"
      << "input_dim " << c.input_dim << "\n"
      << "action_dim " << c.action_dim << "\n"
      << "vis_dim " << c.vis_dim << "\n"
      << "rnn_layers " << c.rnn_layers << "\n"
      << "rnn_hidden " << c.rnn_hidden << "\n"
      << "actor_hidden " << c.actor_hidden << "\n";
  for (const auto& s : params.slots()) out << "tensor " << s.name << ' ' << s.rows << ' ' << s.cols << "\n";
  out << "end\n";
  for (Eigen::Index i = 0; i < params.flat().size(); ++i) put_le_double(out, params.flat()(i));
  if (!out) throw Error(ErrorKind::IoError, "failed writing parameters");
}

policy::PolicyParams read_params(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != std::string(kParamsMagic) + " 1")
    throw Error(ErrorKind::ParseError, "not a parameter file");
  policy::PolicyConfig cfg;
  std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>> declared;
  while (std::getline(in, line) && line != "end") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "tensor") {
      std::string name;
      Eigen::Index r = 0, c = 0;
      ls >> name >> r >> c;
      declared.emplace_back(name, r, c);
      continue;
    }
    int value = 0;
    ls >> value;
    if (!ls) throw Error(ErrorKind::ParseError, "bad header line: " + line);
    if (key == "input_dim") cfg.input_dim = value;
    else if (key == "action_dim") cfg.action_dim = value;
    else if (key == "vis_dim") cfg.vis_dim = value;
    else if (key == "rnn_layers") cfg.rnn_layers = value;
    else if (key == "rnn_hidden") cfg.rnn_hidden = value;
    else if (key == "actor_hidden") cfg.actor_hidden = value;
    else throw Error(ErrorKind::ParseError, "unknown header key: " + key);
  }
  if (line != "end") throw Error(ErrorKind::ParseError, "missing header terminator");
  policy::PolicyParams params(cfg);
  const auto& slots = params.slots();
  if (declared.size() != slots.size()) throw Error(ErrorKind::ShapeMismatch, "tensor count differs from config");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& [name, r, c] = declared[i];
    if (name != slots[i].name || r != slots[i].rows || c != slots[i].cols)
      throw Error(ErrorKind::ShapeMismatch, "tensor '" + name + "' does not match the config layout");
  }
  for (Eigen::Index i = 0; i < params.flat().size(); ++i) params.flat()(i) = get_le_double(in);
  return params;
}

void save_params(const std::string& path, const policy::PolicyParams& params) {
  if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  write_params(out, params);
}

policy::PolicyParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  return read_params(in);
}

std::vector<geometry::Camera> cameras_from_json_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::vector<geometry::Camera> cams;
    for (const auto& c : j.at("cameras")) {
      geometry::Camera cam;
      cam.name = c.value("name", "cam" + std::to_string(cams.size()));
      auto& k = cam.intrinsics;
      k.fx = c.at("fx").get<double>();
      k.fy = c.at("fy").get<double>();
      k.cx = c.at("cx").get<double>();
      k.cy = c.at("cy").get<double>();
      k.width = c.at("width").get<double>();
      k.height = c.at("height").get<double>();
      const auto& rot = c.at("rotation");
      const auto& tr = c.at("translation");
      if (rot.size() != 9 || tr.size() != 3)
        throw Error(ErrorKind::ParseError, "rotation needs 9 entries and translation 3");
      for (int r = 0; r < 3; ++r)
        for (int col = 0; col < 3; ++col) cam.extrinsics.rotation(r, col) = rot[3 * r + col].get<double>();
      for (int r = 0; r < 3; ++r) cam.extrinsics.position(r) = tr[r].get<double>();
      k.validate();
      cam.extrinsics.validate();
      cams.push_back(std::move(cam));
    }
    return cams;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("camera file: ") + e.what());
  }
}

std::string cameras_to_json_text(const std::vector<geometry::Camera>& cams) {
  std::string out = "{\n  \"cameras\": [\n";
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const auto& c = cams[i];
    const auto& k = c.intrinsics;
    out += "    {\"name\": " + json(c.name).dump() + ", \"fx\": " + fmt_double(k.fx) + ", \"fy\": " + fmt_double(k.fy) +
           ", \"cx\": " + fmt_double(k.cx) + ", \"cy\": " + fmt_double(k.cy) + ", \"width\": " + fmt_double(k.width) +
           ", \"height\": " + fmt_double(k.height) + ",\n     \"rotation\": [";
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) {
        if (r || col) out += ", ";
        out += fmt_double(c.extrinsics.rotation(r, col));
      }
    out += "],\n     \"translation\": [";
    for (int r = 0; r < 3; ++r) {
      if (r) out += ", ";
      out += fmt_double(c.extrinsics.position(r));
    }
    out += "]}";
    out += i + 1 < cams.size() ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

std::vector<geometry::Camera> read_cameras(const std::string& path) { return cameras_from_json_text(read_text(path)); }

void write_loss_history(const std::string& path, const std::vector<double>& history) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) out += std::to_string(i) + "," + fmt_double(history[i]) + "\n";
  write_text(path, out);
}

void write_text(const std::string& path, const std::string& contents) {
  if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  out << contents;
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace manibox::io
