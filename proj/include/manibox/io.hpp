#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "manibox/geometry.hpp"
#include "manibox/gripworld.hpp"
#include "manibox/policy.hpp"

namespace manibox::io {

// Episode files: one JSON object per line,
//   {"meta":{"range","seed","success","horizon","obs_dim","proprio_dim","action_dim"},
//    "steps":[{"obs":[...],"proprio":[...],"action":[...]}, ...]}
// Doubles are written with 17 significant digits.
std::string episode_to_line(const gripworld::Episode& ep);
gripworld::Episode episode_from_line(const std::string& line);
void write_episodes(const std::string& path, const std::vector<gripworld::Episode>& episodes);
std::vector<gripworld::Episode> read_episodes(const std::string& path);

// Parameter files: a text header
//   manibox-policy-params 1
//   <config key> <value>            (one line per dimension)
//   tensor <name> <rows> <cols>     (one line per tensor, storage order)
//   end
// followed by every tensor's entries as little-endian IEEE-754 doubles,
// column-major, in header order.
void write_params(std::ostream& out, const policy::PolicyParams& params);
policy::PolicyParams read_params(std::istream& in);
void save_params(const std::string& path, const policy::PolicyParams& params);
policy::PolicyParams load_params(const std::string& path);

// Camera files: {"cameras":[{"name","fx","fy","cx","cy","width","height",
//   "rotation":[9 entries, row-major],"translation":[3 entries]}, ...]}
std::vector<geometry::Camera> read_cameras(const std::string& path);
std::vector<geometry::Camera> cameras_from_json_text(const std::string& text);
std::string cameras_to_json_text(const std::vector<geometry::Camera>& cams);

void write_loss_history(const std::string& path, const std::vector<double>& history);

/// Creates parent directories as needed and writes `contents` verbatim.
void write_text(const std::string& path, const std::string& contents);
std::string read_text(const std::string& path);

/// Shortest round-trip decimal for a double.
std::string fmt_double(double v);

}  // namespace manibox::io
