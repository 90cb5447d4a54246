#include "sba/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sba/errors.hpp"

namespace sba {

MatchThresholds PipelineConfig::thresholds() const {
  MatchThresholds th;
  th.d_e = d_e;
  th.d_n = d_n;
  th.d_theta = d_theta_deg * M_PI / 180.0;
  return th;
}

BeamSpec PipelineConfig::beam_spec() const {
  BeamSpec spec;
  spec.divergence = beam_divergence;
  if (!sensor_preset.empty()) {
    const double preset = sensor_preset_divergence(sensor_preset);
    if (preset <= 0.0) throw InputError("unknown sensor preset: " + sensor_preset);
    spec.divergence = preset;
  }
  spec.n_samples = beam_samples;
  spec.rings = beam_rings;
  return spec;
}

void PipelineConfig::validate() const {
  std::string problems;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) problems += (problems.empty() ? "" : "; ") + what;
  };

  require(d_e > 0.0, "d_e must be positive");
  require(d_n > 0.0, "d_n must be positive");
  require(d_theta_deg > 0.0, "d_theta_deg must be positive");
  require(b_max > b_min && b_min > 0.0, "requires b_max > b_min > 0");
  require(rho_ker > 0.0, "rho_ker must be positive");
  require(beam_divergence > 0.0, "beam_divergence must be positive");
  require(beam_samples >= 3, "beam_samples must be at least 3");
  require(beam_rings >= 1, "beam_rings must be at least 1");
  require(sigma_floor > 0.0 && sigma_floor < sigma_cap, "requires 0 < sigma_floor < sigma_cap");
  require(outer_iterations >= 1, "outer_iterations must be at least 1");
  require(inner_iterations >= 1, "inner_iterations must be at least 1");
  require(convergence_tol > 0.0, "convergence_tol must be positive");
  require(ate_max_dt > 0.0, "ate_max_dt must be positive");
  require(threads >= 1, "threads must be at least 1");
  if (!sensor_preset.empty()) {
    require(sensor_preset_divergence(sensor_preset) > 0.0, "unknown sensor preset '" + sensor_preset + "'");
  }

  if (!problems.empty()) throw InputError("invalid config: " + problems);
}

std::vector<std::pair<std::string, std::string>> read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);

  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return entries;
}

namespace {

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') {
    throw InputError("config key '" + key + "': not a number: '" + value + "'");
  }
  return v;
}

int to_int(const std::string& key, const std::string& value) {
  return static_cast<int>(to_double(key, value));
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1" || value == "yes") return true;
  if (value == "off" || value == "false" || value == "0" || value == "no") return false;
  throw InputError("config key '" + key + "': expected on/off, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(value);
  while (std::getline(ss, item, ';')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void apply_config_entry(PipelineConfig& c, const std::string& key, const std::string& value) {
  if (key == "clouds") c.cloud_paths = split_list(value);
  else if (key == "cloud_format") c.cloud_format = cloud_format_from_string(value);
  else if (key == "trajectory") c.trajectory_path = value;
  else if (key == "trajectory_format") c.trajectory_format = trajectory_format_from_string(value);
  else if (key == "gt_trajectory") c.gt_trajectory_path = value;
  else if (key == "gt_trajectory_format") c.gt_trajectory_format = trajectory_format_from_string(value);
  else if (key == "output_dir") c.output_dir = value;
  else if (key == "d_e") c.d_e = to_double(key, value);
  else if (key == "d_n") c.d_n = to_double(key, value);
  else if (key == "d_theta_deg") c.d_theta_deg = to_double(key, value);
  else if (key == "b_max") c.b_max = to_double(key, value);
  else if (key == "b_min") c.b_min = to_double(key, value);
  else if (key == "rho_ker") c.rho_ker = to_double(key, value);
  else if (key == "use_huber") c.use_huber = to_bool(key, value);
  else if (key == "sensor_preset") c.sensor_preset = value;
  else if (key == "beam_divergence_mrad") c.beam_divergence = to_double(key, value) * 1e-3;
  else if (key == "beam_samples") c.beam_samples = to_int(key, value);
  else if (key == "beam_rings") c.beam_rings = to_int(key, value);
  else if (key == "sigma_floor") c.sigma_floor = to_double(key, value);
  else if (key == "sigma_cap") c.sigma_cap = to_double(key, value);
  else if (key == "uncertainty") c.uncertainty = to_bool(key, value);
  else if (key == "outer_iterations") c.outer_iterations = to_int(key, value);
  else if (key == "inner_iterations") c.inner_iterations = to_int(key, value);
  else if (key == "convergence_tol") c.convergence_tol = to_double(key, value);
  else if (key == "pose_only") c.pose_only = to_bool(key, value);
  else if (key == "ate_max_dt") c.ate_max_dt = to_double(key, value);
  else if (key == "seed") c.seed = static_cast<unsigned long long>(to_double(key, value));
  else if (key == "threads") c.threads = to_int(key, value);
  else throw InputError("unknown config key: " + key);
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig c;
  for (const auto& [key, value] : read_kv_file(path)) apply_config_entry(c, key, value);
  return c;
}

std::string serialize_config(const PipelineConfig& c) {
  std::ostringstream out;
  out << "clouds = ";
  for (std::size_t i = 0; i < c.cloud_paths.size(); ++i) {
    out << (i > 0 ? ";" : "") << c.cloud_paths[i];
  }
  out << "\n";
  out << "cloud_format = " << to_string(c.cloud_format) << "\n";
  out << "trajectory = " << c.trajectory_path << "\n";
  out << "trajectory_format = " << to_string(c.trajectory_format) << "\n";
  out << "gt_trajectory = " << c.gt_trajectory_path << "\n";
  out << "gt_trajectory_format = " << to_string(c.gt_trajectory_format) << "\n";
  out << "output_dir = " << c.output_dir << "\n";
  out << "d_e = " << format_g9(c.d_e) << "\n";
  out << "d_n = " << format_g9(c.d_n) << "\n";
  out << "d_theta_deg = " << format_g9(c.d_theta_deg) << "\n";
  out << "b_max = " << format_g9(c.b_max) << "\n";
  out << "b_min = " << format_g9(c.b_min) << "\n";
  out << "rho_ker = " << format_g9(c.rho_ker) << "\n";
  out << "use_huber = " << (c.use_huber ? "on" : "off") << "\n";
  out << "sensor_preset = " << c.sensor_preset << "\n";
  out << "beam_divergence_mrad = " << format_g9(c.beam_divergence * 1e3) << "\n";
  out << "beam_samples = " << c.beam_samples << "\n";
  out << "beam_rings = " << c.beam_rings << "\n";
  out << "sigma_floor = " << format_g9(c.sigma_floor) << "\n";
  out << "sigma_cap = " << format_g9(c.sigma_cap) << "\n";
  out << "uncertainty = " << (c.uncertainty ? "on" : "off") << "\n";
  out << "outer_iterations = " << c.outer_iterations << "\n";
  out << "inner_iterations = " << c.inner_iterations << "\n";
  out << "convergence_tol = " << format_g9(c.convergence_tol) << "\n";
  out << "pose_only = " << (c.pose_only ? "on" : "off") << "\n";
  out << "ate_max_dt = " << format_g9(c.ate_max_dt) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "threads = " << c.threads << "\n";
  return out.str();
}

}  // namespace sba
