#include "relimu/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "relimu/csv.hpp"
#include "relimu/errors.hpp"

namespace relimu {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& v, const std::string& key, int line) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "' expects a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v, const std::string& key, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                    "' expects true/false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& v, size_t n,
                               const std::string& key, int line) {
  std::istringstream is(v);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(to_double(tok, key, line));
  if (out.size() != n)
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "' expects " + std::to_string(n) + " values");
  return out;
}

struct KeyEntry {
  std::string name;  // "section.key"
  std::function<void(ScenarioConfig&, const std::string&, int)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

std::vector<KeyEntry> key_table() {
  std::vector<KeyEntry> t;
  auto add_double = [&t](const std::string& name, double ScenarioConfig::* f) {
    t.push_back({name,
                 [name, f](ScenarioConfig& c, const std::string& v, int line) {
                   c.*f = to_double(v, name, line);
                 },
                 [f](const ScenarioConfig& c) { return csv::fmt(c.*f); }});
  };
  auto add_bool = [&t](const std::string& name, bool ScenarioConfig::* f) {
    t.push_back({name,
                 [name, f](ScenarioConfig& c, const std::string& v, int line) {
                   c.*f = to_bool(v, name, line);
                 },
                 [f](const ScenarioConfig& c) { return c.*f ? "true" : "false"; }});
  };
  auto add_vec3 = [&t](const std::string& name, Vec3 ScenarioConfig::* f) {
    t.push_back({name,
                 [name, f](ScenarioConfig& c, const std::string& v, int line) {
                   const auto d = to_doubles(v, 3, name, line);
                   c.*f = Vec3(d[0], d[1], d[2]);
                 },
                 [f](const ScenarioConfig& c) {
                   const Vec3& v = c.*f;
                   return csv::fmt(v.x()) + " " + csv::fmt(v.y()) + " " + csv::fmt(v.z());
                 }});
  };
  auto add_sub_double = [&t](const std::string& name, auto member, auto sub) {
    t.push_back({name,
                 [name, member, sub](ScenarioConfig& c, const std::string& v, int line) {
                   (c.*member).*sub = to_double(v, name, line);
                 },
                 [member, sub](const ScenarioConfig& c) {
                   return csv::fmt((c.*member).*sub);
                 }});
  };
  auto add_sub_bool = [&t](const std::string& name, auto member, auto sub) {
    t.push_back({name,
                 [name, member, sub](ScenarioConfig& c, const std::string& v, int line) {
                   (c.*member).*sub = to_bool(v, name, line);
                 },
                 [member, sub](const ScenarioConfig& c) {
                   return ((c.*member).*sub) ? "true" : "false";
                 }});
  };
  auto add_sub_vec3 = [&t](const std::string& name, auto member, auto sub) {
    t.push_back({name,
                 [name, member, sub](ScenarioConfig& c, const std::string& v, int line) {
                   const auto d = to_doubles(v, 3, name, line);
                   (c.*member).*sub = Vec3(d[0], d[1], d[2]);
                 },
                 [member, sub](const ScenarioConfig& c) {
                   const Vec3& v = (c.*member).*sub;
                   return csv::fmt(v.x()) + " " + csv::fmt(v.y()) + " " + csv::fmt(v.z());
                 }});
  };

  t.push_back({"scenario.cell",
               [](ScenarioConfig& c, const std::string& v, int) { c.cell = v; },
               [](const ScenarioConfig& c) { return c.cell; }});
  t.push_back({"scenario.mode",
               [](ScenarioConfig& c, const std::string& v, int) { c.mode = v; },
               [](const ScenarioConfig& c) { return c.mode; }});
  t.push_back({"scenario.runs",
               [](ScenarioConfig& c, const std::string& v, int line) {
                 c.runs = static_cast<int>(to_double(v, "scenario.runs", line));
               },
               [](const ScenarioConfig& c) { return csv::fmt(c.runs); }});
  t.push_back({"scenario.seed",
               [](ScenarioConfig& c, const std::string& v, int line) {
                 c.seed = static_cast<uint64_t>(to_double(v, "scenario.seed", line));
               },
               [](const ScenarioConfig& c) { return csv::fmt(c.seed); }});
  add_double("scenario.horizon_s", &ScenarioConfig::horizon_s);
  add_double("scenario.imu_rate_hz", &ScenarioConfig::imu_rate_hz);
  add_double("scenario.meas_rate_hz", &ScenarioConfig::meas_rate_hz);

  add_sub_double("noise.gyro1_density", &ScenarioConfig::noise, &NoiseParams::sigma_g1);
  add_sub_double("noise.gyro2_density", &ScenarioConfig::noise, &NoiseParams::sigma_g2);
  add_sub_double("noise.accel1_density", &ScenarioConfig::noise, &NoiseParams::sigma_a1);
  add_sub_double("noise.accel2_density", &ScenarioConfig::noise, &NoiseParams::sigma_a2);
  add_sub_double("noise.gyro1_walk", &ScenarioConfig::noise, &NoiseParams::sigma_wg1);
  add_sub_double("noise.gyro2_walk", &ScenarioConfig::noise, &NoiseParams::sigma_wg2);
  add_sub_double("noise.accel1_walk", &ScenarioConfig::noise, &NoiseParams::sigma_wa1);
  add_sub_double("noise.accel2_walk", &ScenarioConfig::noise, &NoiseParams::sigma_wa2);
  add_double("noise.dp_sigma", &ScenarioConfig::dp_sigma);
  add_double("noise.dq_sigma", &ScenarioConfig::dq_sigma);
  add_double("noise.gyro1_inflation", &ScenarioConfig::gyro1_inflation);

  add_sub_double("init.var_p", &ScenarioConfig::init, &InitParams::var_p);
  add_sub_double("init.var_v", &ScenarioConfig::init, &InitParams::var_v);
  add_sub_double("init.var_theta", &ScenarioConfig::init, &InitParams::var_theta);
  add_sub_double("init.var_bg1", &ScenarioConfig::init, &InitParams::var_bg1);
  add_sub_double("init.var_bg2", &ScenarioConfig::init, &InitParams::var_bg2);
  add_sub_double("init.var_ba1", &ScenarioConfig::init, &InitParams::var_ba1);
  add_sub_double("init.var_ba2", &ScenarioConfig::init, &InitParams::var_ba2);
  add_sub_bool("init.perturb_estimate", &ScenarioConfig::init, &InitParams::perturb_estimate);
  add_sub_bool("init.draw_true_biases", &ScenarioConfig::init, &InitParams::draw_true_biases);
  add_sub_double("init.true_bias_scale", &ScenarioConfig::init, &InitParams::true_bias_scale);

  add_sub_vec3("profile.rel_p0", &ScenarioConfig::profile, &ProfileParams::rel_p0);
  add_sub_vec3("profile.rel_rpy0_deg", &ScenarioConfig::profile, &ProfileParams::rel_rpy0_deg);
  add_sub_double("profile.rel_trans_amp", &ScenarioConfig::profile, &ProfileParams::rel_trans_amp);
  add_sub_double("profile.rel_rot_amp", &ScenarioConfig::profile, &ProfileParams::rel_rot_amp);
  add_sub_double("profile.ref_trans_amp", &ScenarioConfig::profile, &ProfileParams::ref_trans_amp);
  add_sub_double("profile.ref_rot_amp", &ScenarioConfig::profile, &ProfileParams::ref_rot_amp);
  add_sub_double("profile.ref_yaw_amp", &ScenarioConfig::profile, &ProfileParams::ref_yaw_amp);
  add_sub_double("profile.ref_speed", &ScenarioConfig::profile, &ProfileParams::ref_speed);
  add_sub_double("profile.ref_speed_amp", &ScenarioConfig::profile, &ProfileParams::ref_speed_amp);

  t.push_back({"filter.phi_order",
               [](ScenarioConfig& c, const std::string& v, int line) {
                 c.phi_order = static_cast<int>(to_double(v, "filter.phi_order", line));
               },
               [](const ScenarioConfig& c) { return csv::fmt(c.phi_order); }});
  add_bool("filter.chi2_gate", &ScenarioConfig::chi2_gate);
  add_double("filter.chi2_threshold", &ScenarioConfig::chi2_threshold);
  add_double("filter.gyro_diff_cutoff_hz", &ScenarioConfig::gyro_diff_cutoff_hz);
  t.push_back({"filter.omega_dot",
               [](ScenarioConfig& c, const std::string& v, int line) {
                 if (v != "analytic" && v != "difference")
                   throw ConfigError("line " + std::to_string(line) +
                                     ": filter.omega_dot must be analytic or difference");
                 c.omega_dot_source = v;
               },
               [](const ScenarioConfig& c) { return c.omega_dot_source; }});

  add_double("obs.rank_tol", &ScenarioConfig::rank_tol);
  t.push_back({"obs.steps",
               [](ScenarioConfig& c, const std::string& v, int line) {
                 c.obs_steps = static_cast<int>(to_double(v, "obs.steps", line));
               },
               [](const ScenarioConfig& c) { return csv::fmt(c.obs_steps); }});
  add_double("obs.residual_tol", &ScenarioConfig::residual_tol);
  add_double("obs.contrast_tol", &ScenarioConfig::contrast_tol);
  add_double("obs.angle_tol", &ScenarioConfig::angle_tol);

  add_bool("init_state.present", &ScenarioConfig::has_init_state);
  add_vec3("init_state.p", &ScenarioConfig::init_p);
  add_vec3("init_state.v", &ScenarioConfig::init_v);
  t.push_back({"init_state.q_wxyz",
               [](ScenarioConfig& c, const std::string& v, int line) {
                 const auto d = to_doubles(v, 4, "init_state.q_wxyz", line);
                 c.init_q = Vec4(d[0], d[1], d[2], d[3]);
               },
               [](const ScenarioConfig& c) {
                 return csv::fmt(c.init_q(0)) + " " + csv::fmt(c.init_q(1)) + " " +
                        csv::fmt(c.init_q(2)) + " " + csv::fmt(c.init_q(3));
               }});
  add_vec3("init_state.bg1", &ScenarioConfig::init_bg1);
  add_vec3("init_state.bg2", &ScenarioConfig::init_bg2);
  add_vec3("init_state.ba1", &ScenarioConfig::init_ba1);
  add_vec3("init_state.ba2", &ScenarioConfig::init_ba2);

  t.push_back({"output.out_dir",
               [](ScenarioConfig& c, const std::string& v, int) { c.out_dir = v; },
               [](const ScenarioConfig& c) { return c.out_dir; }});
  add_bool("output.dump_logs", &ScenarioConfig::dump_logs);
  return t;
}

void validate(const ScenarioConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(c.runs >= 1, "scenario.runs must be >= 1");
  require(c.horizon_s > 0, "scenario.horizon_s must be > 0");
  require(c.imu_rate_hz > 0, "scenario.imu_rate_hz must be > 0");
  require(c.meas_rate_hz > 0 && c.meas_rate_hz <= c.imu_rate_hz,
          "scenario.meas_rate_hz must be in (0, imu_rate_hz]");
  require(c.noise.sigma_g1 >= 0, "noise.gyro1_density must be >= 0");
  require(c.noise.sigma_g2 >= 0, "noise.gyro2_density must be >= 0");
  require(c.noise.sigma_a1 >= 0, "noise.accel1_density must be >= 0");
  require(c.noise.sigma_a2 >= 0, "noise.accel2_density must be >= 0");
  require(c.noise.sigma_wg1 >= 0, "noise.gyro1_walk must be >= 0");
  require(c.noise.sigma_wg2 >= 0, "noise.gyro2_walk must be >= 0");
  require(c.noise.sigma_wa1 >= 0, "noise.accel1_walk must be >= 0");
  require(c.noise.sigma_wa2 >= 0, "noise.accel2_walk must be >= 0");
  require(c.dp_sigma >= 0, "noise.dp_sigma must be >= 0");
  require(c.dq_sigma >= 0, "noise.dq_sigma must be >= 0");
  require(c.gyro1_inflation >= 1.0, "noise.gyro1_inflation must be >= 1");
  require(c.init.var_p >= 0 && c.init.var_v >= 0 && c.init.var_theta >= 0 &&
              c.init.var_bg1 >= 0 && c.init.var_bg2 >= 0 && c.init.var_ba1 >= 0 &&
              c.init.var_ba2 >= 0,
          "init.var_* must be >= 0");
  require(c.phi_order == 1 || c.phi_order == 2, "filter.phi_order must be 1 or 2");
  require(c.mode == "dp" || c.mode == "dpdq", "scenario.mode must be dp or dpdq");
  cell_from_string(c.cell);  // throws on bad tag
}

}  // namespace

ScenarioConfig parse_config_text(const std::string& text) {
  static const std::vector<KeyEntry> table = key_table();
  ScenarioConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = s.substr(1, s.size() - 2);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = section + "." + trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    bool found = false;
    for (const auto& e : table) {
      if (e.name == key) {
        e.set(cfg, value, line_no);
        found = true;
        break;
      }
    }
    if (!found)
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  try {
    validate(cfg);
  } catch (const ScenarioError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
  static const std::vector<KeyEntry> table = key_table();
  std::ostringstream os;
  std::string section;
  for (const auto& e : table) {
    const auto dot = e.name.find('.');
    const std::string sec = e.name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << "\n";
      os << "[" << sec << "]\n";
      section = sec;
    }
    os << e.name.substr(dot + 1) << " = " << e.get(cfg) << "\n";
  }
  return os.str();
}

MotionCell ScenarioConfig::parsed_cell() const { return cell_from_string(cell); }
MeasMode ScenarioConfig::parsed_mode() const { return mode_from_string(mode); }

RunOptions ScenarioConfig::run_options() const {
  RunOptions o;
  o.horizon = horizon_s;
  o.imu_rate = imu_rate_hz;
  o.meas_rate = meas_rate_hz;
  o.mode = parsed_mode();
  o.meas.sigma_dp = dp_sigma;
  o.meas.sigma_dq = dq_sigma;
  o.init = init;
  o.ekf.phi_order = phi_order;
  o.ekf.gyro1_inflation = gyro1_inflation;
  o.ekf.chi2_gate = chi2_gate;
  o.ekf.chi2_threshold = chi2_threshold;
  o.ekf.accel_cutoff_hz = gyro_diff_cutoff_hz;
  o.ekf.analytic_omega_dot = omega_dot_source == "analytic";
  return o;
}

ObsOptions ScenarioConfig::obs_options() const {
  ObsOptions o;
  o.horizon = horizon_s;
  o.imu_rate = imu_rate_hz;
  o.steps = obs_steps;
  o.rank_tol = rank_tol;
  o.residual_tol = residual_tol;
  o.contrast_tol = contrast_tol;
  o.angle_tol = angle_tol;
  return o;
}

ProfileParams ScenarioConfig::profile_params() const {
  ProfileParams p = profile;
  p.duration = horizon_s;
  return p;
}

std::optional<SystemState> ScenarioConfig::initial_state() const {
  if (!has_init_state) return std::nullopt;
  SystemState x;
  x.p_rel = init_p;
  x.v_rel = init_v;
  Quat q = geom::from_vec4(init_q);
  q.normalize();
  x.q_rel = q;
  x.bg1 = init_bg1;
  x.bg2 = init_bg2;
  x.ba1 = init_ba1;
  x.ba2 = init_ba2;
  return x;
}

}  // namespace relimu
