#pragma once

// JSON configuration files and dotted parameter paths ("laser_R.detuning").
//
// Schema (every section optional, unknown keys rejected):
//
//   {
//     "name": "...", "description": "...",            free-form metadata
//     "atom":    { "gamma_P": MHz, "beta_PS": 1, "beta_PD": 1,
//                  "gamma_Q": MHz, "mass": amu },
//     "laser_B": { "rabi": MHz, "detuning": MHz, "wavelength": nm,
//                  "direction": +1|-1, "linewidth_hwhm": MHz },
//     "laser_R": { ... }, "laser_C": { ... },
//     "motion":  { "enabled": bool, "trap_frequency": MHz,
//                  "amplitude": nm  |  "eta_B": |eta_B| }
//   }
//
// All frequencies are the "2pi x" values in MHz.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nscheme/model.hpp"

namespace nscheme {

using Json = nlohmann::json;

inline const std::vector<std::string>& parameter_paths() {
  static const std::vector<std::string> paths = [] {
    std::vector<std::string> p{"atom.gamma_P", "atom.beta_PS", "atom.beta_PD", "atom.gamma_Q", "atom.mass"};
    for (Beam b : {Beam::B, Beam::R, Beam::C})
      for (const char* f : {"rabi", "detuning", "wavelength", "direction", "linewidth_hwhm"})
        p.push_back(std::string(beam_name(b)) + "." + f);
    p.push_back("motion.trap_frequency");
    p.push_back("motion.amplitude");
    return p;
  }();
  return paths;
}

/// Reference to the scalar field named by `path`, in input units.
inline double& parameter_ref(ConfigInput& in, std::string_view path) {
  const auto dot = path.find('.');
  const std::string_view section = path.substr(0, dot);
  const std::string_view field = dot == std::string_view::npos ? std::string_view{} : path.substr(dot + 1);
  if (section == "atom") {
    if (field == "gamma_P") return in.atom.gamma_P_MHz;
    if (field == "beta_PS") return in.atom.beta_PS;
    if (field == "beta_PD") return in.atom.beta_PD;
    if (field == "gamma_Q") return in.atom.gamma_Q_MHz;
    if (field == "mass") return in.atom.mass_amu;
  } else if (section == "laser_B" || section == "laser_R" || section == "laser_C") {
    LaserInput& l = section == "laser_B" ? in.laser_B : (section == "laser_R" ? in.laser_R : in.laser_C);
    if (field == "rabi") return l.rabi_MHz;
    if (field == "detuning") return l.detuning_MHz;
    if (field == "wavelength") return l.wavelength_nm;
    if (field == "direction") return l.direction;
    if (field == "linewidth_hwhm") return l.linewidth_hwhm_MHz;
  } else if (section == "motion") {
    if (field == "trap_frequency") return in.motion.trap_frequency_MHz;
    if (field == "amplitude") return in.motion.amplitude_nm;
  }
  throw Error(ErrorCode::UnknownKey, "unknown parameter path '" + std::string(path) + "'", std::string(path));
}

inline double get_parameter(const ConfigInput& in, std::string_view path) {
  return parameter_ref(const_cast<ConfigInput&>(in), path);
}

inline void set_parameter(ConfigInput& in, std::string_view path, double value) { parameter_ref(in, path) = value; }

/// Applies "path=value"; also accepts motion.enabled=true|false and motion.eta_B=<value>.
inline void apply_override(ConfigInput& in, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw Error(ErrorCode::InvalidParameter, "override '" + std::string(assignment) + "' is not path=value");
  const std::string path(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  if (path == "motion.enabled") {
    if (value != "true" && value != "false")
      throw Error(ErrorCode::InvalidParameter, "motion.enabled must be true or false", path);
    in.motion.enabled = value == "true";
    return;
  }
  double v = 0.0;
  std::size_t used = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size())
    throw Error(ErrorCode::InvalidParameter, "value '" + value + "' for " + path + " is not a number", path);
  if (path == "motion.eta_B") {
    in.motion.amplitude_nm = amplitude_for_eta_B(in, v);
    return;
  }
  set_parameter(in, path, v);
}

namespace detail {

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::InvalidParameter, where + " must be a JSON object", where);
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) {
      const std::string path = where.empty() ? key : where + "." + key;
      throw Error(ErrorCode::UnknownKey, "unknown key '" + path + "'", path);
    }
  }
}

inline void read_number(const Json& obj, const char* key, double& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number())
    throw Error(ErrorCode::InvalidParameter, where + "." + key + " must be a number", where + "." + key);
  out = v.get<double>();
}

}  // namespace detail

/// Parses a configuration document; does not validate physical invariants.
inline ConfigInput config_from_json(const Json& doc) {
  using detail::read_number;
  detail::reject_unknown(doc, {"name", "description", "atom", "laser_B", "laser_R", "laser_C", "motion"}, "");
  ConfigInput in;
  if (doc.contains("atom")) {
    const auto& a = doc.at("atom");
    detail::reject_unknown(a, {"gamma_P", "beta_PS", "beta_PD", "gamma_Q", "mass"}, "atom");
    read_number(a, "gamma_P", in.atom.gamma_P_MHz, "atom");
    read_number(a, "beta_PS", in.atom.beta_PS, "atom");
    read_number(a, "beta_PD", in.atom.beta_PD, "atom");
    read_number(a, "gamma_Q", in.atom.gamma_Q_MHz, "atom");
    read_number(a, "mass", in.atom.mass_amu, "atom");
  }
  for (Beam b : {Beam::B, Beam::R, Beam::C}) {
    const std::string name(beam_name(b));
    if (!doc.contains(name)) continue;
    const auto& l = doc.at(name);
    detail::reject_unknown(l, {"rabi", "detuning", "wavelength", "direction", "linewidth_hwhm"}, name);
    auto& dst = in.laser(b);
    read_number(l, "rabi", dst.rabi_MHz, name);
    read_number(l, "detuning", dst.detuning_MHz, name);
    read_number(l, "wavelength", dst.wavelength_nm, name);
    read_number(l, "direction", dst.direction, name);
    read_number(l, "linewidth_hwhm", dst.linewidth_hwhm_MHz, name);
  }
  if (doc.contains("motion")) {
    const auto& m = doc.at("motion");
    detail::reject_unknown(m, {"enabled", "trap_frequency", "amplitude", "eta_B"}, "motion");
    if (m.contains("enabled")) {
      if (!m.at("enabled").is_boolean())
        throw Error(ErrorCode::InvalidParameter, "motion.enabled must be a boolean", "motion.enabled");
      in.motion.enabled = m.at("enabled").get<bool>();
    }
    read_number(m, "trap_frequency", in.motion.trap_frequency_MHz, "motion");
    if (m.contains("amplitude") && m.contains("eta_B"))
      throw Error(ErrorCode::InvalidParameter, "give either motion.amplitude or motion.eta_B, not both",
                  "motion.eta_B");
    read_number(m, "amplitude", in.motion.amplitude_nm, "motion");
    if (m.contains("eta_B")) {
      double eta = 0.0;
      read_number(m, "eta_B", eta, "motion");
      in.motion.amplitude_nm = amplitude_for_eta_B(in, eta);
    }
  }
  return in;
}

inline Json config_to_json(const ConfigInput& in) {
  Json doc;
  doc["atom"] = {{"gamma_P", in.atom.gamma_P_MHz}, {"beta_PS", in.atom.beta_PS}, {"beta_PD", in.atom.beta_PD},
                 {"gamma_Q", in.atom.gamma_Q_MHz}, {"mass", in.atom.mass_amu}};
  for (Beam b : {Beam::B, Beam::R, Beam::C}) {
    const auto& l = in.laser(b);
    doc[std::string(beam_name(b))] = {{"rabi", l.rabi_MHz},
                                      {"detuning", l.detuning_MHz},
                                      {"wavelength", l.wavelength_nm},
                                      {"direction", l.direction},
                                      {"linewidth_hwhm", l.linewidth_hwhm_MHz}};
  }
  doc["motion"] = {{"enabled", in.motion.enabled},
                   {"trap_frequency", in.motion.trap_frequency_MHz},
                   {"amplitude", in.motion.amplitude_nm}};
  return doc;
}

inline ConfigInput load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open config file '" + path + "'", path);
  Json doc;
  try {
    doc = Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidParameter, "malformed JSON in '" + path + "': " + e.what(), path);
  }
  return config_from_json(doc);
}

/// FNV-1a hash of the canonical JSON dump, as 16 hex digits.
inline std::string config_hash(const ConfigInput& in) {
  const std::string canon = config_to_json(in).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace nscheme
