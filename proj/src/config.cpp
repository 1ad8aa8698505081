#include "ifmsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace ifmsim::cli {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Raw "key = value" lines with duplicate detection.
std::map<std::string, std::string> parse_lines(const std::string& text) {
  std::map<std::string, std::string> entries;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config parse error at line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config parse error at line " + std::to_string(line_no) + ": empty key");
    if (entries.contains(key)) throw ConfigError("duplicate key '" + key + "'");
    entries.emplace(key, value);
  }
  return entries;
}

class KeyReader {
 public:
  explicit KeyReader(std::map<std::string, std::string> entries) : entries_(std::move(entries)) {}

  template <typename Setter>
  void handle(const std::string& key, Setter&& set) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return;
    set(key, it->second);
    entries_.erase(it);
  }

  void finish() const {
    if (!entries_.empty()) throw ConfigError("unknown key '" + entries_.begin()->first + "'");
  }

 private:
  std::map<std::string, std::string> entries_;
};

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("value of '" + key + "' is not a number: '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("value of '" + key + "' is not an unsigned integer: '" + value + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("value of '" + key + "' is not an integer: '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("value of '" + key + "' must be 'true' or 'false'");
}

apparatus::CoilKind parse_coil_kind(const std::string& key, const std::string& value) {
  if (value == "none") return apparatus::CoilKind::none;
  if (value == "al_wire") return apparatus::CoilKind::al_wire;
  if (value == "al_ribbon") return apparatus::CoilKind::al_ribbon;
  if (value == "cu_ribbon_3mm") return apparatus::CoilKind::cu_ribbon_3mm;
  if (value == "cu_ribbon_4mm") return apparatus::CoilKind::cu_ribbon_4mm;
  throw ConfigError("value of '" + key +
                    "' must be one of none, al_wire, al_ribbon, cu_ribbon_3mm, cu_ribbon_4mm");
}

// "25.2:0.88, 26.2:0.60, 26.8:0.33"
std::vector<std::pair<double, double>> parse_anchors(const std::string& key,
                                                     const std::string& value) {
  std::vector<std::pair<double, double>> anchors;
  std::istringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("value of '" + key + "' must be a list of 'temperature:contrast' pairs");
    anchors.emplace_back(parse_double(key, trim(item.substr(0, colon))),
                         parse_double(key, trim(item.substr(colon + 1))));
  }
  if (anchors.empty()) throw ConfigError("value of '" + key + "' is empty");
  return anchors;
}

void require_range(const std::string& key, double value, double lo, double hi) {
  if (!(value >= lo && value <= hi)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "range error: '%s' = %g outside [%g, %g]", key.c_str(), value,
                  lo, hi);
    throw ConfigError(buf);
  }
}

void require_positive(const std::string& key, double value) {
  if (!(value > 0)) throw ConfigError("range error: '" + key + "' must be positive");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string coil_kind_name(apparatus::CoilKind kind) {
  switch (kind) {
    case apparatus::CoilKind::none: return "none";
    case apparatus::CoilKind::al_wire: return "al_wire";
    case apparatus::CoilKind::al_ribbon: return "al_ribbon";
    case apparatus::CoilKind::cu_ribbon_3mm: return "cu_ribbon_3mm";
    case apparatus::CoilKind::cu_ribbon_4mm: return "cu_ribbon_4mm";
  }
  return "none";
}

void validate(const ExperimentConfig& c) {
  require_positive("beam.wavelength_angstrom", c.beam.wavelength);
  require_positive("beam.prism_separation_rad", c.beam.prism_beam_separation);
  require_range("beam.detector_efficiency", c.beam.detector_efficiency, 0.0, 1.0);
  if (!(c.beam.detector_efficiency > 0))
    throw ConfigError("range error: 'beam.detector_efficiency' must be positive");
  require_positive("coil.effective_length_mm", c.coil.effective_length);
  require_positive("coil.field_mt_per_ampere", c.coil.field_per_ampere);
  require_range("noise.contrast", c.noise.contrast, 0.0, 1.0);
  require_range("noise.polarization", c.noise.polarization, 0.0, 1.0);
  require_range("noise.flipper1_efficiency", c.noise.flipper1_efficiency, 0.0, 1.0);
  require_range("noise.flipper2_efficiency", c.noise.flipper2_efficiency, 0.0, 1.0);
  try {
    c.thermal.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("range error: 'thermal.contrast_anchors': ") + e.what());
  }
  require_positive("counting.base_rate", c.counting.base_rate);
  require_positive("counting.time_per_point", c.counting.time_per_point);
  require_positive("counting.fit_time_per_point", c.counting.fit_time_per_point);
  require_positive("raster.step_mm", c.raster.step);
  if (c.raster.x_max < c.raster.x_min || c.raster.z_max < c.raster.z_min)
    throw ConfigError("range error: raster extents must satisfy min <= max");
  require_range("raster.peak_contrast", c.raster.peak_contrast, 0.0, 1.0);
  if (c.raster.sigma < 0) throw ConfigError("range error: 'raster.sigma_mm' must be >= 0");
  require_positive("raster.time_per_point", c.raster.time_per_point);
  if (c.raster.chi_points < 5)
    throw ConfigError("range error: 'raster.chi_points' must be at least 5");
  if (c.temperature.t_max < c.temperature.t_min)
    throw ConfigError("range error: temperature scan requires min <= max");
  require_positive("temperature.step_c", c.temperature.step);
  if (c.temperature.chi_points < 5)
    throw ConfigError("range error: 'temperature.chi_points' must be at least 5");
  if (c.rocking.folds != 1 && c.rocking.folds != 3)
    throw ConfigError("range error: 'rocking.folds' must be 1 or 3");
  if (c.rocking.points != 0 && c.rocking.points < 7)
    throw ConfigError("range error: 'rocking.points' must be 0 (auto) or at least 7");
  require_positive("rocking.peak_rate", c.rocking.peak_rate);
  require_positive("rocking.time_per_point", c.rocking.time_per_point);
  if (c.larmor.current_max <= c.larmor.current_min)
    throw ConfigError("range error: larmor scan requires current_min < current_max");
  if (c.larmor.points < 6)
    throw ConfigError("range error: 'larmor.points' must be at least 6");
  require_positive("larmor.time_per_point", c.larmor.time_per_point);
  require_positive("twoflipper.time_per_point", c.two_flipper.time_per_point);
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig config;
  config.coil = apparatus::default_larmor_coil(config.beam, config.constants);
  return config;
}

ExperimentConfig parse_config_text(const std::string& text) {
  KeyReader reader(parse_lines(text));
  ExperimentConfig c = default_config();
  bool coil_length_given = false;

  auto dbl = [&](const std::string& key, double& target, double scale = 1.0) {
    reader.handle(key,
                  [&](const std::string& k, const std::string& v) { target = parse_double(k, v) * scale; });
  };
  auto integer = [&](const std::string& key, int& target) {
    reader.handle(key, [&](const std::string& k, const std::string& v) { target = parse_int(k, v); });
  };
  auto boolean = [&](const std::string& key, bool& target) {
    reader.handle(key, [&](const std::string& k, const std::string& v) { target = parse_bool(k, v); });
  };

  dbl("beam.wavelength_angstrom", c.beam.wavelength, 1e-10);
  dbl("beam.prism_separation_rad", c.beam.prism_beam_separation);
  dbl("beam.detector_efficiency", c.beam.detector_efficiency);

  reader.handle("coil.effective_length_mm", [&](const std::string& k, const std::string& v) {
    c.coil.effective_length = parse_double(k, v) * 1e-3;
    coil_length_given = true;
  });
  reader.handle("coil.field_mt_per_ampere", [&](const std::string& k, const std::string& v) {
    c.coil.field_per_ampere = parse_double(k, v) * 1e-3;
  });

  dbl("noise.contrast", c.noise.contrast);
  dbl("noise.polarization", c.noise.polarization);
  dbl("noise.flipper1_efficiency", c.noise.flipper1_efficiency);
  dbl("noise.flipper2_efficiency", c.noise.flipper2_efficiency);
  boolean("noise.thermal_enabled", c.noise.thermal_enabled);
  dbl("noise.temperature_c", c.noise.temperature);

  dbl("thermal.reference_temperature_c", c.thermal.reference_temperature);
  dbl("thermal.phase_drift_rad_per_c", c.thermal.phase_drift_rate);
  reader.handle("thermal.contrast_anchors", [&](const std::string& k, const std::string& v) {
    c.thermal.contrast_vs_temperature = parse_anchors(k, v);
  });

  dbl("counting.base_rate", c.counting.base_rate);
  dbl("counting.time_per_point", c.counting.time_per_point);
  dbl("counting.fit_time_per_point", c.counting.fit_time_per_point);
  boolean("counting.poisson", c.counting.poisson);

  dbl("raster.x_min_mm", c.raster.x_min);
  dbl("raster.x_max_mm", c.raster.x_max);
  dbl("raster.z_min_mm", c.raster.z_min);
  dbl("raster.z_max_mm", c.raster.z_max);
  dbl("raster.step_mm", c.raster.step);
  dbl("raster.aperture_mm", c.raster.aperture);
  dbl("raster.peak_contrast", c.raster.peak_contrast);
  dbl("raster.center_x_mm", c.raster.center_x);
  dbl("raster.center_z_mm", c.raster.center_z);
  dbl("raster.sigma_mm", c.raster.sigma);
  dbl("raster.time_per_point", c.raster.time_per_point);
  integer("raster.chi_points", c.raster.chi_points);

  dbl("temperature.min_c", c.temperature.t_min);
  dbl("temperature.max_c", c.temperature.t_max);
  dbl("temperature.step_c", c.temperature.step);
  integer("temperature.chi_points", c.temperature.chi_points);

  integer("rocking.folds", c.rocking.folds);
  boolean("rocking.double_peak", c.rocking.double_peak);
  reader.handle("rocking.coil", [&](const std::string& k, const std::string& v) {
    c.rocking.coil = parse_coil_kind(k, v);
  });
  integer("rocking.points", c.rocking.points);
  dbl("rocking.peak_rate", c.rocking.peak_rate);
  dbl("rocking.time_per_point", c.rocking.time_per_point);

  dbl("larmor.current_min_a", c.larmor.current_min);
  dbl("larmor.current_max_a", c.larmor.current_max);
  integer("larmor.points", c.larmor.points);
  dbl("larmor.time_per_point", c.larmor.time_per_point);

  dbl("twoflipper.time_per_point", c.two_flipper.time_per_point);

  reader.handle("seed", [&](const std::string& k, const std::string& v) {
    c.seed.value = parse_u64(k, v);
  });
  reader.handle("output_dir", [&](const std::string&, const std::string& v) { c.output_dir = v; });

  reader.finish();

  // When the wavelength changed but no explicit coil length was given, keep
  // the coil calibrated to the 0.33 mT / 0.7 A working point.
  if (!coil_length_given) {
    const double field_per_ampere = c.coil.field_per_ampere;
    c.coil = apparatus::default_larmor_coil(c.beam, c.constants);
    c.coil.field_per_ampere = field_per_ampere;
  }

  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << file.rdbuf();
  return parse_config_text(text.str());
}

std::vector<std::pair<std::string, std::string>> config_key_values(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> kv;
  auto add = [&](const std::string& key, const std::string& value) { kv.emplace_back(key, value); };
  auto add_d = [&](const std::string& key, double v) { add(key, format_double(v)); };
  auto add_b = [&](const std::string& key, bool v) { add(key, v ? "true" : "false"); };

  add_d("beam.wavelength_angstrom", c.beam.wavelength * 1e10);
  add_d("beam.prism_separation_rad", c.beam.prism_beam_separation);
  add_d("beam.detector_efficiency", c.beam.detector_efficiency);
  add_d("coil.effective_length_mm", c.coil.effective_length * 1e3);
  add_d("coil.field_mt_per_ampere", c.coil.field_per_ampere * 1e3);
  add_d("noise.contrast", c.noise.contrast);
  add_d("noise.polarization", c.noise.polarization);
  add_d("noise.flipper1_efficiency", c.noise.flipper1_efficiency);
  add_d("noise.flipper2_efficiency", c.noise.flipper2_efficiency);
  add_b("noise.thermal_enabled", c.noise.thermal_enabled);
  add_d("noise.temperature_c", c.noise.temperature);
  add_d("thermal.reference_temperature_c", c.thermal.reference_temperature);
  add_d("thermal.phase_drift_rad_per_c", c.thermal.phase_drift_rate);
  {
    std::string anchors;
    for (const auto& [t, contrast] : c.thermal.contrast_vs_temperature) {
      if (!anchors.empty()) anchors += ", ";
      anchors += format_double(t) + ":" + format_double(contrast);
    }
    add("thermal.contrast_anchors", anchors);
  }
  add_d("counting.base_rate", c.counting.base_rate);
  add_d("counting.time_per_point", c.counting.time_per_point);
  add_d("counting.fit_time_per_point", c.counting.fit_time_per_point);
  add_b("counting.poisson", c.counting.poisson);
  add_d("raster.x_min_mm", c.raster.x_min);
  add_d("raster.x_max_mm", c.raster.x_max);
  add_d("raster.z_min_mm", c.raster.z_min);
  add_d("raster.z_max_mm", c.raster.z_max);
  add_d("raster.step_mm", c.raster.step);
  add_d("raster.aperture_mm", c.raster.aperture);
  add_d("raster.peak_contrast", c.raster.peak_contrast);
  add_d("raster.center_x_mm", c.raster.center_x);
  add_d("raster.center_z_mm", c.raster.center_z);
  add_d("raster.sigma_mm", c.raster.sigma);
  add_d("raster.time_per_point", c.raster.time_per_point);
  add("raster.chi_points", std::to_string(c.raster.chi_points));
  add_d("temperature.min_c", c.temperature.t_min);
  add_d("temperature.max_c", c.temperature.t_max);
  add_d("temperature.step_c", c.temperature.step);
  add("temperature.chi_points", std::to_string(c.temperature.chi_points));
  add("rocking.folds", std::to_string(c.rocking.folds));
  add_b("rocking.double_peak", c.rocking.double_peak);
  add("rocking.coil", coil_kind_name(c.rocking.coil));
  add("rocking.points", std::to_string(c.rocking.points));
  add_d("rocking.peak_rate", c.rocking.peak_rate);
  add_d("rocking.time_per_point", c.rocking.time_per_point);
  add_d("larmor.current_min_a", c.larmor.current_min);
  add_d("larmor.current_max_a", c.larmor.current_max);
  add("larmor.points", std::to_string(c.larmor.points));
  add_d("larmor.time_per_point", c.larmor.time_per_point);
  add_d("twoflipper.time_per_point", c.two_flipper.time_per_point);
  add("seed", std::to_string(c.seed.value));
  add("output_dir", c.output_dir);

  std::sort(kv.begin(), kv.end());
  return kv;
}

}  // namespace ifmsim::cli
