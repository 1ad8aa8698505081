#include "ifmsim/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ifmsim/version.hpp"

namespace ifmsim::cli {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  return fields;
}

double parse_field_double(const std::string& field, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("malformed number '" + field + "' in " + path.string());
  }
}

}  // namespace

std::string format_angle(double v) {
  // Full shortest-round-trip precision: reanalysis of a persisted table
  // must reproduce the in-run fits exactly, which 12-digit angles narrowly
  // miss.
  return format_full(v);
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string detector_name(counting::Detector d) {
  return d == counting::Detector::O ? "O" : "H";
}

counting::Detector parse_detector(const std::string& name) {
  if (name == "O") return counting::Detector::O;
  if (name == "H") return counting::Detector::H;
  throw std::runtime_error("unknown detector '" + name + "'");
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  file << content;
  if (!file) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream content;
  content << file.rdbuf();
  return content.str();
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  write_text_file(path, out);
}

void write_joint_counts(const std::filesystem::path& path,
                        const std::vector<counting::CountRecord>& records) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& rec : records) {
    rows.push_back({detector_name(rec.detector), format_angle(rec.setting.alpha),
                    format_angle(rec.setting.chi), format_full(rec.integration_time),
                    format_full(rec.counts)});
  }
  write_table(path, {"detector", "alpha_rad", "chi_rad", "time_s", "counts"}, rows);
}

std::vector<counting::CountRecord> read_joint_counts(const std::filesystem::path& path) {
  std::istringstream stream(read_text_file(path));
  std::string line;
  if (!std::getline(stream, line) || line != "detector,alpha_rad,chi_rad,time_s,counts")
    throw std::runtime_error("'" + path.string() + "' is not a joint counts table");
  std::vector<counting::CountRecord> records;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5)
      throw std::runtime_error("malformed counts row in '" + path.string() + "'");
    counting::CountRecord rec;
    rec.detector = parse_detector(fields[0]);
    rec.setting.alpha = parse_field_double(fields[1], path);
    rec.setting.chi = parse_field_double(fields[2], path);
    rec.integration_time = parse_field_double(fields[3], path);
    rec.counts = parse_field_double(fields[4], path);
    if (rec.counts < 0 || rec.integration_time < 0)
      throw std::runtime_error("negative counts or time in '" + path.string() + "'");
    rec.mean_rate = rec.integration_time > 0 ? rec.counts / rec.integration_time : 0.0;
    records.push_back(rec);
  }
  return records;
}

void Summary::add(const std::string& key, double value) {
  entries_.push_back({key, Kind::number, value, 0, {}});
}

void Summary::add(const std::string& key, const std::string& value) {
  entries_.push_back({key, Kind::text, 0, 0, value});
}

void Summary::add_integer(const std::string& key, std::int64_t value) {
  entries_.push_back({key, Kind::integer, 0, value, {}});
}

std::string Summary::to_text() const {
  std::string out;
  for (const auto& e : entries_) {
    out += e.key;
    out += " = ";
    switch (e.kind) {
      case Kind::number: out += format_full(e.number); break;
      case Kind::integer: out += std::to_string(e.integer); break;
      case Kind::text: out += e.text; break;
    }
    out += '\n';
  }
  return out;
}

std::string Summary::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& e : entries_) {
    switch (e.kind) {
      case Kind::number: j[e.key] = e.number; break;
      case Kind::integer: j[e.key] = e.integer; break;
      case Kind::text: j[e.key] = e.text; break;
    }
  }
  return j.dump(2) + "\n";
}

void Summary::write(const std::filesystem::path& directory, const std::string& stem) const {
  write_text_file(directory / (stem + ".txt"), to_text());
  write_text_file(directory / (stem + ".json"), to_json());
}

void write_manifest(const std::filesystem::path& path, const std::string& subcommand,
                    std::uint64_t seed,
                    const std::vector<std::pair<std::string, std::string>>& config_echo,
                    const std::vector<std::string>& outputs) {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["version"] = std::string("ifmsim ") + kVersion;
  j["seed"] = seed;
  nlohmann::ordered_json config;
  for (const auto& [key, value] : config_echo) config[key] = value;
  j["config"] = config;
  j["outputs"] = outputs;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace ifmsim::cli
