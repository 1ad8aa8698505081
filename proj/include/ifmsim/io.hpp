#pragma once

// Result persistence: counts tables (comma-separated text with a header
// row), flat key-value summaries with a JSON mirror, and the run manifest.
// All output is byte-stable for a fixed config and seed: no timestamps, no
// environment-dependent content.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ifmsim/counting.hpp"

namespace ifmsim::cli {

/// All numbers, angles included, are printed with enough digits to
/// round-trip the double exactly; tables re-read from disk reanalyze to
/// bit-identical results.
std::string format_angle(double v);
std::string format_full(double v);

std::string detector_name(counting::Detector d);
counting::Detector parse_detector(const std::string& name);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// Generic counts table: header plus pre-formatted rows.
void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows);

/// The joint-measurement counts table with columns
/// detector,alpha_rad,chi_rad,time_s,counts.
void write_joint_counts(const std::filesystem::path& path,
                        const std::vector<counting::CountRecord>& records);
std::vector<counting::CountRecord> read_joint_counts(const std::filesystem::path& path);

/// Ordered key-value result document, rendered as flat text ("key = value"
/// per line) and as a JSON object with the same keys.
class Summary {
 public:
  void add(const std::string& key, double value);
  void add(const std::string& key, const std::string& value);
  void add_integer(const std::string& key, std::int64_t value);

  std::string to_text() const;
  std::string to_json() const;

  /// Writes both renderings ("<stem>.txt" and "<stem>.json").
  void write(const std::filesystem::path& directory, const std::string& stem) const;

 private:
  enum class Kind { number, text, integer };
  struct Entry {
    std::string key;
    Kind kind;
    double number;
    std::int64_t integer;
    std::string text;
  };
  std::vector<Entry> entries_;
};

/// Machine-readable run manifest: subcommand, version, seed, the fully
/// resolved configuration and the list of written artifacts.
void write_manifest(const std::filesystem::path& path, const std::string& subcommand,
                    std::uint64_t seed,
                    const std::vector<std::pair<std::string, std::string>>& config_echo,
                    const std::vector<std::string>& outputs);

}  // namespace ifmsim::cli
