#pragma once

// Library-level front end behind the CLI: runs one subcommand against a
// resolved configuration and persists its artifacts (counts tables, a
// summary in text and JSON, and the run manifest).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ifmsim/analysis.hpp"
#include "ifmsim/config.hpp"

namespace ifmsim::cli {

enum class Subcommand { bell, raster, temperature, rocking, two_flipper, larmor_cal, fit };

Subcommand parse_subcommand(const std::string& name);
std::string subcommand_name(Subcommand sub);

struct RunOptions {
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> output_dir_override;
  bool quiet = false;
  std::string fit_input;  // counts table consumed by the `fit` subcommand
};

/// One fitted fringe group of an offline `fit` run.
struct GroupFit {
  counting::Detector detector = counting::Detector::O;
  double alpha = 0;
  analysis::FringeFit fit{};
};

/// Groups a joint counts table by (detector, alpha) in order of first
/// appearance and fits each group's fringe.
std::vector<GroupFit> fit_counts_file(const std::filesystem::path& path);

/// Runs the subcommand and writes its artifacts under the resolved output
/// directory. Throws on failure.
void run(Subcommand sub, const ExperimentConfig& config, const RunOptions& options);

}  // namespace ifmsim::cli
