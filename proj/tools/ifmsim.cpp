// ifmsim command line front end.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

#include "ifmsim/config.hpp"
#include "ifmsim/run.hpp"
#include "ifmsim/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool out_given = false;
  bool quiet = false;
};

void add_common(CLI::App* app, CommonArgs& args) {
  app->add_option("--config", args.config_path, "configuration file (dotted key = value lines)")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", args.seed, "random seed override")
      ->each([&args](const std::string&) { args.seed_given = true; });
  app->add_option("--out", args.out_dir, "output directory")
      ->envname("IFMSIM_OUT")
      ->each([&args](const std::string&) { args.out_given = true; });
  app->add_flag("--quiet", args.quiet, "suppress stdout summary");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("ifmsim ") + ifmsim::kVersion +
               " - polarized neutron interferometry simulator"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string fit_input;

  std::vector<std::pair<std::string, ifmsim::cli::Subcommand>> subs = {
      {"bell", ifmsim::cli::Subcommand::bell},
      {"raster", ifmsim::cli::Subcommand::raster},
      {"temperature", ifmsim::cli::Subcommand::temperature},
      {"rocking", ifmsim::cli::Subcommand::rocking},
      {"two-flipper", ifmsim::cli::Subcommand::two_flipper},
      {"larmor-cal", ifmsim::cli::Subcommand::larmor_cal},
      {"fit", ifmsim::cli::Subcommand::fit},
  };
  const std::vector<std::string> descriptions = {
      "Bell measurement run: fringes, expectation values and the S-value",
      "contrast raster scan over the interferometer face",
      "contrast and fringe position against coil temperature",
      "rocking-curve scan with Gaussian peak fits",
      "two-flipper polarimetry of beam polarization and flipper efficiencies",
      "Larmor accelerator calibration (current per pi/2 rotation)",
      "offline sinusoid fits of an existing counts table",
  };

  std::vector<CLI::App*> apps;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    CLI::App* sub = app.add_subcommand(subs[i].first, descriptions[i]);
    add_common(sub, args);
    if (subs[i].second == ifmsim::cli::Subcommand::fit)
      sub->add_option("input", fit_input, "counts table to fit")->required();
    apps.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    ifmsim::cli::ExperimentConfig config = args.config_path.empty()
                                               ? ifmsim::cli::default_config()
                                               : ifmsim::cli::load_config(args.config_path);
    ifmsim::cli::RunOptions options;
    if (args.seed_given) options.seed_override = args.seed;
    if (args.out_given) options.output_dir_override = args.out_dir;
    options.quiet = args.quiet;
    options.fit_input = fit_input;

    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (apps[i]->parsed()) {
        ifmsim::cli::run(subs[i].second, config, options);
        return 0;
      }
    }
    std::cerr << "error: no subcommand selected\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
