#include <iostream>

#include "CLI11.hpp"

#include "hc1/cli_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"First critical field of a layered superconducting cylinder in the mean-field limit"};
  app.require_subcommand(1, 1);
  std::string config;
  std::string output_dir;
  bool deterministic = true;
  int threads = 1;
  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config, "INI run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--output-dir", output_dir, "Overrides output.directory");
    sub->add_option("--deterministic", deterministic, "Fixed reduction orders (default true)");
    sub->add_option("--threads", threads, "Worker threads for slice-parallel stages")->check(CLI::PositiveNumber);
  };
  add_flags(app.add_subcommand("hc1", "Solve for B_star and report xi and the critical field coefficient"));
  add_flags(app.add_subcommand("sweep", "h0 sweep of the constrained slice problems with onset detection"));
  add_flags(app.add_subcommand("obstacle", "Standalone double-obstacle solve on the cross-section"));
  add_flags(app.add_subcommand("validate", "Oracle battery"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hc1::exit_config;
  }
  hc1::RunOptions opts;
  if (!output_dir.empty()) opts.output_dir = output_dir;
  opts.deterministic = deterministic;
  opts.threads = threads;
  return hc1::run_command(app.get_subcommands().front()->get_name(), config, opts);
}
