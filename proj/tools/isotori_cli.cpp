#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "isotori/config.hpp"
#include "isotori/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"isotori: persistence checks and continuation of invariant isotropic tori"};
  std::string config_path;
  std::string output_dir;
  bool verbose = false;
  app.add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
  app.add_option("-o,--output", output_dir, "Output directory, overrides \"outputs\" in the config");
  app.add_flag("-v,--verbose", verbose, "Echo the run log to standard error");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : isotori::exit_error;
  }

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "config: cannot read " << config_path << '\n';
    return isotori::exit_error;
  }
  std::stringstream text;
  text << in.rdbuf();

  isotori::RunConfig cfg;
  try {
    cfg = isotori::parse_config(text.str());
  } catch (const isotori::Error& e) {
    std::cerr << e.what() << '\n';
    return isotori::exit_error;
  }
  if (!output_dir.empty()) cfg.outputs = output_dir;

  isotori::ExecuteOptions opts;
  opts.verbose = verbose;
  opts.source_text = text.str();
  return isotori::execute(cfg, opts);
}
