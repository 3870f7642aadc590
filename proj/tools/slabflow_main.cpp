#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "slabflow/commands.hpp"
#include "slabflow/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"slabflow: spectral free-surface Navier-Stokes on a flattened slab"};
  app.require_subcommand(1);
  std::string config;
  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const slabflow::RunConfig&, std::ostream&, std::ostream&);
  };
  const Entry entries[] = {
      {"run", "Picard run with CSV, JSON summary and field dumps", slabflow::cmd_run},
      {"verify", "identity, lemma and manufactured-solution checks", slabflow::cmd_verify},
      {"bench", "timing CSV across grid sizes", slabflow::cmd_bench},
      {"extend", "dump the Poisson extension of eta0", slabflow::cmd_extend},
  };
  for (const auto& e : entries) app.add_subcommand(e.name, e.help)->add_option("config", config, "config file")->required();
  CLI11_PARSE(app, argc, argv);

  slabflow::RunConfig cfg;
  try {
    cfg = slabflow::load_config(config);
  } catch (const slabflow::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return slabflow::kExitFailure;
  }
  for (const auto& e : entries)
    if (app.got_subcommand(e.name)) return e.fn(cfg, std::cout, std::cerr);
  return slabflow::kExitFailure;
}
