#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "bscch/config.hpp"
#include "bscch/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

bscch::RunConfig load(const Flags& f, const std::string& verb) {
  bscch::RunConfig cfg;
  if (!f.config.empty()) {
    std::ifstream is(f.config);
    if (!is) throw bscch::ConfigError({"cannot read config file " + f.config});
    std::ostringstream os;
    os << is.rdbuf();
    cfg = bscch::parse_config(os.str());
  }
  if (verb != "mesh-export") cfg.experiment = verb;
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (!f.out.empty()) cfg.out_dir = f.out;
  bscch::validate_config(cfg);
  return cfg;
}

void print_certify(const std::string& dir) {
  std::ifstream is(dir + "/certify.csv");
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) std::cout << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bulk-surface convective Cahn-Hilliard simulator"};
  app.set_version_flag("--version", std::string(bscch::kVersion));
  app.require_subcommand(1);

  Flags flags;
  const std::vector<std::pair<std::string, std::string>> verbs = {
      {"simulate", "run a trajectory"},
      {"stationary", "Newton solve for a stationary state"},
      {"pullback", "pullback absorption experiment"},
      {"equilibrium", "convergence-to-equilibrium report"},
      {"certify", "property checks of every module"},
      {"mesh-export", "write the mesh as legacy VTK"}};
  for (const auto& [name, help] : verbs) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, name == "mesh-export" ? "output .vtk file" : "output directory");
    sub->add_option("--seed", flags.seed, "random seed");
    sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    const auto cfg = load(flags, verb);
    if (verb == "mesh-export") {
      const std::string path = flags.out.empty() ? "mesh.vtk" : flags.out;
      bscch::export_mesh(cfg, path);
      std::cout << path << '\n';
      return 0;
    }
    const int code = bscch::run_experiment(cfg, cfg.out_dir);
    if (verb == "certify") print_certify(cfg.out_dir);
    if (code == 0)
      std::cout << "ok: " << cfg.out_dir << '\n';
    else
      std::cerr << "exit " << code << ": see " << cfg.out_dir << (code == 3 ? "/certify.csv" : "/error.json") << '\n';
    return code;
  } catch (const bscch::ConfigError& e) {
    for (const auto& s : e.issues()) std::cerr << s << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
}
