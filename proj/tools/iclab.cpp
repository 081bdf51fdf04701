#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "icl/errors.hpp"
#include "icl/experiment.hpp"
#include "icl/parallel.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitOther = 1;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iclab: in-context learning experiments"};
  app.set_version_flag("--version", std::string(icl::kToolVersion));
  app.require_subcommand(1);

  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (default: ICLAB_THREADS or hardware)");

  auto* run = app.add_subcommand("run", "run the experiment described by a JSON config");
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  run->add_option("config", config_path, "path to the JSON config")->required();
  auto* out_opt = run->add_option("--out", out_dir, "output directory (overrides the config)");
  auto* seed_opt = run->add_option("--seed", seed, "master seed (overrides the config)");

  auto* list = app.add_subcommand("list", "list experiment kinds and their config fields");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) icl::thread_override() = threads;

  if (*list) {
    std::cout << icl::catalog_text();
    return 0;
  }

  icl::RunOptions opt;
  if (*out_opt) opt.out_dir = out_dir;
  if (*seed_opt) opt.seed = seed;
  try {
    const auto res = icl::run_config_file(config_path, opt);
    for (const auto& f : res.files) std::cout << res.out_dir << "/" << f << "\n";
    return 0;
  } catch (const icl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const icl::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const icl::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}
