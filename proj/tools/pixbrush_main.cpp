// Command-line front end: `run` optimizes a localization mask and local
// texture on a mesh, `compose` stacks exported edit layers onto a base
// texture, `eval` scores result renders against reference images.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "pixbrush/config.hpp"
#include "pixbrush/mesh.hpp"
#include "pixbrush/png_io.hpp"
#include "pixbrush/toolkit.hpp"
#include "pixbrush/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunArgs {
  std::string config_path;
  std::string mesh_path;
  std::string image_path;
  std::string prompt;
  std::string out_dir;
  std::string resume_path;
  std::vector<std::string> overrides;
};

struct ComposeArgs {
  std::string base_path;
  std::vector<std::string> layer_dirs;
  std::string out_path;
};

struct EvalArgs {
  std::string results_dir;
  std::string refs_dir;
};

void apply_backend_env(pixbrush::TrainConfig& config) {
  const char* env = std::getenv("PIXBRUSH_BACKEND");
  if (env == nullptr || *env == '\0') {
    return;
  }
  const std::string value = env;
  if (value == "toy") {
    config.backend = pixbrush::BackendKind::Toy;
  } else if (value == "external") {
    config.backend = pixbrush::BackendKind::External;
  } else {
    throw std::runtime_error("PIXBRUSH_BACKEND must be 'toy' or 'external', got '" +
                             value + "'");
  }
}

int do_run(const RunArgs& args) {
  pixbrush::TrainConfig config = pixbrush::load_config(args.config_path);
  for (const std::string& entry : args.overrides) {
    const size_t eq = entry.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("--set expects key=value, got '" + entry + "'");
    }
    pixbrush::apply_config_entry(config, entry.substr(0, eq),
                                 entry.substr(eq + 1), "--set " + entry);
  }
  if (!args.prompt.empty()) {
    config.prompt = args.prompt;
  }
  if (!args.image_path.empty()) {
    config.reference_image = args.image_path;
  }
  apply_backend_env(config);
  pixbrush::validate_config(config);

  const pixbrush::Mesh mesh =
      pixbrush::normalize_unit(pixbrush::load_mesh(args.mesh_path));
  auto backend = pixbrush::make_backend(config);

  pixbrush::Trainer trainer =
      args.resume_path.empty()
          ? pixbrush::Trainer(config, mesh, backend)
          : pixbrush::Trainer(config, mesh, backend, {},
                              pixbrush::load_checkpoint(args.resume_path));
  trainer.run(args.out_dir + "/checkpoints");
  pixbrush::export_assets(trainer.state(), mesh, config, args.out_dir);

  json report;
  report["status"] = "ok";
  report["out"] = args.out_dir;
  report["iterations"] = trainer.state().iteration;
  report["config_digest"] = trainer.state().config_digest;
  std::cout << report.dump() << "\n";
  return 0;
}

int do_compose(const ComposeArgs& args) {
  const pixbrush::Image base =
      pixbrush::ensure_channels(pixbrush::read_png(args.base_path), 3);
  std::vector<pixbrush::EditLayer> layers;
  layers.reserve(args.layer_dirs.size());
  for (const std::string& dir : args.layer_dirs) {
    layers.push_back(pixbrush::load_layer(dir));
  }
  const pixbrush::Image out = pixbrush::composite_layers(base, layers);
  pixbrush::write_png(args.out_path, out, 8);

  json report;
  report["status"] = "ok";
  report["out"] = args.out_path;
  report["layers"] = args.layer_dirs.size();
  std::cout << report.dump() << "\n";
  return 0;
}

std::vector<fs::path> sorted_pngs(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir);
  }
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      paths.push_back(entry.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

int do_eval(const EvalArgs& args) {
  const std::vector<fs::path> result_paths = sorted_pngs(args.results_dir);
  const std::vector<fs::path> ref_paths = sorted_pngs(args.refs_dir);
  if (result_paths.size() != ref_paths.size()) {
    throw std::runtime_error("result and reference PNG counts differ (" +
                             std::to_string(result_paths.size()) + " vs " +
                             std::to_string(ref_paths.size()) + ")");
  }
  std::vector<pixbrush::Image> results, refs;
  for (const fs::path& p : result_paths) {
    results.push_back(pixbrush::ensure_channels(pixbrush::read_png(p.string()), 3));
  }
  for (const fs::path& p : ref_paths) {
    refs.push_back(pixbrush::ensure_channels(pixbrush::read_png(p.string()), 3));
  }
  const pixbrush::HistogramEmbedder embedder;
  json report;
  report["count"] = results.size();
  report["r_precision"] = pixbrush::r_precision(results, refs, embedder);
  report["mean_similarity"] = pixbrush::mean_similarity(results, refs, embedder);
  std::cout << report.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Synthesizes a localization mask and matching local texture on a mesh, "
      "guided by a reference image and text prompt"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand(
      "run", "Optimize localization and texture for one mesh");
  run->add_option("--config", run_args.config_path,
                  "Config file (flat key = value lines)")
      ->required();
  run->add_option("--mesh", run_args.mesh_path, "Wavefront OBJ with UVs")
      ->required();
  run->add_option("--image", run_args.image_path,
                  "Reference image PNG (overrides the config's path)");
  run->add_option("--prompt", run_args.prompt,
                  "Edit prompt (overrides the config's prompt)");
  run->add_option("--out", run_args.out_dir, "Output directory")->required();
  run->add_option("--resume", run_args.resume_path,
                  "Checkpoint file to resume from");
  run->add_option("--set", run_args.overrides,
                  "Config override key=value (repeatable)");

  ComposeArgs compose_args;
  CLI::App* compose = app.add_subcommand(
      "compose", "Stack exported edit layers onto a base texture");
  compose->add_option("--base", compose_args.base_path, "Base texture PNG")
      ->required();
  compose
      ->add_option("--layer", compose_args.layer_dirs,
                   "Exported run directory (repeatable, applied in order)")
      ->required();
  compose->add_option("--out", compose_args.out_path, "Output texture PNG")
      ->required();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Retrieval metrics for result renders vs reference images");
  eval->add_option("--results", eval_args.results_dir,
                   "Directory of result render PNGs")
      ->required();
  eval->add_option("--refs", eval_args.refs_dir,
                   "Directory of reference image PNGs")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help and friends
    }
    json err;
    err["error"] = std::string(e.what());
    std::cerr << err.dump() << "\n";
    return e.get_exit_code();
  }

  try {
    if (run->parsed()) {
      return do_run(run_args);
    }
    if (compose->parsed()) {
      return do_compose(compose_args);
    }
    return do_eval(eval_args);
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
