// brainnet command-line driver. See README.md for the subcommands and flags.

#include <cstdlib>
#include <iostream>

#include <CLI/CLI.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pipeline.hpp"

using namespace brainnet;
using namespace brainnet::cli;

namespace {

// Flag values are held as optionals so that only flags actually given
// override the config file.
struct Overrides {
  std::string config;
  std::optional<std::string> dataset_root, output_root, crop_mode, manifest, vote_mode, predictions, distance, ext;
  std::optional<std::vector<std::string>> channel_order, axes, tie_break;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> ratios;
  bool histogram = false;
  std::string log_level = "info";
};

PipelineConfig resolve(const Overrides& o) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  if (const char* env = std::getenv(kDatasetRootEnv); env && *env) c.dataset_root = env;
  nlohmann::json j = nlohmann::json::object();
  if (o.dataset_root) j["dataset_root"] = *o.dataset_root;
  if (o.output_root) j["output_root"] = *o.output_root;
  if (o.crop_mode) j["crop_mode"] = *o.crop_mode;
  if (o.manifest) j["ensemble_manifest"] = *o.manifest;
  if (o.vote_mode) j["vote_mode"] = *o.vote_mode;
  if (o.predictions) j["predictions_root"] = *o.predictions;
  if (o.distance) j["distance"] = *o.distance;
  if (o.ext) j["volume_extension"] = *o.ext;
  if (o.channel_order) j["channel_order"] = *o.channel_order;
  if (o.axes) j["axes"] = *o.axes;
  if (o.tie_break) j["tie_break"] = *o.tie_break;
  if (o.workers) j["workers"] = *o.workers;
  if (o.seed) j["seed"] = *o.seed;
  if (o.ratios) {
    if (o.ratios->size() != 3) fail(ErrorCode::InvalidArgument, "--ratios takes three values");
    j["split_ratios"] = *o.ratios;
  }
  if (o.histogram) j["write_histogram"] = true;
  from_json(j, c);
  c.validate();
  return c;
}

void require_dir(const fs::path& p, const char* what) {
  if (p.empty()) fail(ErrorCode::InvalidArgument, std::string(what) + " is not set");
  if (!fs::is_directory(p)) fail(ErrorCode::IoError, std::string(what) + " does not exist: " + p.string());
}

int finish(const RunReport& r) {
  spdlog::info("{}: {} completed, {} failed; manifest {}", r.command, r.completed.size(), r.failures.size(),
               r.manifest.string());
  for (const auto& f : r.failures) spdlog::error("{}: {}", f.subject, f.error);
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brainnet: MRI preprocessing, slice ensembling and segmentation evaluation"};
  app.set_version_flag("--version", BRAINNET_VERSION);
  app.require_subcommand(1);

  Overrides o;
  app.add_option("--config", o.config, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  app.add_option("--dataset-root", o.dataset_root, std::string("Dataset root (also $") + kDatasetRootEnv + ")");
  app.add_option("-o,--output", o.output_root, "Output root");
  app.add_option("-j,--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error, off");
  app.add_option("--ext", o.ext, "Extension for volumes written: .nii.gz, .nii or .mvol");

  auto* pre = app.add_subcommand("preprocess", "Crop, normalise and slice every subject into RGB PNGs");
  pre->add_option("--crop-mode", o.crop_mode, "global or per-subject");
  pre->add_option("--channels", o.channel_order, "Modalities for R G B, e.g. FLAIR T1 T1GD")->expected(3);
  pre->add_option("--axes", o.axes, "Axes to slice: axial sagittal coronal");

  auto* slice = app.add_subcommand("slice", "Slice a label volume or rebuild one from 2D masks");
  slice->require_subcommand(1);
  std::string volume, axis = "axial", out_dir, subject_dir, masks_dir, out_volume;
  auto* extract = slice->add_subcommand("extract", "Write the slices of a label volume as mask PNGs");
  extract->add_option("volume", volume, "Label volume")->required()->check(CLI::ExistingFile);
  extract->add_option("--axis", axis, "axial, sagittal or coronal");
  extract->add_option("--out", out_dir, "Output directory")->required();
  auto* reasm = slice->add_subcommand("reassemble", "Stack predicted 2D masks back into a 3D label volume");
  reasm->add_option("subject_dir", subject_dir, "Preprocessed subject directory (has crop.json)")
      ->required()
      ->check(CLI::ExistingDirectory);
  reasm->add_option("--axis", axis, "axial, sagittal or coronal");
  reasm->add_option("--masks", masks_dir, "Directory of predicted mask PNGs")->required()->check(CLI::ExistingDirectory);
  reasm->add_option("--out", out_volume, "Output volume path")->required();

  auto* ens = app.add_subcommand("ensemble", "Majority-vote member predictions listed in a manifest");
  ens->add_option("--manifest", o.manifest, "Ensemble manifest JSON");
  ens->add_option("--vote", o.vote_mode, "classes or regions");
  ens->add_option("--tie-break", o.tie_break, "Label priority for ties, e.g. ET NCR ED Else")->expected(4);
  ens->add_flag("--histogram", o.histogram, "Also write per-label vote count volumes");

  auto* ev = app.add_subcommand("evaluate", "Dice and HD95 per subject and region against ground truth");
  std::string model_name = "model";
  ev->add_option("--predictions", o.predictions, "Directory of predicted volumes");
  ev->add_option("--distance", o.distance, "edt or brute-force");
  ev->add_option("--name", model_name, "Model name recorded in metrics.json");

  auto* rep = app.add_subcommand("report", "Render the model comparison table as text, CSV and LaTeX");
  std::string models_json, evaluation_name;
  std::optional<std::string> evaluation_json;
  rep->add_option("models", models_json, "JSON array of model summaries")->required()->check(CLI::ExistingFile);
  rep->add_option("--evaluation", evaluation_json, "metrics.json from evaluate, appended as a row");
  rep->add_option("--name", evaluation_name, "Row name for the evaluation");

  auto* sp = app.add_subcommand("split", "Seeded train/validation/test split by subject");
  std::optional<std::string> ids_file;
  sp->add_option("--ids", ids_file, "File with one subject id per line (default: dataset root)");
  sp->add_option("--seed", o.seed, "Shuffle seed");
  sp->add_option("--ratios", o.ratios, "Three ratios, default 0.6 0.2 0.2")->expected(3);

  auto* loss = app.add_subcommand("loss-check", "Evaluate the composite mask loss on a JSON fixture");
  std::string fixture;
  loss->add_option("fixture", fixture, "Fixture JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("brainnet");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(o.log_level));

  try {
    const PipelineConfig cfg = resolve(o);
    if (*pre) {
      require_dir(cfg.dataset_root, "dataset root");
      return finish(cmd_preprocess(cfg));
    }
    if (*extract) return finish(cmd_slice_extract(cfg, volume, parse_axis(axis), out_dir));
    if (*reasm) return finish(cmd_slice_reassemble(cfg, subject_dir, parse_axis(axis), masks_dir, out_volume));
    if (*ens) {
      if (cfg.ensemble_manifest.empty()) fail(ErrorCode::InvalidArgument, "--manifest is required");
      return finish(cmd_ensemble(cfg));
    }
    if (*ev) {
      require_dir(cfg.dataset_root, "dataset root");
      require_dir(cfg.predictions_root, "predictions root");
      return finish(cmd_evaluate(cfg, model_name));
    }
    if (*rep) {
      std::optional<fs::path> e;
      if (evaluation_json) e = *evaluation_json;
      return finish(cmd_report(cfg, models_json, e, evaluation_name));
    }
    if (*sp) {
      std::optional<fs::path> ids;
      if (ids_file) ids = *ids_file;
      else require_dir(cfg.dataset_root, "dataset root");
      return finish(cmd_split(cfg, ids));
    }
    if (*loss) return finish(cmd_loss_check(cfg, fixture));
  } catch (const std::exception& e) {
    spdlog::critical("{}", e.what());
    return 2;
  }
  return 2;
}
