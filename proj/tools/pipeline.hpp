#pragma once

// Batch driver behind the `brainnet` executable. Every command works one
// subject at a time on a worker pool, records failures per subject instead of
// aborting, and finishes by writing a run manifest next to its outputs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/brainnet.hpp"

namespace brainnet::cli {

namespace fs = std::filesystem;

inline constexpr const char* kDatasetRootEnv = "BRAINNET_DATASET_ROOT";

struct PipelineConfig {
  fs::path dataset_root;
  fs::path output_root = "brainnet-out";
  CropMode crop_mode = CropMode::Global;
  ChannelOrder channel_order{};
  std::vector<Axis> axes{Axis::Axial, Axis::Sagittal, Axis::Coronal};
  AxisMap axis_map{};
  fs::path ensemble_manifest;
  TieBreak tie_break{};
  VoteMode vote_mode = VoteMode::Classes;
  bool write_histogram = false;
  fs::path predictions_root;
  DistanceMethod distance = DistanceMethod::DistanceTransform;
  std::string volume_extension = ".nii.gz";  // for volumes this tool writes
  unsigned workers = 1;
  std::uint64_t seed = 0;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};

  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Keys absent from `j` keep their current value in `c`.
void from_json(const nlohmann::json& j, PipelineConfig& c);

PipelineConfig load_config(const fs::path& path);

/// One subject directory: <root>/<id>/<anything>_<MODALITY>.<ext>, plus an
/// optional <anything>_segm.<ext> or <anything>_seg.<ext>.
struct SubjectFiles {
  std::string id;
  fs::path dir;
  std::map<Modality, fs::path> images;
  std::optional<fs::path> segmentation;
  std::vector<std::string> problems;  // duplicate matches etc., reported when the subject is processed
};

std::vector<SubjectFiles> discover_subjects(const fs::path& root);

struct SubjectFailure {
  std::string subject;
  std::string error;
};

struct RunReport {
  explicit RunReport(std::string cmd) : command(std::move(cmd)) {}

  std::string command;
  std::vector<std::string> completed;
  std::vector<SubjectFailure> failures;
  fs::path manifest;

  int exit_code() const noexcept { return failures.empty() ? 0 : 1; }
};

/// Thread-safe record of files read and written during a run.
class FileLog {
 public:
  void input(const fs::path& p);
  void output(const fs::path& p);
  std::vector<fs::path> inputs() const;
  std::vector<fs::path> outputs() const;

 private:
  mutable std::mutex mu_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

std::string sha256_file(const fs::path& p);
std::string sha256_bytes(std::string_view bytes);

/// Writes <output_root>/<command>_manifest.json: tool and library versions,
/// the config and its hash, hashes of every input and output, and failures.
/// Contains no timestamps, so identical runs give identical manifests.
fs::path write_manifest(const PipelineConfig& cfg, RunReport& report, const FileLog& files,
                        const nlohmann::json& extra = nlohmann::json::object());

/// Bounding box of nonzero voxels over every modality of every subject, with
/// the shared original dims. Subjects that fail to load or disagree on dims
/// are returned in `failures` and left out.
struct GlobalCrop {
  CropBox box;
  Dims original;
  std::vector<SubjectFailure> failures;
};
GlobalCrop compute_global_crop(const std::vector<SubjectFiles>& subjects, unsigned workers, FileLog* files = nullptr);

RunReport cmd_preprocess(const PipelineConfig& cfg);

/// Writes the slices of one label volume as grayscale mask PNGs in the same
/// layout cmd_preprocess uses (full-volume crop box), so the result can be
/// fed straight back to cmd_reassemble.
RunReport cmd_slice_extract(const PipelineConfig& cfg, const fs::path& volume, Axis axis, const fs::path& out_dir);

/// Rebuilds a 3D label volume from per-slice mask PNGs: masks are matched to
/// <subject_dir>/<axis>/index.json by file name, resized back to slice
/// resolution when needed, stacked, and padded back to the original dims.
RunReport cmd_slice_reassemble(const PipelineConfig& cfg, const fs::path& subject_dir, Axis axis,
                               const fs::path& masks_dir, const fs::path& out_volume);

RunReport cmd_ensemble(const PipelineConfig& cfg);

RunReport cmd_evaluate(const PipelineConfig& cfg, const std::string& model_name = "model");

RunReport cmd_report(const PipelineConfig& cfg, const fs::path& models_json,
                     const std::optional<fs::path>& evaluation_json, const std::string& evaluation_name);

RunReport cmd_split(const PipelineConfig& cfg, const std::optional<fs::path>& ids_file);

/// Evaluates the composite loss on a JSON fixture and compares against its
/// "expected" block when present. Result JSON goes to <output_root>/loss_check.json.
RunReport cmd_loss_check(const PipelineConfig& cfg, const fs::path& fixture);

std::string slice_file_name(const std::string& subject, Axis axis, std::size_t index);

}  // namespace brainnet::cli
