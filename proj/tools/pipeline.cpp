#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <openssl/evp.h>
#include <openssl/opensslv.h>
#include <png.h>
#include <spdlog/spdlog.h>
#include <zlib.h>

#ifndef BRAINNET_VERSION
#define BRAINNET_VERSION "0.0.0"
#endif

namespace brainnet::cli {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

void PipelineConfig::validate() const {
  if (workers < 1) fail(ErrorCode::InvalidArgument, "workers must be >= 1");
  if (axes.empty()) fail(ErrorCode::InvalidArgument, "at least one axis is required");
  axis_map.validate();
  channel_order.validate();
  tie_break.validate();
  (void)format_for("x" + volume_extension);
  for (double r : split_ratios)
    if (!(r >= 0.0)) fail(ErrorCode::InvalidArgument, "split ratios must be >= 0");
}

void to_json(json& j, const PipelineConfig& c) {
  std::vector<std::string> axes, order, tie;
  for (Axis a : c.axes) axes.emplace_back(to_string(a));
  for (Modality m : c.channel_order.rgb) order.emplace_back(to_string(m));
  for (Label l : c.tie_break.priority) tie.emplace_back(to_string(l));
  j = {
      {"dataset_root", c.dataset_root.generic_string()},
      {"output_root", c.output_root.generic_string()},
      {"crop_mode", std::string(to_string(c.crop_mode))},
      {"channel_order", order},
      {"axes", axes},
      {"axis_map", {{"axial", c.axis_map.axial}, {"sagittal", c.axis_map.sagittal}, {"coronal", c.axis_map.coronal}}},
      {"ensemble_manifest", c.ensemble_manifest.generic_string()},
      {"tie_break", tie},
      {"vote_mode", c.vote_mode == VoteMode::Classes ? "classes" : "regions"},
      {"write_histogram", c.write_histogram},
      {"predictions_root", c.predictions_root.generic_string()},
      {"distance", c.distance == DistanceMethod::DistanceTransform ? "edt" : "brute-force"},
      {"volume_extension", c.volume_extension},
      {"workers", c.workers},
      {"seed", c.seed},
      {"split_ratios", c.split_ratios},
  };
}

void from_json(const json& j, PipelineConfig& c) {
  auto path = [&](const char* key, fs::path& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
  };
  try {
    path("dataset_root", c.dataset_root);
    path("output_root", c.output_root);
    path("ensemble_manifest", c.ensemble_manifest);
    path("predictions_root", c.predictions_root);
    if (j.contains("crop_mode")) c.crop_mode = parse_crop_mode(j.at("crop_mode").get<std::string>());
    if (j.contains("channel_order")) {
      const auto v = j.at("channel_order").get<std::vector<std::string>>();
      if (v.size() != 3) fail(ErrorCode::InvalidArgument, "channel_order needs three entries");
      for (std::size_t i = 0; i < 3; ++i) c.channel_order.rgb[i] = parse_modality(v[i]);
    }
    if (j.contains("axes")) {
      c.axes.clear();
      for (const auto& a : j.at("axes").get<std::vector<std::string>>()) c.axes.push_back(parse_axis(a));
    }
    if (j.contains("axis_map")) {
      const auto& m = j.at("axis_map");
      c.axis_map.axial = m.value("axial", c.axis_map.axial);
      c.axis_map.sagittal = m.value("sagittal", c.axis_map.sagittal);
      c.axis_map.coronal = m.value("coronal", c.axis_map.coronal);
    }
    if (j.contains("tie_break")) {
      const auto v = j.at("tie_break").get<std::vector<std::string>>();
      if (v.size() != 4) fail(ErrorCode::InvalidArgument, "tie_break needs four labels");
      for (std::size_t i = 0; i < 4; ++i) c.tie_break.priority[i] = parse_label(v[i]);
    }
    if (j.contains("vote_mode")) {
      const auto m = j.at("vote_mode").get<std::string>();
      if (m == "classes") c.vote_mode = VoteMode::Classes;
      else if (m == "regions") c.vote_mode = VoteMode::Regions;
      else fail(ErrorCode::InvalidArgument, "vote_mode must be 'classes' or 'regions'");
    }
    c.write_histogram = j.value("write_histogram", c.write_histogram);
    if (j.contains("distance")) {
      const auto m = j.at("distance").get<std::string>();
      if (m == "edt") c.distance = DistanceMethod::DistanceTransform;
      else if (m == "brute-force") c.distance = DistanceMethod::BruteForce;
      else fail(ErrorCode::InvalidArgument, "distance must be 'edt' or 'brute-force'");
    }
    c.volume_extension = j.value("volume_extension", c.volume_extension);
    c.workers = j.value("workers", c.workers);
    c.seed = j.value("seed", c.seed);
    if (j.contains("split_ratios")) c.split_ratios = j.at("split_ratios").get<std::array<double, 3>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  PipelineConfig c;
  from_json(j, c);
  return c;
}

// ---------------------------------------------------------------------------
// discovery

namespace {

std::string strip_volume_extension(const std::string& name) {
  for (const char* ext : {".nii.gz", ".nii", ".mvol"}) {
    const std::string e(ext);
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0)
      return name.substr(0, name.size() - e.size());
  }
  return {};
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<SubjectFiles> discover_subjects(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorCode::IoError, "dataset root is not a directory: " + root.string());
  std::vector<SubjectFiles> out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    SubjectFiles s;
    s.id = entry.path().filename().string();
    s.dir = entry.path();
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(entry.path()))
      if (f.is_regular_file()) files.push_back(f.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string stem = strip_volume_extension(f.filename().string());
      if (stem.empty()) continue;
      if (ends_with(stem, "_segm") || ends_with(stem, "_seg")) {
        if (s.segmentation) s.problems.push_back("more than one segmentation file");
        s.segmentation = f;
        continue;
      }
      for (Modality m : {Modality::FLAIR, Modality::T1, Modality::T1GD, Modality::T2}) {
        if (!ends_with(stem, "_" + std::string(to_string(m)))) continue;
        if (s.images.count(m)) s.problems.push_back("more than one " + std::string(to_string(m)) + " file");
        s.images[m] = f;
      }
    }
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const SubjectFiles& a, const SubjectFiles& b) { return a.id < b.id; });
  return out;
}

// ---------------------------------------------------------------------------
// bookkeeping

void FileLog::input(const fs::path& p) {
  std::lock_guard lock(mu_);
  inputs_.push_back(p);
}

void FileLog::output(const fs::path& p) {
  std::lock_guard lock(mu_);
  outputs_.push_back(p);
}

std::vector<fs::path> FileLog::inputs() const {
  std::lock_guard lock(mu_);
  auto v = inputs_;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<fs::path> FileLog::outputs() const {
  std::lock_guard lock(mu_);
  auto v = outputs_;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

namespace {

struct DigestCtx {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  DigestCtx() {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) fail(ErrorCode::IoError, "sha256 init failed");
  }
  ~DigestCtx() { EVP_MD_CTX_free(ctx); }
  DigestCtx(const DigestCtx&) = delete;
  DigestCtx& operator=(const DigestCtx&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx, data, n); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
  }
};

}  // namespace

std::string sha256_bytes(std::string_view bytes) {
  DigestCtx d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + p.string());
  DigestCtx d;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

namespace {

/// Path relative to `base` when it lies underneath, otherwise as given.
std::string display_path(const fs::path& p, const fs::path& base) {
  if (!base.empty()) {
    const auto rel = p.lexically_normal().lexically_relative(base.lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  }
  return p.generic_string();
}

void write_text(const fs::path& p, const std::string& text, FileLog& files) {
  fs::create_directories(p.parent_path());
  io_detail::write_all(p, std::as_bytes(std::span(text.data(), text.size())));
  files.output(p);
}

void write_json(const fs::path& p, const json& j, FileLog& files) { write_text(p, j.dump(2) + "\n", files); }

json read_json(const fs::path& p, FileLog* files) {
  std::ifstream in(p);
  if (!in) fail(ErrorCode::IoError, "cannot open " + p.string());
  if (files) files->input(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, p.string() + ": " + e.what());
  }
}

template <class F>
void run_pool(std::size_t n, unsigned workers, F&& fn) {
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (threads <= 1) {
    drain();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(drain);
}

/// Runs fn for each subject, capturing exceptions per subject. Results are
/// recorded in `ids` order, independent of scheduling.
template <class F>
void run_subjects(const std::vector<std::string>& ids, unsigned workers, RunReport& report, F&& fn) {
  std::vector<std::optional<std::string>> errors(ids.size());
  run_pool(ids.size(), workers, [&](std::size_t i) {
    try {
      fn(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errors[i]) {
      spdlog::warn("{}: {}", ids[i], *errors[i]);
      report.failures.push_back({ids[i], *errors[i]});
    } else {
      report.completed.push_back(ids[i]);
    }
  }
}

template <class T>
Grid<T> read_logged(const fs::path& p, FileLog* files) {
  if (files) files->input(p);
  std::vector<std::string> warnings;
  auto g = read_grid<T>(p, &warnings);
  for (const auto& w : warnings) spdlog::warn("{}: {}", p.string(), w);
  return g;
}

template <class T>
void write_logged(const Grid<T>& g, const fs::path& p, FileLog& files, nifti::DataType dtype) {
  fs::create_directories(p.parent_path());
  write_grid(g, p, dtype);
  if (format_for(p) == VolumeFormat::Mvol) {
    files.output(io_detail::mvol_json(p));
    files.output(io_detail::mvol_raw(p));
  } else {
    files.output(p);
  }
}

json dims_json(const Dims& d) { return json::array({d.nx, d.ny, d.nz}); }
Dims dims_from(const json& j) {
  const auto v = j.get<std::array<std::size_t, 3>>();
  return {v[0], v[1], v[2]};
}
json box_json(const CropBox& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }
CropBox box_from(const json& j) {
  return {j.at("lo").get<std::array<std::size_t, 3>>(), j.at("hi").get<std::array<std::size_t, 3>>()};
}

std::string library_versions_png() { return png_get_libpng_ver(nullptr); }

}  // namespace

fs::path write_manifest(const PipelineConfig& cfg, RunReport& report, const FileLog& files, const json& extra) {
  json config = cfg;
  const fs::path path = cfg.output_root / (report.command + "_manifest.json");
  json inputs = json::array();
  for (const auto& p : files.inputs())
    inputs.push_back({{"path", display_path(p, cfg.dataset_root)}, {"sha256", sha256_file(p)}});
  json outputs = json::array();
  for (const auto& p : files.outputs())
    if (p != path) outputs.push_back({{"path", display_path(p, cfg.output_root)}, {"sha256", sha256_file(p)}});
  json failures = json::array();
  for (const auto& f : report.failures) failures.push_back({{"subject", f.subject}, {"error", f.error}});

  json m = {
      {"tool", "brainnet"},
      {"version", BRAINNET_VERSION},
      {"command", report.command},
      {"config", config},
      {"config_sha256", sha256_bytes(config.dump())},
      {"libraries",
       {{"zlib", zlibVersion()},
        {"libpng", library_versions_png()},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                              "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"openssl", OPENSSL_VERSION_TEXT}}},
      {"inputs", inputs},
      {"outputs", outputs},
      {"completed", report.completed},
      {"failures", failures},
      {"exit_code", report.exit_code()},
  };
  for (const auto& [k, v] : extra.items()) m[k] = v;
  fs::create_directories(cfg.output_root);
  const std::string text = m.dump(2) + "\n";
  io_detail::write_all(path, std::as_bytes(std::span(text.data(), text.size())));
  report.manifest = path;
  return path;
}

std::string slice_file_name(const std::string& subject, Axis axis, std::size_t index) {
  std::ostringstream os;
  os << subject << '_' << to_string(axis) << '_' << std::setw(3) << std::setfill('0') << index << ".png";
  return os.str();
}

// ---------------------------------------------------------------------------
// preprocess

namespace {

struct LoadedSubject {
  Volume flair, t1, t1gd;
  std::optional<Volume> t2;
  std::optional<LabelVolume> seg;

  std::vector<const Volume*> intensities() const {
    std::vector<const Volume*> v{&flair, &t1, &t1gd};
    if (t2) v.push_back(&*t2);
    return v;
  }
};

LoadedSubject load_subject(const SubjectFiles& s, bool with_seg, FileLog* files) {
  if (!s.problems.empty()) {
    std::string msg;
    for (const auto& p : s.problems) msg += (msg.empty() ? "" : "; ") + p;
    fail(ErrorCode::InvalidArgument, msg);
  }
  auto need = [&](Modality m) -> const fs::path& {
    const auto it = s.images.find(m);
    if (it == s.images.end()) fail(ErrorCode::IoError, "no " + std::string(to_string(m)) + " volume");
    return it->second;
  };
  LoadedSubject l;
  l.flair = read_logged<float>(need(Modality::FLAIR), files);
  l.t1 = read_logged<float>(need(Modality::T1), files);
  l.t1gd = read_logged<float>(need(Modality::T1GD), files);
  if (s.images.count(Modality::T2)) l.t2 = read_logged<float>(s.images.at(Modality::T2), files);
  if (with_seg && s.segmentation) l.seg = read_logged<Label>(*s.segmentation, files);
  for (const Volume* v : l.intensities())
    if (!(v->dims() == l.flair.dims())) fail(ErrorCode::ShapeMismatch, "modalities differ in dims");
  if (l.seg && !(l.seg->dims() == l.flair.dims()))
    fail(ErrorCode::ShapeMismatch, "segmentation dims differ from the images");
  return l;
}

NonzeroBounds subject_bounds(const LoadedSubject& l) {
  NonzeroBounds b;
  for (const Volume* v : l.intensities()) b.add(*v);
  return b;
}

}  // namespace

GlobalCrop compute_global_crop(const std::vector<SubjectFiles>& subjects, unsigned workers, FileLog* files) {
  std::vector<std::optional<NonzeroBounds>> bounds(subjects.size());
  std::vector<std::string> errors(subjects.size());
  run_pool(subjects.size(), workers, [&](std::size_t i) {
    try {
      bounds[i] = subject_bounds(load_subject(subjects[i], false, files));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  GlobalCrop out;
  NonzeroBounds all;
  std::optional<Dims> reference;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (!bounds[i]) {
      out.failures.push_back({subjects[i].id, errors[i]});
      continue;
    }
    const Dims d = *bounds[i]->dims();
    if (reference && !(*reference == d)) {
      out.failures.push_back({subjects[i].id, "ShapeMismatch: dims differ from the rest of the dataset"});
      continue;
    }
    reference = d;
    all.merge(*bounds[i]);
  }
  if (!reference) fail(ErrorCode::InvalidArgument, "no subject could be loaded");
  out.box = all.box();
  out.original = *reference;
  return out;
}

RunReport cmd_preprocess(const PipelineConfig& cfg) {
  cfg.validate();
  RunReport report{"preprocess"};
  FileLog files;
  const auto subjects = discover_subjects(cfg.dataset_root);
  fs::create_directories(cfg.output_root);

  std::optional<GlobalCrop> global;
  std::vector<std::string> excluded;
  json extra = json::object();
  if (cfg.crop_mode == CropMode::Global) {
    try {
      global = compute_global_crop(subjects, cfg.workers, &files);
    } catch (const std::exception& e) {
      report.failures.push_back({"<dataset>", e.what()});
      write_manifest(cfg, report, files);
      return report;
    }
    for (const auto& f : global->failures) excluded.push_back(f.subject);
    const Dims e = global->box.extents();
    const double fraction = static_cast<double>(e.voxel_count()) / static_cast<double>(global->original.voxel_count());
    write_json(cfg.output_root / "crop_box.json",
               {{"box", box_json(global->box)},
                {"original_dims", dims_json(global->original)},
                {"cropped_dims", dims_json(e)},
                {"voxel_fraction", fraction}},
               files);
    extra["global_crop"] = {{"cropped_dims", dims_json(e)}, {"voxel_fraction", fraction}};
  }

  std::vector<std::string> ids;
  std::vector<const SubjectFiles*> todo;
  for (const auto& s : subjects) {
    if (std::find(excluded.begin(), excluded.end(), s.id) != excluded.end()) continue;
    ids.push_back(s.id);
    todo.push_back(&s);
  }
  if (global) report.failures = global->failures;

  run_subjects(ids, cfg.workers, report, [&](std::size_t i) {
    const SubjectFiles& s = *todo[i];
    const LoadedSubject l = load_subject(s, true, &files);
    const CropBox box = global ? global->box : subject_bounds(l).box();

    Volume flair = normalize_minmax(apply_crop(l.flair, box));
    Volume t1 = normalize_minmax(apply_crop(l.t1, box));
    Volume t1gd = normalize_minmax(apply_crop(l.t1gd, box));
    std::optional<LabelVolume> seg;
    if (l.seg) {
      seg = apply_crop(*l.seg, box);
      const auto kept = std::count_if(seg->begin(), seg->end(), [](Label v) { return v != Label::Else; });
      const auto all = std::count_if(l.seg->begin(), l.seg->end(), [](Label v) { return v != Label::Else; });
      if (kept != all) spdlog::warn("{}: crop drops {} labelled voxels", s.id, all - kept);
    }

    const fs::path dir = cfg.output_root / s.id;
    fs::remove_all(dir);
    std::vector<std::string> order;
    for (Modality m : cfg.channel_order.rgb) order.emplace_back(to_string(m));
    write_json(dir / "crop.json",
               {{"subject", s.id},
                {"mode", std::string(to_string(cfg.crop_mode))},
                {"original_dims", dims_json(l.flair.dims())},
                {"spacing", {l.flair.spacing().sx, l.flair.spacing().sy, l.flair.spacing().sz}},
                {"box", box_json(box)},
                {"channel_order", order},
                {"has_mask", seg.has_value()}},
               files);

    for (Axis axis : cfg.axes) {
      const auto slices = map_channels_rgb(flair, t1, t1gd, axis, cfg.channel_order, cfg.axis_map);
      std::optional<SlicePack<Label>> masks;
      if (seg) masks = extract_slices(*seg, axis, cfg.axis_map);
      const fs::path adir = dir / std::string(to_string(axis));
      fs::create_directories(adir);
      json entries = json::array();
      for (std::size_t n = 0; n < slices.size(); ++n) {
        const std::string name = slice_file_name(s.id, axis, slices[n].index);
        png::write_rgb(adir / name, slices[n]);
        files.output(adir / name);
        json e = {{"index", slices[n].index}, {"image", name}};
        if (masks) {
          const std::string mname = name.substr(0, name.size() - 4) + "_mask.png";
          Image2D<std::uint8_t> m(masks->slices[n].width, masks->slices[n].height);
          for (std::size_t k = 0; k < m.data.size(); ++k) m.data[k] = static_cast<std::uint8_t>(masks->slices[n].data[k]);
          png::write_mask(adir / mname, m);
          files.output(adir / mname);
          e["mask"] = mname;
        }
        entries.push_back(e);
      }
      write_json(adir / "index.json",
                 {{"subject", s.id},
                  {"axis", std::string(to_string(axis))},
                  {"normal", cfg.axis_map.normal(axis)},
                  {"width", slices.empty() ? 0 : slices[0].width},
                  {"height", slices.empty() ? 0 : slices[0].height},
                  {"slices", entries}},
                 files);
    }
  });
  std::sort(report.failures.begin(), report.failures.end(),
            [](const SubjectFailure& a, const SubjectFailure& b) { return a.subject < b.subject; });
  write_manifest(cfg, report, files, extra);
  return report;
}

// ---------------------------------------------------------------------------
// slice

RunReport cmd_slice_extract(const PipelineConfig& cfg, const fs::path& volume, Axis axis, const fs::path& out_dir) {
  cfg.validate();
  RunReport report{"slice_extract"};
  FileLog files;
  std::string stem = strip_volume_extension(volume.filename().string());
  if (stem.empty()) stem = volume.stem().string();
  run_subjects({stem}, 1, report, [&](std::size_t) {
    const LabelVolume lv = read_logged<Label>(volume, &files);
    const auto pack = extract_slices(lv, axis, cfg.axis_map);
    write_json(out_dir / "crop.json",
               {{"subject", stem},
                {"mode", "none"},
                {"original_dims", dims_json(lv.dims())},
                {"spacing", {lv.spacing().sx, lv.spacing().sy, lv.spacing().sz}},
                {"box", box_json(CropBox::full(lv.dims()))},
                {"has_mask", true}},
               files);
    const fs::path adir = out_dir / std::string(to_string(axis));
    fs::create_directories(adir);
    json entries = json::array();
    for (std::size_t n = 0; n < pack.slices.size(); ++n) {
      const std::string name = slice_file_name(stem, axis, pack.indices[n]);
      Image2D<std::uint8_t> m(pack.slices[n].width, pack.slices[n].height);
      for (std::size_t k = 0; k < m.data.size(); ++k) m.data[k] = static_cast<std::uint8_t>(pack.slices[n].data[k]);
      png::write_mask(adir / name, m);
      files.output(adir / name);
      entries.push_back({{"index", pack.indices[n]}, {"image", name}, {"mask", name}});
    }
    write_json(adir / "index.json",
               {{"subject", stem},
                {"axis", std::string(to_string(axis))},
                {"normal", pack.normal},
                {"width", pack.slices.front().width},
                {"height", pack.slices.front().height},
                {"slices", entries}},
               files);
  });
  write_manifest(cfg, report, files);
  return report;
}

RunReport cmd_slice_reassemble(const PipelineConfig& cfg, const fs::path& subject_dir, Axis axis,
                               const fs::path& masks_dir, const fs::path& out_volume) {
  cfg.validate();
  RunReport report{"slice_reassemble"};
  FileLog files;
  const std::string id = subject_dir.filename().string();
  run_subjects({id}, 1, report, [&](std::size_t) {
    const json crop = read_json(subject_dir / "crop.json", &files);
    const json index = read_json(subject_dir / std::string(to_string(axis)) / "index.json", &files);
    const CropBox box = box_from(crop.at("box"));
    const Dims original = dims_from(crop.at("original_dims"));
    const auto sp = crop.at("spacing").get<std::array<double, 3>>();
    const std::size_t w = index.at("width").get<std::size_t>();
    const std::size_t h = index.at("height").get<std::size_t>();

    SlicePack<Label> pack;
    pack.axis = axis;
    pack.normal = index.at("normal").get<std::size_t>();
    pack.origin_dims = box.extents();
    pack.spacing = {sp[0], sp[1], sp[2]};
    pack.source = crop.value("subject", id);
    std::vector<std::string> missing;
    for (const auto& e : index.at("slices")) {
      const fs::path p = masks_dir / e.at("image").get<std::string>();
      if (!fs::exists(p)) {
        missing.push_back(p.filename().string());
        continue;
      }
      files.input(p);
      auto m = png::read_mask(p);
      if (m.width != w || m.height != h) m = resample_mask_nearest(m, h, w);
      Image2D<Label> img(w, h);
      for (std::size_t k = 0; k < img.data.size(); ++k) img.data[k] = to_label(m.data[k]);
      pack.slices.push_back(std::move(img));
      pack.indices.push_back(e.at("index").get<std::size_t>());
    }
    if (!missing.empty()) {
      std::string list;
      for (std::size_t k = 0; k < missing.size() && k < 5; ++k) list += (k ? ", " : "") + missing[k];
      fail(ErrorCode::IncompletePack,
           std::to_string(missing.size()) + " predicted mask(s) missing: " + list + (missing.size() > 5 ? ", ..." : ""));
    }
    LabelVolume vol = uncrop(reassemble(pack), box, original, Label::Else);
    vol.source = pack.source;
    write_logged(vol, out_volume, files, nifti::DataType::UInt8);
  });
  write_manifest(cfg, report, files);
  return report;
}

// ---------------------------------------------------------------------------
// ensemble

RunReport cmd_ensemble(const PipelineConfig& cfg) {
  cfg.validate();
  RunReport report{"ensemble"};
  FileLog files;
  const json manifest = read_json(cfg.ensemble_manifest, &files);
  const fs::path base = cfg.ensemble_manifest.parent_path();

  struct Entry {
    std::string id;
    std::vector<std::pair<fs::path, MemberInfo>> members;
  };
  std::vector<Entry> entries;
  try {
    for (const auto& s : manifest.at("subjects")) {
      Entry e{s.at("id").get<std::string>(), {}};
      for (const auto& m : s.at("members")) {
        MemberInfo info{m.value("model", std::string()), std::nullopt};
        if (m.contains("axis")) info.axis = parse_axis(m.at("axis").get<std::string>());
        const fs::path p = m.at("path").get<std::string>();
        e.members.emplace_back(p.is_absolute() ? p : base / p, info);
      }
      entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, cfg.ensemble_manifest.string() + ": " + e.what());
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.id < b.id; });

  std::vector<std::string> ids;
  for (const auto& e : entries) ids.push_back(e.id);
  const unsigned inner = entries.size() == 1 ? cfg.workers : 1;
  run_subjects(ids, cfg.workers, report, [&](std::size_t i) {
    const Entry& e = entries[i];
    if (e.members.empty()) fail(ErrorCode::InvalidArgument, "no ensemble members listed");
    EnsembleSet es;
    for (const auto& [path, info] : e.members) {
      if (!fs::exists(path)) fail(ErrorCode::IoError, "member missing: " + path.string());
      es.members.push_back(read_logged<Label>(path, &files));
      es.info.push_back(info);
    }
    const LabelVolume voted = vote(es, cfg.vote_mode, cfg.tie_break, inner);
    const fs::path dir = cfg.output_root / e.id;
    write_logged(voted, dir / (e.id + "_ensemble" + cfg.volume_extension), files, nifti::DataType::UInt8);
    if (cfg.write_histogram) {
      const auto hist = vote_histogram(es, inner);
      for (std::size_t slot = 0; slot < 4; ++slot) {
        Grid<std::int32_t> counts = hist.like<std::int32_t>();
        for (std::size_t k = 0; k < hist.size(); ++k) counts[k] = hist[k][slot];
        counts.source = e.id;
        write_logged(counts, dir / (e.id + "_votes_" + std::string(to_string(kAllLabels[slot])) + cfg.volume_extension),
                     files, nifti::DataType::Int32);
      }
    }
  });
  write_manifest(cfg, report, files);
  return report;
}

// ---------------------------------------------------------------------------
// evaluate

namespace {

std::optional<fs::path> find_prediction(const fs::path& root, const std::string& id) {
  for (const char* ext : {".nii.gz", ".nii", ".mvol"}) {
    for (const fs::path& p : {root / id / (id + "_ensemble" + ext), root / (id + ext)}) {
      const fs::path probe = format_for(p) == VolumeFormat::Mvol ? io_detail::mvol_json(p) : p;
      if (fs::exists(probe)) return p;
    }
  }
  return std::nullopt;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

RunReport cmd_evaluate(const PipelineConfig& cfg, const std::string& model_name) {
  cfg.validate();
  RunReport report{"evaluate"};
  FileLog files;
  if (!fs::is_directory(cfg.predictions_root))
    fail(ErrorCode::IoError, "predictions root is not a directory: " + cfg.predictions_root.string());
  const auto subjects = discover_subjects(cfg.dataset_root);
  std::vector<std::string> ids;
  for (const auto& s : subjects) ids.push_back(s.id);

  std::vector<std::optional<SubjectMetrics>> results(subjects.size());
  run_subjects(ids, cfg.workers, report, [&](std::size_t i) {
    const auto& s = subjects[i];
    if (!s.segmentation) fail(ErrorCode::IoError, "no ground-truth segmentation");
    const auto pred_path = find_prediction(cfg.predictions_root, s.id);
    if (!pred_path) fail(ErrorCode::IoError, "no prediction under " + cfg.predictions_root.string());
    const LabelVolume gt = read_logged<Label>(*s.segmentation, &files);
    const LabelVolume pred = read_logged<Label>(*pred_path, &files);
    results[i] = evaluate_subject(gt, pred, cfg.distance);
  });

  std::vector<SubjectMetrics> done;
  std::ostringstream csv;
  csv << "subject,region,dice,hd95,flags\n";
  json per_subject = json::array();
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (!results[i]) continue;
    done.push_back(*results[i]);
    json regions = json::array();
    for (const auto& r : *results[i]) {
      csv << subjects[i].id << ',' << to_string(r.region) << ',' << format_number(r.dice) << ','
          << (r.hd95 ? format_number(*r.hd95) : "") << ',' << flags_to_string(r.flags) << '\n';
      regions.push_back({{"region", std::string(to_string(r.region))},
                         {"dice", r.dice},
                         {"hd95", optional_number(r.hd95)},
                         {"flags", flags_to_string(r.flags)}});
    }
    per_subject.push_back({{"id", subjects[i].id}, {"regions", regions}});
  }

  json out = {{"model", model_name},
              {"percentile_method", std::string(kPercentileMethod)},
              {"distance", cfg.distance == DistanceMethod::DistanceTransform ? "edt" : "brute-force"},
              {"subjects", per_subject}};
  if (!done.empty()) {
    const auto agg = aggregate(done);
    json a = json::array();
    bool hd_defined = true;
    ModelSummary summary{model_name, {}, {}};
    for (std::size_t r = 0; r < 3; ++r) {
      a.push_back({{"region", std::string(to_string(agg[r].region))},
                   {"mean_dice", agg[r].mean_dice},
                   {"mean_hd95", optional_number(agg[r].mean_hd95)},
                   {"subjects", agg[r].subjects},
                   {"hd95_undefined", agg[r].hd95_undefined}});
      summary.dice[r] = agg[r].mean_dice;
      if (agg[r].mean_hd95) summary.hd95[r] = *agg[r].mean_hd95;
      else hd_defined = false;
    }
    out["aggregate"] = a;
    if (hd_defined) out["summary"] = summary;
  }
  write_text(cfg.output_root / "metrics.csv", csv.str(), files);
  write_json(cfg.output_root / "metrics.json", out, files);
  write_manifest(cfg, report, files);
  return report;
}

// ---------------------------------------------------------------------------
// report, split, loss-check

RunReport cmd_report(const PipelineConfig& cfg, const fs::path& models_json,
                     const std::optional<fs::path>& evaluation_json, const std::string& evaluation_name) {
  cfg.validate();
  RunReport report{"report"};
  FileLog files;
  run_subjects({"report"}, 1, report, [&](std::size_t) {
    std::vector<ModelSummary> rows = read_json(models_json, &files).get<std::vector<ModelSummary>>();
    if (evaluation_json) {
      const json ev = read_json(*evaluation_json, &files);
      if (!ev.contains("summary")) fail(ErrorCode::InvalidArgument, "evaluation has no summary (undefined HD95 mean?)");
      ModelSummary m = ev.at("summary").get<ModelSummary>();
      if (!evaluation_name.empty()) m.name = evaluation_name;
      // Same precision as the published rows, so bold marks compare like with like.
      for (auto* col : {&m.dice, &m.hd95})
        for (double& v : *col) v = std::round(v * 1000.0) / 1000.0;
      rows.push_back(m);
    }
    const auto table = render_comparison_table(rows);
    write_text(cfg.output_root / "comparison.txt", to_text(table), files);
    write_text(cfg.output_root / "comparison.csv", to_csv(table), files);
    write_text(cfg.output_root / "comparison.tex", to_latex(table), files);
  });
  write_manifest(cfg, report, files);
  return report;
}

RunReport cmd_split(const PipelineConfig& cfg, const std::optional<fs::path>& ids_file) {
  cfg.validate();
  RunReport report{"split"};
  FileLog files;
  run_subjects({"split"}, 1, report, [&](std::size_t) {
    std::vector<std::string> ids;
    if (ids_file) {
      std::ifstream in(*ids_file);
      if (!in) fail(ErrorCode::IoError, "cannot open " + ids_file->string());
      files.input(*ids_file);
      for (std::string line; std::getline(in, line);) {
        line.erase(line.find_last_not_of(" \t\r") + 1);
        if (!line.empty()) ids.push_back(line);
      }
    } else {
      for (const auto& s : discover_subjects(cfg.dataset_root)) ids.push_back(s.id);
    }
    const auto s = split_subjects(ids, cfg.seed, cfg.split_ratios);
    write_json(cfg.output_root / "split.json",
               {{"seed", s.seed},
                {"ratios", cfg.split_ratios},
                {"unit", "subject"},
                {"train", s.train},
                {"validation", s.validation},
                {"test", s.test}},
               files);
  });
  write_manifest(cfg, report, files);
  return report;
}

RunReport cmd_loss_check(const PipelineConfig& cfg, const fs::path& fixture) {
  cfg.validate();
  RunReport report{"loss_check"};
  FileLog files;
  run_subjects({fixture.filename().string()}, 1, report, [&](std::size_t) {
    const json f = read_json(fixture, &files);
    SoftPrediction pred(f.at("classes").get<std::size_t>(), f.at("height").get<std::size_t>(),
                        f.at("width").get<std::size_t>());
    pred.p = f.at("probabilities").get<std::vector<double>>();
    pred.validate();
    ClassMap target(pred.width, pred.height);
    target.data = f.at("target").get<std::vector<std::uint8_t>>();
    MaskLossParams params;
    if (f.contains("weights")) {
      const auto w = f.at("weights").get<std::array<double, 3>>();
      params.weights = {w[0], w[1], w[2]};
    }
    if (f.contains("focal")) {
      params.focal.gamma = f.at("focal").value("gamma", params.focal.gamma);
      params.focal.alpha = f.at("focal").value("alpha", params.focal.alpha);
    }
    params.eps_smooth = f.value("eps_smooth", params.eps_smooth);
    const auto b = combined_mask_loss(pred, target, params);
    const json got = {{"ce", b.ce}, {"focal", b.focal}, {"dice", b.dice}, {"total", b.total}};
    write_json(cfg.output_root / "loss_check.json", got, files);
    if (f.contains("expected")) {
      const double tol = f.value("tolerance", 1e-12);
      for (const char* key : {"ce", "focal", "dice", "total"}) {
        if (!f.at("expected").contains(key)) continue;
        const double want = f.at("expected").at(key).get<double>();
        const double have = got.at(key).get<double>();
        if (!(std::fabs(want - have) <= tol * std::max(1.0, std::fabs(want))))
          fail(ErrorCode::RangeError, std::string(key) + " = " + format_number(have) + ", expected " + format_number(want));
      }
    }
  });
  write_manifest(cfg, report, files);
  return report;
}

}  // namespace brainnet::cli
