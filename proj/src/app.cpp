#include "sfdi/app.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "sfdi/binary_io.hpp"
#include "sfdi/pipeline.hpp"
#include "sfdi/projector.hpp"
#include "sfdi/stack_io.hpp"

namespace sfdi {
namespace {

namespace pt = boost::property_tree;
using nlohmann::json;

constexpr const char* kModes[] = {"simulate", "process", "dual", "lut", "clinical"};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  const std::uint64_t t = fnv1a(tag);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---- config file ---------------------------------------------------------------------------

class Section {
 public:
  Section(const pt::ptree& tree, std::string name, std::set<std::string> allowed)
      : tree_(tree), name_(std::move(name)) {
    for (const auto& [key, _] : tree_)
      if (!allowed.count(key)) fail(ErrorKind::invalid_input, "unknown key '" + key + "' in [" + name_ + "]");
  }

  template <typename T>
  void read(const char* key, T& target) const {
    const auto node = tree_.get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!node) return;
    const std::string text = node->get_value<std::string>();
    if constexpr (std::is_same_v<T, std::string>) {
      target = text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") target = true;
      else if (text == "false" || text == "0" || text == "no") target = false;
      else bad(key, text);
    } else {
      std::istringstream in(text);
      T v{};
      if (!(in >> v) || !(in >> std::ws).eof()) bad(key, text);
      target = v;
    }
  }

  template <typename T>
  void read(const char* key, std::optional<T>& target) const {
    if (!tree_.get_child_optional(pt::ptree::path_type(key, '\0'))) return;
    T v{};
    read(key, v);
    target = v;
  }

  bool has(const char* key) const { return tree_.get_child_optional(pt::ptree::path_type(key, '\0')).has_value(); }

 private:
  [[noreturn]] void bad(const char* key, const std::string& text) const {
    fail(ErrorKind::invalid_input, "[" + name_ + "] " + key + ": cannot parse '" + text + "'");
  }
  const pt::ptree& tree_;
  std::string name_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

TissueClassStats read_class(const Section& s, const std::string& name) {
  TissueClassStats c;
  c.name = name;
  s.read("mean_mu_a", c.mean_mu_a);
  s.read("std_mu_a", c.std_mu_a);
  s.read("mean_mu_s", c.mean_mu_s);
  s.read("std_mu_s", c.std_mu_s);
  s.read("wavelength_nm", c.wavelength_nm);
  return c;
}

void load_class_file(const fs::path& path, std::vector<TissueClassStats>& classes) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::parse, e.what());
  }
  for (const auto& [key, sub] : tree) {
    if (key.rfind("class.", 0) != 0)
      fail(ErrorKind::invalid_input, path.string() + ": unexpected section [" + key + "]");
    classes.push_back(read_class(
        Section(sub, key, {"mean_mu_a", "std_mu_a", "mean_mu_s", "std_mu_s", "wavelength_nm"}),
        key.substr(6)));
  }
}

// ---- run helpers ---------------------------------------------------------------------------

/// Tracks every file the run writes so a failed run can mark them partial.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  void bytes(const std::string& name, std::span<const char> data) {
    io::write_file_atomic(dir_ / name, data);
    record(name, std::string_view(data.data(), data.size()));
  }
  void text(const std::string& name, const std::string& data) { bytes(name, data); }
  /// For files produced by library writers; re-reads them to fingerprint.
  void adopt(const std::string& name) {
    const auto data = io::read_file(dir_ / name);
    record(name, std::string_view(data.data(), data.size()));
  }

  void mark_partial() {
    for (auto& f : files_) {
      std::error_code ec;
      fs::rename(dir_ / f.name, dir_ / (f.name + ".partial"), ec);
      if (!ec) f.name += ".partial";
    }
  }

  json manifest() const {
    json out = json::array();
    for (const auto& f : files_) {
      std::ostringstream hex;
      hex << std::hex << std::setw(16) << std::setfill('0') << f.hash;
      out.push_back({{"path", f.name}, {"bytes", f.size}, {"fnv1a64", hex.str()}});
    }
    return out;
  }

 private:
  void record(const std::string& name, std::string_view data) {
    files_.push_back({name, data.size(), fnv1a(data)});
  }
  struct File {
    std::string name;
    std::size_t size;
    std::uint64_t hash;
  };
  fs::path dir_;
  std::vector<File> files_;
};

std::string truth_csv(const RenderedVideo& v) {
  std::ostringstream out;
  out << "frame_index,phase_deg,contrast\n" << std::setprecision(12);
  for (std::size_t i = 0; i < v.phase_deg.size(); ++i)
    out << i << ',' << v.phase_deg[i] << ',' << v.contrast[i] << '\n';
  return out.str();
}

FringeScene make_scene(const SceneConfig& s, const ChannelConfig& ch, double frame_rate) {
  FringeScene scene;
  scene.width = s.width;
  scene.height = s.height;
  scene.pixel_mm = s.pixel_mm;
  scene.fx = ch.resolved_fx();
  scene.envelope.shape = s.gaussian_envelope ? EnvelopeShape::gaussian : EnvelopeShape::flat;
  scene.envelope.sigma_x_px = s.envelope_sigma_px;
  scene.envelope.sigma_y_px = s.envelope_sigma_px;
  scene.drift = {s.random_walk_deg, s.linear_deg};
  scene.dropout = {s.dropout_probability, s.dropout_depth};
  scene.fringe_visibility = s.visibility;
  scene.noise_std = s.noise_std;
  scene.speckle_contrast = s.speckle_contrast;
  scene.speckle_grain_px = s.speckle_grain_px;
  scene.frame_rate = frame_rate;
  scene.quantize_12bit = s.quantize_12bit;
  return scene;
}

OpticalProperties at_wavelength(const OpticalProperties& p, const WavelengthShift& shift, double wl) {
  return p.wavelength_nm == wl ? p : wavelength_adjust(p, p.wavelength_nm, wl, shift);
}

int channel_count(const std::vector<ChannelConfig>& channels) {
  int n = 0;
  for (const auto& c : channels) n = std::max(n, c.index + 1);
  return n;
}

/// Renders one capture per channel and interleaves them when there is more than one.
FrameStack render_capture(const RunConfig& cfg, const std::string& tag,
                          const std::function<SampleField(const ChannelConfig&)>& sample,
                          Outputs& out, const std::string& stem) {
  std::vector<FrameStack> stacks(static_cast<std::size_t>(channel_count(cfg.channels)));
  for (const ChannelConfig& ch : cfg.channels) {
    FringeScene scene = make_scene(cfg.scene, ch, cfg.frame_rate);
    scene.sample = sample(ch);
    const RenderedVideo v =
        render_fringe_video(scene, cfg.scene.frames, derive_seed(cfg.seed, tag + "/" + ch.name));
    out.text(cfg.channels.size() == 1 ? stem + "_truth.csv" : stem + "_truth_" + ch.name + ".csv",
             truth_csv(v));
    stacks[ch.index] = v.stack;
  }
  if (cfg.channels.size() == 1) return stacks[cfg.channels.front().index];
  const int depth = stacks[cfg.channels.front().index].bit_depth();
  for (auto& s : stacks)
    if (s.frames() == 0) {
      s = FrameStack(cfg.scene.width, cfg.scene.height, cfg.scene.frames, 1, cfg.frame_rate, depth);
    }
  return combine_channels(stacks, static_cast<int>(stacks.size()));
}

void run_simulate(const RunConfig& cfg, Outputs& out, std::ostream& log) {
  const SceneConfig& s = cfg.scene;
  const FrameStack sample = render_capture(
      cfg, "sample",
      [&](const ChannelConfig& ch) {
        const auto top = at_wavelength(s.sample, s.sample_shift, ch.wavelength_nm);
        if (!s.sample_bottom) return SampleField::homogeneous(s.width, s.height, top);
        return SampleField::split_rows(s.width, s.height, top,
                                       at_wavelength(*s.sample_bottom, s.sample_shift, ch.wavelength_nm));
      },
      out, "sample");
  out.bytes("sample.sfst", encode_stack(sample));
  log << "simulate: wrote sample.sfst (" << sample.frames() << " frames, " << sample.channels()
      << " channel(s))\n";
  for (const ReferenceConfig& ref : cfg.references) {
    const FrameStack stack = render_capture(
        cfg, "reference/" + ref.id,
        [&](const ChannelConfig& ch) {
          return SampleField::homogeneous(s.width, s.height, ref.props_at(ch.wavelength_nm));
        },
        out, "ref_" + ref.id);
    out.bytes("ref_" + ref.id + ".sfst", encode_stack(stack));
    log << "simulate: wrote ref_" << ref.id << ".sfst\n";
  }
}

std::shared_ptr<const DiffusionLut> lut_for(const RunConfig& cfg, SpatialFrequency fx) {
  if (cfg.lut_file) {
    auto lut = std::make_shared<const DiffusionLut>(read_lut(*cfg.lut_file));
    require(lut->fx() == fx, "LUT file fx " + std::to_string(lut->fx().per_mm()) +
                                 " does not match channel fx " + std::to_string(fx.per_mm()));
    return lut;
  }
  LutSpec spec = cfg.lut;
  spec.fx = fx;
  return std::make_shared<const DiffusionLut>(build_lut(spec));
}

PipelineConfig pipeline_config(const RunConfig& cfg, int width, int height, double wavelength_nm) {
  PipelineConfig pc;
  pc.region = AnalysisRegion::centered(width, height, cfg.region_fraction);
  pc.calibration.division_floor = cfg.division_floor;
  pc.sigma_px = cfg.sigma_px;
  pc.wavelength_nm = wavelength_nm;
  return pc;
}

void emit_map(const RunConfig& cfg, Outputs& out, const PropertyMap& map, const std::string& suffix) {
  out.bytes("map" + suffix + ".sfpm", encode_property_map(map));
  write_map_png(out.dir() / ("mu_a" + suffix + ".png"), map.mu_a, map.mask, 0.0, cfg.png_mu_a_max);
  out.adopt("mu_a" + suffix + ".png");
  write_map_png(out.dir() / ("mu_s_prime" + suffix + ".png"), map.mu_s_prime, map.mask, 0.0,
                cfg.png_mu_s_max);
  out.adopt("mu_s_prime" + suffix + ".png");

  const AnalysisRegion r = AnalysisRegion::centered(map.width(), map.height(), cfg.region_fraction);
  const int mid = (r.y0 + r.y1) / 2;
  std::vector<RegionStats> stats{region_stats(map, r, "analysis")};
  if (mid > r.y0 && mid < r.y1) {
    stats.push_back(region_stats(map, {r.x0, r.y0, r.x1, mid}, "top"));
    stats.push_back(region_stats(map, {r.x0, mid, r.x1, r.y1}, "bottom"));
  }
  std::ostringstream csv;
  write_region_stats_csv(csv, stats);
  out.text("region_stats" + suffix + ".csv", csv.str());
}

/// Tracks, writes the selection audit trail, demodulates; rethrows selection failures.
DemodulatedPair capture_with_report(const FrameStack& stack, const CaptureConfig& cc, Outputs& out,
                                    const std::string& name) {
  const Tracking tracking = track_frames(stack, cc.tracker, cc.channel);
  std::optional<FrameTriplet> triplet;
  try {
    triplet = select_triplet(tracking, cc.tracker);
  } catch (const NoTripletFound&) {
    std::ostringstream csv;
    write_selection_report(csv, tracking, std::nullopt);
    out.text("selection_" + name + ".csv", csv.str());
    throw;
  }
  std::ostringstream csv;
  write_selection_report(csv, tracking, triplet);
  out.text("selection_" + name + ".csv", csv.str());
  return demodulate(stack, *triplet, cc.fx, cc.channel);
}

void run_process(const RunConfig& cfg, Outputs& out, std::ostream& log) {
  const ChannelConfig& ch = cfg.channels.front();
  const SpatialFrequency fx = ch.resolved_fx();
  const auto lut = lut_for(cfg, fx);
  if (lut->diffusion_warning()) log << "process: warning: LUT extends to mu_a >= mu_s'\n";

  CaptureConfig cc{fx, 0, cfg.tracker};
  const FrameStack sample = ingest(cfg.inputs.front(), cfg.frame_rate);
  require(ch.index < sample.channels(), "channel index " + std::to_string(ch.index) +
                                            " exceeds the input's " +
                                            std::to_string(sample.channels()) + " channel(s)");
  cc.channel = ch.index;
  FrequencyData fd{capture_with_report(sample, cc, out, "sample"), {}, lut};
  for (const ReferenceConfig& ref : cfg.references) {
    const FrameStack stack = ingest(ref.file, cfg.frame_rate);
    require(stack.width() == sample.width() && stack.height() == sample.height(),
            "reference " + ref.id + " differs in size from the sample");
    fd.references.push_back(
        {ref.id, capture_with_report(stack, cc, out, "ref_" + ref.id), ref.props_at(ch.wavelength_nm)});
  }
  const PropertyMap map = recover_properties(
      std::span(&fd, 1), pipeline_config(cfg, sample.width(), sample.height(), ch.wavelength_nm));
  emit_map(cfg, out, map, "");
  log << "process: wrote map.sfpm (" << map.width() << "x" << map.height() << ")\n";
}

int run_dual(const RunConfig& cfg, Outputs& out, std::ostream& log, json& channel_log) {
  const FrameStack sample = ingest(cfg.inputs.front(), cfg.frame_rate);
  require(sample.channels() >= 2, "dual mode needs a multi-channel input");
  std::vector<FrameStack> refs;
  for (const ReferenceConfig& ref : cfg.references) {
    refs.push_back(ingest(ref.file, cfg.frame_rate));
    require(refs.back().channels() == sample.channels(),
            "reference " + ref.id + " has a different channel count from the sample");
  }

  std::vector<ChannelSetup> setups;
  std::map<std::string, ChannelOutcome> early;  // channels that failed before the map stage
  for (const ChannelConfig& ch : cfg.channels) {
    ChannelSetup setup;
    setup.name = ch.name;
    setup.capture = {ch.resolved_fx(), ch.index, cfg.tracker};
    setup.wavelength_nm = ch.wavelength_nm;
    try {
      require(ch.index < sample.channels(), "channel index out of range for " + ch.name);
      setup.lut = lut_for(cfg, setup.capture.fx);
      for (std::size_t i = 0; i < refs.size(); ++i)
        setup.references.push_back(
            {cfg.references[i].id,
             capture_with_report(refs[i], setup.capture, out, "ref_" + cfg.references[i].id + "_" + ch.name),
             cfg.references[i].props_at(ch.wavelength_nm)});
      setups.push_back(std::move(setup));
    } catch (const Error& e) {
      early[ch.name] = {ch.name, std::nullopt, e.kind(), e.what()};
    }
  }
  const auto outcomes = run_dual_wavelength(
      sample, setups, pipeline_config(cfg, sample.width(), sample.height(), 0.0));

  int code = 0;
  for (const ChannelConfig& ch : cfg.channels) {
    ChannelOutcome o;
    if (auto it = early.find(ch.name); it != early.end()) {
      o = it->second;
    } else {
      o = *std::find_if(outcomes.begin(), outcomes.end(),
                        [&](const ChannelOutcome& c) { return c.name == ch.name; });
    }
    json entry{{"name", ch.name}, {"wavelength_nm", ch.wavelength_nm}, {"fx_per_mm", ch.resolved_fx().per_mm()}};
    if (o.ok()) {
      emit_map(cfg, out, *o.map, "_" + ch.name);
      entry["status"] = "ok";
      log << "dual: " << ch.name << ": wrote map_" << ch.name << ".sfpm\n";
    } else {
      entry["status"] = "error";
      entry["error"] = o.message;
      entry["exit_code"] = static_cast<int>(*o.error);
      if (code == 0) code = static_cast<int>(*o.error);
      log << "dual: " << ch.name << ": " << o.message << "\n";
    }
    channel_log.push_back(entry);
  }
  return code;
}

void run_lut(const RunConfig& cfg, Outputs& out, std::ostream& log) {
  for (const ChannelConfig& ch : cfg.channels) {
    LutSpec spec = cfg.lut;
    spec.fx = ch.resolved_fx();
    const DiffusionLut lut = build_lut(spec);
    const std::string stem = cfg.channels.size() == 1 ? "lut" : "lut_" + ch.name;
    out.bytes(stem + ".sflu", encode_lut(lut));
    std::ostringstream csv;
    write_lut_csv(csv, lut);
    out.text(stem + ".csv", csv.str());
    log << "lut: wrote " << stem << ".sflu (fx " << spec.fx.per_mm() << " /mm, " << spec.n_mu_a
        << "x" << spec.n_mu_s << ")\n";
    if (lut.diffusion_warning()) log << "lut: warning: grid extends to mu_a >= mu_s'\n";
  }
}

void run_clinical(const RunConfig& cfg, Outputs& out, std::ostream& log) {
  const auto& c = cfg.clinical;
  const auto healthy = std::find_if(c.classes.begin(), c.classes.end(),
                                    [&](const TissueClassStats& s) { return s.name == c.healthy; });
  std::vector<TissueClassStats> diseases;
  for (const auto& s : c.classes)
    if (s.name != c.healthy) diseases.push_back(s);

  for (const auto& [label, noise] : {std::pair{std::string("baseline"), DeviceNoiseModel::none()},
                                     std::pair{std::string("device"), c.noise}}) {
    ProtocolConfig pc;
    pc.n_train = c.n_train;
    pc.n_validation = c.n_validation;
    pc.seed = cfg.seed;
    pc.noise = noise;
    const auto results = run_protocol(*healthy, diseases, pc);
    std::ostringstream csv, text;
    write_report_csv(csv, results);
    write_report_text(text, results);
    out.text("clinical_" + label + ".csv", csv.str());
    out.text("clinical_" + label + ".txt", text.str());
    log << "clinical (" << label << "):\n" << text.str();
  }
}

}  // namespace

SpatialFrequency ChannelConfig::resolved_fx() const {
  if (fx) return SpatialFrequency(*fx);
  return spatial_frequency({spacing_um, wavelength_nm, working_distance_mm});
}

OpticalProperties ReferenceConfig::props_at(double wavelength_nm) const {
  return at_wavelength(props, shift, wavelength_nm);
}

void RunConfig::validate() const {
  require(std::find(std::begin(kModes), std::end(kModes), mode) != std::end(kModes),
          "mode must be one of simulate, process, dual, lut, clinical (got '" + mode + "')");
  require(!out.empty(), "an output directory is required");
  require(std::isfinite(frame_rate) && frame_rate > 0.0, "frame rate must be positive");
  require(!channels.empty(), "at least one channel is required");
  std::set<std::string> names;
  std::set<int> indices;
  for (const auto& ch : channels) {
    require(names.insert(ch.name).second, "duplicate channel name " + ch.name);
    require(indices.insert(ch.index).second, "two channels share index " + std::to_string(ch.index));
    require(ch.index >= 0 && ch.index < 255, "channel index out of range for " + ch.name);
    require(ch.wavelength_nm > 0.0, "channel " + ch.name + " needs a positive wavelength");
    if (ch.fx) require(*ch.fx > 0.0, "channel " + ch.name + " needs fx > 0");
    else require(ch.spacing_um > 0.0 && ch.working_distance_mm > 0.0,
                 "channel " + ch.name + " needs fx or a positive spacing and working distance");
  }
  require(sigma_px >= 0.0, "sigma_px must be >= 0");
  require(region_fraction > 0.0 && region_fraction <= 1.0, "region_fraction must be in (0, 1]");
  require(tracker.phase_tol_deg >= 0.0 && tracker.phase_tol_deg < 60.0,
          "phase tolerance must be in [0, 60) degrees");
  require(tracker.contrast_floor >= 0.0, "contrast floor must be >= 0");
  std::set<std::string> ids;
  for (const auto& r : references) {
    require(!r.id.empty() && ids.insert(r.id).second, "reference ids must be unique and non-empty");
    r.props.validate();
  }

  if (mode == "simulate") {
    require(scene.width >= 16 && scene.height >= 16, "scene must be at least 16x16 pixels");
    require(scene.frames >= 3, "scene needs at least three frames");
    scene.sample.validate();
    if (scene.sample_bottom) scene.sample_bottom->validate();
  }
  if (mode == "process" || mode == "dual") {
    require(inputs.size() == 1, mode + " mode takes exactly one input (--input)");
    require(!references.empty(), mode + " mode needs at least one reference (--ref or [reference.*])");
    for (const auto& r : references) require(!r.file.empty(), "reference " + r.id + " has no file");
  }
  if (mode == "process") require(channels.size() == 1, "process mode runs a single channel");
  if (mode == "dual") require(channels.size() >= 2, "dual mode needs at least two [channel.*] sections");
  if (mode == "clinical") {
    require(clinical.n_train >= 2 && clinical.n_validation >= 1, "clinical sample counts too small");
    clinical.noise.validate();
    const auto healthy = std::count_if(clinical.classes.begin(), clinical.classes.end(),
                                       [&](const auto& c) { return c.name == clinical.healthy; });
    require(healthy == 1, "clinical mode needs exactly one class named '" + clinical.healthy + "'");
    require(clinical.classes.size() >= 2, "clinical mode needs at least one disease class");
    for (const auto& c : clinical.classes) c.validate();
  }
}

void load_config(const fs::path& path, RunConfig& cfg) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::parse, e.what());
  }
  const fs::path base = path.parent_path();
  bool channels_seen = false;

  for (const auto& [key, sub] : tree) {
    if (key == "run") {
      Section s(sub, key, {"mode", "input", "out", "seed", "frame_rate"});
      s.read("mode", cfg.mode);
      if (s.has("input")) {
        std::string list;
        s.read("input", list);
        cfg.inputs.clear();
        std::istringstream items(list);
        for (std::string item; std::getline(items, item, ',');)
          if (!item.empty()) cfg.inputs.push_back(resolve(base, item));
      }
      if (s.has("out")) {
        std::string o;
        s.read("out", o);
        cfg.out = resolve(base, o);
      }
      s.read("seed", cfg.seed);
      s.read("frame_rate", cfg.frame_rate);
    } else if (key.rfind("channel.", 0) == 0) {
      if (!channels_seen) cfg.channels.clear();
      channels_seen = true;
      Section s(sub, key, {"index", "wavelength_nm", "fx", "spacing_um", "working_distance_mm"});
      ChannelConfig ch;
      ch.name = key.substr(8);
      s.read("index", ch.index);
      s.read("wavelength_nm", ch.wavelength_nm);
      s.read("fx", ch.fx);
      s.read("spacing_um", ch.spacing_um);
      s.read("working_distance_mm", ch.working_distance_mm);
      cfg.channels.push_back(ch);
    } else if (key == "tracker") {
      Section s(sub, key, {"phase_tol_deg", "contrast_floor", "band_rows", "band_center",
                           "smoothing_window", "background_degree", "min_fit_r2", "min_visibility",
                           "zeroth_window_s", "policy"});
      auto& t = cfg.tracker;
      s.read("phase_tol_deg", t.phase_tol_deg);
      s.read("contrast_floor", t.contrast_floor);
      s.read("band_rows", t.phase.band.rows);
      s.read("band_center", t.phase.band.center);
      s.read("smoothing_window", t.phase.smoothing_window);
      s.read("background_degree", t.phase.background_degree);
      s.read("min_fit_r2", t.phase.min_fit_r2);
      s.read("min_visibility", t.phase.min_visibility);
      s.read("zeroth_window_s", t.zeroth_window_s);
      std::string policy;
      s.read("policy", policy);
      if (policy == "first") t.policy = SelectionPolicy::first;
      else if (policy == "closest") t.policy = SelectionPolicy::closest;
      else if (!policy.empty()) fail(ErrorKind::invalid_input, "[tracker] policy must be first or closest");
    } else if (key == "lut") {
      Section s(sub, key, {"file", "n_mu_a", "n_mu_s", "mu_a_min", "mu_a_max", "mu_s_min",
                           "mu_s_max", "refractive_index"});
      if (s.has("file")) {
        std::string f;
        s.read("file", f);
        cfg.lut_file = resolve(base, f);
      }
      s.read("n_mu_a", cfg.lut.n_mu_a);
      s.read("n_mu_s", cfg.lut.n_mu_s);
      s.read("mu_a_min", cfg.lut.mu_a.lo);
      s.read("mu_a_max", cfg.lut.mu_a.hi);
      s.read("mu_s_min", cfg.lut.mu_s_prime.lo);
      s.read("mu_s_max", cfg.lut.mu_s_prime.hi);
      s.read("refractive_index", cfg.lut.refractive_index);
    } else if (key == "pipeline") {
      Section s(sub, key, {"sigma_px", "region_fraction", "division_floor", "png_mu_a_max",
                           "png_mu_s_max"});
      s.read("sigma_px", cfg.sigma_px);
      s.read("region_fraction", cfg.region_fraction);
      s.read("division_floor", cfg.division_floor);
      s.read("png_mu_a_max", cfg.png_mu_a_max);
      s.read("png_mu_s_max", cfg.png_mu_s_max);
    } else if (key.rfind("reference.", 0) == 0) {
      Section s(sub, key, {"file", "mu_a", "mu_s", "wavelength_nm", "shift_mu_a", "shift_mu_s"});
      ReferenceConfig r;
      r.id = key.substr(10);
      if (s.has("file")) {
        std::string f;
        s.read("file", f);
        r.file = resolve(base, f);
      }
      s.read("mu_a", r.props.mu_a);
      s.read("mu_s", r.props.mu_s_prime);
      s.read("wavelength_nm", r.props.wavelength_nm);
      s.read("shift_mu_a", r.shift.mu_a_fraction);
      s.read("shift_mu_s", r.shift.mu_s_fraction);
      cfg.references.push_back(r);
    } else if (key == "scene") {
      Section s(sub, key,
                {"width", "height", "pixel_mm", "frames", "noise_std", "speckle_contrast",
                 "speckle_grain_px", "visibility", "random_walk_deg", "linear_deg",
                 "dropout_probability", "dropout_depth", "envelope", "envelope_sigma_px",
                 "quantize_12bit", "sample_mu_a", "sample_mu_s", "sample_wavelength_nm",
                 "bottom_mu_a", "bottom_mu_s", "shift_mu_a", "shift_mu_s"});
      auto& sc = cfg.scene;
      s.read("width", sc.width);
      s.read("height", sc.height);
      s.read("pixel_mm", sc.pixel_mm);
      s.read("frames", sc.frames);
      s.read("noise_std", sc.noise_std);
      s.read("speckle_contrast", sc.speckle_contrast);
      s.read("speckle_grain_px", sc.speckle_grain_px);
      s.read("visibility", sc.visibility);
      s.read("random_walk_deg", sc.random_walk_deg);
      s.read("linear_deg", sc.linear_deg);
      s.read("dropout_probability", sc.dropout_probability);
      s.read("dropout_depth", sc.dropout_depth);
      std::string env;
      s.read("envelope", env);
      if (env == "flat") sc.gaussian_envelope = false;
      else if (env == "gaussian") sc.gaussian_envelope = true;
      else if (!env.empty()) fail(ErrorKind::invalid_input, "[scene] envelope must be flat or gaussian");
      s.read("envelope_sigma_px", sc.envelope_sigma_px);
      s.read("quantize_12bit", sc.quantize_12bit);
      s.read("sample_mu_a", sc.sample.mu_a);
      s.read("sample_mu_s", sc.sample.mu_s_prime);
      s.read("sample_wavelength_nm", sc.sample.wavelength_nm);
      if (s.has("bottom_mu_a") || s.has("bottom_mu_s")) {
        OpticalProperties b = sc.sample;
        s.read("bottom_mu_a", b.mu_a);
        s.read("bottom_mu_s", b.mu_s_prime);
        sc.sample_bottom = b;
      }
      s.read("shift_mu_a", sc.sample_shift.mu_a_fraction);
      s.read("shift_mu_s", sc.sample_shift.mu_s_fraction);
    } else if (key == "clinical") {
      Section s(sub, key, {"healthy", "n_train", "n_validation", "rel_err_mu_a", "rel_err_mu_s", "stats"});
      s.read("healthy", cfg.clinical.healthy);
      s.read("n_train", cfg.clinical.n_train);
      s.read("n_validation", cfg.clinical.n_validation);
      s.read("rel_err_mu_a", cfg.clinical.noise.rel_err_mu_a);
      s.read("rel_err_mu_s", cfg.clinical.noise.rel_err_mu_s);
      if (s.has("stats")) {
        std::string f;
        s.read("stats", f);
        load_class_file(resolve(base, f), cfg.clinical.classes);
      }
    } else if (key.rfind("class.", 0) == 0) {
      cfg.clinical.classes.push_back(read_class(
          Section(sub, key, {"mean_mu_a", "std_mu_a", "mean_mu_s", "std_mu_s", "wavelength_nm"}),
          key.substr(6)));
    } else {
      fail(ErrorKind::invalid_input, path.string() + ": unknown section [" + key + "]");
    }
  }
}

ReferenceConfig parse_reference_arg(const std::string& arg) {
  std::vector<std::string> parts;
  std::istringstream in(arg);
  for (std::string p; std::getline(in, p, ',');) parts.push_back(p);
  require(parts.size() == 3 || parts.size() == 4,
          "--ref expects PATH,MU_A,MU_S[,WAVELENGTH_NM], got '" + arg + "'");
  ReferenceConfig r;
  r.file = parts[0];
  r.id = fs::path(parts[0]).stem().string();
  try {
    r.props.mu_a = std::stod(parts[1]);
    r.props.mu_s_prime = std::stod(parts[2]);
    if (parts.size() == 4) r.props.wavelength_nm = std::stod(parts[3]);
  } catch (const std::exception&) {
    fail(ErrorKind::invalid_input, "--ref: cannot parse numbers in '" + arg + "'");
  }
  return r;
}

int run(const RunConfig& cfg, std::ostream& log) {
  json manifest{{"tool", "sfdi"}, {"mode", cfg.mode}, {"seed", cfg.seed}};
  try {
    cfg.validate();
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return e.exit_code();
  }

  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) {
    log << "error: cannot create " << cfg.out << ": " << ec.message() << "\n";
    return static_cast<int>(ErrorKind::invalid_input);
  }

  Outputs out(cfg.out);
  json channels = json::array();
  for (const auto& ch : cfg.channels)
    if (cfg.mode != "dual")
      channels.push_back({{"name", ch.name}, {"wavelength_nm", ch.wavelength_nm},
                          {"fx_per_mm", ch.resolved_fx().per_mm()}});
  int code = 0;
  std::string message;
  try {
    if (cfg.mode == "simulate") run_simulate(cfg, out, log);
    else if (cfg.mode == "process") run_process(cfg, out, log);
    else if (cfg.mode == "dual") code = run_dual(cfg, out, log, channels);
    else if (cfg.mode == "lut") run_lut(cfg, out, log);
    else run_clinical(cfg, out, log);
  } catch (const Error& e) {
    code = e.exit_code();
    message = e.what();
    out.mark_partial();
    log << "error: " << message << "\n";
  } catch (const std::exception& e) {
    code = static_cast<int>(ErrorKind::numerical);
    message = e.what();
    out.mark_partial();
    log << "error: " << message << "\n";
  }

  manifest["channels"] = channels;
  manifest["status"] = code == 0 ? "ok" : "error";
  manifest["exit_code"] = code;
  if (!message.empty()) manifest["error"] = message;
  manifest["outputs"] = out.manifest();
  io::write_text_atomic(cfg.out / "manifest.json", manifest.dump(2) + "\n");
  return code;
}

}  // namespace sfdi
