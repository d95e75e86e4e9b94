#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "sfdi/app.hpp"
#include "sfdi/clinical.hpp"
#include "sfdi/demod.hpp"
#include "sfdi/lut.hpp"
#include "sfdi/optics.hpp"
#include "sfdi/pipeline.hpp"
#include "sfdi/projector.hpp"
#include "sfdi/stack_io.hpp"

namespace py = pybind11;
using namespace sfdi;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

/// (frames, height, width) or (frames, height, width, channels) float array -> FrameStack.
FrameStack to_stack(const FloatArray& a, double frame_rate) {
  require(a.ndim() == 3 || a.ndim() == 4, "stack must be (frames, height, width[, channels])");
  const int n = static_cast<int>(a.shape(0));
  const int h = static_cast<int>(a.shape(1));
  const int w = static_cast<int>(a.shape(2));
  const int c = a.ndim() == 4 ? static_cast<int>(a.shape(3)) : 1;
  FrameStack s(w, h, n, c, frame_rate);
  std::copy(a.data(), a.data() + a.size(), s.raw().begin());
  return s;
}

py::array_t<float> from_stack(const FrameStack& s) {
  std::vector<py::ssize_t> shape{s.frames(), s.height(), s.width()};
  if (s.channels() > 1) shape.push_back(s.channels());
  py::array_t<float> out(shape);
  std::copy(s.raw().begin(), s.raw().end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> from_grid(const Grid2<T>& g) {
  py::array_t<T> out({g.height(), g.width()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

py::dict map_dict(const PropertyMap& m) {
  py::dict d;
  d["mu_a"] = from_grid(m.mu_a);
  d["mu_s_prime"] = from_grid(m.mu_s_prime);
  d["mask"] = from_grid(m.mask);
  d["fx_per_mm"] = m.provenance.fx_per_mm;
  d["references"] = m.provenance.references;
  return d;
}

}  // namespace

PYBIND11_MODULE(_sfdi, m) {
  m.doc() = "Spatial frequency domain imaging toolkit";

  py::register_exception<Error>(m, "SfdiError", PyExc_ValueError);

  m.def("spatial_frequency",
        [](double spacing_um, double wavelength_nm, double working_distance_mm) {
          return spatial_frequency({spacing_um, wavelength_nm, working_distance_mm}).per_mm();
        },
        py::arg("spacing_um"), py::arg("wavelength_nm") = 660.0, py::arg("working_distance_mm") = 50.0);

  m.def("diffuse_reflectance",
        [](double mu_a, double mu_s_prime, double fx, double n) {
          return diffuse_reflectance({mu_a, mu_s_prime}, SpatialFrequency{fx}, n);
        },
        py::arg("mu_a"), py::arg("mu_s_prime"), py::arg("fx"), py::arg("refractive_index") = 1.4);

  m.def("demodulate_pixel", &demodulate_pixel, py::arg("i1"), py::arg("i2"), py::arg("i3"),
        "(AC, DC) amplitudes from three samples 120 degrees apart");

  py::class_<DiffusionLut>(m, "DiffusionLut")
      .def_property_readonly("fx", [](const DiffusionLut& l) { return l.fx().per_mm(); })
      .def_property_readonly("mu_a_grid",
                             [](const DiffusionLut& l) { return std::vector<double>(l.mu_a_grid().begin(), l.mu_a_grid().end()); })
      .def_property_readonly("mu_s_grid",
                             [](const DiffusionLut& l) { return std::vector<double>(l.mu_s_grid().begin(), l.mu_s_grid().end()); })
      .def_property_readonly("diffusion_warning", &DiffusionLut::diffusion_warning)
      .def("invert",
           [](const DiffusionLut& l, double rd_dc, double rd_ac) {
             const auto r = l.invert(rd_dc, rd_ac);
             return py::make_tuple(r.props.mu_a, r.props.mu_s_prime, r.out_of_range);
           },
           py::arg("rd_dc"), py::arg("rd_ac"), "(mu_a, mu_s', out_of_range)")
      .def("save", [](const DiffusionLut& l, const std::filesystem::path& p) { write_lut(p, l); })
      .def_static("load", &read_lut);

  m.def("build_lut",
        [](double fx, std::pair<double, double> mu_a, std::pair<double, double> mu_s, int n_mu_a, int n_mu_s) {
          LutSpec spec;
          spec.fx = SpatialFrequency{fx};
          spec.mu_a = {mu_a.first, mu_a.second};
          spec.mu_s_prime = {mu_s.first, mu_s.second};
          spec.n_mu_a = n_mu_a;
          spec.n_mu_s = n_mu_s;
          return build_lut(spec);
        },
        py::arg("fx"), py::arg("mu_a_range") = std::pair{0.001, 0.1}, py::arg("mu_s_range") = std::pair{0.1, 3.0},
        py::arg("n_mu_a") = 128, py::arg("n_mu_s") = 128);

  m.def("render_fringe_video",
        [](double fx, double mu_a, double mu_s_prime, int frames, std::uint64_t seed, int width, int height,
           double pixel_mm, double random_walk_deg, double linear_deg, double noise_std, double speckle,
           double dropout_probability, double dropout_depth, double frame_rate) {
          FringeScene s;
          s.width = width;
          s.height = height;
          s.pixel_mm = pixel_mm;
          s.fx = SpatialFrequency{fx};
          s.drift = {random_walk_deg, linear_deg};
          s.noise_std = noise_std;
          s.speckle_contrast = speckle;
          s.dropout = {dropout_probability, dropout_depth};
          s.frame_rate = frame_rate;
          s.sample = SampleField::homogeneous(width, height, {mu_a, mu_s_prime});
          const auto v = render_fringe_video(s, frames, seed);
          return py::make_tuple(from_stack(v.stack), v.phase_deg);
        },
        py::arg("fx"), py::arg("mu_a"), py::arg("mu_s_prime"), py::arg("frames") = 80, py::arg("seed") = 1,
        py::arg("width") = 128, py::arg("height") = 96, py::arg("pixel_mm") = 0.35,
        py::arg("random_walk_deg") = 5.0, py::arg("linear_deg") = 17.0, py::arg("noise_std") = 0.0,
        py::arg("speckle") = 0.0, py::arg("dropout_probability") = 0.0, py::arg("dropout_depth") = 0.0,
        py::arg("frame_rate") = kDefaultFrameRate,
        "(frames array, ground-truth phase per frame in degrees)");

  m.def("select_triplet",
        [](const FloatArray& stack, double frame_rate, double phase_tol_deg, double contrast_floor) {
          TrackerConfig tc;
          tc.phase_tol_deg = phase_tol_deg;
          tc.contrast_floor = contrast_floor;
          const auto t = select_triplet(to_stack(stack, frame_rate), tc);
          return py::make_tuple(t.indices, t.phases_deg);
        },
        py::arg("stack"), py::arg("frame_rate") = kDefaultFrameRate, py::arg("phase_tol_deg") = 10.0,
        py::arg("contrast_floor") = 0.7, "(frame indices, tracked phases in degrees)");

  m.def("usable_frame_rate",
        [](const FloatArray& stack, double frame_rate) {
          return usable_frame_rate(to_stack(stack, frame_rate)).frames_per_second;
        },
        py::arg("stack"), py::arg("frame_rate") = kDefaultFrameRate);

  m.def("recover_properties",
        [](const FloatArray& sample, const FloatArray& reference, double ref_mu_a, double ref_mu_s_prime,
           double fx, double sigma_px, double wavelength_nm, double frame_rate) {
          CaptureConfig cc;
          cc.fx = SpatialFrequency{fx};
          const OpticalProperties ref_props{ref_mu_a, ref_mu_s_prime, wavelength_nm};
          LutSpec spec;
          spec.fx = cc.fx;
          FrequencyData fd{process_capture(to_stack(sample, frame_rate), cc),
                           {make_reference(to_stack(reference, frame_rate), cc, ref_props, "reference")},
                           std::make_shared<const DiffusionLut>(build_lut(spec))};
          PipelineConfig pc;
          pc.sigma_px = sigma_px;
          pc.wavelength_nm = wavelength_nm;
          return map_dict(recover_properties(std::span(&fd, 1), pc));
        },
        py::arg("sample"), py::arg("reference"), py::arg("ref_mu_a"), py::arg("ref_mu_s_prime"), py::arg("fx"),
        py::arg("sigma_px") = 5.0, py::arg("wavelength_nm") = 660.0, py::arg("frame_rate") = kDefaultFrameRate,
        "dict with mu_a, mu_s_prime and mask arrays");

  m.def("read_stack",
        [](const std::filesystem::path& p) {
          const auto s = ingest(p);
          return py::make_tuple(from_stack(s), s.frame_rate());
        },
        py::arg("path"), "(frames array, frame rate)");
  m.def("write_stack",
        [](const std::filesystem::path& p, const FloatArray& a, double frame_rate, int bit_depth) {
          auto s = to_stack(a, frame_rate);
          s.set_bit_depth(bit_depth);
          write_stack(p, s);
        },
        py::arg("path"), py::arg("stack"), py::arg("frame_rate") = kDefaultFrameRate, py::arg("bit_depth") = 32);
  m.def("read_property_map", [](const std::filesystem::path& p) { return map_dict(read_property_map(p)); },
        py::arg("path"));

  m.def("time_to_three_frames", &time_to_three_frames, py::arg("usable_rate"), py::arg("prob") = 0.99);
  m.def("asge_check",
        [](double sensitivity, double specificity) {
          PerformanceReport r;
          r.sensitivity = sensitivity;
          r.specificity = specificity;
          return asge_check(r).pass;
        },
        py::arg("sensitivity"), py::arg("specificity"));

  m.def("run",
        [](const std::filesystem::path& config, const std::string& mode, const std::filesystem::path& out,
           std::optional<std::uint64_t> seed) {
          RunConfig cfg;
          load_config(config, cfg);
          cfg.mode = mode;
          cfg.out = out;
          if (seed) cfg.seed = *seed;
          std::ostringstream log;
          const int code = run(cfg, log);
          return py::make_tuple(code, log.str());
        },
        py::arg("config"), py::arg("mode"), py::arg("out"), py::arg("seed") = py::none(),
        "Runs one CLI mode from an INI file; returns (exit code, log text)");
}
