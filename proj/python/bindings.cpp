// Python bindings: images cross the boundary as float64 numpy arrays shaped
// (H, W) for gray or (C, H, W) for multi-channel data, values on [0, 1].

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ronet/checkpoint.hpp"
#include "ronet/cli.hpp"
#include "ronet/degradation.hpp"
#include "ronet/image_io.hpp"
#include "ronet/metrics.hpp"
#include "ronet/rank_one.hpp"
#include "ronet/training.hpp"

namespace py = pybind11;
using namespace ronet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() == 2) {
    Image img(1, a.shape(0), a.shape(1));
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
  }
  if (a.ndim() == 3) {
    Image img(a.shape(0), a.shape(1), a.shape(2));
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
  }
  throw ShapeError("expected a (H, W) or (C, H, W) array, got " + std::to_string(a.ndim()) +
                   " dimensions");
}

// Gray images come back two-dimensional unless `keep_channel` is set.
Array from_image(const Image& img, bool keep_channel = false) {
  std::vector<py::ssize_t> shape;
  if (img.channels == 1 && !keep_channel) {
    shape = {static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width)};
  } else {
    shape = {static_cast<py::ssize_t>(img.channels), static_cast<py::ssize_t>(img.height),
             static_cast<py::ssize_t>(img.width)};
  }
  Array out(shape);
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

Array from_matrix(const Matrix& m) {
  Array out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out.mutable_at(i, j) = m(i, j);
  return out;
}

py::array_t<float> from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().dims().begin(), t.shape().dims().end());
  py::array_t<float> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor to_tensor_f32(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::size_t> dims(a.shape(), a.shape() + a.ndim());
  return Tensor(Shape{dims}, std::vector<float>(a.data(), a.data() + a.size()));
}

py::dict decompose(const Array& a, std::size_t levels) {
  const Image img = to_image(a);
  const Decomposition d = svd_decompose(img, levels);
  const bool gray = a.ndim() == 2;
  py::list comps;
  for (std::size_t l = 0; l < d.levels(); ++l) comps.append(from_image(component_image(d, l), !gray));
  py::list sigmas;
  for (const auto& s : d.sigmas) sigmas.append(s);
  py::dict out;
  out["components"] = comps;
  out["residual"] = from_image(residual_image(d), !gray);
  out["sigmas"] = sigmas;
  return out;
}

}  // namespace

PYBIND11_MODULE(_ronet, m) {
  m.doc() = "Rank-one decomposition, degradation and image-quality metrics";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_OSError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

  m.def("svd_decompose", &decompose, py::arg("image"), py::arg("levels"),
        "Exact greedy rank-one decomposition per channel. Returns a dict with "
        "'components' (list of arrays), 'residual' and 'sigmas' ([level][channel]).");
  m.def("rank_one_defect", [](const Array& a) { return rank_one_defect(to_image(a).plane(0)); },
        py::arg("matrix"), "sigma_2 / sigma_1 of a 2-D array.");

  m.def("psnr", [](const Array& x, const Array& y, double peak) { return psnr(to_image(x), to_image(y), peak); },
        py::arg("x"), py::arg("y"), py::arg("peak") = 1.0);
  m.def("ssim", [](const Array& x, const Array& y, double peak) { return ssim(to_image(x), to_image(y), peak); },
        py::arg("x"), py::arg("y"), py::arg("peak") = 1.0);
  m.def("y_channel_psnr",
        [](const Array& x, const Array& y, std::size_t border) {
          return y_channel_psnr(to_image(x), to_image(y), border);
        },
        py::arg("x"), py::arg("y"), py::arg("border") = 4);
  m.def("y_channel", [](const Array& rgb) { return from_matrix(y_channel(to_image(rgb))); }, py::arg("rgb"));
  m.def("shifted_max_psnr",
        [](const Array& x, const Array& y, std::size_t crop, std::size_t max_shift, bool axis_only) {
          const ShiftedScore s = shifted_max_psnr(to_image(x), to_image(y), crop, max_shift,
                                                  axis_only ? ShiftSearch::kAxisOnly : ShiftSearch::kFullGrid);
          return py::make_tuple(s.value, s.dy, s.dx);
        },
        py::arg("restored"), py::arg("reference"), py::arg("crop") = 60, py::arg("max_shift") = 40,
        py::arg("axis_only") = false, "Returns (psnr, dy, dx).");
  m.def("ro_component_psnr",
        [](const Array& est, const Array& truth, std::size_t i) {
          return ro_component_psnr(to_image(est), to_image(truth), i);
        },
        py::arg("estimate"), py::arg("truth"), py::arg("i"));
  m.def("format_psnr", &format_psnr, py::arg("db"));

  m.def("awgn", [](const Array& a, double sigma, std::uint64_t seed) {
          return from_image(awgn(to_image(a), sigma, seed), a.ndim() == 3);
        },
        py::arg("image"), py::arg("sigma"), py::arg("seed"), "sigma on the 0-255 scale.");
  m.def("bicubic_downsample", [](const Array& a, std::size_t scale) {
          return from_image(bicubic_downsample(to_image(a), scale), a.ndim() == 3);
        },
        py::arg("image"), py::arg("scale"));
  m.def("motion_blur", [](const Array& a, std::size_t length, double angle) {
          return from_image(motion_blur(to_image(a), length, angle), a.ndim() == 3);
        },
        py::arg("image"), py::arg("length"), py::arg("angle"));
  m.def("poisson_noise", [](const Array& a, double peak, std::uint64_t seed) {
          return from_image(poisson_noise(to_image(a), peak, seed), a.ndim() == 3);
        },
        py::arg("image"), py::arg("peak"), py::arg("seed"));

  m.def("load_png", [](const std::filesystem::path& p) { return from_image(load_png(p)); }, py::arg("path"));
  m.def("save_png", [](const Array& a, const std::filesystem::path& p) { save_png(to_image(a), p); },
        py::arg("image"), py::arg("path"));

  m.def("load_checkpoint",
        [](const std::filesystem::path& p) {
          py::dict out;
          for (const auto& [name, t] : load_checkpoint(p)) out[py::str(name)] = from_tensor(t);
          return out;
        },
        py::arg("path"), "Named float32 arrays, in file order.");
  m.def("save_checkpoint",
        [](const py::dict& tensors, const std::filesystem::path& p) {
          ModelWeights w;
          for (const auto& [k, v] : tensors) {
            w.add(py::cast<std::string>(k),
                  to_tensor_f32(py::cast<py::array_t<float, py::array::c_style | py::array::forcecast>>(v)));
          }
          save_checkpoint(w, p);
        },
        py::arg("tensors"), py::arg("path"));

  m.def("restore",
        [](const std::filesystem::path& checkpoint, const Array& source) {
          const ModelWeights named = load_checkpoint(checkpoint);
          const RodecWeights dec = RodecWeights::load(named);
          const RorecWeights rec = RorecWeights::load(named);
          return from_image(restore(to_image(source), dec, rec), source.ndim() == 3);
        },
        py::arg("checkpoint"), py::arg("source"),
        "Runs a combined RODec + RORec checkpoint (as written by train-ronet) on one image.");

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = run_cli(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
