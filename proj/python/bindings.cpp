// numpy-facing bindings for the core operations. Thin conversion layer only;
// all numerics live in the C++ library.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "jsms/checkpoint.hpp"
#include "jsms/context.hpp"
#include "jsms/flow.hpp"
#include "jsms/image_io.hpp"
#include "jsms/metrics.hpp"
#include "jsms/net.hpp"
#include "jsms/ops.hpp"
#include "jsms/synth.hpp"
#include "jsms/train.hpp"

namespace py = pybind11;
using namespace jsms;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor tensor_from(const FloatArray& a) {
    std::vector<int64_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
    Tensor t(std::move(shape));
    std::memcpy(t.data(), a.data(), sizeof(float) * static_cast<size_t>(t.numel()));
    return t;
}

py::array_t<float> array_from(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<float> a(shape);
    std::memcpy(a.mutable_data(), t.data(), sizeof(float) * static_cast<size_t>(t.numel()));
    return a;
}

FlowField flow_from(const FloatArray& u, const FloatArray& v) {
    if (u.ndim() != 2 || v.ndim() != 2 || u.shape(0) != v.shape(0) || u.shape(1) != v.shape(1)) {
        throw DimensionError("flow components must be 2-d arrays of equal shape");
    }
    FlowField f;
    f.height = u.shape(0);
    f.width = u.shape(1);
    const size_t n = static_cast<size_t>(f.numel());
    f.u.assign(u.data(), u.data() + n);
    f.v.assign(v.data(), v.data() + n);
    return f;
}

ImageU8 image_from(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) {
        throw DimensionError("image must be an (H, W, 3) uint8 array");
    }
    ImageU8 img;
    img.height = a.shape(0);
    img.width = a.shape(1);
    img.rgb.assign(a.data(), a.data() + a.size());
    return img;
}

py::array_t<uint8_t> labels_to_array(const LabelMap& map) {
    py::array_t<uint8_t> a({static_cast<py::ssize_t>(map.height), static_cast<py::ssize_t>(map.width)});
    std::memcpy(a.mutable_data(), map.idx.data(), map.idx.size());
    return a;
}

ConvParams conv_params(int stride, int dilation, int pad, const std::string& pad_mode) {
    ConvParams p;
    p.stride = stride;
    p.dilation = dilation;
    p.pad = pad;
    if (pad_mode == "zero") {
        p.pad_mode = PadMode::Zero;
    } else if (pad_mode == "reflect") {
        p.pad_mode = PadMode::Reflect;
    } else {
        throw ConfigError("pad_mode must be 'zero' or 'reflect'");
    }
    return p;
}

}  // namespace

PYBIND11_MODULE(_jsms, m) {
    m.doc() = "core operations of the joint segmentation library";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

    m.def(
        "dilated_conv2d",
        [](const FloatArray& input, const FloatArray& weight, const FloatArray& bias, int stride,
           int dilation, int pad, const std::string& pad_mode) {
            return array_from(dilated_conv2d(tensor_from(input), tensor_from(weight),
                                             tensor_from(bias),
                                             conv_params(stride, dilation, pad, pad_mode)));
        },
        py::arg("input"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1,
        py::arg("dilation") = 1, py::arg("pad") = 0, py::arg("pad_mode") = "zero",
        "Dilated 2-d convolution (correlation convention) on NCHW float32 arrays.");

    m.def(
        "flow_magnitude",
        [](const FloatArray& u, const FloatArray& v) {
            return array_from(flow_magnitude(flow_from(u, v)));
        },
        py::arg("u"), py::arg("v"));

    m.def(
        "amplifier_from_flow",
        [](const FloatArray& u, const FloatArray& v) {
            return array_from(amplifier_from_flow(flow_from(u, v)));
        },
        py::arg("u"), py::arg("v"),
        "Image-scale amplification map in [1, 2], quantized to 256 levels.");

    m.def(
        "resize_to_feature_grid",
        [](const FloatArray& map, int64_t h, int64_t w) {
            return array_from(resize_to_feature_grid(tensor_from(map), h, w));
        },
        py::arg("map"), py::arg("height"), py::arg("width"));

    m.def(
        "read_flo",
        [](const std::string& path) {
            FlowField f = read_flo(path);
            const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(f.height),
                                                 static_cast<py::ssize_t>(f.width)};
            py::array_t<float> u(shape), v(shape);
            std::memcpy(u.mutable_data(), f.u.data(), sizeof(float) * f.u.size());
            std::memcpy(v.mutable_data(), f.v.data(), sizeof(float) * f.v.size());
            return py::make_tuple(u, v);
        },
        py::arg("path"));

    m.def(
        "write_flo",
        [](const FloatArray& u, const FloatArray& v, const std::string& path) {
            write_flo(flow_from(u, v), path);
        },
        py::arg("u"), py::arg("v"), py::arg("path"));

    m.def(
        "generate_dataset",
        [](const std::string& out_dir, int n_samples, int height, int width, int num_classes,
           uint64_t seed) {
            auto samples = generate_dataset(n_samples, height, width, num_classes, seed);
            write_dataset(out_dir, samples, default_palette(num_classes));
            return static_cast<int>(samples.size());
        },
        py::arg("out_dir"), py::arg("n_samples"), py::arg("height") = 64, py::arg("width") = 64,
        py::arg("num_classes") = 6, py::arg("seed") = 1,
        "Writes a deterministic synthetic dataset; returns the sample count.");

    py::class_<Pipeline>(m, "Pipeline")
        .def_static("load", &load_pipeline, py::arg("checkpoint"))
        .def_property_readonly("stage", [](const Pipeline& p) { return p.stage; })
        .def_property_readonly("uses_amplifier", &Pipeline::uses_amplifier)
        .def_property_readonly("num_classes",
                               [](const Pipeline& p) { return p.spec.num_classes; })
        .def(
            "predict",
            [](const Pipeline& p,
               const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& image,
               py::object flow_u, py::object flow_v) {
                ImageU8 img = image_from(image);
                Tensor input = image_to_input(img);
                ForwardOptions opts;
                Tensor amp;
                if (!flow_u.is_none() != !flow_v.is_none()) {
                    throw ConfigError("provide both flow components or neither");
                }
                if (p.uses_amplifier()) {
                    if (flow_u.is_none()) {
                        throw StateError("this checkpoint amplifies features; flow is required");
                    }
                    FlowField f = flow_from(flow_u.cast<FloatArray>(), flow_v.cast<FloatArray>());
                    const int factor = p.spec.downsample_factor();
                    amp = resize_to_feature_grid(amplifier_from_flow(f), img.height / factor,
                                                 img.width / factor);
                    opts.amplifier = &amp;
                }
                return labels_to_array(predict_labels(p.spec, p.state, input, opts));
            },
            py::arg("image"), py::arg("flow_u") = py::none(), py::arg("flow_v") = py::none(),
            "Per-pixel class indices for an (H, W, 3) uint8 image.")
        .def(
            "evaluate",
            [](const Pipeline& p, const std::string& data_dir, const std::string& split) {
                Dataset ds = load_dataset(data_dir);
                const auto& samples = split == "train" ? ds.train : ds.val;
                if (split != "train" && split != "val") {
                    throw ConfigError("split must be 'train' or 'val'");
                }
                return evaluate(p.spec, p.state, p.uses_amplifier(), samples, ds.palette)
                    .to_text();
            },
            py::arg("data_dir"), py::arg("split") = "val",
            "Metrics report text over a dataset split.");
}
