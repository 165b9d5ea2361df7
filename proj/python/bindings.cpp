#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mmsr/checkpoint.hpp"
#include "mmsr/loss.hpp"
#include "mmsr/metrics.hpp"
#include "mmsr/networks.hpp"

namespace py = pybind11;
using namespace py::literals;
using namespace mmsr;

namespace {

ImagePatch patch_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2D array");
    ImagePatch p(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), p.data.begin());
    return p;
}

py::array_t<double> patch_to_array(const ImagePatch& p) {
    py::array_t<double> a({p.height, p.width});
    std::copy(p.data.begin(), p.data.end(), a.mutable_data());
    return a;
}

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

} // namespace

PYBIND11_MODULE(_mmsr, m) {
    m.doc() = "unpaired 8x CT super-resolution core";

    py::class_<SSIMParams>(m, "SSIMParams")
        .def(py::init<>())
        .def_readwrite("N", &SSIMParams::N)
        .def_readwrite("C1", &SSIMParams::C1)
        .def_readwrite("C2", &SSIMParams::C2);

    py::enum_<SsimForm>(m, "SsimForm")
        .value("as_trained", SsimForm::as_trained)
        .value("standard", SsimForm::standard);

    py::class_<LossWeights>(m, "LossWeights")
        .def(py::init<>())
        .def_readwrite("lambda1", &LossWeights::lambda1)
        .def_readwrite("lambda2", &LossWeights::lambda2)
        .def_readwrite("lambda3", &LossWeights::lambda3)
        .def_readwrite("lambda4", &LossWeights::lambda4)
        .def_readwrite("w_adv", &LossWeights::w_adv)
        .def_readwrite("w_cyc", &LossWeights::w_cyc)
        .def_readwrite("w_idt", &LossWeights::w_idt);

    m.def(
        "ssim_loss",
        [](Arr x, Arr y, const SSIMParams& p, SsimForm form) {
            return ssim_loss(patch_from_array(x), patch_from_array(y), p, form);
        },
        py::arg("x"), py::arg("y"), py::arg("params") = SSIMParams{},
        py::arg("form") = SsimForm::as_trained);
    m.def("mse", [](Arr a, Arr b) { return mse(patch_from_array(a), patch_from_array(b)); });
    m.def(
        "nn_upsample",
        [](Arr y, int factor) { return patch_to_array(nn_upsample_g(patch_from_array(y), factor)); },
        py::arg("y"), py::arg("factor") = 8);
    m.def(
        "avg_downsample",
        [](Arr x, int factor) {
            return patch_to_array(avg_downsample_f(patch_from_array(x), factor));
        },
        py::arg("x"), py::arg("factor") = 8);
    m.def(
        "upsample_loss",
        [](Arr y, Arr y_lr) { return upsample_loss_U(patch_from_array(y), patch_from_array(y_lr)); },
        py::arg("y"), py::arg("y_lr"));
    m.def(
        "downsample_loss",
        [](Arr x, Arr x_sr) {
            return downsample_loss_D(patch_from_array(x), patch_from_array(x_sr));
        },
        py::arg("x"), py::arg("x_sr"));
    m.def(
        "mmsr_total",
        [](double orig, Arr x, Arr x_sr, Arr y, Arr y_lr, const LossWeights& w,
           const SSIMParams& p, SsimForm form) {
            const LossBreakdown lb =
                mmsr_total(orig, patch_from_array(x), patch_from_array(x_sr), patch_from_array(y),
                           patch_from_array(y_lr), w, p, form);
            return py::dict("total"_a = lb.total, "orig"_a = lb.orig, "s_x"_a = lb.s_x,
                            "s_y"_a = lb.s_y, "d_term"_a = lb.d_term, "u_term"_a = lb.u_term);
        },
        py::arg("orig"), py::arg("x"), py::arg("x_sr"), py::arg("y"), py::arg("y_lr"),
        py::arg("weights") = LossWeights{}, py::arg("params") = SSIMParams{},
        py::arg("form") = SsimForm::as_trained);

    m.def("psnr_from_mse", &psnr_from_mse, py::arg("mse"), py::arg("peak") = 2.0);
    m.def(
        "bicubic_upsample",
        [](Arr p, int factor) {
            return patch_to_array(bicubic_upsample(patch_from_array(p), factor));
        },
        py::arg("p"), py::arg("factor") = 8);

    py::class_<SRGeneratorSpec>(m, "SRGeneratorSpec")
        .def(py::init<>())
        .def_readwrite("base_width", &SRGeneratorSpec::base_width)
        .def_readwrite("n_res_blocks", &SRGeneratorSpec::n_res_blocks)
        .def_readwrite("upscale_stages", &SRGeneratorSpec::upscale_stages)
        .def("scale", &SRGeneratorSpec::scale);

    py::class_<SRGenerator>(m, "SRGenerator")
        .def(py::init<SRGeneratorSpec, std::uint64_t>(), py::arg("spec"), py::arg("seed") = 0)
        .def_property_readonly("param_count", &SRGenerator::param_count)
        .def("infer", [](const SRGenerator& g, Arr x) {
            return patch_to_array(ImagePatch::from_tensor(g.infer(patch_from_array(x).to_chw())));
        });

    m.def("load_sr_checkpoint", [](const std::string& path) {
        auto lc = std::make_shared<LoadedCheckpoint>(load_checkpoint(path));
        return lc;
    });
    py::class_<LoadedCheckpoint, std::shared_ptr<LoadedCheckpoint>>(m, "LoadedCheckpoint")
        .def_property_readonly("iteration",
                               [](const LoadedCheckpoint& lc) { return lc.state.iteration; })
        .def_property_readonly("epoch", [](const LoadedCheckpoint& lc) { return lc.state.epoch; })
        .def("super_resolve", [](const LoadedCheckpoint& lc, Arr x) {
            return patch_to_array(
                ImagePatch::from_tensor(lc.bundle.super_resolve(patch_from_array(x).to_chw())));
        });
}
