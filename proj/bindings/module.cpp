#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "purekit/attacks.hpp"
#include "purekit/config_json.hpp"
#include "purekit/data_io.hpp"
#include "purekit/diffusion.hpp"
#include "purekit/errors.hpp"
#include "purekit/evaluation.hpp"
#include "purekit/purifier.hpp"
#include "purekit/ssim.hpp"
#include "purekit/training.hpp"

namespace py = pybind11;
using namespace purekit;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_array(const DArray& arr) {
  Shape shape(static_cast<size_t>(arr.ndim()));
  for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[static_cast<size_t>(i)] = arr.shape(i);
  std::vector<double> data(arr.data(), arr.data() + arr.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> arr(shape);
  std::copy(t.data(), t.data() + t.numel(), arr.mutable_data());
  return arr;
}

TrainConfig config_from_dict(const py::dict& d) {
  TrainConfig base;
  ordered_json j = train_config_to_json(base);
  std::string dumped =
      py::module_::import("json").attr("dumps")(d).cast<std::string>();
  j.merge_patch(nlohmann::ordered_json::parse(dumped));
  return train_config_from_json(j);
}

py::dict dataset_to_dict(const Dataset& ds) {
  py::list images;
  for (const Tensor& img : ds.images) images.append(array_from_tensor(img));
  py::dict out;
  out["images"] = images;
  out["labels"] = ds.labels;
  out["class_count"] = ds.class_count;
  out["id"] = ds.id;
  return out;
}

Dataset dataset_from_dict(const py::dict& d) {
  Dataset ds;
  for (auto img : d["images"].cast<py::list>()) {
    ds.images.push_back(tensor_from_array(img.cast<DArray>()));
  }
  if (d.contains("labels")) ds.labels = d["labels"].cast<std::vector<int>>();
  if (d.contains("class_count")) ds.class_count = d["class_count"].cast<int>();
  if (d.contains("id")) ds.id = d["id"].cast<std::string>();
  return ds;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "adversarial image purification toolkit (C++ core)";

  py::register_exception<Error>(m, "PurekitError");

  py::class_<VarianceSchedule>(m, "VarianceSchedule")
      .def(py::init<std::vector<double>>())
      .def_property_readonly("steps", &VarianceSchedule::steps)
      .def("beta", &VarianceSchedule::beta)
      .def("alpha", &VarianceSchedule::alpha)
      .def("alpha_bar", &VarianceSchedule::alpha_bar);

  m.def("diffuse_step", [](const DArray& x, double beta, uint64_t seed) {
    Rng rng(seed);
    return array_from_tensor(diffuse_step(tensor_from_array(x), beta, rng));
  }, py::arg("x"), py::arg("beta"), py::arg("seed") = 0);
  m.def("diffuse_to", [](const DArray& x0, const VarianceSchedule& s, int t, uint64_t seed) {
    Rng rng(seed);
    return array_from_tensor(diffuse_to(tensor_from_array(x0), s, t, rng));
  }, py::arg("x0"), py::arg("schedule"), py::arg("t"), py::arg("seed") = 0);
  m.def("posterior_coeffs", [](const VarianceSchedule& s, int t) {
    PosteriorCoeffs c = posterior_coeffs(s, t);
    return py::make_tuple(c.coef_x0, c.coef_xt, c.variance);
  });
  m.def("posterior_sample", [](const DArray& x_t, const DArray& x0_hat,
                               const VarianceSchedule& s, int t, uint64_t seed) {
    Rng rng(seed);
    return array_from_tensor(
        posterior_sample(tensor_from_array(x_t), tensor_from_array(x0_hat), s, t, rng));
  }, py::arg("x_t"), py::arg("x0_hat"), py::arg("schedule"), py::arg("t"), py::arg("seed") = 0);

  m.def("ssim", [](const DArray& x, const DArray& y) {
    return ssim(tensor_from_array(x), tensor_from_array(y));
  });
  m.def("ssim_loss", [](const DArray& x, const DArray& y, double lambda) {
    return ssim_loss(tensor_from_array(x), tensor_from_array(y), lambda);
  });
  m.def("linf_dist", [](const DArray& x, const DArray& y) {
    return linf_dist(tensor_from_array(x), tensor_from_array(y));
  });

  m.def("ce_loss", &ce_loss);
  m.def("dlr_loss", &dlr_loss);
  m.def("discriminator_loss", &discriminator_loss);
  m.def("generator_loss", [](double d_fake, double ssim_value, double lambda) {
    return generator_loss(d_fake, ssim_value, lambda);
  });

  m.def(
      "make_synthetic",
      [](int n, int classes, int size, uint64_t seed, double difficulty) {
        Rng rng(seed);
        return dataset_to_dict(make_synthetic(n, classes, size, rng, difficulty));
      },
      py::arg("n"), py::arg("classes"), py::arg("size"), py::arg("seed") = 7,
      py::arg("difficulty") = 0.25);

  py::class_<PurifierCheckpoint, std::shared_ptr<PurifierCheckpoint>>(m, "Checkpoint")
      .def_readonly("mode", &PurifierCheckpoint::mode)
      .def_readonly("trained_steps", &PurifierCheckpoint::trained_steps)
      .def("hash", [](const PurifierCheckpoint& c) { return checkpoint_hash(c); })
      .def("param_count", [](const PurifierCheckpoint& c) {
        int64_t n = 0;
        for (const auto& [name, net] : c.nets) n += param_count(net);
        return n;
      });

  m.def("save_checkpoint", [](const std::shared_ptr<PurifierCheckpoint>& c,
                              const std::string& dir) { save_checkpoint(*c, dir); });
  m.def("load_checkpoint", [](const std::string& dir) {
    return std::make_shared<PurifierCheckpoint>(load_checkpoint(dir));
  });

  m.def(
      "train",
      [](const py::dict& dataset, const std::string& mode, const py::dict& config,
         uint64_t seed) {
        Dataset ds = dataset_from_dict(dataset);
        TrainConfig cfg = config_from_dict(config);
        cfg.seed = seed;
        Rng rng(seed);
        PurifierCheckpoint ckpt;
        if (mode == "lightpure") {
          ckpt = train_lightpure(UnlabeledView(ds), cfg, rng);
        } else if (mode == "single_step") {
          ckpt = train_bgan(UnlabeledView(ds), cfg, rng);
        } else if (mode == "iterative") {
          ckpt = train_ddpm_denoiser(UnlabeledView(ds), cfg, rng);
        } else if (mode == "classifier") {
          ckpt = train_classifier(ds, cfg, rng);
        } else {
          throw_config("unknown training mode: " + mode);
        }
        return std::make_shared<PurifierCheckpoint>(std::move(ckpt));
      },
      py::arg("dataset"), py::arg("mode"), py::arg("config") = py::dict(),
      py::arg("seed") = 0);

  m.def(
      "purify",
      [](const std::shared_ptr<PurifierCheckpoint>& ckpt, const DArray& image,
         uint64_t seed, int t_star) {
        Rng rng(seed);
        Tensor img = tensor_from_array(image);
        std::pair<Tensor, PurifyTrace> out =
            ckpt->mode == "iterative"
                ? purify_iterative(*ckpt, img,
                                   t_star > 0 ? t_star : ckpt->config.ddpm.timesteps, rng)
                : purify_oneshot(*ckpt, img, rng);
        py::dict trace;
        trace["generator_invocations"] = out.second.generator_invocations;
        trace["wall_seconds"] = out.second.wall_seconds;
        trace["mode"] = out.second.mode;
        return py::make_tuple(array_from_tensor(out.first), trace);
      },
      py::arg("checkpoint"), py::arg("image"), py::arg("seed") = 0, py::arg("t_star") = 0);

  m.def("classify", [](const std::shared_ptr<PurifierCheckpoint>& cls, const DArray& image) {
    Tensor logits = classifier_forward(cls->net("classifier"), cls->config.classifier,
                                       to_internal_range(tensor_from_array(image)));
    return logits.vec();
  });

  py::class_<GradientSource, std::shared_ptr<GradientSource>>(m, "Pipeline")
      .def_property_readonly("class_count", &GradientSource::class_count)
      .def_property_readonly("stochastic", &GradientSource::stochastic)
      .def("logits",
           [](const GradientSource& src, const DArray& x, uint64_t seed) {
             Rng rng(seed);
             return src.logits(tensor_from_array(x), rng);
           },
           py::arg("x"), py::arg("seed") = 0)
      .def("predict",
           [](const GradientSource& src, const DArray& x, uint64_t seed) {
             Rng rng(seed);
             return src.predict(tensor_from_array(x), rng);
           },
           py::arg("x"), py::arg("seed") = 0);

  m.def("classifier_pipeline", [](std::shared_ptr<PurifierCheckpoint> classifier) {
    return make_classifier_source(std::move(classifier));
  });
  m.def("purified_pipeline", [](std::shared_ptr<PurifierCheckpoint> purifier,
                                std::shared_ptr<PurifierCheckpoint> classifier) {
    return make_purified_source(std::move(purifier), std::move(classifier));
  });

  m.def("fgsm", [](const std::shared_ptr<GradientSource>& src, const DArray& x, int y,
                   double epsilon, uint64_t seed) {
    Rng rng(seed);
    return array_from_tensor(fgsm(*src, tensor_from_array(x), y, epsilon, rng));
  });
  m.def(
      "pgd",
      [](const std::shared_ptr<GradientSource>& src, const DArray& x, int y, double epsilon,
         double alpha, int iterations, int eot_samples, uint64_t seed) {
        AttackBudget b;
        b.epsilon = epsilon;
        b.alpha = alpha;
        b.iterations = iterations;
        b.eot_samples = eot_samples;
        Rng rng(seed);
        return array_from_tensor(pgd(*src, tensor_from_array(x), y, b, rng));
      },
      py::arg("pipeline"), py::arg("x"), py::arg("y"), py::arg("epsilon") = 8.0 / 255.0,
      py::arg("alpha") = 2.0 / 255.0, py::arg("iterations") = 10, py::arg("eot_samples") = 1,
      py::arg("seed") = 0);
  m.def(
      "apgd",
      [](const std::shared_ptr<GradientSource>& src, const DArray& x, int y,
         const std::string& loss, double epsilon, int iterations, int eot_samples,
         uint64_t seed) {
        AttackBudget b;
        b.epsilon = epsilon;
        b.iterations = iterations;
        b.eot_samples = eot_samples;
        Rng rng(seed);
        LossKind kind = loss == "dlr" ? LossKind::dlr : LossKind::ce;
        return array_from_tensor(apgd(*src, tensor_from_array(x), y, b, kind, rng));
      },
      py::arg("pipeline"), py::arg("x"), py::arg("y"), py::arg("loss") = "ce",
      py::arg("epsilon") = 8.0 / 255.0, py::arg("iterations") = 20,
      py::arg("eot_samples") = 1, py::arg("seed") = 0);

  m.def(
      "eot_gradient",
      [](const std::shared_ptr<GradientSource>& src, const DArray& x, int y, int n,
         uint64_t seed) {
        Rng rng(seed);
        return array_from_tensor(
            eot_gradient(*src, tensor_from_array(x), y, n, LossKind::ce, rng));
      },
      py::arg("pipeline"), py::arg("x"), py::arg("y"), py::arg("n") = 20,
      py::arg("seed") = 0);

  m.def(
      "clean_accuracy",
      [](const std::shared_ptr<GradientSource>& pipeline, const py::dict& dataset,
         uint64_t seed, size_t limit) {
        return clean_accuracy(*pipeline, dataset_from_dict(dataset), seed, limit);
      },
      py::arg("pipeline"), py::arg("dataset"), py::arg("seed") = 0, py::arg("limit") = 0);
  m.def(
      "robust_accuracy",
      [](const std::shared_ptr<GradientSource>& grad_src,
         const std::shared_ptr<GradientSource>& eval_target, const py::dict& dataset,
         const std::string& kind, double epsilon, double alpha, int iterations,
         int eot_samples, uint64_t seed, size_t limit) {
        AttackConfig atk;
        atk.kind = kind;
        atk.budget.epsilon = epsilon;
        atk.budget.alpha = alpha;
        atk.budget.iterations = iterations;
        atk.budget.eot_samples = eot_samples;
        RobustResult r = robust_accuracy(*grad_src, *eval_target, atk,
                                         dataset_from_dict(dataset), seed, limit);
        return py::make_tuple(r.percent, r.attack_failures);
      },
      py::arg("gradient_source"), py::arg("eval_target"), py::arg("dataset"),
      py::arg("kind") = "pgd", py::arg("epsilon") = 8.0 / 255.0,
      py::arg("alpha") = 2.0 / 255.0, py::arg("iterations") = 10, py::arg("eot_samples") = 1,
      py::arg("seed") = 0, py::arg("limit") = 0);
}
