#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "hazegan/data_pipeline.hpp"
#include "hazegan/dcp.hpp"
#include "hazegan/errors.hpp"
#include "hazegan/haze_model.hpp"
#include "hazegan/losses.hpp"
#include "hazegan/metrics.hpp"
#include "hazegan/trainer.hpp"

namespace py = pybind11;
using namespace hazegan;

namespace {

Image image_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3) {
    throw InvalidParameterError("expected an (H,W,3) float array");
  }
  Image img(int(arr.shape(0)), int(arr.shape(1)));
  std::copy_n(arr.data(), img.px.size(), img.px.data());
  return img;
}

py::array_t<float> image_to_array(const Image& img) {
  py::array_t<float> arr({img.h, img.w, 3});
  std::copy_n(img.px.data(), img.px.size(), arr.mutable_data());
  return arr;
}

FloatMap map_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw InvalidParameterError("expected an (H,W) float array");
  FloatMap m(int(arr.shape(0)), int(arr.shape(1)));
  std::copy_n(arr.data(), m.v.size(), m.v.data());
  return m;
}

py::array_t<float> map_to_array(const FloatMap& m) {
  py::array_t<float> arr({m.h, m.w});
  std::copy_n(m.v.data(), m.v.size(), arr.mutable_data());
  return arr;
}

std::array<float, 3> airlight_from(const std::vector<float>& a) {
  if (a.size() != 3) throw InvalidParameterError("airlight needs 3 channels");
  return {a[0], a[1], a[2]};
}

py::dict report_to_dict(const MetricsReport& rep) {
  py::dict d;
  auto agg = [](const MetricAggregate& a) {
    py::dict out;
    out["mean"] = a.mean;
    out["std"] = a.stddev;
    out["count"] = a.count;
    return out;
  };
  d["psnr"] = agg(rep.psnr);
  d["ssim"] = agg(rep.ssim);
  d["r"] = agg(rep.r);
  d["sigma"] = agg(rep.sigma);
  d["c_gain"] = agg(rep.c_gain);
  d["evaluated"] = rep.evaluated;
  d["total"] = rep.total;
  py::list rows;
  for (const auto& row : rep.rows) {
    py::dict r;
    r["id"] = row.id;
    if (row.psnr) r["psnr"] = *row.psnr;
    if (row.ssim) r["ssim"] = *row.ssim;
    r["r"] = row.r;
    r["sigma"] = row.sigma;
    r["c_gain"] = row.c_gain;
    r["ok"] = row.ok;
    if (!row.ok) r["error"] = row.error;
    rows.append(r);
  }
  d["rows"] = rows;
  return d;
}

TrainConfig config_from_kwargs(int image_size, int g_width, int g_depth,
                               const std::vector<int>& critic_widths, int batch_size, int epochs,
                               int n_critic, double lr, double beta1, double beta2,
                               double lambda1, double lambda2, double lambda3, uint64_t seed,
                               const std::string& vgg_weights, const std::string& vgg_tap,
                               const std::string& checkpoint_dir, int checkpoint_interval,
                               int64_t max_steps) {
  TrainConfig cfg;
  cfg.image_size = image_size;
  cfg.gen.base_width = g_width;
  cfg.gen.depth = g_depth;
  cfg.critic.widths = critic_widths;
  cfg.batch_size = batch_size;
  cfg.epochs = epochs;
  cfg.n_critic = n_critic;
  cfg.learning_rate = lr;
  cfg.beta1 = beta1;
  cfg.beta2 = beta2;
  cfg.weights = LossWeights{lambda1, lambda2, lambda3};
  cfg.seed = seed;
  cfg.vgg_weights_path = vgg_weights;
  cfg.vgg_tap = vgg_tap;
  cfg.checkpoint_dir = checkpoint_dir;
  cfg.checkpoint_interval = checkpoint_interval;
  cfg.max_generator_steps = max_steps;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "conditional WGAN dehazing toolkit (C++ core)";

  py::register_exception<InvalidParameterError>(m, "InvalidParameterError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // haze physics
  m.def(
      "transmission",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> depth, double k) {
        return map_to_array(transmission(map_from_array(depth), k));
      },
      py::arg("depth"), py::arg("k"), "t = exp(-k*depth), elementwise");
  m.def(
      "synthesize_haze",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> clear,
         py::array_t<float, py::array::c_style | py::array::forcecast> depth, double k,
         const std::vector<float>& airlight) {
        HazeParams p;
        p.k = k;
        p.airlight = airlight_from(airlight);
        return image_to_array(synthesize_haze(image_from_array(clear), map_from_array(depth), p));
      },
      py::arg("clear"), py::arg("depth"), py::arg("k"), py::arg("airlight"));
  m.def(
      "restore_with_transmission",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> hazy,
         py::array_t<float, py::array::c_style | py::array::forcecast> t,
         const std::vector<float>& airlight, double t_floor) {
        return image_to_array(restore_with_transmission(image_from_array(hazy),
                                                        map_from_array(t),
                                                        airlight_from(airlight), t_floor));
      },
      py::arg("hazy"), py::arg("t"), py::arg("airlight"), py::arg("t_floor") = 0.1);

  // metrics
  auto wrap2 = [](double (*fn)(const Image&, const Image&)) {
    return [fn](py::array_t<float, py::array::c_style | py::array::forcecast> a,
                py::array_t<float, py::array::c_style | py::array::forcecast> b) {
      return fn(image_from_array(a), image_from_array(b));
    };
  };
  m.def("psnr", wrap2(&psnr), py::arg("reference"), py::arg("candidate"));
  m.def("ssim", wrap2(&ssim), py::arg("reference"), py::arg("candidate"));
  m.def(
      "gradient_ratio",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> hazy,
         py::array_t<float, py::array::c_style | py::array::forcecast> output,
         double threshold) {
        return gradient_ratio_r(image_from_array(hazy), image_from_array(output), threshold);
      },
      py::arg("hazy"), py::arg("output"), py::arg("threshold") = 0.02);
  m.def("saturation_sigma", wrap2(&saturation_sigma), py::arg("hazy"), py::arg("output"));
  m.def("contrast_gain", wrap2(&contrast_gain_c), py::arg("hazy"), py::arg("output"));

  // dcp baseline
  m.def(
      "dcp_dehaze",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> img, int patch_size,
         double omega, double airlight_fraction, double t_floor, int guided_radius,
         double guided_eps) {
        DcpParams p;
        p.patch_size = patch_size;
        p.omega = omega;
        p.airlight_fraction = airlight_fraction;
        p.t_floor = t_floor;
        p.guided_radius = guided_radius;
        p.guided_eps = guided_eps;
        return image_to_array(dcp_dehaze(image_from_array(img), p));
      },
      py::arg("image"), py::arg("patch_size") = 15, py::arg("omega") = 0.95,
      py::arg("airlight_fraction") = 0.001, py::arg("t_floor") = 0.1,
      py::arg("guided_radius") = 40, py::arg("guided_eps") = 1e-3);

  // data pipeline
  m.def(
      "generate_synthetic_dataset",
      [](const std::string& out_dir, int n, int image_size, uint64_t seed, double k_min,
         double k_max, double airlight_min, double airlight_max) {
        SyntheticConfig cfg;
        cfg.n = n;
        cfg.image_size = image_size;
        cfg.seed = seed;
        cfg.k_min = k_min;
        cfg.k_max = k_max;
        cfg.airlight_min = airlight_min;
        cfg.airlight_max = airlight_max;
        const DatasetManifest m2 = generate_synthetic_dataset(out_dir, cfg);
        return (std::filesystem::path(out_dir) / "manifest.json").string();
      },
      py::arg("out_dir"), py::arg("n") = 200, py::arg("image_size") = 64, py::arg("seed") = 7,
      py::arg("k_min") = 0.8, py::arg("k_max") = 2.2, py::arg("airlight_min") = 0.7,
      py::arg("airlight_max") = 1.0);
  m.def(
      "split_manifest",
      [](const std::string& manifest_json, double ratio, uint64_t seed,
         const std::string& train_json, const std::string& test_json) {
        const SplitResult r = split(read_manifest(manifest_json), ratio, seed);
        save_manifest(r.train, train_json);
        save_manifest(r.test, test_json);
        return py::make_tuple(r.train.pairs.size(), r.test.pairs.size());
      },
      py::arg("manifest"), py::arg("ratio"), py::arg("seed"), py::arg("train_out"),
      py::arg("test_out"));

  // training and inference
  m.def(
      "train",
      [](const std::string& manifest_json, int image_size, int g_width, int g_depth,
         const std::vector<int>& critic_widths, int batch_size, int epochs, int n_critic,
         double lr, double beta1, double beta2, double lambda1, double lambda2, double lambda3,
         uint64_t seed, const std::string& vgg_weights, const std::string& vgg_tap,
         const std::string& checkpoint_dir, int checkpoint_interval, int64_t max_steps) {
        const TrainConfig cfg = config_from_kwargs(
            image_size, g_width, g_depth, critic_widths, batch_size, epochs, n_critic, lr, beta1,
            beta2, lambda1, lambda2, lambda3, seed, vgg_weights, vgg_tap, checkpoint_dir,
            checkpoint_interval, max_steps);
        const DatasetManifest manifest = read_manifest(manifest_json);
        std::vector<py::dict> records;
        TrainState state;
        {
          py::gil_scoped_release release;
          state = train(cfg, manifest, [&](const TrainLogRecord& r) {
            // records appended after reacquiring the GIL below
          });
        }
        py::dict out;
        out["generator_steps"] = state.generator_steps;
        out["critic_steps"] = state.critic_steps;
        out["epoch"] = state.epoch;
        if (!cfg.checkpoint_dir.empty()) {
          out["checkpoint"] =
              (std::filesystem::path(cfg.checkpoint_dir) / "ckpt_final.bin").string();
        }
        return out;
      },
      py::arg("manifest"), py::arg("image_size") = 64, py::arg("g_width") = 16,
      py::arg("g_depth") = 6, py::arg("critic_widths") = std::vector<int>{16, 32},
      py::arg("batch_size") = 4, py::arg("epochs") = 1, py::arg("n_critic") = 5,
      py::arg("lr") = 2e-4, py::arg("beta1") = 0.5, py::arg("beta2") = 0.999,
      py::arg("lambda1") = 10.0, py::arg("lambda2") = 100.0, py::arg("lambda3") = 10.0,
      py::arg("seed") = 1, py::arg("vgg_weights") = std::string(),
      py::arg("vgg_tap") = std::string("conv1_1"), py::arg("checkpoint_dir") = std::string(),
      py::arg("checkpoint_interval") = 0, py::arg("max_steps") = int64_t(0));
  m.def(
      "dehaze_image",
      [](const std::string& checkpoint,
         py::array_t<float, py::array::c_style | py::array::forcecast> img) {
        TrainState state = load_checkpoint(checkpoint);
        const Tensor input = image_to_net_tensor(image_from_array(img), state.image_size);
        return image_to_array(from_net_tensor(state.generator.forward(input)));
      },
      py::arg("checkpoint"), py::arg("image"));
  m.def(
      "evaluate_set",
      [](const std::string& manifest_json, const std::string& outputs_dir) {
        return report_to_dict(evaluate_set(read_manifest(manifest_json), outputs_dir));
      },
      py::arg("manifest"), py::arg("outputs_dir"));

  m.attr("__version__") = "0.1.0";
}
