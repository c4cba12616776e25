#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "hazegan/config.hpp"
#include "hazegan/data_pipeline.hpp"
#include "hazegan/dcp.hpp"
#include "hazegan/errors.hpp"
#include "hazegan/metrics.hpp"
#include "hazegan/trainer.hpp"

namespace fs = std::filesystem;
using namespace hazegan;

namespace {

struct TrainFlags {
  std::string data;
  std::string out;
  std::string resume;
  std::string from;  // transfer source checkpoint
  std::string critic_widths = "64,128,256,512";
  TrainConfig cfg;
};

DatasetManifest open_dataset(const std::string& path) {
  if (path.empty()) throw InvalidParameterError("missing dataset path (--data)");
  if (!fs::exists(path)) throw DataError("dataset path does not exist: " + path);
  if (fs::is_regular_file(path)) return read_manifest(path);
  return load_manifest(path);
}

void add_train_options(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("--data", flags.data, "dataset root or manifest.json");
  cmd->add_option("--out", flags.out, "run directory")->required();
  cmd->add_option("--epochs", flags.cfg.epochs, "training epochs");
  cmd->add_option("--batch", flags.cfg.batch_size, "batch size");
  cmd->add_option("--image-size", flags.cfg.image_size, "network input size (power of two)");
  cmd->add_option("--g-width", flags.cfg.gen.base_width, "generator base width");
  cmd->add_option("--g-depth", flags.cfg.gen.depth, "generator down/up stages");
  cmd->add_option("--critic-widths", flags.critic_widths, "comma separated stage widths");
  cmd->add_option("--lambda1", flags.cfg.weights.lambda1, "perceptual loss weight");
  cmd->add_option("--lambda2", flags.cfg.weights.lambda2, "L1 loss weight");
  cmd->add_option("--lambda3", flags.cfg.weights.lambda3, "gradient penalty weight");
  cmd->add_option("--lr", flags.cfg.learning_rate, "Adam learning rate");
  cmd->add_option("--beta1", flags.cfg.beta1, "Adam beta1");
  cmd->add_option("--beta2", flags.cfg.beta2, "Adam beta2");
  cmd->add_option("--n-critic", flags.cfg.n_critic, "critic updates per generator update");
  cmd->add_option("--vgg-weights", flags.cfg.vgg_weights_path, "feature extractor weights file");
  cmd->add_option("--vgg-tap", flags.cfg.vgg_tap, "feature tap layer, e.g. conv4_3");
  cmd->add_option("--ckpt-interval", flags.cfg.checkpoint_interval,
                  "checkpoint every N generator steps (0: final only)");
  cmd->add_option("--max-steps", flags.cfg.max_generator_steps,
                  "stop after N generator steps (0: run all epochs)");
}

int run_train_like(const TrainFlags& flags, uint64_t seed, const std::string& echo,
                   bool transfer) {
  TrainConfig cfg = flags.cfg;
  cfg.seed = seed;
  cfg.critic = CriticSpec{};
  cfg.critic.widths = parse_width_list(flags.critic_widths);
  if (!transfer) cfg.validate();

  // Validate inputs before touching the run directory so a bad invocation
  // leaves no partial run behind.
  const DatasetManifest manifest = open_dataset(flags.data);
  std::optional<TrainState> resume;
  if (!flags.resume.empty()) resume = load_checkpoint(flags.resume);
  std::optional<TrainState> source;
  if (transfer) {
    if (flags.from.empty()) throw InvalidParameterError("transfer requires --from <checkpoint>");
    source = load_checkpoint(flags.from);
  }

  fs::create_directories(flags.out);
  fs::create_directories(fs::path(flags.out) / "checkpoints");
  cfg.checkpoint_dir = (fs::path(flags.out) / "checkpoints").string();
  {
    std::ofstream echo_out(fs::path(flags.out) / "effective_config.ini");
    echo_out << echo;
  }

  std::ofstream log_file(fs::path(flags.out) / "train_log.jsonl", std::ios::app);
  const int64_t expected_steps =
      cfg.max_generator_steps > 0
          ? cfg.max_generator_steps
          : int64_t(cfg.epochs) *
                ((int64_t(manifest.pairs.size()) + cfg.batch_size - 1) / cfg.batch_size);
  const int64_t print_every = std::max<int64_t>(1, expected_steps / 20);
  LogSink sink = [&](const TrainLogRecord& rec) {
    log_file << train_log_jsonl(rec) << "\n";
    if (rec.step == 1 || rec.step % print_every == 0) {
      std::printf("step %lld epoch %lld  critic %.4f  gen %.4f  gp %.4f  w %.4f\n",
                  (long long)rec.step, (long long)rec.epoch, rec.critic_objective,
                  rec.generator_objective, rec.gradient_penalty, rec.wasserstein);
      std::fflush(stdout);
    }
  };

  TrainState final_state = transfer
                               ? transfer_learn(std::move(*source), cfg, manifest, sink)
                               : train(cfg, manifest, sink, std::move(resume));
  std::printf("done: %lld generator steps, %lld critic steps, checkpoints in %s\n",
              (long long)final_state.generator_steps, (long long)final_state.critic_steps,
              cfg.checkpoint_dir.c_str());
  return 0;
}

std::vector<fs::path> collect_inputs(const std::string& input) {
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      if (!e.is_regular_file()) continue;
      std::string ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(input)) {
    files.push_back(input);
  } else {
    throw DataError("input path does not exist: " + input);
  }
  if (files.empty()) throw DataError("no input images under " + input);
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional WGAN dehazing toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI file (flags take precedence)");
  uint64_t seed = 1;
  app.add_option("--seed", seed, "global random seed")->configurable(true);

  // synthesize
  auto* syn = app.add_subcommand("synthesize", "generate a paired synthetic haze dataset");
  syn->fallthrough();
  SyntheticConfig syn_cfg;
  std::string syn_out;
  syn->add_option("--n", syn_cfg.n, "number of image pairs");
  syn->add_option("--size", syn_cfg.image_size, "square image size");
  syn->add_option("--out", syn_out, "output directory")->required();
  syn->add_option("--k-min", syn_cfg.k_min, "extinction coefficient lower bound");
  syn->add_option("--k-max", syn_cfg.k_max, "extinction coefficient upper bound");
  syn->add_option("--airlight-min", syn_cfg.airlight_min, "airlight lower bound");
  syn->add_option("--airlight-max", syn_cfg.airlight_max, "airlight upper bound");

  // split
  auto* spl = app.add_subcommand("split", "deterministic train/test split of a manifest");
  spl->fallthrough();
  std::string spl_manifest, spl_out;
  double spl_ratio = 0.2;
  spl->add_option("--manifest", spl_manifest, "manifest.json to split")->required();
  spl->add_option("--ratio", spl_ratio, "test fraction in (0,1)");
  spl->add_option("--out", spl_out, "output directory for train.json/test.json")->required();

  // train / transfer
  auto* trn = app.add_subcommand("train", "train the conditional WGAN");
  trn->fallthrough();
  TrainFlags trn_flags;
  add_train_options(trn, trn_flags);
  trn->add_option("--resume", trn_flags.resume, "resume from a checkpoint file");

  auto* tfr = app.add_subcommand("transfer", "transfer-learn a checkpoint on a new dataset");
  tfr->fallthrough();
  TrainFlags tfr_flags;
  add_train_options(tfr, tfr_flags);
  tfr->add_option("--from", tfr_flags.from, "source checkpoint")->required();

  // dehaze
  auto* dhz = app.add_subcommand("dehaze", "restore images with cwgan or dcp");
  dhz->fallthrough();
  std::string dhz_method, dhz_input, dhz_out, dhz_ckpt;
  DcpParams dcp_params;
  dhz->add_option("--method", dhz_method, "cwgan or dcp")
      ->required()
      ->check(CLI::IsMember({"cwgan", "dcp"}));
  dhz->add_option("--input", dhz_input, "input image or directory")->required();
  dhz->add_option("--out", dhz_out, "output directory")->required();
  dhz->add_option("--checkpoint", dhz_ckpt, "checkpoint for cwgan");
  dhz->add_option("--patch-size", dcp_params.patch_size, "dcp dark channel patch");
  dhz->add_option("--omega", dcp_params.omega, "dcp haze retention factor");
  dhz->add_option("--t-floor", dcp_params.t_floor, "transmission floor");
  dhz->add_option("--airlight-fraction", dcp_params.airlight_fraction,
                  "dark-channel share for airlight");
  dhz->add_option("--guided-radius", dcp_params.guided_radius, "guided filter radius");
  dhz->add_option("--guided-eps", dcp_params.guided_eps, "guided filter regularization");

  // evaluate
  auto* evl = app.add_subcommand("evaluate", "compute metrics for dehazed outputs");
  evl->fallthrough();
  std::string evl_manifest, evl_outputs, evl_out, evl_name = "method";
  evl->add_option("--manifest", evl_manifest, "test manifest.json")->required();
  evl->add_option("--outputs", evl_outputs, "directory of dehazed outputs")->required();
  evl->add_option("--out", evl_out, "report directory")->required();
  evl->add_option("--method-name", evl_name, "column name in reports");

  // report
  auto* rpt = app.add_subcommand("report", "multi-method metric table");
  rpt->fallthrough();
  std::string rpt_manifest, rpt_out;
  std::vector<std::string> rpt_methods;
  rpt->add_option("--manifest", rpt_manifest, "test manifest.json")->required();
  rpt->add_option("--method", rpt_methods, "name=outputs_dir (repeatable)")->required();
  rpt->add_option("--out", rpt_out, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*syn) {
      syn_cfg.seed = seed;
      const DatasetManifest m = generate_synthetic_dataset(syn_out, syn_cfg);
      std::printf("wrote %zu pairs under %s\n", m.pairs.size(), syn_out.c_str());
      return 0;
    }
    if (*spl) {
      const DatasetManifest m = read_manifest(spl_manifest);
      const SplitResult result = split(m, spl_ratio, seed);
      fs::create_directories(spl_out);
      save_manifest(result.train, (fs::path(spl_out) / "train.json").string());
      save_manifest(result.test, (fs::path(spl_out) / "test.json").string());
      std::printf("train %zu, test %zu\n", result.train.pairs.size(), result.test.pairs.size());
      return 0;
    }
    if (*trn) return run_train_like(trn_flags, seed, app.config_to_str(true, false), false);
    if (*tfr) return run_train_like(tfr_flags, seed, app.config_to_str(true, false), true);
    if (*dhz) {
      const auto files = collect_inputs(dhz_input);
      fs::create_directories(dhz_out);
      if (dhz_method == "dcp") {
        dcp_params.validate();
        for (const auto& f : files) {
          const Image restored = dcp_dehaze(read_image(f.string()), dcp_params);
          write_image(restored, (fs::path(dhz_out) / (f.stem().string() + ".png")).string());
        }
      } else {
        if (dhz_ckpt.empty()) {
          throw InvalidParameterError("--method cwgan requires --checkpoint");
        }
        TrainState state = load_checkpoint(dhz_ckpt);
        for (const auto& f : files) {
          const Tensor input = to_net_tensor(f.string(), state.image_size);
          const Image restored = from_net_tensor(state.generator.forward(input));
          write_image(restored, (fs::path(dhz_out) / (f.stem().string() + ".png")).string());
        }
      }
      std::printf("dehazed %zu images into %s\n", files.size(), dhz_out.c_str());
      return 0;
    }
    if (*evl) {
      const DatasetManifest m = read_manifest(evl_manifest);
      const MetricsReport report = evaluate_set(m, evl_outputs);
      fs::create_directories(evl_out);
      write_metrics_csv(report, (fs::path(evl_out) / (evl_name + ".csv")).string());
      write_metrics_markdown({{evl_name, report}},
                             (fs::path(evl_out) / (evl_name + ".md")).string());
      std::printf("evaluated %d of %d images; PSNR %.3f±%.3f SSIM %.3f±%.3f\n", report.evaluated,
                  report.total, report.psnr.mean, report.psnr.stddev, report.ssim.mean,
                  report.ssim.stddev);
      return 0;
    }
    if (*rpt) {
      const DatasetManifest m = read_manifest(rpt_manifest);
      std::vector<std::pair<std::string, MetricsReport>> methods;
      fs::create_directories(rpt_out);
      for (const std::string& spec : rpt_methods) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
          throw InvalidParameterError("--method expects name=outputs_dir, got " + spec);
        }
        const std::string name = spec.substr(0, eq);
        const MetricsReport rep = evaluate_set(m, spec.substr(eq + 1));
        write_metrics_csv(rep, (fs::path(rpt_out) / (name + ".csv")).string());
        methods.emplace_back(name, rep);
      }
      write_metrics_markdown(methods, (fs::path(rpt_out) / "report.md").string());
      std::printf("report with %zu methods written to %s\n", methods.size(), rpt_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    const auto* as_hazegan = dynamic_cast<const Error*>(&e);
    return as_hazegan ? exit_code_for(e) : 3;
  }
  return 0;
}
