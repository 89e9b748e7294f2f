#include "freqpatch/cli/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "freqpatch/cli/annotations.hpp"
#include "freqpatch/cli/reports.hpp"
#include "freqpatch/cli/run_config.hpp"
#include "freqpatch/imaging.hpp"
#include "freqpatch/jpeg_harness.hpp"
#include "freqpatch/rng.hpp"

namespace freqpatch::cli {
namespace {

namespace fs = std::filesystem;

struct Paths {
  std::string config;
  std::string out;
  std::string train;
  std::string val;
  std::string test;
  std::string detector;
  std::string patch;
  std::string theta;
  std::string init_patch;
  bool predictions = false;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// --config must be known before the other flags are bound so that flags
// land on top of the file's values.
std::string find_config_arg(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

void add_common(CLI::App* app, RunConfig& cfg, Paths& paths) {
  app->add_option("--config", paths.config, "JSON run configuration; flags override it");
  app->add_option("--seed", cfg.seed, "seed for every stage");
  app->add_option("--run-dir", cfg.run_dir, "output directory (append-only)");
}

void add_train_flags(CLI::App* app, RunConfig& cfg) {
  TrainConfig& t = cfg.train;
  app->add_option("--mode", [&cfg](const CLI::results_t& r) {
    cfg.mode = parse_attack_mode(r.at(0));
    return true;
  }, "ours, non_ycbcr, keep_fran, baseline, random or clean");
  app->add_option("--patch-side", t.patch_side);
  app->add_option("--lr", t.lr);
  app->add_option("--theta-lr", t.theta_lr);
  app->add_option("--batch-size", t.batch_size);
  app->add_option("--epochs", t.epochs);
  app->add_option("--fran-epochs", t.fran_epochs);
  app->add_option("--alpha", t.alpha);
  app->add_option("--normalize-tv", t.normalize_tv);
  app->add_option("--scale-ratio", t.scale_ratio);
  app->add_option("--use-ycbcr", t.use_ycbcr);
  app->add_option("--eval-every", t.eval_every);
  app->add_option("--brightness", t.augment.brightness);
  app->add_option("--brightness-range", t.augment.brightness_range);
  app->add_option("--contrast", t.augment.contrast);
  app->add_option("--contrast-min", t.augment.contrast_min);
  app->add_option("--contrast-max", t.augment.contrast_max);
  app->add_option("--noise", t.augment.noise);
  app->add_option("--noise-range", t.augment.noise_range);
}

void add_metric_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--t-iou", cfg.train.metrics.t_iou);
  app->add_option("--eps0", cfg.train.metrics.eps0);
  app->add_option("--eps1", cfg.train.metrics.eps1);
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::exists(path)) throw IoError(std::string(flag) + ": no such file: " + path);
}

fs::path prepare_run_dir(const RunConfig& cfg, const std::string& command) {
  const fs::path dir = resolve_run_dir(cfg.run_dir, command);
  fs::create_directories(dir);
  RunConfig echo = cfg;
  echo.run_dir = dir.string();
  write_run_config(echo, dir / (command + "_config.json"));
  return dir;
}

fs::path fresh(const fs::path& p) {
  if (fs::exists(p)) throw IoError("refusing to overwrite " + p.string());
  return p;
}

Dataset load_dataset(const std::string& path, const char* flag) {
  require_file(path, flag);
  std::vector<std::string> warnings;
  Dataset d = load_annotations(path, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  if (d.empty()) throw ContractViolation(std::string(flag) + ": dataset is empty");
  return d;
}

Patch load_patch(const std::string& path) {
  require_file(path, "--patch");
  return Patch(read_png(path));
}

DetectorModel load_model(const std::string& path, const RunConfig& cfg) {
  require_file(path, "--detector");
  DetectorModel m = load_detector(path);
  m.set_objectness_threshold(cfg.detector.objectness_threshold);
  return m;
}

int cmd_gen_data(RunConfig cfg, const Paths& paths) {
  if (!paths.out.empty()) cfg.run_dir = paths.out;
  const fs::path dir = resolve_run_dir(cfg.run_dir, "gen-data");
  const Dataset data = generate_synthetic_dataset(cfg.data_n, cfg.image_side, cfg.seed);
  const fs::path ann = write_dataset(dir, data);
  RunConfig echo = cfg;
  echo.run_dir = dir.string();
  write_run_config(echo, dir / "gen-data_config.json");
  std::cout << ann.string() << "\n";
  return 0;
}

int cmd_train_detector(const RunConfig& cfg, const Paths& paths) {
  const Dataset train = load_dataset(paths.train, "--train");
  const Dataset val = load_dataset(paths.val, "--val");
  const fs::path dir = prepare_run_dir(cfg, "train-detector");
  const fs::path model_path = fresh(dir / "detector.bin");
  try {
    const DetectorTrainResult r = train_toy_detector(
        train, val, cfg.detector, cfg.detector_train, [](int epoch, double loss, double recall) {
          std::fprintf(stderr, "epoch %d loss %.5f val_recall %.4f\n", epoch, loss, recall);
        });
    save_detector(model_path, r.model);
    Json j;
    j["best_epoch"] = r.best_epoch;
    j["best_recall"] = r.best_recall;
    j["epoch_loss"] = r.epoch_loss;
    j["val_recall"] = r.val_recall;
    std::ofstream(fresh(dir / "detector_history.json"), std::ios::binary) << render_json(j);
    std::cout << model_path.string() << "\n";
    return 0;
  } catch (const TrainingFailed& e) {
    std::cerr << "training failed: " << e.what() << " (best recall " << e.best_recall() << ")\n";
    return 3;
  }
}

int cmd_train_patch(const RunConfig& cfg, const Paths& paths) {
  if (!is_trainable(cfg.mode)) {
    throw UsageError("mode " + std::string(to_string(cfg.mode)) + " has nothing to train");
  }
  const Dataset train = load_dataset(paths.train, "--train");
  const Dataset test = load_dataset(paths.test, "--test");
  const DetectorModel model = load_model(paths.detector, cfg);
  const fs::path dir = prepare_run_dir(cfg, "train-patch");
  TrainHooks hooks;
  hooks.checkpoint_dir = dir / "checkpoints";
  fs::create_directories(hooks.checkpoint_dir);
  if (!paths.init_patch.empty()) hooks.initial_patch = load_patch(paths.init_patch);
  hooks.on_epoch = [](const EpochRecord& r) {
    std::fprintf(stderr, "epoch %d loss %.5f obj %.5f tv_r %.5f fran %d", r.epoch, r.mean_loss, r.mean_obj,
                 r.mean_tv_r, r.fran_active ? 1 : 0);
    if (r.evaluated) std::fprintf(stderr, " asr %.4f s %.4f m %.4f l %.4f", r.asr, r.asr_s, r.asr_m, r.asr_l);
    std::fprintf(stderr, "\n");
  };
  TrainResult result;
  try {
    result = train_patch(train, test, model, cfg.train, hooks);
  } catch (const NonFiniteLoss& e) {
    write_png(fresh(dir / "patch_nonfinite.png"), e.patch().pixels());
    write_mask(fresh(dir / "theta_nonfinite.bin"), e.theta());
    throw;
  }
  write_report(to_json(result.history), fresh(dir / "history.json"));
  const Checkpoint best = select_best_checkpoint(result.history);
  const fs::path patch_path = fresh(dir / "patch.png");
  write_png(patch_path, best.patch.pixels());
  write_mask(fresh(dir / "theta.bin"), best.theta);
  write_png(fresh(dir / "theta.png"), mask_visualization(best.theta));
  // Score the artifact exactly as it sits on disk.
  const Patch saved(read_png(patch_path));
  EvalOptions opt;
  opt.scale_ratio = cfg.train.scale_ratio;
  const EvalReport rep = evaluate_patch(model, test, &saved, nullptr, cfg.train.metrics, cfg.seed, opt);
  write_report(rep, fresh(dir / "eval_report.json"));
  std::cout << dir.string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const Paths& paths) {
  const Dataset test = load_dataset(paths.test, "--test");
  const DetectorModel model = load_model(paths.detector, cfg);
  EvalOptions opt;
  opt.scale_ratio = cfg.train.scale_ratio;
  opt.use_ycbcr = cfg.train.use_ycbcr;
  opt.keep_predictions = paths.predictions;
  std::optional<Patch> patch;
  std::optional<FrequencyMask> theta;
  if (cfg.mode == AttackMode::kClean) {
    opt.mode = EvalMode::kClean;
  } else if (cfg.mode == AttackMode::kRandom) {
    opt.mode = EvalMode::kRandom;
    patch = make_random_patch(cfg.train.patch_side, derive_seed(cfg.seed, 0x7a9d));
  } else {
    patch = load_patch(paths.patch);
    if (!paths.theta.empty()) {
      require_file(paths.theta, "--theta");
      theta = read_mask(paths.theta);
    }
  }
  const fs::path dir = prepare_run_dir(cfg, "eval");
  const EvalReport rep = evaluate_patch(model, test, patch ? &*patch : nullptr, theta ? &*theta : nullptr,
                                        cfg.train.metrics, cfg.seed, opt);
  write_report(rep, fresh(dir / "eval_report.json"));
  if (paths.predictions) write_predictions(fresh(dir / "predictions.jsonl"), rep.predictions);
  std::printf("asr %.4f asr_l %.4f asr_m %.4f asr_s %.4f\n", rep.asr, rep.asr_l, rep.asr_m, rep.asr_s);
  return 0;
}

int cmd_jpeg_eval(const RunConfig& cfg, const Paths& paths) {
  const Dataset test = load_dataset(paths.test, "--test");
  const DetectorModel model = load_model(paths.detector, cfg);
  const Patch patch = load_patch(paths.patch);
  if (cfg.jpeg_qualities.empty()) throw UsageError("--qualities must not be empty");
  const fs::path dir = prepare_run_dir(cfg, "jpeg-eval");
  EvalOptions opt;
  opt.scale_ratio = cfg.train.scale_ratio;
  std::vector<Patch> compressed;
  const JpegSweepReport rep =
      jpeg_eval(model, test, patch, cfg.jpeg_qualities, cfg.train.metrics, cfg.seed, opt, &compressed);
  for (std::size_t i = 0; i < compressed.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "patch_q%03d.png", cfg.jpeg_qualities[i]);
    write_png(fresh(dir / name), compressed[i].pixels());
  }
  write_report(rep, fresh(dir / "jpeg_report.json"));
  for (const JpegRecord& r : rep.records) {
    std::printf("q%d asr %.4f (delta %.4f) asr_s %.4f (delta %.4f)\n", r.quality, r.report.asr,
                r.delta_asr, r.report.asr_s, r.delta_asr_s);
  }
  return 0;
}

int cmd_viz_mask(const RunConfig& cfg, const Paths& paths) {
  require_file(paths.theta, "--theta");
  const FrequencyMask theta = read_mask(paths.theta);
  fs::path out;
  if (!paths.out.empty()) {
    out = paths.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
  } else {
    out = prepare_run_dir(cfg, "viz-mask") / "mask.png";
  }
  write_png(fresh(out), mask_visualization(theta));
  std::cout << out.string() << "\n";
  return 0;
}

}  // namespace

fs::path resolve_run_dir(const std::string& explicit_dir, const std::string& command) {
  if (!explicit_dir.empty()) return explicit_dir;
  const char* env = std::getenv("FREQPATCH_RUN_DIR");
  const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
  for (int i = 0; i < 100000; ++i) {
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "-%03d", i);
    const fs::path candidate = root / (command + suffix);
    if (!fs::exists(candidate)) return candidate;
  }
  throw IoError("no free run directory under " + root.string());
}

int run_cli(int argc, const char* const* argv) {
  RunConfig cfg;
  Paths paths;
  try {
    const std::string config_path = find_config_arg(argc, argv);
    if (!config_path.empty()) cfg = load_run_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Frequency-attention adversarial patches against a toy detector"};
  app.require_subcommand(1);

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic person-proxy dataset");
  add_common(gen, cfg, paths);
  gen->add_option("--out", paths.out, "dataset directory");
  gen->add_option("--n", cfg.data_n, "number of images");
  gen->add_option("--image-side", cfg.image_side);

  CLI::App* tdet = app.add_subcommand("train-detector", "train the toy objectness detector");
  add_common(tdet, cfg, paths);
  tdet->add_option("--train", paths.train, "training annotations (JSON-Lines)");
  tdet->add_option("--val", paths.val, "validation annotations");
  tdet->add_option("--det-epochs", cfg.detector_train.epochs);
  tdet->add_option("--det-lr", cfg.detector_train.lr);
  tdet->add_option("--det-batch-size", cfg.detector_train.batch_size);
  tdet->add_option("--pos-weight", cfg.detector_train.pos_weight);
  tdet->add_option("--required-recall", cfg.detector_train.required_recall);
  tdet->add_option("--base-channels", cfg.detector.base_channels);
  tdet->add_option("--threshold", cfg.detector.objectness_threshold);

  CLI::App* tpatch = app.add_subcommand("train-patch", "optimise an adversarial patch");
  add_common(tpatch, cfg, paths);
  add_train_flags(tpatch, cfg);
  add_metric_flags(tpatch, cfg);
  tpatch->add_option("--train", paths.train, "training annotations");
  tpatch->add_option("--test", paths.test, "evaluation annotations");
  tpatch->add_option("--detector", paths.detector, "detector weights");
  tpatch->add_option("--init-patch", paths.init_patch, "starting patch PNG");
  tpatch->add_option("--threshold", cfg.detector.objectness_threshold);

  CLI::App* eval = app.add_subcommand("eval", "measure attack success rates");
  add_common(eval, cfg, paths);
  add_train_flags(eval, cfg);
  add_metric_flags(eval, cfg);
  eval->add_option("--test", paths.test, "evaluation annotations");
  eval->add_option("--detector", paths.detector, "detector weights");
  eval->add_option("--patch", paths.patch, "patch PNG");
  eval->add_option("--theta", paths.theta, "apply this frequency mask to the patch first");
  eval->add_option("--threshold", cfg.detector.objectness_threshold);
  eval->add_flag("--predictions", paths.predictions, "also write predictions.jsonl");

  CLI::App* jpeg = app.add_subcommand("jpeg-eval", "attack success after JPEG round trips of the patch");
  add_common(jpeg, cfg, paths);
  add_metric_flags(jpeg, cfg);
  jpeg->add_option("--test", paths.test, "evaluation annotations");
  jpeg->add_option("--detector", paths.detector, "detector weights");
  jpeg->add_option("--patch", paths.patch, "patch PNG");
  jpeg->add_option("--qualities", cfg.jpeg_qualities, "JPEG qualities")->delimiter(',');
  jpeg->add_option("--scale-ratio", cfg.train.scale_ratio);
  jpeg->add_option("--threshold", cfg.detector.objectness_threshold);

  CLI::App* viz = app.add_subcommand("viz-mask", "render a frequency mask as a PNG");
  add_common(viz, cfg, paths);
  viz->add_option("--theta", paths.theta, "mask file")->required();
  viz->add_option("--out", paths.out, "output PNG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const RunConfig run = finalize(cfg);
    run.train.validate();
    if (gen->parsed()) return cmd_gen_data(run, paths);
    if (tdet->parsed()) return cmd_train_detector(run, paths);
    if (tpatch->parsed()) return cmd_train_patch(run, paths);
    if (eval->parsed()) return cmd_eval(run, paths);
    if (jpeg->parsed()) return cmd_jpeg_eval(run, paths);
    if (viz->parsed()) return cmd_viz_mask(run, paths);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace freqpatch::cli
