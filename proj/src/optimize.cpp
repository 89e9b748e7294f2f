#include "freqpatch/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "freqpatch/adam.hpp"
#include "freqpatch/imaging.hpp"
#include "freqpatch/rng.hpp"

namespace freqpatch {

void TrainConfig::validate() const {
  if (patch_side < 1) throw ContractViolation("patch_side must be >= 1");
  if (!(lr > 0.0)) throw ContractViolation("lr must be > 0");
  if (!(theta_lr >= 0.0)) throw ContractViolation("theta_lr must be >= 0");
  if (batch_size < 1) throw ContractViolation("batch_size must be >= 1");
  if (epochs < 0) throw ContractViolation("epochs must be >= 0");
  if (fran_epochs < 0 || fran_epochs > epochs) {
    throw ContractViolation("fran_epochs must satisfy 0 <= fran_epochs <= epochs");
  }
  if (!(alpha >= 0.0)) throw ContractViolation("alpha must be >= 0");
  if (!(scale_ratio > 0.0 && scale_ratio <= 1.0)) throw ContractViolation("scale_ratio must be in (0,1]");
  if (eval_every < 1) throw ContractViolation("eval_every must be >= 1");
  metrics.validate();
}

std::string_view to_string(AttackMode m) {
  switch (m) {
    case AttackMode::kOurs: return "ours";
    case AttackMode::kNonYcbcr: return "non_ycbcr";
    case AttackMode::kKeepFran: return "keep_fran";
    case AttackMode::kBaseline: return "baseline";
    case AttackMode::kRandom: return "random";
    case AttackMode::kClean: return "clean";
  }
  return "unknown";
}

AttackMode parse_attack_mode(std::string_view s) {
  for (AttackMode m : {AttackMode::kOurs, AttackMode::kNonYcbcr, AttackMode::kKeepFran,
                       AttackMode::kBaseline, AttackMode::kRandom, AttackMode::kClean}) {
    if (to_string(m) == s) return m;
  }
  throw ContractViolation("unknown mode '" + std::string(s) +
                          "' (expected ours, non_ycbcr, keep_fran, baseline, random or clean)");
}

bool is_trainable(AttackMode m) { return m != AttackMode::kRandom && m != AttackMode::kClean; }

TrainConfig config_for_mode(TrainConfig base, AttackMode mode) {
  switch (mode) {
    case AttackMode::kOurs:
      base.use_ycbcr = true;
      break;
    case AttackMode::kNonYcbcr:
      base.use_ycbcr = false;
      break;
    case AttackMode::kKeepFran:
      base.use_ycbcr = true;
      base.fran_epochs = base.epochs;
      break;
    case AttackMode::kBaseline:
      base.fran_epochs = 0;
      break;
    case AttackMode::kRandom:
    case AttackMode::kClean:
      throw ContractViolation("mode '" + std::string(to_string(mode)) + "' has no training phase");
  }
  base.fran_epochs = std::min(base.fran_epochs, base.epochs);
  return base;
}

namespace {

void add_into(ImageTensor& dst, const ImageTensor& src, double scale = 1.0) {
  auto d = dst.values();
  const auto s = src.values();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += scale * s[k];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string checkpoint_name(const char* stem, int epoch, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_e%03d.%s", stem, epoch, ext);
  return buf;
}

void refuse_overwrite(const std::filesystem::path& p) {
  if (std::filesystem::exists(p)) {
    throw IoError("refusing to overwrite existing checkpoint " + p.string());
  }
}

}  // namespace

TrainResult train_patch(const Dataset& train_data, const Dataset& test_data,
                        const DetectorModel& model, const TrainConfig& config,
                        const TrainHooks& hooks) {
  config.validate();
  if (train_data.empty() || test_data.empty()) {
    throw ContractViolation("train_patch: datasets must be non-empty");
  }
  const int side = config.patch_side;
  TrainResult result;
  if (hooks.initial_patch) {
    if (hooks.initial_patch->side() != side) throw ShapeError("initial patch side mismatch");
    result.patch = *hooks.initial_patch;
  } else {
    result.patch = make_random_patch(side, derive_seed(config.seed, 0x1417));
  }
  result.theta = FrequencyMask(side, side, 1.0);
  result.effective_patch = result.patch;

  Adam<double> patch_opt(result.patch.pixels().size(), AdamOptions{config.lr});
  Adam<double> theta_opt(result.theta.values().size(),
                         AdamOptions{config.theta_lr > 0.0 ? config.theta_lr : config.lr});
  const FranOptions fran_options{config.use_ycbcr};
  const double tv_scale =
      config.normalize_tv ? 1.0 / static_cast<double>(result.patch.pixels().size()) : 1.0;

  std::vector<std::size_t> order(train_data.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const bool fran_active = epoch < config.fran_epochs;
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, 0x5aff1e, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    double sum_loss = 0.0;
    double sum_obj = 0.0;
    double sum_tv = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++steps) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::optional<FranTrace> fran;
      if (fran_active) fran = fran_forward_traced(result.patch, result.theta, fran_options);
      const Patch& effective = fran ? fran->output : result.patch;

      LossWithGrad tv = tv_r_loss_with_grad(effective.pixels());
      ImageTensor grad_effective = std::move(tv.grad);
      for (double& g : grad_effective.values()) g *= config.alpha * tv_scale;

      std::vector<RenderTrace> renders;
      std::vector<DetectorPass> passes;
      std::vector<ScoreMap> maps;
      for (std::size_t i = start; i < end; ++i) {
        const DatasetSample& s = train_data[order[i]];
        renders.push_back(render_patch_traced(
            s.image, s.gt_boxes, effective, config.scale_ratio, config.augment,
            derive_seed(config.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(steps), i - start + 1)));
        passes.push_back(run_detector(model, renders.back().image));
        maps.push_back(passes.back().scores);
      }
      const ObjectnessLoss obj = objectness_loss_with_grad(maps);
      const LossValue loss = total_loss(obj.value, tv.value * tv_scale, config.alpha);
      if (!std::isfinite(loss.total)) {
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                std::to_string(steps),
                            result.patch, result.theta);
      }
      for (std::size_t b = 0; b < passes.size(); ++b) {
        const ImageTensor grad_image = objectness_backward(model, passes[b], obj.grads[b]);
        add_into(grad_effective, render_backward(renders[b], grad_image));
      }

      if (fran) {
        FranGradients grads = fran_backward(*fran, grad_effective);
        if (!all_finite(grads.patch.values()) || !all_finite(grads.theta.values())) {
          throw NonFiniteLoss("non-finite gradient at epoch " + std::to_string(epoch),
                              result.patch, result.theta);
        }
        patch_opt.step(result.patch.pixels().values(), grads.patch.values());
        theta_opt.step(result.theta.values(), grads.theta.values());
      } else {
        if (!all_finite(grad_effective.values())) {
          throw NonFiniteLoss("non-finite gradient at epoch " + std::to_string(epoch),
                              result.patch, result.theta);
        }
        patch_opt.step(result.patch.pixels().values(), grad_effective.values());
      }
      result.patch.pixels().clamp(0.0, 1.0);

      sum_loss += loss.total;
      sum_obj += loss.obj;
      sum_tv += loss.tv_r;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.fran_active = fran_active;
    rec.mean_loss = steps > 0 ? sum_loss / steps : 0.0;
    rec.mean_obj = steps > 0 ? sum_obj / steps : 0.0;
    rec.mean_tv_r = steps > 0 ? sum_tv / steps : 0.0;
    result.effective_patch =
        fran_active ? fran_forward(result.patch, result.theta, fran_options) : result.patch;

    if ((epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs) {
      const EvalOptions eval_options{EvalMode::kPatched, config.scale_ratio,
                                     AugmentConfig::disabled(), config.use_ycbcr, false};
      const EvalReport report = evaluate_patch(model, test_data, &result.effective_patch, nullptr,
                                               config.metrics, derive_seed(config.seed, 0xe7a1),
                                               eval_options);
      rec.evaluated = true;
      rec.asr = report.asr;
      rec.asr_s = report.asr_s;
      rec.asr_m = report.asr_m;
      rec.asr_l = report.asr_l;
      rec.checkpoint = std::make_shared<const Checkpoint>(Checkpoint{result.effective_patch, result.theta});
      if (!hooks.checkpoint_dir.empty()) {
        rec.patch_checkpoint_ref = checkpoint_name("patch", epoch, "png");
        rec.theta_checkpoint_ref = checkpoint_name("theta", epoch, "bin");
        const auto patch_path = hooks.checkpoint_dir / rec.patch_checkpoint_ref;
        const auto theta_path = hooks.checkpoint_dir / rec.theta_checkpoint_ref;
        refuse_overwrite(patch_path);
        refuse_overwrite(theta_path);
        write_png(patch_path, result.effective_patch.pixels());
        write_mask(theta_path, result.theta);
      }
    }
    result.history.records.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(result.history.records.back());
  }
  return result;
}

const EpochRecord& best_record(const TrainHistory& history) {
  const EpochRecord* best = nullptr;
  for (const EpochRecord& r : history.records) {
    if (!r.evaluated || !r.checkpoint) continue;
    if (best == nullptr || r.asr > best->asr) best = &r;
  }
  if (best == nullptr) throw ContractViolation("select_best_checkpoint: history has no checkpoints");
  return *best;
}

Checkpoint select_best_checkpoint(const TrainHistory& history) {
  return *best_record(history).checkpoint;
}

}  // namespace freqpatch
