#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "freqpatch/dataset.hpp"
#include "freqpatch/detector.hpp"
#include "freqpatch/errors.hpp"
#include "freqpatch/fran.hpp"
#include "freqpatch/losses.hpp"
#include "freqpatch/metrics.hpp"
#include "freqpatch/patch.hpp"
#include "freqpatch/render.hpp"

namespace freqpatch {

struct TrainConfig {
  int patch_side = kDefaultPatchSide;
  double lr = 0.005;
  // Adam rate for the spectral mask; 0 means use lr.
  double theta_lr = 0.0;
  int batch_size = 4;
  int epochs = 30;
  int fran_epochs = 7;
  double alpha = 2.5;
  // Divide TV_r by the number of patch values before weighting by alpha.
  bool normalize_tv = true;
  double scale_ratio = kDefaultScaleRatio;
  bool use_ycbcr = true;
  std::uint64_t seed = 0;
  int eval_every = 1;
  AugmentConfig augment;
  MetricsConfig metrics;

  // 0 <= fran_epochs <= epochs, lr > 0, batch_size >= 1, ...
  void validate() const;
};

// Ablation presets. kRandom and kClean are evaluation-only.
enum class AttackMode { kOurs, kNonYcbcr, kKeepFran, kBaseline, kRandom, kClean };
std::string_view to_string(AttackMode m);
AttackMode parse_attack_mode(std::string_view s);
[[nodiscard]] bool is_trainable(AttackMode m);
// Applies the preset's FRAN schedule and colour space to a base config.
TrainConfig config_for_mode(TrainConfig base, AttackMode mode);

struct Checkpoint {
  Patch patch;  // the patch as deployed at that epoch
  FrequencyMask theta;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_obj = 0.0;
  double mean_tv_r = 0.0;
  bool fran_active = false;
  bool evaluated = false;
  double asr = 0.0;
  double asr_s = 0.0;
  double asr_m = 0.0;
  double asr_l = 0.0;
  std::string patch_checkpoint_ref;
  std::string theta_checkpoint_ref;
  std::shared_ptr<const Checkpoint> checkpoint;  // set on evaluated epochs
};

struct TrainHistory {
  std::vector<EpochRecord> records;
};

struct TrainResult {
  Patch patch;            // raw optimised pixels
  FrequencyMask theta;
  Patch effective_patch;  // what the final epoch pasted
  TrainHistory history;
};

struct TrainHooks {
  // When set, every checkpoint is written here as patch_eNNN.png and
  // theta_eNNN.bin. Existing files are never overwritten.
  std::filesystem::path checkpoint_dir;
  std::optional<Patch> initial_patch;
  std::function<void(const EpochRecord&)> on_epoch;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(const std::string& what, Patch patch, FrequencyMask theta)
      : Error(what), patch_(std::move(patch)), theta_(std::move(theta)) {}
  [[nodiscard]] const Patch& patch() const { return patch_; }
  [[nodiscard]] const FrequencyMask& theta() const { return theta_; }

 private:
  Patch patch_;
  FrequencyMask theta_;
};

// Jointly optimises patch pixels and the spectral mask against the frozen
// detector. The mask is applied and trained only while epoch < fran_epochs;
// afterwards the raw patch is pasted and the mask stays fixed.
TrainResult train_patch(const Dataset& train_data, const Dataset& test_data,
                        const DetectorModel& model, const TrainConfig& config,
                        const TrainHooks& hooks = {});

// Highest-ASR evaluated checkpoint, earliest epoch on ties.
Checkpoint select_best_checkpoint(const TrainHistory& history);
const EpochRecord& best_record(const TrainHistory& history);

}  // namespace freqpatch
