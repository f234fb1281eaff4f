#pragma once

// Encoder-decoder SR network and its training loop.
//
// Each contrast has its own encoder: a head conv, residual groups (four
// conv + leaky-ReLU pairs with a group skip) distributed over the pyramid
// levels, and area-down + conv transitions that halve the extent and double
// the channels. At each level SCQA and/or FCQA refine the pair; the LR-branch
// outputs are summed. The decoder runs coarse to fine, modulating its state
// with the refined map of each level, and ends with a zero-initialised conv
// added to the upsampled LR input.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgsr/data.hpp"
#include "sgsr/fcqa.hpp"
#include "sgsr/nn.hpp"
#include "sgsr/scqa.hpp"
#include "sgsr/tensor.hpp"

namespace sgsr {

struct BackboneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t base_channels = 32;  // d0
  std::size_t levels = 3;
  std::size_t groups = 4;
  std::size_t scale = 2;
  bool use_scqa = true;
  bool use_fcqa = true;
  bool use_ref = true;
  std::uint64_t seed = 0;
  std::size_t window = 8;
  std::size_t factor = 4;
  std::size_t reduced = 0;  // m~, 0 = default
  std::size_t pooled = 16;  // appearance extent at the finest level

  /// Throws ConfigError on any inconsistency.
  void validate() const;
  std::size_t level_channels(std::size_t level) const { return base_channels << level; }
  std::size_t level_height(std::size_t level) const { return height >> level; }
  std::size_t level_width(std::size_t level) const { return width >> level; }
  /// Residual groups at each level: an even share, remainder to finer levels.
  std::vector<std::size_t> groups_per_level() const;
  /// Whether FCQA runs at a level (enabled and extent at least one window).
  bool fcqa_at(std::size_t level) const;
};

struct Pyramid {
  std::vector<Tensor> lr;
  std::vector<Tensor> ref;
};

/// lr = kspace_degrade(hr), lr_up = bilinear upsample of lr to the HR extent.
Tensor make_lr_up(const Tensor& hr_target, std::size_t scale);

class Model {
 public:
  explicit Model(const BackboneConfig& cfg);

  const BackboneConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  Pyramid encode(const Tensor& lr_up, const Tensor& ref) const;
  /// LR-branch refined map per level (encoder features where no branch runs).
  std::vector<Tensor> refine(const Pyramid& pyramid) const;
  Tensor decode(const Pyramid& pyramid, const std::vector<Tensor>& refined,
                const Tensor& lr_up) const;

  /// SR image from a pre-upsampled LR image and a reference. With use_ref
  /// off the reference is replaced by lr_up.
  Tensor forward_images(const Tensor& lr_up, const Tensor& ref) const;
  /// Degrades the pair's target, then forward_images.
  Tensor forward(const ContrastPair& pair) const;

 private:
  struct Group {
    std::vector<Conv3x3> convs;
  };
  struct Encoder {
    Conv3x3 head;
    std::vector<std::vector<Group>> groups;  // per level
    std::vector<Conv3x3> down;               // level l -> l+1
  };
  struct Decoder {
    std::vector<Conv3x3> up;  // level l+1 -> l, output 4 * d_l channels
    std::vector<Linear> gamma, beta;
    std::vector<Conv3x3> res;
    Conv3x3 tail;
  };

  Tensor run_encoder(const Encoder& enc, const Tensor& image, std::vector<Tensor>& levels) const;

  BackboneConfig cfg_;
  ParamStore store_;
  std::array<Encoder, 2> enc_;
  std::vector<std::optional<ScqaParams>> scqa_;
  std::vector<std::optional<FcqaParams>> fcqa_;
  Decoder dec_;
};

struct TrainConfig {
  double lr = 2e-4;
  std::size_t decay_epoch = 40;  // 1-based epoch from which the decay applies
  double decay = 0.1;
  std::size_t batch = 4;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;

  void validate() const;
  double lr_at(std::size_t epoch) const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_l1 = 0.0;
  double val_psnr = 0.0;
  double val_ssim = 0.0;
  double lr = 0.0;
};

/// Training input with the degraded LR image cached per pair.
struct Sample {
  Tensor lr_up;
  Tensor ref;
  Tensor target;
};

std::vector<Sample> make_samples(const std::vector<ContrastPair>& pairs, std::size_t scale);

/// Mean L1 over the batch, backward, one Adam step. Returns the loss.
/// Throws NumericError (with lr and gradient norm) on a non-finite loss.
double train_step(const Model& model, Adam& adam, const std::vector<const Sample*>& batch,
                  double lr);

/// Mean PSNR / SSIM of the model over samples (no gradient recording).
std::pair<double, double> evaluate_model(const Model& model, const std::vector<Sample>& samples);

struct TrainOptions {
  /// When set, checkpoint.sgt / checkpoint.manifest / log.csv are written here
  /// after every epoch (and once before the first).
  std::optional<std::filesystem::path> out_dir;
  /// Resume from the checkpoint in out_dir.
  bool resume = false;
  /// Extra text written as a comment line at the top of log.csv.
  std::string log_header;
};

/// Trainer that owns the optimizer so it can be checkpointed and resumed.
class Trainer {
 public:
  Trainer(Model& model, TrainConfig cfg);

  std::size_t epoch() const { return epoch_; }
  Adam& optimizer() { return adam_; }

  /// Runs one epoch (1-based index epoch()+1) over `train`.
  EpochLog run_epoch(const std::vector<Sample>& train, const std::vector<Sample>& val);

  void save_checkpoint(const std::filesystem::path& dir) const;
  void load_checkpoint(const std::filesystem::path& dir);

 private:
  Model& model_;
  TrainConfig cfg_;
  Adam adam_;
  std::size_t epoch_ = 0;
};

/// Full loop: epochs per cfg, CSV log and checkpoints per options.
std::vector<EpochLog> train(Model& model, const std::vector<Sample>& train_set,
                            const std::vector<Sample>& val_set, const TrainConfig& cfg,
                            const TrainOptions& options = {});

/// Loads parameters only (for evaluation).
void load_parameters(Model& model, const std::filesystem::path& checkpoint_dir);

}  // namespace sgsr
