#pragma once

// Run configuration: an INI-style text file.
//
//   # comment
//   [section]
//   key = value
//
// Sections: data, model, train, eval, bench. Lists are comma or space
// separated; booleans are true/false. Unknown sections or keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgsr/backbone.hpp"
#include "sgsr/data.hpp"
#include "sgsr/eval.hpp"

namespace sgsr {

struct DataConfig {
  std::size_t count = 8;
  std::size_t height = 64;
  std::size_t width = 64;
  PhantomStyle style = PhantomStyle::Knee;
  std::uint64_t seed = 0;
  std::size_t scale = 2;  // used to validate extents

  void validate() const;
};

struct TrainSection {
  TrainConfig train;
  std::size_t val_count = 0;  // trailing dataset pairs held out for validation
};

struct EvalConfig {
  std::vector<std::string> metrics{"psnr", "ssim"};
  void validate() const;
};

/// Cost sweep over input extents; attention runs at half the input extent.
struct BenchConfig {
  std::vector<std::size_t> inputs{32, 64, 128, 256};
  std::size_t channels = 32;
  std::size_t pooled = 16;
  std::size_t window = 8;
  std::size_t factor = 4;
  std::size_t reduced = 0;
  std::size_t bytes_per_scalar = 4;

  void validate() const;
  ShapeConfig shape_for(std::size_t input) const;
};

struct RunConfig {
  DataConfig data;
  /// model.height / model.width of 0 mean "take from the dataset".
  BackboneConfig model{.height = 0, .width = 0};
  TrainSection train;
  EvalConfig eval;
  BenchConfig bench;
};

/// Throws ConfigError on syntax errors, unknown keys or invalid values.
RunConfig parse_run_config(const std::string& text);
/// Throws IoError if the file cannot be read.
RunConfig load_run_config(const std::filesystem::path& path);
/// Resolved configuration with every field written out; parses back to the same values.
std::string format_run_config(const RunConfig& cfg);

}  // namespace sgsr
