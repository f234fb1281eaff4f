#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgsr/fft.hpp"
#include "sgsr/tensor.hpp"

namespace sgsr {

enum class PhantomStyle { Knee, Brain };

std::string style_name(PhantomStyle style);
PhantomStyle parse_style(const std::string& name);

/// A registered pair of contrasts on a shared geometry, both [1, H, W] in [0, 1].
/// `hr_target` is the contrast to super-resolve; `ref` is the guidance contrast.
struct ContrastPair {
  Tensor hr_target;
  Tensor ref;
  std::uint64_t seed = 0;
  PhantomStyle style = PhantomStyle::Knee;
};

struct DegradationSpec {
  std::size_t scale = 2;
};

/// Default FFT window of the frequency attention branch.
inline constexpr std::size_t kDefaultWindow = 8;

/// Throws ConfigError unless H and W are positive multiples of 2 * scale * window.
void validate_extents(std::size_t height, std::size_t width, std::size_t scale,
                      std::size_t window = kDefaultWindow);

/// Central (H/s) x (W/s) block of the centred k-space of `hr` ([1,H,W]), in
/// unshifted LR-grid order, with the self-conjugate Nyquist lines of the
/// block made Hermitian-consistent.
std::vector<fft::cplx> kspace_window(const Tensor& hr, std::size_t scale);

/// Low-resolution image from the central k-space window, scaled by 1/s^2 so
/// mean intensity is preserved. [1,H,W] -> [1,H/s,W/s].
Tensor kspace_degrade(const Tensor& hr, const DegradationSpec& spec);

/// Zero-padded spectrum re-expansion of an LR image back to s-times the
/// extent (the adjoint-style companion of kspace_degrade).
Tensor kspace_expand(const Tensor& lr, std::size_t scale);

/// Deterministic phantom pair: smooth ellipses and thin curves on one
/// geometry, rendered through two monotone intensity maps with
/// contrast-specific texture.
ContrastPair make_phantom_pair(std::uint64_t seed, std::size_t height, std::size_t width,
                               PhantomStyle style);

/// Dataset layout: <dir>/pairs.sgt holds hr_target, ref records per pair;
/// <dir>/manifest.txt has one "seed H W style" line per pair.
void save_dataset(const std::filesystem::path& dir, const std::vector<ContrastPair>& pairs);
std::vector<ContrastPair> load_dataset(const std::filesystem::path& dir);

}  // namespace sgsr
