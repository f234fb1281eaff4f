#include "sgsr/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sgsr/error.hpp"
#include "sgsr/random.hpp"
#include "sgsr/serialize.hpp"

namespace sgsr {

std::string style_name(PhantomStyle style) {
  return style == PhantomStyle::Knee ? "knee" : "brain";
}

PhantomStyle parse_style(const std::string& name) {
  if (name == "knee") return PhantomStyle::Knee;
  if (name == "brain") return PhantomStyle::Brain;
  throw ConfigError("unknown phantom style '" + name + "' (expected knee or brain)");
}

void validate_extents(std::size_t height, std::size_t width, std::size_t scale,
                      std::size_t window) {
  if (scale != 2 && scale != 4) {
    throw ConfigError("scale factor must be 2 or 4, got " + std::to_string(scale));
  }
  const std::size_t unit = 2 * scale * window;
  if (height == 0 || width == 0 || height % unit != 0 || width % unit != 0) {
    throw ConfigError("image extents " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be positive multiples of " + std::to_string(unit) +
                      " (2 * scale * window)");
  }
}

namespace {

void require_image(const Tensor& img, const char* what) {
  if (img.rank() != 3 || img.dim(0) != 1) {
    throw ShapeError(std::string(what) + ": expected [1,H,W], got " + shape_str(img.shape()));
  }
}

// Signed frequency of LR-grid index a on an axis of length n.
std::ptrdiff_t signed_freq(std::size_t a, std::size_t n) {
  return a < n / 2 ? std::ptrdiff_t(a) : std::ptrdiff_t(a) - std::ptrdiff_t(n);
}

std::size_t wrap(std::ptrdiff_t k, std::size_t n) {
  const auto m = std::ptrdiff_t(n);
  return std::size_t(((k % m) + m) % m);
}

}  // namespace

std::vector<fft::cplx> kspace_window(const Tensor& hr, std::size_t scale) {
  require_image(hr, "kspace_window");
  const std::size_t H = hr.dim(1), W = hr.dim(2);
  if (scale == 0 || H % scale != 0 || W % scale != 0 || (H / scale) % 2 != 0 ||
      (W / scale) % 2 != 0) {
    throw ConfigError("kspace: scale " + std::to_string(scale) + " does not evenly divide " +
                      std::to_string(H) + "x" + std::to_string(W));
  }
  const std::size_t h = H / scale, w = W / scale;
  std::vector<fft::cplx> full(H * W);
  auto v = hr.data();
  for (std::size_t i = 0; i < full.size(); ++i) full[i] = v[i];
  fft::transform2d(full, H, W, false);

  // Centred crop [N/2 - n/2, N/2 + n/2) of the shifted spectrum equals the
  // signed frequencies [-n/2, n/2) of the unshifted one.
  std::vector<fft::cplx> win(h * w);
  for (std::size_t a = 0; a < h; ++a)
    for (std::size_t b = 0; b < w; ++b)
      win[a * w + b] = full[wrap(signed_freq(a, h), H) * W + wrap(signed_freq(b, w), W)];

  // Only the Nyquist lines can break Hermitian symmetry on the LR grid.
  std::vector<fft::cplx> sym(win.size());
  for (std::size_t a = 0; a < h; ++a)
    for (std::size_t b = 0; b < w; ++b) {
      const auto& mirror = win[((h - a) % h) * w + (w - b) % w];
      sym[a * w + b] = 0.5 * (win[a * w + b] + std::conj(mirror));
    }
  return sym;
}

Tensor kspace_degrade(const Tensor& hr, const DegradationSpec& spec) {
  auto win = kspace_window(hr, spec.scale);
  const std::size_t h = hr.dim(1) / spec.scale, w = hr.dim(2) / spec.scale;
  fft::transform2d(win, h, w, true);
  const double norm = 1.0 / (double(h * w) * double(spec.scale * spec.scale));
  std::vector<double> out(h * w);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double im = win[i].imag() * norm;
    if (std::fabs(im) > 1e-9) {
      throw InternalError("kspace_degrade: imaginary residue " + std::to_string(im) +
                          " indicates a spectrum indexing error");
    }
    out[i] = win[i].real() * norm;
  }
  return Tensor(Shape{1, h, w}, std::move(out));
}

Tensor kspace_expand(const Tensor& lr, std::size_t scale) {
  require_image(lr, "kspace_expand");
  const std::size_t h = lr.dim(1), w = lr.dim(2), H = h * scale, W = w * scale;
  std::vector<fft::cplx> small(h * w);
  auto v = lr.data();
  for (std::size_t i = 0; i < small.size(); ++i) small[i] = v[i];
  fft::transform2d(small, h, w, false);
  std::vector<fft::cplx> full(H * W);
  for (std::size_t a = 0; a < h; ++a)
    for (std::size_t b = 0; b < w; ++b)
      full[wrap(signed_freq(a, h), H) * W + wrap(signed_freq(b, w), W)] = small[a * w + b];
  fft::transform2d(full, H, W, true);
  const double norm = double(scale * scale) / double(H * W);
  std::vector<double> out(H * W);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = full[i].real() * norm;
  return Tensor(Shape{1, H, W}, std::move(out));
}

namespace {

struct Ellipse {
  double cx, cy, ax, ay, angle, level;
};

struct Curve {
  double offset, amplitude, freq, phase, angle, level, width;
};

// Smooth indicator of an ellipse with ~edge pixel transition.
double ellipse_alpha(const Ellipse& e, double x, double y, double edge) {
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double dx = x - e.cx, dy = y - e.cy;
  const double u = (c * dx + s * dy) / e.ax, v = (-s * dx + c * dy) / e.ay;
  const double r = std::sqrt(u * u + v * v);
  // approximate signed distance in normalized units
  const double d = (1.0 - r) * std::min(e.ax, e.ay);
  return 1.0 / (1.0 + std::exp(-d / edge));
}

double curve_alpha(const Curve& k, double x, double y) {
  const double c = std::cos(k.angle), s = std::sin(k.angle);
  const double u = c * x + s * y, v = -s * x + c * y;
  const double d = v - (k.offset + k.amplitude * std::sin(k.freq * u + k.phase));
  return std::exp(-(d * d) / (k.width * k.width));
}

struct Scene {
  std::vector<Ellipse> ellipses;
  std::vector<Curve> curves;
};

Scene make_scene(Rng& rng, PhantomStyle style, double pixel) {
  Scene sc;
  const bool knee = style == PhantomStyle::Knee;
  // body
  sc.ellipses.push_back({rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                         knee ? rng.uniform(0.6, 0.8) : rng.uniform(0.7, 0.85),
                         knee ? rng.uniform(0.75, 0.9) : rng.uniform(0.75, 0.9),
                         rng.uniform(-0.3, 0.3), rng.uniform(0.25, 0.4)});
  if (!knee) {
    // inner region inside a bright rim
    const auto& b = sc.ellipses[0];
    sc.ellipses.push_back({b.cx, b.cy, b.ax * 0.85, b.ay * 0.85, b.angle, rng.uniform(0.45, 0.6)});
  }
  const std::size_t inner = knee ? 3 + rng.below(3) : 4 + rng.below(4);
  for (std::size_t i = 0; i < inner; ++i) {
    const double ax = knee ? rng.uniform(0.12, 0.4) : rng.uniform(0.06, 0.25);
    const double ay = knee ? rng.uniform(0.08, 0.25) : rng.uniform(0.06, 0.25);
    sc.ellipses.push_back({rng.uniform(-0.45, 0.45), rng.uniform(-0.5, 0.5), ax, ay,
                           rng.uniform(0.0, std::numbers::pi), rng.uniform(0.05, 1.0)});
  }
  const std::size_t curves = knee ? 3 + rng.below(3) : 2 + rng.below(3);
  for (std::size_t i = 0; i < curves; ++i) {
    sc.curves.push_back({rng.uniform(-0.5, 0.5), rng.uniform(0.05, 0.2), rng.uniform(2.0, 7.0),
                         rng.uniform(0.0, 2.0 * std::numbers::pi),
                         rng.uniform(0.0, std::numbers::pi), rng.uniform(0.6, 1.0),
                         rng.uniform(0.7, 1.3) * pixel});
  }
  return sc;
}

// Contrast-specific smooth texture confined to the body.
struct Texture {
  std::vector<std::array<double, 4>> waves;  // kx, ky, phase, amplitude
};

Texture make_texture(Rng& rng) {
  Texture t;
  for (int i = 0; i < 6; ++i) {
    const double f = rng.uniform(3.0, 12.0), th = rng.uniform(0.0, 2.0 * std::numbers::pi);
    t.waves.push_back({f * std::cos(th), f * std::sin(th), rng.uniform(0.0, 2.0 * std::numbers::pi),
                       rng.uniform(0.005, 0.015)});
  }
  return t;
}

double texture_at(const Texture& t, double x, double y) {
  double s = 0.0;
  for (const auto& w : t.waves) s += w[3] * std::sin(w[0] * x + w[1] * y + w[2]);
  return s;
}

}  // namespace

ContrastPair make_phantom_pair(std::uint64_t seed, std::size_t height, std::size_t width,
                               PhantomStyle style) {
  if (height < 8 || width < 8) throw ConfigError("phantom extents must be at least 8x8");
  Rng geom(mix_seed(seed, 1));
  Rng tex_a(mix_seed(seed, 2));
  Rng tex_b(mix_seed(seed, 3));
  Rng maps(mix_seed(seed, 4));

  const double pixel = 2.0 / double(std::max(height, width));
  const Scene scene = make_scene(geom, style, pixel);
  const Texture ta = make_texture(tex_a), tb = make_texture(tex_b);

  // Two monotone increasing intensity maps with different curvature.
  const double gamma_a = maps.uniform(0.5, 0.9);
  const double sharp_b = maps.uniform(2.5, 5.0);
  auto map_a = [&](double t) { return std::pow(t, gamma_a); };
  auto map_b = [&](double t) { return (std::exp(sharp_b * t) - 1.0) / (std::exp(sharp_b) - 1.0); };

  std::vector<double> hr(height * width), ref(height * width);
  const double edge = 0.6 * pixel;
  for (std::size_t iy = 0; iy < height; ++iy) {
    for (std::size_t ix = 0; ix < width; ++ix) {
      const double x = -1.0 + (double(ix) + 0.5) * 2.0 / double(width);
      const double y = -1.0 + (double(iy) + 0.5) * 2.0 / double(height);
      double t = 0.0;
      for (const auto& e : scene.ellipses) {
        const double a = ellipse_alpha(e, x, y, edge);
        t = t * (1.0 - a) + e.level * a;
      }
      const double body = ellipse_alpha(scene.ellipses[0], x, y, edge);
      for (const auto& k : scene.curves) {
        const double a = curve_alpha(k, x, y) * body;
        t = t * (1.0 - a) + k.level * a;
      }
      t = std::clamp(t, 0.0, 1.0);
      const std::size_t i = iy * width + ix;
      hr[i] = std::clamp(map_a(t) + body * texture_at(ta, x, y), 0.0, 1.0);
      ref[i] = std::clamp(map_b(t) + body * texture_at(tb, x, y), 0.0, 1.0);
    }
  }
  ContrastPair pair;
  pair.hr_target = Tensor(Shape{1, height, width}, std::move(hr));
  pair.ref = Tensor(Shape{1, height, width}, std::move(ref));
  pair.seed = seed;
  pair.style = style;
  return pair;
}

void save_dataset(const std::filesystem::path& dir, const std::vector<ContrastPair>& pairs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  std::vector<Tensor> records;
  std::ostringstream manifest;
  for (const auto& p : pairs) {
    records.push_back(p.hr_target);
    records.push_back(p.ref);
    manifest << p.seed << ' ' << p.hr_target.dim(1) << ' ' << p.hr_target.dim(2) << ' '
             << style_name(p.style) << '\n';
  }
  save_tensors(dir / "pairs.sgt", records);
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.txt").string());
  out << manifest.str();
}

std::vector<ContrastPair> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.txt") || !std::filesystem::exists(dir / "pairs.sgt")) {
    throw IoError("dataset not found at " + dir.string());
  }
  std::ifstream man(dir / "manifest.txt");
  std::vector<ContrastPair> pairs;
  std::string line;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ContrastPair p;
    std::size_t h = 0, w = 0;
    std::string style;
    if (!(ls >> p.seed >> h >> w >> style)) throw FormatError("manifest: malformed line '" + line + "'");
    p.style = parse_style(style);
    p.hr_target = Tensor(Shape{1, h, w});
    pairs.push_back(p);
  }
  auto records = load_tensors(dir / "pairs.sgt");
  if (records.size() != 2 * pairs.size()) {
    throw FormatError("dataset: manifest lists " + std::to_string(pairs.size()) + " pairs but " +
                      std::to_string(records.size()) + " records are stored");
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Shape expected = pairs[i].hr_target.shape();
    if (records[2 * i].shape() != expected || records[2 * i + 1].shape() != expected) {
      throw FormatError("dataset: record shapes disagree with manifest for pair " + std::to_string(i));
    }
    pairs[i].hr_target = records[2 * i];
    pairs[i].ref = records[2 * i + 1];
  }
  return pairs;
}

}  // namespace sgsr
