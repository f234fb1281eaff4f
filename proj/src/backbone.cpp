#include "sgsr/backbone.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sgsr/error.hpp"
#include "sgsr/eval.hpp"
#include "sgsr/ops.hpp"
#include "sgsr/serialize.hpp"

namespace sgsr {

void BackboneConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (base_channels == 0) fail("base_channels must be positive");
  if (levels == 0 || levels > 8) fail("levels must be in 1..8");
  if (groups == 0) fail("groups must be at least 1");
  if (scale != 2 && scale != 4) fail("scale must be 2 or 4, got " + std::to_string(scale));
  const std::size_t pyramid = std::size_t(1) << (levels - 1);
  const std::size_t unit = std::lcm(2 * scale, pyramid);
  if (height == 0 || width == 0 || height % unit || width % unit) {
    fail("extents " + std::to_string(height) + "x" + std::to_string(width) +
         " must be positive multiples of " + std::to_string(unit));
  }
  for (std::size_t l = 0; l < levels; ++l) {
    const std::size_t h = level_height(l), w = level_width(l);
    if (use_scqa) {
      const std::size_t ph = pooled_extent(pooled, l, h), pw = pooled_extent(pooled, l, w);
      if (pooled == 0 || h % ph || w % pw) {
        fail("pooled size " + std::to_string(ph) + "x" + std::to_string(pw) + " does not divide level " +
             std::to_string(l) + " extent " + std::to_string(h) + "x" + std::to_string(w));
      }
    }
    if (fcqa_at(l)) {
      freq_layout(level_channels(l), h, w, window);
      const FreqSplitIndex idx = freq_split_index(window, factor);
      if (reduced > std::min(idx.structure.size(), idx.appearance.size())) {
        fail("reduced " + std::to_string(reduced) + " exceeds min(m_S, m_A)");
      }
    }
  }
}

std::vector<std::size_t> BackboneConfig::groups_per_level() const {
  std::vector<std::size_t> g(levels, groups / levels);
  for (std::size_t l = 0; l < groups % levels; ++l) ++g[l];
  return g;
}

bool BackboneConfig::fcqa_at(std::size_t level) const {
  return use_fcqa && level_height(level) >= window && level_width(level) >= window;
}

Tensor make_lr_up(const Tensor& hr_target, std::size_t scale) {
  const Tensor lr = kspace_degrade(hr_target, DegradationSpec{scale});
  return resample(lr, hr_target.dim(1), hr_target.dim(2), ResampleMode::BilinearUp);
}

Model::Model(const BackboneConfig& cfg) : cfg_(cfg), store_(cfg.seed) {
  cfg_.validate();
  const std::size_t L = cfg_.levels;
  const auto groups = cfg_.groups_per_level();
  const char* tags[2] = {"enc_lr", "enc_ref"};
  for (std::size_t c = 0; c < 2; ++c) {
    Encoder& e = enc_[c];
    const std::string p = tags[c];
    e.head = Conv3x3::make(store_, p + ".head", 1, cfg_.base_channels);
    e.groups.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t d = cfg_.level_channels(l);
      for (std::size_t g = 0; g < groups[l]; ++g) {
        Group grp;
        for (std::size_t k = 0; k < 4; ++k) {
          grp.convs.push_back(Conv3x3::make(store_, p + ".l" + std::to_string(l) + ".g" +
                                                        std::to_string(g) + ".conv" + std::to_string(k),
                                            d, d));
        }
        e.groups[l].push_back(std::move(grp));
      }
      if (l + 1 < L) e.down.push_back(Conv3x3::make(store_, p + ".down" + std::to_string(l), d, 2 * d));
    }
  }
  scqa_.resize(L);
  fcqa_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t d = cfg_.level_channels(l), h = cfg_.level_height(l), w = cfg_.level_width(l);
    const std::string p = ".l" + std::to_string(l);
    if (cfg_.use_scqa) {
      scqa_[l] = ScqaParams::make(store_, "scqa" + p, d, pooled_extent(cfg_.pooled, l, h),
                                  pooled_extent(cfg_.pooled, l, w));
    }
    if (cfg_.fcqa_at(l)) {
      fcqa_[l] = FcqaParams::make(store_, "fcqa" + p, d, h, w,
                                  FcqaConfig{cfg_.window, cfg_.factor, cfg_.reduced});
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t d = cfg_.level_channels(l);
    const std::string p = "dec.l" + std::to_string(l);
    if (l + 1 < L) dec_.up.push_back(Conv3x3::make(store_, p + ".up", cfg_.level_channels(l + 1), 4 * d));
    dec_.gamma.push_back(Linear::make(store_, p + ".gamma", d, d));
    dec_.beta.push_back(Linear::make(store_, p + ".beta", d, d));
    dec_.res.push_back(Conv3x3::make(store_, p + ".res", d, d));
  }
  dec_.tail = Conv3x3::make(store_, "dec.tail", cfg_.base_channels, 1, /*zero_init=*/true);
}

Tensor Model::run_encoder(const Encoder& enc, const Tensor& image, std::vector<Tensor>& levels) const {
  Tensor x = enc.head(image);
  for (std::size_t l = 0; l < cfg_.levels; ++l) {
    for (const Group& g : enc.groups[l]) {
      Tensor y = x;
      for (const Conv3x3& conv : g.convs) y = leaky_relu(conv(y));
      x = add(x, y);
    }
    levels.push_back(x);
    if (l + 1 < cfg_.levels) {
      x = resample(x, cfg_.level_height(l + 1), cfg_.level_width(l + 1), ResampleMode::AreaDown);
      x = leaky_relu(enc.down[l](x));
    }
  }
  return x;
}

Pyramid Model::encode(const Tensor& lr_up, const Tensor& ref) const {
  const Shape expect{1, cfg_.height, cfg_.width};
  if (lr_up.shape() != expect || ref.shape() != expect) {
    throw ShapeError("encode: expected inputs " + shape_str(expect) + ", got " +
                     shape_str(lr_up.shape()) + " and " + shape_str(ref.shape()));
  }
  Pyramid p;
  run_encoder(enc_[kLr], lr_up, p.lr);
  run_encoder(enc_[kRef], ref, p.ref);
  return p;
}

std::vector<Tensor> Model::refine(const Pyramid& pyramid) const {
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < cfg_.levels; ++l) {
    std::vector<Tensor> terms;
    if (scqa_[l]) terms.push_back(scqa_forward(pyramid.lr[l], pyramid.ref[l], *scqa_[l])[kLr]);
    if (fcqa_[l]) terms.push_back(fcqa_forward(pyramid.lr[l], pyramid.ref[l], *fcqa_[l])[kLr]);
    out.push_back(terms.empty() ? pyramid.lr[l] : add_n(terms));
  }
  return out;
}

Tensor Model::decode(const Pyramid& pyramid, const std::vector<Tensor>& refined,
                     const Tensor& lr_up) const {
  const std::size_t L = cfg_.levels;
  if (pyramid.lr.size() != L || refined.size() != L) {
    throw ConfigError("decode: expected " + std::to_string(L) + " levels, got " +
                      std::to_string(pyramid.lr.size()) + " features and " +
                      std::to_string(refined.size()) + " refined maps");
  }
  Tensor state = pyramid.lr[L - 1];
  for (std::size_t i = L; i-- > 0;) {
    if (i + 1 < L) state = add(pixel_shuffle(dec_.up[i](state), 2), pyramid.lr[i]);
    if (refined[i].shape() != state.shape()) {
      throw ShapeError("decode: refined map " + shape_str(refined[i].shape()) + " at level " +
                       std::to_string(i) + " does not match " + shape_str(state.shape()));
    }
    const std::size_t d = state.dim(0);
    const Tensor summary = reshape(channel_mean(state), {1, d});
    state = add(state, channel_affine(refined[i], dec_.gamma[i](summary), dec_.beta[i](summary)));
    state = add(state, leaky_relu(dec_.res[i](state)));
  }
  return add(dec_.tail(state), lr_up);
}

Tensor Model::forward_images(const Tensor& lr_up, const Tensor& ref) const {
  const Tensor& guide = cfg_.use_ref ? ref : lr_up;
  const Pyramid p = encode(lr_up, guide);
  return decode(p, refine(p), lr_up);
}

Tensor Model::forward(const ContrastPair& pair) const {
  return forward_images(make_lr_up(pair.hr_target, cfg_.scale), pair.ref);
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train config: lr must be finite and >= 0");
  if (batch == 0) throw ConfigError("train config: batch must be at least 1");
  if (decay_epoch == 0) throw ConfigError("train config: decay_epoch is 1-based");
  if (!(decay > 0.0)) throw ConfigError("train config: decay must be positive");
}

double TrainConfig::lr_at(std::size_t epoch) const { return epoch >= decay_epoch ? lr * decay : lr; }

std::vector<Sample> make_samples(const std::vector<ContrastPair>& pairs, std::size_t scale) {
  std::vector<Sample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({make_lr_up(p.hr_target, scale), p.ref, p.hr_target});
  return out;
}

double train_step(const Model& model, Adam& adam, const std::vector<const Sample*>& batch,
                  double lr) {
  if (batch.empty()) throw ConfigError("train_step: empty batch");
  adam.zero_grad();
  std::vector<Tensor> losses;
  for (const Sample* s : batch) losses.push_back(l1_loss(model.forward_images(s->lr_up, s->ref), s->target));
  const Tensor loss = scale(add_n(losses), 1.0 / double(batch.size()));
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw NumericError("non-finite training loss " + std::to_string(value) + " at lr " +
                       std::to_string(lr));
  }
  loss.backward();
  double norm2 = 0.0;
  for (const auto& p : model.params().params()) {
    for (double g : p.tensor.grad()) norm2 += g * g;
  }
  if (!std::isfinite(norm2)) {
    throw NumericError("non-finite gradient norm at lr " + std::to_string(lr) + " (loss " +
                       std::to_string(value) + ")");
  }
  adam.step(lr);
  return value;
}

std::pair<double, double> evaluate_model(const Model& model, const std::vector<Sample>& samples) {
  if (samples.empty()) return {std::nan(""), std::nan("")};
  NoGradGuard guard;
  double p = 0.0, s = 0.0;
  for (const Sample& x : samples) {
    const Tensor sr = model.forward_images(x.lr_up, x.ref);
    p += psnr(sr, x.target);
    s += ssim(sr, x.target);
  }
  return {p / double(samples.size()), s / double(samples.size())};
}

Trainer::Trainer(Model& model, TrainConfig cfg)
    : model_(model), cfg_(cfg), adam_(model.params().tensors()) {
  cfg_.validate();
}

EpochLog Trainer::run_epoch(const std::vector<Sample>& train, const std::vector<Sample>& val) {
  if (train.empty()) throw ConfigError("train: empty training set");
  const std::size_t epoch = epoch_ + 1;
  const double lr = cfg_.lr_at(epoch);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg_.seed, epoch));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch) {
    std::vector<const Sample*> batch;
    for (std::size_t k = start; k < std::min(order.size(), start + cfg_.batch); ++k) {
      batch.push_back(&train[order[k]]);
    }
    total += train_step(model_, adam_, batch, lr);
    ++batches;
  }
  epoch_ = epoch;
  EpochLog log;
  log.epoch = epoch;
  log.train_l1 = total / double(batches);
  std::tie(log.val_psnr, log.val_ssim) = evaluate_model(model_, val);
  log.lr = lr;
  return log;
}

namespace {
constexpr const char* kCheckpointFile = "checkpoint.sgt";
constexpr const char* kManifestFile = "checkpoint.manifest";
}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& dir) const {
  std::vector<Tensor> records;
  std::vector<std::string> names;
  const auto& params = model_.params().params();
  for (const auto& p : params) {
    records.push_back(p.tensor.detach());
    names.push_back(p.name);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& s = params[i].tensor.shape();
    records.emplace_back(s, adam_.first_moments()[i]);
    names.push_back("adam.m." + params[i].name);
    records.emplace_back(s, adam_.second_moments()[i]);
    names.push_back("adam.v." + params[i].name);
  }
  records.emplace_back(Shape{2}, std::vector<double>{double(adam_.steps()), double(epoch_)});
  names.push_back("state.step_epoch");

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto tmp = dir / (std::string(kCheckpointFile) + ".tmp");
  const auto offsets = save_tensors(tmp, records);
  std::filesystem::rename(tmp, dir / kCheckpointFile, ec);
  if (ec) throw IoError("cannot finalize checkpoint in " + dir.string() + ": " + ec.message());

  std::ofstream man(dir / kManifestFile);
  if (!man) throw IoError("cannot write " + (dir / kManifestFile).string());
  for (std::size_t i = 0; i < records.size(); ++i) {
    man << names[i] << ' ' << shape_str(records[i].shape()) << ' ' << offsets[i] << '\n';
  }
}

namespace {
std::vector<Tensor> read_checkpoint(const std::filesystem::path& dir, std::size_t min_records) {
  const auto path = dir / kCheckpointFile;
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  auto records = load_tensors(path);
  if (records.size() < min_records) {
    throw FormatError("checkpoint " + path.string() + " has " + std::to_string(records.size()) +
                      " records, expected at least " + std::to_string(min_records));
  }
  return records;
}

void copy_into(Tensor& dst, const Tensor& src, std::size_t i) {
  if (dst.shape() != src.shape()) {
    throw FormatError("checkpoint record " + std::to_string(i) + " has shape " +
                      shape_str(src.shape()) + ", model expects " + shape_str(dst.shape()));
  }
  std::copy(src.data().begin(), src.data().end(), dst.data().begin());
}
}  // namespace

void Trainer::load_checkpoint(const std::filesystem::path& dir) {
  const auto& params = model_.params().params();
  const std::size_t n = params.size();
  auto records = read_checkpoint(dir, 3 * n + 1);
  if (records.size() != 3 * n + 1) throw FormatError("checkpoint record count does not match model");
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t = params[i].tensor;
    copy_into(t, records[i], i);
    const Tensor& m = records[n + 2 * i];
    const Tensor& v = records[n + 2 * i + 1];
    if (m.shape() != t.shape() || v.shape() != t.shape()) throw FormatError("checkpoint moment shape mismatch");
    adam_.first_moments()[i].assign(m.data().begin(), m.data().end());
    adam_.second_moments()[i].assign(v.data().begin(), v.data().end());
  }
  const auto state = records.back().data();
  if (state.size() != 2) throw FormatError("checkpoint state record malformed");
  adam_.set_steps(std::uint64_t(state[0]));
  epoch_ = std::size_t(state[1]);
}

void load_parameters(Model& model, const std::filesystem::path& dir) {
  const auto& params = model.params().params();
  auto records = read_checkpoint(dir, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    copy_into(t, records[i], i);
  }
}

std::vector<EpochLog> train(Model& model, const std::vector<Sample>& train_set,
                            const std::vector<Sample>& val_set, const TrainConfig& cfg,
                            const TrainOptions& options) {
  if (train_set.empty()) throw ConfigError("train: empty training set");
  Trainer trainer(model, cfg);
  std::vector<EpochLog> logs;
  const auto csv_path = options.out_dir ? *options.out_dir / "log.csv" : std::filesystem::path{};

  auto format_row = [](const EpochLog& e) {
    std::ostringstream os;
    os.precision(17);
    os << e.epoch << ',' << e.train_l1 << ',' << e.val_psnr << ',' << e.val_ssim << ',' << e.lr;
    return os.str();
  };

  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    if (options.resume) {
      trainer.load_checkpoint(*options.out_dir);
    } else {
      std::ofstream csv(csv_path);
      if (!csv) throw IoError("cannot write " + csv_path.string());
      if (!options.log_header.empty()) csv << "# " << options.log_header << '\n';
      csv << "epoch,train_l1,val_psnr,val_ssim,lr\n";
      trainer.save_checkpoint(*options.out_dir);
    }
  }

  while (trainer.epoch() < cfg.epochs) {
    const EpochLog log = trainer.run_epoch(train_set, val_set);
    logs.push_back(log);
    if (options.out_dir) {
      std::ofstream csv(csv_path, std::ios::app);
      if (!csv) throw IoError("cannot append to " + csv_path.string());
      csv << format_row(log) << '\n';
      trainer.save_checkpoint(*options.out_dir);
    }
  }
  return logs;
}

}  // namespace sgsr
