// sgsr: dataset generation, training, evaluation and attention cost sweeps.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sgsr/backbone.hpp"
#include "sgsr/config.hpp"
#include "sgsr/data.hpp"
#include "sgsr/error.hpp"
#include "sgsr/eval.hpp"

namespace fs = std::filesystem;
using namespace sgsr;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kValidation = 2, kIo = 3, kNumeric = 4 };

RunConfig read_config(const std::string& path) {
  return path.empty() ? parse_run_config("") : load_run_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int cmd_datagen(const std::string& config_path, const fs::path& out, bool force) {
  RunConfig cfg = read_config(config_path);
  if (fs::exists(out / "pairs.sgt") || fs::exists(out / "manifest.txt")) {
    if (!force) throw IoError("dataset already exists at " + out.string() + " (use --force to overwrite)");
  }
  std::vector<ContrastPair> pairs;
  for (std::size_t i = 0; i < cfg.data.count; ++i) {
    pairs.push_back(make_phantom_pair(cfg.data.seed + i, cfg.data.height, cfg.data.width, cfg.data.style));
  }
  save_dataset(out, pairs);
  write_text(out / "config.txt", format_run_config(cfg));
  std::cout << "wrote " << pairs.size() << " pairs to " << out.string() << "\n";
  return kOk;
}

BackboneConfig resolve_model(const RunConfig& cfg, const std::vector<ContrastPair>& pairs) {
  BackboneConfig m = cfg.model;
  const std::size_t h = pairs.front().hr_target.dim(1), w = pairs.front().hr_target.dim(2);
  if ((m.height && m.height != h) || (m.width && m.width != w)) {
    throw ConfigError("model extents " + std::to_string(m.height) + "x" + std::to_string(m.width) +
                      " do not match dataset " + std::to_string(h) + "x" + std::to_string(w));
  }
  m.height = h;
  m.width = w;
  m.validate();
  return m;
}

std::string mode_name(const BackboneConfig& m) {
  if (!m.use_ref) return "no-ref";
  if (m.use_scqa && m.use_fcqa) return "full";
  if (m.use_scqa) return "scqa-only";
  if (m.use_fcqa) return "fcqa-only";
  return "no-attention";
}

int cmd_train(const std::string& config_path, const fs::path& data, const fs::path& out,
              bool no_ref, bool no_scqa, bool no_fcqa, bool resume) {
  RunConfig cfg = read_config(config_path);
  if (no_ref) cfg.model.use_ref = false;
  if (no_scqa) cfg.model.use_scqa = false;
  if (no_fcqa) cfg.model.use_fcqa = false;
  const auto pairs = load_dataset(data);
  if (pairs.empty()) throw ConfigError("dataset " + data.string() + " is empty");
  cfg.model = resolve_model(cfg, pairs);
  const std::size_t val = cfg.train.val_count;
  if (val >= pairs.size()) {
    throw ConfigError("train.val_count " + std::to_string(val) + " leaves no training pairs");
  }
  const std::vector<ContrastPair> train_pairs(pairs.begin(), pairs.end() - long(val));
  const std::vector<ContrastPair> val_pairs(pairs.end() - long(val), pairs.end());

  ensure_dir(out);
  write_text(out / "config.txt", format_run_config(cfg));
  Model model(cfg.model);
  TrainOptions opts;
  opts.out_dir = out;
  opts.resume = resume;
  const BackboneConfig& m = cfg.model;
  opts.log_header = "mode=" + mode_name(m) + " use_ref=" + (m.use_ref ? "true" : "false") +
                    " use_scqa=" + (m.use_scqa ? "true" : "false") +
                    " use_fcqa=" + (m.use_fcqa ? "true" : "false");
  const auto logs = train(model, make_samples(train_pairs, m.scale), make_samples(val_pairs, m.scale),
                          cfg.train.train, opts);
  for (const auto& e : logs) {
    std::cout << "epoch " << e.epoch << " train_l1 " << e.train_l1 << " val_psnr " << e.val_psnr
              << " val_ssim " << e.val_ssim << " lr " << e.lr << "\n";
  }
  std::cout << "checkpoint in " << out.string() << "\n";
  return kOk;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data, const fs::path& out,
             const std::string& config_path, bool self_check, bool baseline) {
  const fs::path model_cfg = checkpoint / "config.txt";
  RunConfig cfg = load_run_config(model_cfg);
  if (!config_path.empty()) cfg.eval = load_run_config(config_path).eval;
  const auto pairs = load_dataset(data);
  if (pairs.empty()) throw ConfigError("dataset " + data.string() + " is empty");
  cfg.model = resolve_model(cfg, pairs);

  std::optional<Model> model;
  if (!self_check && !baseline) {
    model.emplace(cfg.model);
    load_parameters(*model, checkpoint);
  }
  ensure_dir(out);
  write_text(out / "config.txt", format_run_config(cfg));

  const auto& metrics = cfg.eval.metrics;
  std::ostringstream csv;
  csv << "image,seed";
  for (const auto& m : metrics) csv << ',' << m;
  csv << '\n';
  std::vector<double> sums(metrics.size(), 0.0);
  NoGradGuard guard;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ContrastPair& p = pairs[i];
    Tensor pred;
    if (self_check) {
      pred = p.hr_target;
    } else if (baseline) {
      pred = make_lr_up(p.hr_target, cfg.model.scale);
    } else {
      pred = model->forward(p);
    }
    csv << i << ',' << p.seed;
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      const double v = metrics[k] == "psnr" ? psnr(pred, p.hr_target) : ssim(pred, p.hr_target);
      sums[k] += v;
      csv << ',' << fmt(v);
    }
    csv << '\n';
  }
  csv << "mean,";
  for (std::size_t k = 0; k < metrics.size(); ++k) csv << ',' << fmt(sums[k] / double(pairs.size()));
  csv << '\n';
  write_text(out / "metrics.csv", csv.str());
  std::cout << csv.str();
  return kOk;
}

int cmd_bench(const std::string& config_path, const fs::path& out) {
  RunConfig cfg = read_config(config_path);
  ensure_dir(out);
  write_text(out / "config.txt", format_run_config(cfg));
  std::ostringstream csv;
  csv << "input," << cost_csv_header() << ",cross_over_variant_flops,cross_over_variant_bytes\n";
  for (std::size_t input : cfg.bench.inputs) {
    const ShapeConfig shape = cfg.bench.shape_for(input);
    const CostReport cross = attention_cost(AttentionVariant::Cross, shape);
    for (auto v : {AttentionVariant::Cross, AttentionVariant::Scqa, AttentionVariant::Fcqa}) {
      const CostReport r = attention_cost(v, shape);
      csv << input << ',' << cost_csv_row(r) << ',' << fmt(cross.flops / r.flops) << ','
          << fmt(cross.peak_activation_bytes / r.peak_activation_bytes) << '\n';
    }
  }
  write_text(out / "costs.csv", csv.str());
  std::cout << csv.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-contrast MRI super-resolution with co-query attention"};
  app.require_subcommand(1);

  std::string config, data, out, checkpoint;
  bool force = false, no_ref = false, no_scqa = false, no_fcqa = false, resume = false;
  bool self_check = false, baseline = false;

  auto* datagen = app.add_subcommand("datagen", "Generate a seeded phantom dataset");
  datagen->add_option("-c,--config", config, "Run config file")->check(CLI::ExistingFile);
  datagen->add_option("-o,--out", out, "Dataset directory")->required();
  datagen->add_flag("--force", force, "Overwrite an existing dataset");

  auto* trainc = app.add_subcommand("train", "Train a model on a dataset");
  trainc->add_option("-c,--config", config, "Run config file")->check(CLI::ExistingFile);
  trainc->add_option("-d,--data", data, "Dataset directory")->required();
  trainc->add_option("-o,--out", out, "Run directory (checkpoint, log.csv, config.txt)")->required();
  trainc->add_flag("--no-ref", no_ref, "Use the upsampled LR image as the reference");
  trainc->add_flag("--no-scqa", no_scqa, "Disable spatial co-query attention");
  trainc->add_flag("--no-fcqa", no_fcqa, "Disable frequency co-query attention");
  trainc->add_flag("--resume", resume, "Continue from the checkpoint in --out");

  auto* evalc = app.add_subcommand("eval", "Per-image PSNR/SSIM of a checkpoint on a dataset");
  evalc->add_option("-k,--checkpoint", checkpoint, "Run directory written by train")->required();
  evalc->add_option("-d,--data", data, "Dataset directory")->required();
  evalc->add_option("-o,--out", out, "Output directory (metrics.csv, config.txt)")->required();
  evalc->add_option("-c,--config", config, "Config whose [eval] section overrides the run's")
      ->check(CLI::ExistingFile);
  auto* sc = evalc->add_flag("--self-check", self_check, "Score the targets against themselves");
  evalc->add_flag("--baseline", baseline, "Score the upsampled LR input instead of the model")
      ->excludes(sc);

  auto* bench = app.add_subcommand("bench", "Attention FLOP/memory sweep");
  bench->add_option("-c,--config", config, "Run config file")->check(CLI::ExistingFile);
  bench->add_option("-o,--out", out, "Output directory (costs.csv, config.txt)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*datagen) return cmd_datagen(config, out, force);
    if (*trainc) return cmd_train(config, data, out, no_ref, no_scqa, no_fcqa, resume);
    if (*evalc) return cmd_eval(checkpoint, data, out, config, self_check, baseline);
    if (*bench) return cmd_bench(config, out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
