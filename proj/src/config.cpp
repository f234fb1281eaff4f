#include "sgsr/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sgsr/error.hpp"

namespace sgsr {

void DataConfig::validate() const {
  if (count == 0) throw ConfigError("data.count must be at least 1");
  validate_extents(height, width, scale);
}

void EvalConfig::validate() const {
  if (metrics.empty()) throw ConfigError("eval.metrics must not be empty");
  for (const auto& m : metrics) {
    if (m != "psnr" && m != "ssim") throw ConfigError("eval.metrics: unknown metric '" + m + "'");
  }
}

ShapeConfig BenchConfig::shape_for(std::size_t input) const {
  ShapeConfig s;
  s.height = s.width = input / 2;
  s.channels = channels;
  s.pooled = pooled;
  s.window = window;
  s.factor = factor;
  s.reduced = reduced;
  s.bytes_per_scalar = bytes_per_scalar;
  return s;
}

void BenchConfig::validate() const {
  if (inputs.empty()) throw ConfigError("bench.inputs: sweep list is empty");
  for (std::size_t in : inputs) {
    if (in < 2 || in % 2) throw ConfigError("bench.inputs: extent " + std::to_string(in) + " must be even");
    shape_for(in).validate();
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : v) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  double out = 0.0;
  is >> out;
  if (!is || !is.eof()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

std::map<std::string, Setter> setters(RunConfig& c) {
  auto sz = [](std::size_t& f) { return [&f](const std::string& k, const std::string& v) { f = to_uint(k, v); }; };
  auto u64 = [](std::uint64_t& f) { return [&f](const std::string& k, const std::string& v) { f = to_uint(k, v); }; };
  auto dbl = [](double& f) { return [&f](const std::string& k, const std::string& v) { f = to_double(k, v); }; };
  auto bln = [](bool& f) { return [&f](const std::string& k, const std::string& v) { f = to_bool(k, v); }; };
  return {
      {"data.count", sz(c.data.count)},
      {"data.height", sz(c.data.height)},
      {"data.width", sz(c.data.width)},
      {"data.style", [&c](const std::string&, const std::string& v) { c.data.style = parse_style(v); }},
      {"data.seed", u64(c.data.seed)},
      {"data.scale", sz(c.data.scale)},
      {"model.height", sz(c.model.height)},
      {"model.width", sz(c.model.width)},
      {"model.base_channels", sz(c.model.base_channels)},
      {"model.levels", sz(c.model.levels)},
      {"model.groups", sz(c.model.groups)},
      {"model.scale", sz(c.model.scale)},
      {"model.use_scqa", bln(c.model.use_scqa)},
      {"model.use_fcqa", bln(c.model.use_fcqa)},
      {"model.use_ref", bln(c.model.use_ref)},
      {"model.seed", u64(c.model.seed)},
      {"model.window", sz(c.model.window)},
      {"model.factor", sz(c.model.factor)},
      {"model.reduced", sz(c.model.reduced)},
      {"model.pooled", sz(c.model.pooled)},
      {"train.lr", dbl(c.train.train.lr)},
      {"train.decay_epoch", sz(c.train.train.decay_epoch)},
      {"train.decay", dbl(c.train.train.decay)},
      {"train.batch", sz(c.train.train.batch)},
      {"train.epochs", sz(c.train.train.epochs)},
      {"train.seed", u64(c.train.train.seed)},
      {"train.val_count", sz(c.train.val_count)},
      {"eval.metrics", [&c](const std::string&, const std::string& v) { c.eval.metrics = split_list(v); }},
      {"bench.inputs",
       [&c](const std::string& k, const std::string& v) {
         c.bench.inputs.clear();
         for (const auto& item : split_list(v)) c.bench.inputs.push_back(to_uint(k, item));
       }},
      {"bench.channels", sz(c.bench.channels)},
      {"bench.pooled", sz(c.bench.pooled)},
      {"bench.window", sz(c.bench.window)},
      {"bench.factor", sz(c.bench.factor)},
      {"bench.reduced", sz(c.bench.reduced)},
      {"bench.bytes_per_scalar", sz(c.bench.bytes_per_scalar)},
  };
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  const auto table = setters(cfg);
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"data", "model", "train", "eval", "bench"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  cfg.data.validate();
  cfg.train.train.validate();
  cfg.eval.validate();
  cfg.bench.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "[data]\n"
     << "count = " << c.data.count << "\nheight = " << c.data.height << "\nwidth = " << c.data.width
     << "\nstyle = " << style_name(c.data.style) << "\nseed = " << c.data.seed
     << "\nscale = " << c.data.scale << "\n\n";
  const BackboneConfig& m = c.model;
  os << "[model]\n"
     << "height = " << m.height << "\nwidth = " << m.width << "\nbase_channels = " << m.base_channels
     << "\nlevels = " << m.levels << "\ngroups = " << m.groups << "\nscale = " << m.scale
     << "\nuse_scqa = " << b(m.use_scqa) << "\nuse_fcqa = " << b(m.use_fcqa)
     << "\nuse_ref = " << b(m.use_ref) << "\nseed = " << m.seed << "\nwindow = " << m.window
     << "\nfactor = " << m.factor << "\nreduced = " << m.reduced << "\npooled = " << m.pooled
     << "\n\n";
  const TrainConfig& t = c.train.train;
  os << "[train]\n"
     << "lr = " << t.lr << "\ndecay_epoch = " << t.decay_epoch << "\ndecay = " << t.decay
     << "\nbatch = " << t.batch << "\nepochs = " << t.epochs << "\nseed = " << t.seed
     << "\nval_count = " << c.train.val_count << "\n\n";
  os << "[eval]\nmetrics = ";
  for (std::size_t i = 0; i < c.eval.metrics.size(); ++i) os << (i ? ", " : "") << c.eval.metrics[i];
  os << "\n\n[bench]\ninputs = ";
  for (std::size_t i = 0; i < c.bench.inputs.size(); ++i) os << (i ? ", " : "") << c.bench.inputs[i];
  os << "\nchannels = " << c.bench.channels << "\npooled = " << c.bench.pooled
     << "\nwindow = " << c.bench.window << "\nfactor = " << c.bench.factor
     << "\nreduced = " << c.bench.reduced << "\nbytes_per_scalar = " << c.bench.bytes_per_scalar
     << "\n";
  return os.str();
}

}  // namespace sgsr
