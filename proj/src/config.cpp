#include "sts/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sts {

namespace {

long long to_ll(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  }
}

}  // namespace

std::map<std::string, std::string> RunConfig::fields() const {
  auto out = train.fields();
  out["data_dir"] = data_dir;
  out["run_dir"] = run_dir;
  return out;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "steps") cfg.train.steps = to_ll(key, value);
    else if (key == "batch_size") cfg.train.batch_size = static_cast<int>(to_ll(key, value));
    else if (key == "lr") cfg.train.lr = to_double(key, value);
    else if (key == "lr_decay") cfg.train.lr_decay = to_double(key, value);
    else if (key == "decay_interval") cfg.train.decay_interval = static_cast<int>(to_ll(key, value));
    else if (key == "lambda") cfg.train.lambda = to_double(key, value);
    else if (key == "k0") cfg.train.k0 = to_double(key, value);
    else if (key == "gamma") cfg.train.gamma = to_double(key, value);
    else if (key == "beta") cfg.train.beta = to_double(key, value);
    else if (key == "segment_frames") cfg.train.segment_frames = static_cast<int>(to_ll(key, value));
    else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(to_ll(key, value));
    else if (key == "checkpoint_interval") cfg.train.checkpoint_interval = to_ll(key, value);
    else if (key == "unpaired_every") cfg.train.unpaired_every = static_cast<int>(to_ll(key, value));
    else if (key == "data_dir") cfg.data_dir = value;
    else if (key == "run_dir") cfg.run_dir = value;
    else throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  cfg.train.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

std::string canonical_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : cfg.fields()) out += key + "=" + value + "\n";
  return out;
}

std::string config_hash_hex(const RunConfig& cfg) {
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
  return hex;
}

void write_config_file(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << canonical_config(cfg);
}

}  // namespace sts
