#ifndef STS_CONFIG_HPP
#define STS_CONFIG_HPP

#include <string>

#include "sts/train.hpp"

namespace sts {

/// Run configuration: the training keys plus data locations, loaded from a
/// flat key=value file ('#' comments allowed). Unknown keys are errors.
struct RunConfig {
  train::TrainConfig train;
  std::string data_dir;
  std::string run_dir;

  std::map<std::string, std::string> fields() const;
};

RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig parse_config_file(const std::string& path);

/// Sorted key=value lines; the basis for the config hash.
std::string canonical_config(const RunConfig& cfg);
std::string config_hash_hex(const RunConfig& cfg);

void write_config_file(const std::string& path, const RunConfig& cfg);

}  // namespace sts

#endif  // STS_CONFIG_HPP
