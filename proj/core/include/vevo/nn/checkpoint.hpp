#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "vevo/nn/layers.hpp"

namespace vevo::nn {

// Checkpoint container. A text header followed by binary tensor payloads:
//
//   VEVO-CHECKPOINT 1\n
//   module <name>\n
//   hparam <key>=<value>\n        (zero or more)
//   tensor <name> <rank> <d0> ... <dn-1>\n<little-endian f32 payload>\n
//   end\n
//
// Keys and tensor names contain no whitespace; values run to end of line.

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string module;
  std::map<std::string, std::string> hparams;
  std::vector<TensorRecord> tensors;

  [[nodiscard]] const std::string& hparam(const std::string& key) const;
  [[nodiscard]] double hparam_double(const std::string& key) const;
  [[nodiscard]] long long hparam_int(const std::string& key) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint capture(std::string module, std::map<std::string, std::string> hparams,
                   const ParameterList<float>& params);

/// Copies tensors into `params`, requiring an exact name and shape match.
void restore(const Checkpoint& ckpt, const ParameterList<float>& params);

}  // namespace vevo::nn
