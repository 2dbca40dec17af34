#include "vevo/nn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "common/binary_io.hpp"
#include "vevo/common/error.hpp"

namespace vevo::nn {
namespace {

constexpr const char* kMagicLine = "VEVO-CHECKPOINT 1";

std::string read_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: unexpected end of file");
  return line;
}

}  // namespace

const std::string& Checkpoint::hparam(const std::string& key) const {
  const auto it = hparams.find(key);
  if (it == hparams.end()) throw FormatError("checkpoint: missing hyperparameter '" + key + "'");
  return it->second;
}

double Checkpoint::hparam_double(const std::string& key) const { return std::stod(hparam(key)); }

long long Checkpoint::hparam_int(const std::string& key) const { return std::stoll(hparam(key)); }

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kMagicLine << '\n' << "module " << ckpt.module << '\n';
  for (const auto& [k, v] : ckpt.hparams) out << "hparam " << k << '=' << v << '\n';
  for (const auto& t : ckpt.tensors) {
    out << "tensor " << t.name << ' ' << t.shape.size();
    for (auto d : t.shape) out << ' ' << d;
    out << '\n';
    for (float v : t.values) io::write_f32(out, v);
    out << '\n';
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  if (read_line(in) != kMagicLine) throw FormatError("checkpoint: bad magic line");
  Checkpoint ckpt;
  {
    const auto line = read_line(in);
    if (line.rfind("module ", 0) != 0) throw FormatError("checkpoint: expected module line");
    ckpt.module = line.substr(7);
  }
  for (;;) {
    const auto line = read_line(in);
    if (line == "end") break;
    if (line.rfind("hparam ", 0) == 0) {
      const auto body = line.substr(7);
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw FormatError("checkpoint: malformed hparam line");
      ckpt.hparams[body.substr(0, eq)] = body.substr(eq + 1);
    } else if (line.rfind("tensor ", 0) == 0) {
      std::istringstream ss(line.substr(7));
      TensorRecord rec;
      std::size_t rank = 0;
      if (!(ss >> rec.name >> rank)) throw FormatError("checkpoint: malformed tensor line");
      rec.shape.resize(rank);
      for (auto& d : rec.shape) {
        if (!(ss >> d)) throw FormatError("checkpoint: malformed tensor shape");
      }
      rec.values.resize(numel_of(rec.shape));
      for (auto& v : rec.values) v = io::read_f32(in);
      if (in.get() != '\n') throw FormatError("checkpoint: missing payload terminator");
      ckpt.tensors.push_back(std::move(rec));
    } else {
      throw FormatError("checkpoint: unexpected line '" + line + "'");
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path.string());
  write_checkpoint(out, ckpt);
  if (!out) throw IoError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

Checkpoint capture(std::string module, std::map<std::string, std::string> hparams,
                   const ParameterList<float>& params) {
  Checkpoint ckpt;
  ckpt.module = std::move(module);
  ckpt.hparams = std::move(hparams);
  for (const auto& p : params) {
    ckpt.tensors.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, const ParameterList<float>& params) {
  if (ckpt.tensors.size() != params.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                      std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& rec = ckpt.tensors[i];
    auto t = params[i].tensor;
    if (rec.name != params[i].name || rec.shape != t.shape()) {
      throw FormatError("checkpoint: tensor '" + rec.name + "' does not match '" + params[i].name + "'");
    }
    std::copy(rec.values.begin(), rec.values.end(), t.mutable_data().begin());
  }
}

}  // namespace vevo::nn
