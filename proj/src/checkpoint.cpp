#include "polytraj/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "polytraj/errors.hpp"

namespace polytraj::ad {

namespace {
constexpr const char* kMagic = "polytraj-checkpoint";
constexpr int kVersion = 1;

double parse_double(const std::string& token) {
  double v = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc() || ptr != end) throw DataError("checkpoint: bad number '" + token + "'");
  return v;
}
}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os << kMagic << ' ' << kVersion << '\n';
  for (const auto& [key, value] : ckpt.header) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint header entry '" + key + "' contains whitespace");
    }
    os << "header " << key << ' ' << value << '\n';
  }
  for (const auto& [name, array] : ckpt.params) {
    os << "param " << name << ' ' << array.rank();
    for (auto e : array.shape()) os << ' ' << e;
    os << '\n';
    for (std::size_t i = 0; i < array.size(); ++i) os << (i ? " " : "") << format_double(array[i]);
    os << '\n';
  }
  os << "end\n";
}

Checkpoint read_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kMagic || version != kVersion) {
    throw DataError("not a polytraj checkpoint (bad magic/version)");
  }
  Checkpoint ckpt;
  std::string tag;
  while (is >> tag) {
    if (tag == "end") return ckpt;
    if (tag == "header") {
      std::string key, value;
      is >> key;
      std::getline(is >> std::ws, value);
      ckpt.header[key] = value;
    } else if (tag == "param") {
      std::string name;
      std::size_t rank = 0;
      if (!(is >> name >> rank)) throw DataError("checkpoint: truncated param record");
      Shape shape(rank);
      for (auto& e : shape) {
        if (!(is >> e)) throw DataError("checkpoint: truncated shape for '" + name + "'");
      }
      Array array(shape);
      std::string token;
      for (std::size_t i = 0; i < array.size(); ++i) {
        if (!(is >> token)) throw DataError("checkpoint: truncated values for '" + name + "'");
        array[i] = parse_double(token);
      }
      ckpt.params.emplace_back(name, std::move(array));
    } else {
      throw DataError("checkpoint: unexpected record '" + tag + "'");
    }
  }
  throw DataError("checkpoint: missing end marker");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

Checkpoint make_checkpoint(const ParameterSet& params, std::map<std::string, std::string> header) {
  Checkpoint ckpt;
  ckpt.header = std::move(header);
  for (const auto& p : params.items()) ckpt.params.emplace_back(p.name, p.node.value());
  return ckpt;
}

void restore_parameters(ParameterSet& params, const Checkpoint& ckpt) {
  std::map<std::string, const Array*> by_name;
  for (const auto& [name, array] : ckpt.params) by_name[name] = &array;
  for (auto& p : params.items()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DataError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second->shape() != p.node.shape()) {
      throw ShapeError("checkpoint parameter '" + p.name + "' has shape " + to_string(it->second->shape()) +
                       ", model expects " + to_string(p.node.shape()));
    }
    p.node.mutable_value() = *it->second;
  }
  if (by_name.size() != params.size()) throw DataError("checkpoint has parameters the model does not define");
}

}  // namespace polytraj::ad
