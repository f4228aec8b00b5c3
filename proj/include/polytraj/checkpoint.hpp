#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "polytraj/optim.hpp"

namespace polytraj::ad {

/// Text checkpoint: a header of key/value strings followed by named arrays.
/// Values are written in shortest round-trip form, so save/load is exact.
///
///   polytraj-checkpoint 1
///   header <key> <value>
///   param <name> <rank> <extent>... 
///   <value> <value> ...
///   end
struct Checkpoint {
  std::map<std::string, std::string> header;
  std::vector<std::pair<std::string, Array>> params;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const ParameterSet& params, std::map<std::string, std::string> header = {});
/// Copies values into `params`; every parameter must be present with a matching shape.
void restore_parameters(ParameterSet& params, const Checkpoint& ckpt);

std::string format_double(double v);

}  // namespace polytraj::ad
