#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "polytraj/config.hpp"
#include "polytraj/dataset.hpp"

namespace polytraj::cli {

/// Scenes of a generated dataset, split in time.
struct Dataset {
  std::vector<data::Scene> train;
  std::vector<data::Scene> test;
};

/// Writes tracks.csv (dataset cache) and manifest.json into `dir`. When
/// `source` is given, the cache holds every source track a scene refers to;
/// otherwise it is rebuilt from the scenes, which then must have no gaps.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds, const RunConfig& config,
                   std::size_t straight_dropped, std::span<const data::Track> source = {});
Dataset read_dataset(const std::filesystem::path& dir);

/// Samples at t0 = data.history for every scene.
std::vector<Sample> make_samples(std::span<const data::Scene> scenes, const RunConfig& config);

void cmd_generate(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint, std::ostream& log);
/// anchoring | anchor_count | extrapolation | table1
void cmd_study(const std::string& name, const RunConfig& config, std::ostream& log);

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Parses arguments, runs one subcommand and maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace polytraj::cli
