#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polytraj/anchoring.hpp"
#include "polytraj/dataset.hpp"
#include "polytraj/model.hpp"
#include "polytraj/studies.hpp"
#include "polytraj/synthetic.hpp"
#include "polytraj/train.hpp"

namespace polytraj::cli {

struct KeySpec {
  const char* name;
  const char* default_value;
  const char* description;
};

/// Every recognised configuration key, sorted by name.
std::span<const KeySpec> config_keys();

/// Flat key -> value configuration. Starts from the defaults; unknown keys are
/// rejected with ConfigError.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value);
  /// Applies "key=value".
  void set_assignment(const std::string& assignment);
  /// Reads "key = value" lines; '#' starts a comment, blank lines are ignored.
  void merge_file(std::istream& is, const std::string& origin = "<config>");
  void merge_file(const std::filesystem::path& path);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  long get_long(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// FNV-1a over sorted key=value lines, excluding the two directory keys; 16 hex digits.
  std::string fingerprint() const;
  /// The configuration as "key = value" lines.
  void write(std::ostream& os) const;

 private:
  std::map<std::string, std::string> values_;
};

model::ModelConfig model_config(const RunConfig& c);
model::TrainOptions train_options(const RunConfig& c);
ScheduleSource schedule_source(const RunConfig& c);
data::SyntheticParams synthetic_params(const RunConfig& c);
data::StraightCriterion straight_criterion(const RunConfig& c);
eval::StudySettings study_settings(const RunConfig& c);
/// "3:1" -> {3, 1}.
std::pair<int, int> split_ratio(const RunConfig& c);

/// Seeds of the independent random streams, all derived from run.seed.
/// train.seed, when not "auto", replaces the training stream.
enum class Stream : std::uint64_t { data = 1, init = 2, train = 3, filter = 4, study = 5 };
std::uint64_t stream_seed(const RunConfig& c, Stream s);

}  // namespace polytraj::cli
