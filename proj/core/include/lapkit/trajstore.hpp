#pragma once

// Trajectory files (.lgtraj): JSON Lines with a header line, one line per
// step and a closing {"end": true, "steps": n} line. See docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapkit/envcore.hpp"

namespace lapkit {

inline constexpr int kTrajectoryFormatVersion = 1;

enum class TrajectorySource { kHuman, kScripted, kPlanner, kAgent };
std::string to_string(TrajectorySource source);
TrajectorySource trajectory_source_from_string(const std::string& name);

struct TrajectoryHeader {
  int format_version = kTrajectoryFormatVersion;
  EnvId env = EnvId::kReach;
  EnvConfig config;
  std::uint64_t seed = 0;
  TrajectorySource source = TrajectorySource::kScripted;
  std::string created;  // ISO 8601 UTC
  Observation initial_observation;

  bool operator==(const TrajectoryHeader&) const = default;
};

struct TrajectoryStep {
  std::size_t index = 0;
  std::vector<double> action;
  double reward = 0.0;
  Features features;
  bool terminated = false;
  bool truncated = false;
  nlohmann::json custom = nlohmann::json::object();
  Observation observation;

  bool operator==(const TrajectoryStep&) const = default;
};

struct TrajectoryRecord {
  TrajectoryHeader header;
  std::vector<TrajectoryStep> steps;

  bool operator==(const TrajectoryRecord&) const = default;
};

// Per-step custom value computed from the env after each step.
struct TrajectoryCallback {
  std::string name;
  std::function<nlohmann::json(const Environment&)> fn;
};

using TrajectoryPolicy = std::function<std::vector<double>(const Environment&, const Observation&)>;

std::string utc_timestamp();

TrajectoryHeader make_header(const Environment& env, TrajectorySource source);
TrajectoryStep make_step(std::size_t index, std::span<const double> action, const StepResult& result);

// Rolls out `policy` on a reset env until the episode ends (or max_steps).
// A throwing callback aborts with CallbackFailure naming it.
TrajectoryRecord record(Environment& env, const TrajectoryPolicy& policy,
                        std::span<const TrajectoryCallback> callbacks, TrajectorySource source,
                        int max_steps = -1);

// Streaming writer; the end line is written by close() (or the destructor).
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::filesystem::path& path, const TrajectoryHeader& header);
  ~TrajectoryWriter();
  TrajectoryWriter(const TrajectoryWriter&) = delete;
  TrajectoryWriter& operator=(const TrajectoryWriter&) = delete;

  // Throws InvalidConfig for non-contiguous indices or steps after a terminal one.
  void append(const TrajectoryStep& step);
  void close();

  std::size_t steps() const { return steps_; }
  bool finished() const { return finished_; }
  bool closed() const { return !out_.is_open(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t steps_ = 0;
  bool finished_ = false;
};

void write_trajectory(const TrajectoryRecord& record, const std::filesystem::path& path);
// Throws Corrupt (with the line number) and VersionMismatch.
TrajectoryRecord read_trajectory(const std::filesystem::path& path);

nlohmann::json header_to_json(const TrajectoryHeader& header);
nlohmann::json step_to_json(const TrajectoryStep& step);

struct ReplayOutcome {
  std::vector<StepResult> results;
  bool rewards_match = true;
  std::size_t first_mismatch = 0;  // valid when !rewards_match
};

// Re-simulates the recorded actions from the recorded seed and config.
// `on_step` sees the env after every step.
ReplayOutcome replay(const TrajectoryRecord& record,
                     const std::function<void(const Environment&, std::size_t)>& on_step = {});

}  // namespace lapkit
