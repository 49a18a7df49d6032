#include "lapkit/trajstore.hpp"

#include <chrono>
#include <ctime>

#include "lapkit/config.hpp"
#include "lapkit/envs.hpp"
#include "lapkit/error.hpp"
#include "lapkit/serialize.hpp"

namespace lapkit {

using nlohmann::json;

std::string to_string(TrajectorySource source) {
  switch (source) {
    case TrajectorySource::kHuman: return "human";
    case TrajectorySource::kScripted: return "scripted";
    case TrajectorySource::kPlanner: return "planner";
    case TrajectorySource::kAgent: return "agent";
  }
  return "agent";
}

TrajectorySource trajectory_source_from_string(const std::string& name) {
  if (name == "human") return TrajectorySource::kHuman;
  if (name == "scripted") return TrajectorySource::kScripted;
  if (name == "planner") return TrajectorySource::kPlanner;
  if (name == "agent") return TrajectorySource::kAgent;
  fail(ErrorCode::kInvalidConfig, "unknown trajectory source '" + name + "'");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

TrajectoryHeader make_header(const Environment& env, TrajectorySource source) {
  TrajectoryHeader h;
  h.env = env.id();
  h.config = env.config();
  h.seed = env.seed();
  h.source = source;
  h.created = utc_timestamp();
  h.initial_observation = env.observe();
  return h;
}

TrajectoryStep make_step(std::size_t index, std::span<const double> action, const StepResult& result) {
  TrajectoryStep s;
  s.index = index;
  s.action.assign(action.begin(), action.end());
  s.reward = result.reward;
  s.features = result.info.features;
  s.terminated = result.terminated;
  s.truncated = result.truncated;
  s.observation = result.observation;
  return s;
}

TrajectoryRecord record(Environment& env, const TrajectoryPolicy& policy,
                        std::span<const TrajectoryCallback> callbacks, TrajectorySource source,
                        int max_steps) {
  if (!env.is_reset() || env.done()) fail(ErrorCode::kNotReset, "record needs a freshly reset env");
  TrajectoryRecord rec;
  rec.header = make_header(env, source);
  Observation obs = rec.header.initial_observation;
  while (!env.done() && (max_steps < 0 || static_cast<int>(rec.steps.size()) < max_steps)) {
    const auto action = policy(env, obs);
    const StepResult result = env.step(action);
    TrajectoryStep step = make_step(rec.steps.size(), action, result);
    for (const auto& cb : callbacks) {
      try {
        step.custom[cb.name] = cb.fn(env);
      } catch (const std::exception& e) {
        fail(ErrorCode::kCallbackFailure, "callback '" + cb.name + "' failed: " + e.what());
      }
    }
    obs = result.observation;
    rec.steps.push_back(std::move(step));
  }
  return rec;
}

json header_to_json(const TrajectoryHeader& h) {
  return {{"format_version", h.format_version},
          {"env", to_string(h.env)},
          {"config", config_to_json(h.config)},
          {"seed", h.seed},
          {"source", to_string(h.source)},
          {"created", h.created},
          {"initial_observation", observation_to_json(h.initial_observation)}};
}

json step_to_json(const TrajectoryStep& s) {
  return {{"step", s.index},
          {"action", s.action},
          {"reward", s.reward},
          {"features", features_to_json(s.features)},
          {"terminated", s.terminated},
          {"truncated", s.truncated},
          {"custom", s.custom},
          {"observation", observation_to_json(s.observation)}};
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path, const TrajectoryHeader& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) fail(ErrorCode::kIo, "cannot write " + path.string());
  out_ << header_to_json(header).dump() << '\n';
  out_.flush();
}

TrajectoryWriter::~TrajectoryWriter() {
  try {
    close();
  } catch (...) {
  }
}

void TrajectoryWriter::append(const TrajectoryStep& step) {
  if (closed()) fail(ErrorCode::kInvalidConfig, "trajectory writer is closed");
  if (finished_) fail(ErrorCode::kInvalidConfig, "no steps may follow a terminal step");
  if (step.index != steps_) {
    fail(ErrorCode::kInvalidConfig, "step index " + std::to_string(step.index) + ", expected " +
                                        std::to_string(steps_));
  }
  out_ << step_to_json(step).dump() << '\n';
  out_.flush();
  if (!out_) fail(ErrorCode::kIo, "write failed for " + path_.string());
  ++steps_;
  finished_ = step.terminated || step.truncated;
}

void TrajectoryWriter::close() {
  if (closed()) return;
  out_ << json{{"end", true}, {"steps", steps_}}.dump() << '\n';
  out_.close();
}

void write_trajectory(const TrajectoryRecord& rec, const std::filesystem::path& path) {
  TrajectoryWriter writer(path, rec.header);
  for (const auto& s : rec.steps) writer.append(s);
  writer.close();
}

namespace {

[[noreturn]] void corrupt(const std::filesystem::path& path, std::size_t line, const std::string& why) {
  fail(ErrorCode::kCorrupt, path.string() + ":" + std::to_string(line) + ": " + why);
}

}  // namespace

TrajectoryRecord read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  TrajectoryRecord rec;
  std::string line;
  std::size_t line_no = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (ended) corrupt(path, line_no, "content after the end line");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      corrupt(path, line_no, e.what());
    }
    try {
      if (line_no == 1) {
        const int version = j.at("format_version").get<int>();
        if (version != kTrajectoryFormatVersion) {
          fail(ErrorCode::kVersionMismatch, path.string() + ": format version " +
                                                std::to_string(version) + ", reader supports " +
                                                std::to_string(kTrajectoryFormatVersion));
        }
        auto& h = rec.header;
        h.format_version = version;
        h.env = env_id_from_string(j.at("env").get<std::string>());
        h.config = config_from_json(h.env, j.at("config"));
        h.seed = j.at("seed").get<std::uint64_t>();
        h.source = trajectory_source_from_string(j.at("source").get<std::string>());
        h.created = j.at("created").get<std::string>();
        h.initial_observation = observation_from_json(j.at("initial_observation"));
        continue;
      }
      if (j.contains("end")) {
        if (j.at("steps").get<std::size_t>() != rec.steps.size()) {
          corrupt(path, line_no, "end line step count does not match");
        }
        ended = true;
        continue;
      }
      TrajectoryStep s;
      s.index = j.at("step").get<std::size_t>();
      if (s.index != rec.steps.size()) corrupt(path, line_no, "non-contiguous step index");
      if (!rec.steps.empty() && (rec.steps.back().terminated || rec.steps.back().truncated)) {
        corrupt(path, line_no, "step after a terminal step");
      }
      s.action = j.at("action").get<std::vector<double>>();
      s.reward = j.at("reward").get<double>();
      s.features = features_from_json(j.at("features"));
      s.terminated = j.at("terminated").get<bool>();
      s.truncated = j.at("truncated").get<bool>();
      s.custom = j.at("custom");
      s.observation = observation_from_json(j.at("observation"));
      rec.steps.push_back(std::move(s));
    } catch (const json::exception& e) {
      corrupt(path, line_no, e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kVersionMismatch) throw;
      if (e.code() == ErrorCode::kCorrupt && std::string(e.what()).starts_with(path.string())) throw;
      corrupt(path, line_no, e.what());
    }
  }
  if (line_no == 0) corrupt(path, 1, "empty file");
  if (!ended) corrupt(path, line_no + 1, "missing end line (truncated file)");
  return rec;
}

ReplayOutcome replay(const TrajectoryRecord& rec,
                     const std::function<void(const Environment&, std::size_t)>& on_step) {
  auto env = make_env(rec.header.env, rec.header.config);
  env->reset(rec.header.seed);
  ReplayOutcome out;
  for (std::size_t i = 0; i < rec.steps.size(); ++i) {
    StepResult r = env->step(rec.steps[i].action);
    if (out.rewards_match && r.reward != rec.steps[i].reward) {
      out.rewards_match = false;
      out.first_mismatch = i;
    }
    if (on_step) on_step(*env, i);
    out.results.push_back(std::move(r));
  }
  return out;
}

}  // namespace lapkit
