#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dashsim/channel.hpp"
#include "dashsim/engine.hpp"
#include "dashsim/errors.hpp"
#include "dashsim/model.hpp"
#include "dashsim/scheduler.hpp"
#include "dashsim/trace_io.hpp"

namespace dashsim {

inline constexpr const char* kCodeVersion = "dashsim 1.0.0";

// Command-line overrides applied to the raw config before validation, so the
// manifest always records the values that actually ran.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scheduler;
  std::optional<double> rho_inverse;
  std::optional<int> episodes;
  std::optional<std::string> request_mode;
};

struct ResolvedRun {
  SimConfig cfg;
  std::vector<VideoTrace> traces;  // source quality, one per user
  ChannelModel channel = ChannelModel::bernoulli({});
  SchedulerSpec scheduler;
  std::vector<double> lambdas;  // packets per second per user at source quality
  double gop_duration_seconds = 0.0;
  double slot_rounding_error = 0.0;  // relative error from rounding GoP duration to slots
  nlohmann::json resolved;           // complete effective config
};

namespace config_detail {

using nlohmann::json;

inline std::string joined(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

[[noreturn]] inline void fail(const std::string& path, const std::string& why) {
  throw ConfigError("config field '" + path + "': " + why);
}

inline const json* find(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double number_at(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

inline double get_number(const json& obj, const std::string& key, const std::string& base,
                         double fallback) {
  const json* v = find(obj, key);
  return v ? number_at(*v, joined(base, key)) : fallback;
}

inline std::int64_t get_integer(const json& obj, const std::string& key, const std::string& base,
                                std::int64_t fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) fail(joined(base, key), "expected an integer");
  return v->get<std::int64_t>();
}

inline bool get_bool(const json& obj, const std::string& key, const std::string& base,
                     bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) fail(joined(base, key), "expected true or false");
  return v->get<bool>();
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& base,
                              const std::string& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) fail(joined(base, key), "expected a string");
  return v->get<std::string>();
}

// Typos must not silently fall back to defaults.
inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& base) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known) fail(joined(base, key), "unknown key");
  }
}

}  // namespace config_detail

// Builds the fully resolved run from a raw JSON config. Every default is made
// explicit in `resolved`, so the emitted manifest alone reproduces the run.
inline ResolvedRun resolve_config(nlohmann::json raw, const ConfigOverrides& overrides = {},
                                  const std::filesystem::path& base_dir = ".") {
  using config_detail::fail;
  using config_detail::find;
  using nlohmann::json;

  if (!raw.is_object()) throw ConfigError("config root must be a JSON object");
  // A manifest is accepted wherever a config is: unwrap its config block.
  if (raw.contains("code_version") && raw.contains("config")) raw = raw.at("config");

  if (overrides.seed) raw["seed"] = *overrides.seed;
  if (overrides.scheduler) raw["scheduler"] = *overrides.scheduler;
  if (overrides.rho_inverse) {
    raw["rho_inverse"] = *overrides.rho_inverse;
    raw.erase("rate_bytes_per_sec");
  }
  if (overrides.episodes) raw["episodes"] = *overrides.episodes;
  if (overrides.request_mode) raw["request_mode"] = *overrides.request_mode;

  config_detail::reject_unknown(
      raw, {"seed", "packet_size_bytes", "gops_per_segment", "segments", "episodes", "transport",
            "request_mode", "initial_buffer_seconds", "rebuffer_seconds", "frame_rate",
            "gop_frames", "quality_adaptation", "traces", "num_users", "rho_inverse",
            "rate_bytes_per_sec", "channel", "scheduler", "rfra_quantum", "random_ties",
            "wrfra_weights"},
      "");

  ResolvedRun run;
  SimConfig& cfg = run.cfg;

  cfg.seed = static_cast<std::uint64_t>(config_detail::get_integer(raw, "seed", "", 1));
  cfg.packet_size_bytes = config_detail::get_integer(raw, "packet_size_bytes", "", 1500);
  if (cfg.packet_size_bytes <= 0) fail("packet_size_bytes", "must be positive");
  cfg.gops_per_segment =
      static_cast<int>(config_detail::get_integer(raw, "gops_per_segment", "", 20));
  if (cfg.gops_per_segment <= 0) fail("gops_per_segment", "must be positive");
  cfg.segments = static_cast<int>(config_detail::get_integer(raw, "segments", "", 1));
  if (cfg.segments <= 0) fail("segments", "must be positive");
  cfg.episodes = static_cast<int>(config_detail::get_integer(raw, "episodes", "", 1));
  if (cfg.episodes <= 0) fail("episodes", "must be positive");

  const std::string transport = config_detail::get_string(raw, "transport", "", "ideal");
  if (transport != "ideal") fail("transport", "only 'ideal' is supported");
  cfg.transport = Transport::ideal;

  const std::string mode = config_detail::get_string(raw, "request_mode", "", "per_gop");
  if (mode == "per_gop")
    cfg.request_mode = RequestMode::per_gop;
  else if (mode == "super_gop")
    cfg.request_mode = RequestMode::super_gop;
  else
    fail("request_mode", "expected 'per_gop' or 'super_gop'");

  const double initial_buffer_seconds =
      config_detail::get_number(raw, "initial_buffer_seconds", "", 4.0);
  if (initial_buffer_seconds < 0.0) fail("initial_buffer_seconds", "must be nonnegative");
  const double rebuffer_seconds = config_detail::get_number(raw, "rebuffer_seconds", "", 2.0);
  if (rebuffer_seconds <= 0.0) fail("rebuffer_seconds", "must be positive");

  const double frame_rate = config_detail::get_number(raw, "frame_rate", "", 30.0);
  if (frame_rate <= 0.0) fail("frame_rate", "must be positive");
  const auto gop_frames =
      static_cast<int>(config_detail::get_integer(raw, "gop_frames", "", 16));
  if (gop_frames <= 0) fail("gop_frames", "must be positive");

  // Quality adaptation block.
  json adapt = raw.contains("quality_adaptation") ? raw.at("quality_adaptation") : json::object();
  if (!adapt.is_object()) fail("quality_adaptation", "expected an object");
  config_detail::reject_unknown(adapt, {"enabled", "threshold_gops", "initial_level"},
                                "quality_adaptation");
  cfg.adaptation_enabled = config_detail::get_bool(adapt, "enabled", "quality_adaptation", false);
  cfg.adapt_threshold_gops = static_cast<int>(
      config_detail::get_integer(adapt, "threshold_gops", "quality_adaptation", 3));
  if (cfg.adapt_threshold_gops <= 0) fail("quality_adaptation.threshold_gops", "must be positive");
  cfg.initial_quality = static_cast<int>(
      config_detail::get_integer(adapt, "initial_level", "quality_adaptation", kMaxQuality));
  if (cfg.initial_quality < kMinQuality || cfg.initial_quality > kMaxQuality)
    fail("quality_adaptation.initial_level", "must lie in [1, 6]");

  // Traces: files or synthetic specs, one per user.
  const json* traces_node = find(raw, "traces");
  if (!traces_node || !traces_node->is_array() || traces_node->empty())
    fail("traces", "expected a non-empty array");
  const int total_gops = cfg.segments * cfg.gops_per_segment;
  json resolved_traces = json::array();
  int user_index = 0;
  for (const auto& entry : *traces_node) {
    const std::string path_prefix = "traces[" + std::to_string(user_index) + "]";
    if (!entry.is_object()) fail(path_prefix, "expected an object");
    config_detail::reject_unknown(entry, {"path", "synth"}, path_prefix);
    VideoTrace trace;
    json resolved_entry;
    if (const json* p = find(entry, "path")) {
      if (!p->is_string()) fail(path_prefix + ".path", "expected a string");
      std::filesystem::path file = p->get<std::string>();
      if (file.is_relative()) file = base_dir / file;
      const FrameTrace frames = load_trace(file.string());
      std::string warning;
      trace = to_gops(frames, cfg.packet_size_bytes, 1, &warning);
      resolved_entry["path"] = std::filesystem::absolute(file).lexically_normal().string();
    } else if (const json* s = find(entry, "synth")) {
      if (!s->is_object()) fail(path_prefix + ".synth", "expected an object");
      config_detail::reject_unknown(*s, {"mean_bits_per_gop", "cv", "seed", "gops", "label"},
                                    path_prefix + ".synth");
      const double mean_bits =
          config_detail::get_number(*s, "mean_bits_per_gop", path_prefix + ".synth", 0.0);
      if (mean_bits <= 0.0) fail(path_prefix + ".synth.mean_bits_per_gop", "must be positive");
      const double cv = config_detail::get_number(*s, "cv", path_prefix + ".synth", 0.6);
      if (cv < 0.0) fail(path_prefix + ".synth.cv", "must be nonnegative");
      const auto synth_seed = static_cast<std::uint64_t>(config_detail::get_integer(
          *s, "seed", path_prefix + ".synth",
          static_cast<std::int64_t>(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(user_index))));
      const auto gop_count = static_cast<int>(
          config_detail::get_integer(*s, "gops", path_prefix + ".synth", total_gops));
      if (gop_count < total_gops)
        fail(path_prefix + ".synth.gops", "fewer GoPs than segments * gops_per_segment");
      const std::string label = config_detail::get_string(
          *s, "label", path_prefix + ".synth", "synth-" + std::to_string(user_index));
      trace = synth_trace(mean_bits, cv, gop_count, synth_seed, cfg.packet_size_bytes, 1,
                          frame_rate, gop_frames, label);
      resolved_entry["synth"] = {{"mean_bits_per_gop", mean_bits}, {"cv", cv},
                                 {"seed", synth_seed},            {"gops", gop_count},
                                 {"label", label}};
    } else {
      fail(path_prefix, "expected either 'path' or 'synth'");
    }
    if (static_cast<int>(trace.gops.size()) < total_gops)
      fail(path_prefix, "trace holds " + std::to_string(trace.gops.size()) + " GoPs, need " +
                            std::to_string(total_gops));
    run.traces.push_back(std::move(trace));
    resolved_traces.push_back(std::move(resolved_entry));
    ++user_index;
  }
  cfg.num_users = static_cast<int>(run.traces.size());
  if (const json* nu = find(raw, "num_users")) {
    if (!nu->is_number_integer() || nu->get<int>() != cfg.num_users)
      fail("num_users", "must match the number of trace entries");
  }

  run.gop_duration_seconds = run.traces.front().gop_duration_seconds();
  for (const auto& t : run.traces)
    if (std::abs(t.gop_duration_seconds() - run.gop_duration_seconds) > 1e-9)
      fail("traces", "all traces must share one GoP duration");

  // Aggregate source demand over the streamed window fixes the rate/rho link.
  for (const auto& t : run.traces) {
    Packets window_packets = 0;
    for (int g = 0; g < total_gops; ++g)
      window_packets += t.gops[static_cast<std::size_t>(g)].size_packets;
    run.lambdas.push_back(static_cast<double>(window_packets) /
                          (static_cast<double>(total_gops) * run.gop_duration_seconds));
  }
  double lambda_sum = 0.0;
  for (double l : run.lambdas) lambda_sum += l;

  const json* rho_node = find(raw, "rho_inverse");
  const json* rate_node = find(raw, "rate_bytes_per_sec");
  if (rho_node && rate_node)
    fail("rho_inverse", "give either rho_inverse or rate_bytes_per_sec, not both");
  if (!rho_node && !rate_node)
    fail("rho_inverse", "either rho_inverse or rate_bytes_per_sec is required");
  if (rho_node) {
    const double rho = config_detail::number_at(*rho_node, "rho_inverse");
    if (rho <= 0.0) fail("rho_inverse", "must be positive");
    cfg.rho_inverse = rho;
    cfg.rate_bytes_per_sec = rho * static_cast<double>(cfg.packet_size_bytes) * lambda_sum;
  } else {
    const double rate = config_detail::number_at(*rate_node, "rate_bytes_per_sec");
    if (rate <= 0.0) fail("rate_bytes_per_sec", "must be positive");
    cfg.rate_bytes_per_sec = rate;
    cfg.rho_inverse = inverse_utilization(rate, cfg.packet_size_bytes, run.lambdas);
  }

  const double slots_per_second = cfg.slots_per_second();
  const double exact_gop_slots = run.gop_duration_seconds * slots_per_second;
  cfg.gop_duration_slots = static_cast<Slot>(std::llround(exact_gop_slots));
  if (cfg.gop_duration_slots <= 0)
    fail("rho_inverse", "resolved rate leaves less than one slot per GoP");
  run.slot_rounding_error =
      (static_cast<double>(cfg.gop_duration_slots) - exact_gop_slots) / exact_gop_slots;
  for (auto& t : run.traces)
    for (auto& g : t.gops) g.duration_slots = cfg.gop_duration_slots;

  cfg.initial_buffer_slots = cfg.seconds_to_slots(initial_buffer_seconds);
  cfg.rebuffer_slots = cfg.seconds_to_slots(rebuffer_seconds);
  if (cfg.rebuffer_slots <= 0) fail("rebuffer_seconds", "shorter than one slot at this rate");

  // Channel block.
  json chan = raw.contains("channel") ? raw.at("channel") : json::object();
  if (!chan.is_object()) fail("channel", "expected an object");
  config_detail::reject_unknown(
      chan, {"model", "loss", "loss_per_user", "dwell_seconds", "drop_probs", "transition"},
      "channel");
  const std::string model = config_detail::get_string(chan, "model", "channel", "bernoulli");
  json resolved_channel;
  if (model == "bernoulli") {
    std::vector<double> success;
    if (const json* per_user = find(chan, "loss_per_user")) {
      if (!per_user->is_array() || static_cast<int>(per_user->size()) != cfg.num_users)
        fail("channel.loss_per_user", "expected one loss probability per user");
      for (std::size_t i = 0; i < per_user->size(); ++i) {
        const double loss = config_detail::number_at(
            (*per_user)[i], "channel.loss_per_user[" + std::to_string(i) + "]");
        if (loss < 0.0 || loss > 1.0)
          fail("channel.loss_per_user[" + std::to_string(i) + "]", "must lie in [0, 1]");
        success.push_back(1.0 - loss);
      }
    } else {
      const double loss = config_detail::get_number(chan, "loss", "channel", 0.0);
      if (loss < 0.0 || loss > 1.0) fail("channel.loss", "must lie in [0, 1]");
      success.assign(static_cast<std::size_t>(cfg.num_users), 1.0 - loss);
    }
    run.channel = ChannelModel::bernoulli(success);
    json losses = json::array();
    for (double s : success) losses.push_back(1.0 - s);
    resolved_channel = {{"model", "bernoulli"}, {"loss_per_user", losses}};
  } else if (model == "markov") {
    const double dwell_seconds = config_detail::get_number(chan, "dwell_seconds", "channel", 0.5);
    if (dwell_seconds <= 0.0) fail("channel.dwell_seconds", "must be positive");
    const Slot dwell_slots = cfg.seconds_to_slots(dwell_seconds);
    if (dwell_slots <= 0) fail("channel.dwell_seconds", "shorter than one slot at this rate");
    std::vector<double> drops = {0.001, 0.002, 0.005};
    if (const json* d = find(chan, "drop_probs")) {
      if (!d->is_array() || d->empty()) fail("channel.drop_probs", "expected a non-empty array");
      drops.clear();
      for (std::size_t i = 0; i < d->size(); ++i)
        drops.push_back(
            config_detail::number_at((*d)[i], "channel.drop_probs[" + std::to_string(i) + "]"));
    }
    std::vector<std::vector<double>> transition = {
        {0.3, 0.6, 0.1}, {0.2, 0.6, 0.2}, {0.1, 0.6, 0.3}};
    if (const json* t = find(chan, "transition")) {
      if (!t->is_array()) fail("channel.transition", "expected an array of rows");
      transition.clear();
      for (std::size_t i = 0; i < t->size(); ++i) {
        if (!(*t)[i].is_array()) fail("channel.transition", "expected an array of rows");
        std::vector<double> row;
        for (std::size_t j = 0; j < (*t)[i].size(); ++j)
          row.push_back(config_detail::number_at(
              (*t)[i][j],
              "channel.transition[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
        transition.push_back(std::move(row));
      }
    }
    try {
      run.channel = ChannelModel::markov(cfg.num_users, drops, transition, dwell_slots);
    } catch (const std::invalid_argument& e) {
      fail("channel", e.what());
    }
    resolved_channel = {{"model", "markov"},
                        {"drop_probs", drops},
                        {"transition", transition},
                        {"dwell_seconds", dwell_seconds}};
  } else {
    fail("channel.model", "expected 'bernoulli' or 'markov'");
  }

  // Scheduler block.
  const std::string sched = config_detail::get_string(raw, "scheduler", "", "bdra");
  try {
    run.scheduler.policy = scheduler_from_string(sched);
  } catch (const std::invalid_argument&) {
    fail("scheduler", "expected one of bdra, rfra, wrfra, dwrfra, random");
  }
  run.scheduler.rfra_quantum =
      static_cast<int>(config_detail::get_integer(raw, "rfra_quantum", "", 1));
  if (run.scheduler.rfra_quantum <= 0) fail("rfra_quantum", "must be positive");
  run.scheduler.random_ties = config_detail::get_bool(raw, "random_ties", "", false);
  if (const json* w = find(raw, "wrfra_weights")) {
    if (!w->is_array() || static_cast<int>(w->size()) != cfg.num_users)
      fail("wrfra_weights", "expected one weight per user");
    for (std::size_t i = 0; i < w->size(); ++i) {
      const double weight =
          config_detail::number_at((*w)[i], "wrfra_weights[" + std::to_string(i) + "]");
      if (weight <= 0.0) fail("wrfra_weights[" + std::to_string(i) + "]", "must be positive");
      run.scheduler.weights.push_back(weight);
    }
  } else {
    run.scheduler.weights = run.lambdas;  // demand-proportional by default
  }

  // Echo every effective value.
  json& out = run.resolved;
  out["seed"] = cfg.seed;
  out["packet_size_bytes"] = cfg.packet_size_bytes;
  out["scheduler"] = to_string(run.scheduler.policy);
  out["rfra_quantum"] = run.scheduler.rfra_quantum;
  out["random_ties"] = run.scheduler.random_ties;
  out["wrfra_weights"] = run.scheduler.weights;
  out["rho_inverse"] = cfg.rho_inverse;
  out["gops_per_segment"] = cfg.gops_per_segment;
  out["segments"] = cfg.segments;
  out["episodes"] = cfg.episodes;
  out["initial_buffer_seconds"] = initial_buffer_seconds;
  out["rebuffer_seconds"] = rebuffer_seconds;
  out["frame_rate"] = frame_rate;
  out["gop_frames"] = gop_frames;
  out["transport"] = "ideal";
  out["request_mode"] = mode;
  out["quality_adaptation"] = {{"enabled", cfg.adaptation_enabled},
                               {"threshold_gops", cfg.adapt_threshold_gops},
                               {"initial_level", cfg.initial_quality}};
  out["channel"] = resolved_channel;
  out["traces"] = resolved_traces;
  return run;
}

inline ResolvedRun load_config_file(const std::string& path,
                                    const ConfigOverrides& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json raw;
  try {
    in >> raw;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error in ") + path + ": " + e.what());
  }
  return resolve_config(std::move(raw), overrides,
                        std::filesystem::path(path).parent_path());
}

// Environment override for the seed; wins over the config, loses to --seed.
inline std::optional<std::uint64_t> env_seed_override() {
  const char* value = std::getenv("DASH_SIM_SEED");
  if (!value || !*value) return std::nullopt;
  try {
    return static_cast<std::uint64_t>(std::stoull(value));
  } catch (const std::exception&) {
    throw ConfigError("DASH_SIM_SEED must be an unsigned integer");
  }
}

// Run manifest: code version, the effective config, and derived quantities.
inline nlohmann::json manifest_json(const ResolvedRun& run) {
  nlohmann::json m;
  m["code_version"] = kCodeVersion;
  m["config"] = run.resolved;
  m["derived"] = {{"rate_bytes_per_sec", run.cfg.rate_bytes_per_sec},
                  {"rho_inverse", run.cfg.rho_inverse},
                  {"lambda_packets_per_sec", run.lambdas},
                  {"gop_duration_slots", run.cfg.gop_duration_slots},
                  {"gop_duration_seconds", run.gop_duration_seconds},
                  {"initial_buffer_slots", run.cfg.initial_buffer_slots},
                  {"rebuffer_slots", run.cfg.rebuffer_slots},
                  {"slot_rounding_error", run.slot_rounding_error},
                  {"num_users", run.cfg.num_users}};
  return m;
}

}  // namespace dashsim
