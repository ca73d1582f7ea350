#pragma once

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dashsim/engine.hpp"
#include "dashsim/errors.hpp"

namespace dashsim {

// metrics.csv rows, in this fixed order: total_stalls, stalls_per_minute,
// zero_stall_fraction, average_quality, worst_user_quality, end_slot, then
// user<i>_stalls per user.
inline void write_metrics_csv(std::ostream& out, const MonteCarloSummary& s) {
  out << "metric,mean,stderr\n";
  const auto row = [&out](const char* name, double mean, double err) {
    out << name << ',' << mean << ',' << err << '\n';
  };
  row("total_stalls", s.total_stalls.mean, s.total_stalls.stderr_);
  row("stalls_per_minute", s.stalls_per_minute.mean, s.stalls_per_minute.stderr_);
  row("zero_stall_fraction", s.zero_stall_fraction, s.zero_stall_stderr);
  row("average_quality", s.average_quality.mean, s.average_quality.stderr_);
  row("worst_user_quality", s.worst_user_quality.mean, s.worst_user_quality.stderr_);
  row("end_slot", s.end_slot.mean, s.end_slot.stderr_);
  for (std::size_t i = 0; i < s.user_stalls.size(); ++i) {
    out << "user" << i << "_stalls," << s.user_stalls[i].mean << ','
        << s.user_stalls[i].stderr_ << '\n';
  }
}

// histogram.csv: one row per stall count observed over (user, segment) pairs.
inline void write_histogram_csv(std::ostream& out, const std::vector<std::int64_t>& histogram) {
  out << "stalls_in_segment,count\n";
  for (std::size_t b = 0; b < histogram.size(); ++b)
    out << b << ',' << histogram[b] << '\n';
}

inline nlohmann::json metrics_json(const MonteCarloSummary& s) {
  nlohmann::json j;
  j["episodes"] = s.episodes;
  const auto stat = [](const Stat& v) {
    return nlohmann::json{{"mean", v.mean}, {"stderr", v.stderr_}};
  };
  j["total_stalls"] = stat(s.total_stalls);
  j["stalls_per_minute"] = stat(s.stalls_per_minute);
  j["zero_stall_fraction"] = {{"mean", s.zero_stall_fraction}, {"stderr", s.zero_stall_stderr}};
  j["average_quality"] = stat(s.average_quality);
  j["worst_user_quality"] = stat(s.worst_user_quality);
  j["end_slot"] = stat(s.end_slot);
  j["histogram"] = s.histogram;
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : s.user_stalls) users.push_back(stat(u));
  j["user_stalls"] = users;
  j["any_truncated"] = s.any_truncated;
  return j;
}

// Long-format sweep rows: rho, scheduler, metric, mean, stderr.
struct SweepRow {
  double rho_inverse = 0.0;
  std::string scheduler;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline void append_sweep_rows(std::vector<SweepRow>& rows, double rho,
                              const std::string& scheduler, const MonteCarloSummary& s) {
  rows.push_back({rho, scheduler, "total_stalls", s.total_stalls.mean, s.total_stalls.stderr_});
  rows.push_back({rho, scheduler, "stalls_per_minute", s.stalls_per_minute.mean,
                  s.stalls_per_minute.stderr_});
  rows.push_back(
      {rho, scheduler, "zero_stall_fraction", s.zero_stall_fraction, s.zero_stall_stderr});
  rows.push_back(
      {rho, scheduler, "average_quality", s.average_quality.mean, s.average_quality.stderr_});
  rows.push_back({rho, scheduler, "worst_user_quality", s.worst_user_quality.mean,
                  s.worst_user_quality.stderr_});
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "rho,scheduler,metric,mean,stderr\n";
  for (const auto& r : rows)
    out << r.rho_inverse << ',' << r.scheduler << ',' << r.metric << ',' << r.mean << ','
        << r.stderr_ << '\n';
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write output file: " + path);
  return out;
}

}  // namespace dashsim
