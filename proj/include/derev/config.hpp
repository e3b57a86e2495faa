#pragma once

#include <cstdint>
#include <string>

#include "derev/harness.hpp"
#include "json.hpp"

namespace derev {

enum class RunMode { Blind, Informed, Wpe, Benchmark };

RunMode parse_run_mode(const std::string& s);
BenchmarkMode parse_benchmark_mode(const std::string& s);
std::string to_string(RunMode mode);

struct RunConfig {
  RunMode mode = RunMode::Blind;
  std::uint64_t seed = 0;
  std::string input;
  std::string output;
  std::string rir_in;
  std::string rir_out;
  std::string report;
  std::string corpus;
  std::string csv;
  BenchmarkMode pipeline = BenchmarkMode::Wpe;  // what benchmark mode runs on each item
  int jobs = 1;

  // "gaussian" or "external:<command>"
  std::string score_model = "gaussian";
  double score_timeout = 30.0;
  // Gaussian prior: zero mean unless a mean file is given; variance defaults to sigma_data^2.
  std::string prior_mean;
  double prior_variance = -1.0;

  InferenceConfig inference;

  void validate() const;
};

// Overlays the keys present in `j` onto `base`. Unknown keys and type errors raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json to_json(const RirParams& p);

}  // namespace derev
