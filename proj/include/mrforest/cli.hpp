#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "mrforest/activity.hpp"
#include "mrforest/pipeline.hpp"

namespace mrf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Settings shared by every command. Defaults, then the --config file, then
/// individual flags.
struct RunConfig {
  std::string command;

  std::string trainer = "adaboost-mrf";
  double beta = 0.02;
  double alpha_step = 0.05;
  int max_rounds = 100;
  int cg_iters = 2;
  bool alpha_line_search = false;
  int mle_max_iters = 100;
  double grad_tolerance = 1e-5;
  double l2 = 0.0;
  double bp_rate = 1e-4;
  int bp_max_rounds = 100;
  std::string decoder = "loopy";
  int threads = 1;

  std::uint64_t seed = 7;
  double hidden_fraction = 0.5;
  int num_train = 45;
  int num_test = 45;
  double noise_sigma = -1.0;
  int min_length = 40;
  int max_length = 120;

  std::string split = "test";  // decode/eval
  std::string data;
  std::string model;
  std::string history;
  std::string predictions;
  std::string metrics;
  std::string timeline;
  std::string room;  // optional room JSON; the built-in room otherwise
  bool quiet = false;
};

/// Applies the keys of a JSON config object; unknown keys and wrong types
/// throw invalid_argument.
void apply_config_json(RunConfig& config, const std::string& text);

TrainOptions train_options(const RunConfig& config);
GeneratorConfig generator_config(const RunConfig& config);
Decoder parse_decoder(const std::string& name);
/// Throws invalid_argument on any value a module would reject.
void validate(const RunConfig& config);

/// "<history minus .jsonl>.timing.jsonl"
std::string timing_path(const std::string& history_path);

/// Runs one command; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mrf
