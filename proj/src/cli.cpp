#include "mrforest/cli.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrforest/error.hpp"
#include "mrforest/io.hpp"
#include "parallel.hpp"

namespace mrf {

namespace {

using json = nlohmann::json;

template <class T>
void assign(T& field, const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      field = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw std::invalid_argument("expected a string");
      field = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() || v.get<long long>() >= 0) {
          field = v.get<T>();
        } else {
          throw std::invalid_argument("expected a non-negative integer");
        }
      } else {
        field = v.get<T>();
      }
    } else {
      if (!v.is_number()) throw std::invalid_argument("expected a number");
      field = v.get<T>();
    }
  } catch (const std::exception& e) {
    fail(ErrorCode::invalid_argument, "config key '" + key + "': " + e.what());
  }
}

/// Flag name, config key and field, in one table so both front ends agree.
template <class Visitor>
void for_each_setting(RunConfig& c, Visitor&& visit) {
  visit("trainer", c.trainer, "adaboost-mrf | mle-exact | mle-bp | flat-crf");
  visit("beta", c.beta, "loss exponent beta in (0,1]");
  visit("alpha-step", c.alpha_step, "constant member weight for rounds >= 2");
  visit("max-rounds", c.max_rounds, "boosting rounds");
  visit("cg-iters", c.cg_iters, "CG iterations per boosting round");
  visit("alpha-line-search", c.alpha_line_search, "golden-section search of alpha on L_H");
  visit("mle-max-iters", c.mle_max_iters, "CG iterations for the MLE trainers");
  visit("grad-tolerance", c.grad_tolerance, "CG gradient-norm tolerance");
  visit("l2", c.l2, "L2 penalty");
  visit("bp-rate", c.bp_rate, "loopy BP convergence rate");
  visit("bp-max-rounds", c.bp_max_rounds, "loopy BP round cap");
  visit("decoder", c.decoder, "loopy | exact");
  visit("threads", c.threads, "worker threads (0 = all cores)");
  visit("seed", c.seed, "generator seed");
  visit("hidden-fraction", c.hidden_fraction, "fraction of hidden train labels per level");
  visit("num-train", c.num_train, "train sequences");
  visit("num-test", c.num_test, "test sequences");
  visit("noise-sigma", c.noise_sigma, "observation noise (negative: 5% of room width)");
  visit("min-length", c.min_length, "shortest sequence");
  visit("max-length", c.max_length, "longest sequence");
  visit("split", c.split, "train | test | all");
  visit("data", c.data, "dataset file (JSON lines)");
  visit("model", c.model, "model file");
  visit("history", c.history, "training history file");
  visit("predictions", c.predictions, "predictions file");
  visit("metrics", c.metrics, "metrics report");
  visit("timeline", c.timeline, "segmentation timeline export");
  visit("room", c.room, "room description (JSON)");
  visit("quiet", c.quiet, "no progress output");
}

std::string config_key(const std::string& flag) {
  std::string k = flag;
  for (char& ch : k) {
    if (ch == '-') ch = '_';
  }
  return k;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "all") return Split::all;
  fail(ErrorCode::invalid_argument, "split must be train, test or all");
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) fail(ErrorCode::invalid_argument, std::string("missing --") + flag);
}

RoomModel load_room(const RunConfig& c) {
  return c.room.empty() ? default_room() : room_from_json(read_text_file(c.room));
}

enum class Stage { config, data, run };

int exit_code(const Error& e, Stage stage) {
  if (e.code() == ErrorCode::numerical_error) return kExitNumerical;
  if (stage == Stage::config) return kExitConfig;
  return kExitData;
}

void cmd_generate(const RunConfig& c, Stage& stage, std::ostream& out) {
  const RoomModel room = load_room(c);
  const GeneratorConfig gen = generator_config(c);
  validate(gen, room);
  stage = Stage::run;
  const auto data = generate_dataset(room, gen);
  write_dataset_file(c.data, data);
  out << "wrote " << data.size() << " sequences to " << c.data << "\n";
}

void cmd_train(const RunConfig& c, Stage& stage, std::ostream& out, std::ostream& err) {
  const RoomModel room = load_room(c);
  const TrainOptions options = train_options(c);
  stage = Stage::data;
  const auto train = read_dataset_file(c.data, Split::train);
  if (train.empty()) fail(ErrorCode::invalid_argument, c.data + ": no train sequences");
  stage = Stage::run;
  std::string last = "start";
  const auto t0 = std::chrono::steady_clock::now();
  TrainOutcome outcome;
  try {
    outcome = train_model(room, train, options, [&](const std::string& line) {
      last = line;
      if (!c.quiet) err << line << "\n";
    });
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " (last progress: " + last + ")");
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_model_file(c.model, outcome.model);
  if (!c.history.empty()) {
    std::ostringstream h, t;
    write_history(h, outcome.history, static_cast<int>(train.size()));
    write_text_file(c.history, h.str());
    write_timing(t, outcome.history, seconds);
    write_text_file(timing_path(c.history), t.str());
  }
  out << "trainer=" << c.trainer << " sequences=" << train.size() << " grad_evals=" << outcome.history.grad_evals
      << " stop=" << outcome.history.stop_reason << " model=" << c.model << "\n";
}

void cmd_decode(const RunConfig& c, Stage& stage, std::ostream& out) {
  const Decoder decoder = parse_decoder(c.decoder);
  const Split split = parse_split(c.split);
  LoopyBpOptions bp;
  bp.rate = c.bp_rate;
  bp.max_rounds = c.bp_max_rounds;
  stage = Stage::data;
  const Model model = read_model_file(c.model);
  const auto seqs = strip_labels(read_dataset_file(c.data, split));
  stage = Stage::run;
  std::vector<Prediction> preds(seqs.size());
  detail::parallel_for(static_cast<int>(seqs.size()), c.threads,
                       [&](int i) { preds[i] = decode(model, seqs[i], decoder, bp); });
  std::ostringstream s;
  write_predictions(s, preds);
  write_text_file(c.predictions, s.str());
  int unconverged = 0;
  for (const auto& p : preds) unconverged += p.converged ? 0 : 1;
  out << "decoded " << preds.size() << " sequences";
  if (unconverged > 0) out << " (" << unconverged << " without BP convergence)";
  out << "\n";
}

void cmd_eval(const RunConfig& c, Stage& stage, std::ostream& out) {
  const Split split = parse_split(c.split);
  stage = Stage::data;
  std::istringstream pin(read_text_file(c.predictions));
  const auto preds = read_predictions(pin);
  const auto truth = read_dataset_file(c.data, split);
  const EvalReport rep = evaluate(preds, truth);
  stage = Stage::run;
  if (!c.metrics.empty()) write_text_file(c.metrics, metrics_to_json(rep));
  if (!c.timeline.empty()) {
    std::ostringstream s;
    write_timeline(s, preds, truth);
    write_text_file(c.timeline, s.str());
  }
  char buf[128];
  if (rep.has_top) {
    std::snprintf(buf, sizeof buf, "top macro-F1 %.4f\n", rep.top.macro_f1);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "bottom macro-F1 %.4f\n", rep.bottom.macro_f1);
  out << buf;
}

}  // namespace

void apply_config_json(RunConfig& config, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::invalid_argument, "config: expected a JSON object");
  std::map<std::string, std::function<void(const json&)>> setters;
  for_each_setting(config, [&](const char* flag, auto& field, const char*) {
    const std::string key = config_key(flag);
    setters[key] = [&field, key](const json& v) { assign(field, v, key); };
  });
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) fail(ErrorCode::invalid_argument, "config: unknown key '" + key + "'");
    it->second(value);
  }
}

TrainOptions train_options(const RunConfig& c) {
  TrainOptions o;
  o.trainer = parse_trainer(c.trainer);
  o.boost.beta = c.beta;
  o.boost.alpha_step = c.alpha_step;
  o.boost.max_rounds = c.max_rounds;
  o.boost.cg_iters = c.cg_iters;
  o.boost.alpha_line_search = c.alpha_line_search;
  o.mle.max_iters = c.mle_max_iters;
  o.mle.grad_tolerance = c.grad_tolerance;
  o.boost.train.optimizer.grad_tolerance = c.grad_tolerance;
  o.l2 = c.l2;
  o.bp.rate = c.bp_rate;
  o.bp.max_rounds = c.bp_max_rounds;
  o.threads = c.threads;
  return o;
}

GeneratorConfig generator_config(const RunConfig& c) {
  GeneratorConfig g;
  g.num_train = c.num_train;
  g.num_test = c.num_test;
  g.seed = c.seed;
  g.noise_sigma = c.noise_sigma;
  g.hidden_fraction = c.hidden_fraction;
  g.min_length = c.min_length;
  g.max_length = c.max_length;
  return g;
}

Decoder parse_decoder(const std::string& name) {
  if (name == "loopy") return Decoder::loopy;
  if (name == "exact") return Decoder::exact;
  fail(ErrorCode::invalid_argument, "decoder must be loopy or exact");
}

void validate(const RunConfig& c) {
  TrainOptions o = train_options(c);
  validate(o);
  if (o.trainer != Trainer::adaboost_mrf) validate(o.boost);
  parse_decoder(c.decoder);
  parse_split(c.split);
  validate(generator_config(c), default_room());
}

std::string timing_path(const std::string& history_path) {
  const std::string ext = ".jsonl";
  std::string stem = history_path;
  if (stem.size() >= ext.size() && stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0) {
    stem.resize(stem.size() - ext.size());
  }
  return stem + ".timing.jsonl";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Boosted spanning-tree CRFs for partially labelled activity sequences", "mrforest"};
  app.require_subcommand(1, 1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; flags override its keys");

  struct Override {
    CLI::Option* option;
    std::shared_ptr<void> value;
  };
  std::vector<std::vector<Override>> overrides;
  RunConfig defaults;
  // Every subcommand accepts every setting so one config file serves all of them.
  std::vector<CLI::App*> subs;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"generate", "write a synthetic dataset to --data"},
      {"train", "train --trainer on the train split of --data, write --model and --history"},
      {"decode", "MAP-label --split of --data with --model, write --predictions"},
      {"eval", "score --predictions against --data, write --metrics and --timeline"}};
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "JSON config; flags override its keys");
    subs.push_back(sub);
    auto& list = overrides.emplace_back();
    for_each_setting(defaults, [&](const char* flag, auto& field, const char* help) {
      using T = std::decay_t<decltype(field)>;
      auto value = std::make_shared<T>(field);
      CLI::Option* opt;
      if constexpr (std::is_same_v<T, bool>) {
        opt = sub->add_flag(std::string("--") + flag, *value, help);
      } else {
        opt = sub->add_option(std::string("--") + flag, *value, help);
      }
      list.push_back({opt, value});
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  Stage stage = Stage::config;
  try {
    RunConfig c;
    std::size_t active = 0;
    for (std::size_t k = 0; k < subs.size(); ++k) {
      if (subs[k]->parsed()) active = k;
    }
    c.command = subs[active]->get_name();
    if (!config_path.empty()) apply_config_json(c, read_text_file(config_path));
    std::size_t index = 0;
    for_each_setting(c, [&](const char*, auto& field, const char*) {
      using T = std::decay_t<decltype(field)>;
      const Override& o = overrides[active][index++];
      if (o.option->count() > 0) field = *std::static_pointer_cast<T>(o.value);
    });
    validate(c);
    if (c.command == "generate") {
      require(c.data, "data");
      cmd_generate(c, stage, out);
    } else if (c.command == "train") {
      require(c.data, "data");
      require(c.model, "model");
      cmd_train(c, stage, out, err);
    } else if (c.command == "decode") {
      require(c.data, "data");
      require(c.model, "model");
      require(c.predictions, "predictions");
      cmd_decode(c, stage, out);
    } else {
      require(c.data, "data");
      require(c.predictions, "predictions");
      cmd_eval(c, stage, out);
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e, stage);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mrf
