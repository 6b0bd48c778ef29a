#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mrforest/activity.hpp"
#include "mrforest/boosting.hpp"
#include "mrforest/learn.hpp"

namespace mrf {

enum class Trainer { adaboost_mrf, mle_exact, mle_bp, flat_crf };

const char* to_string(Trainer t);
Trainer parse_trainer(const std::string& name);  // throws invalid_argument

enum class Decoder { loopy, exact };

struct TrainOptions {
  Trainer trainer = Trainer::adaboost_mrf;
  BoostConfig boost;
  OptimizerConfig mle{100, 1e-5};
  double l2 = 0.0;
  LoopyBpOptions bp;
  int threads = 1;
};

void validate(const TrainOptions& options);

struct Model {
  Trainer trainer = Trainer::adaboost_mrf;
  RoomModel room;
  ParameterVector params;               // combined parameters
  std::vector<EnsembleMember> members;  // adaboost-mrf only
  double beta = 0.02;
  std::vector<std::string> tree_names;  // pool, by tree id

  bool flat() const { return trainer == Trainer::flat_crf; }
};

/// One line of training progress: a boosting round or an optimizer iteration.
struct TrainHistory {
  std::vector<RoundRecord> rounds;
  std::vector<IterationLog> iterations;
  long long grad_evals = 0;
  std::string stop_reason;
};

struct TrainOutcome {
  Model model;
  TrainHistory history;
  std::vector<double> lambda;  // final data weights (adaboost-mrf)
};

/// Examples for the train split; test sequences are rejected.
std::vector<Example> make_examples(const ActivityTemplate& tmpl, const std::vector<Sequence>& train);

/// Trains from zero parameters on train-split sequences.
TrainOutcome train_model(const RoomModel& room, const std::vector<Sequence>& train,
                         const TrainOptions& options,
                         const std::function<void(const std::string&)>& progress = {});

struct Prediction {
  int id = 0;
  std::vector<int> top;     // empty for flat models
  std::vector<int> bottom;
  bool converged = true;
};

/// MAP labelling. Two-level models use loopy max-product on the grid (or the
/// exact collapsed chain); flat models use exact chain max-product.
Prediction decode(const Model& model, const Sequence& seq, Decoder decoder = Decoder::loopy,
                  const LoopyBpOptions& bp = {});

}  // namespace mrf
