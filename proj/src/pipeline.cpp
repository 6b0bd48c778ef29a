#include "mrforest/pipeline.hpp"

#include <cstdio>
#include <numeric>

#include "mrforest/error.hpp"

namespace mrf {

const char* to_string(Trainer t) {
  switch (t) {
    case Trainer::adaboost_mrf: return "adaboost-mrf";
    case Trainer::mle_exact: return "mle-exact";
    case Trainer::mle_bp: return "mle-bp";
    case Trainer::flat_crf: return "flat-crf";
  }
  return "unknown";
}

Trainer parse_trainer(const std::string& name) {
  for (Trainer t : {Trainer::adaboost_mrf, Trainer::mle_exact, Trainer::mle_bp, Trainer::flat_crf}) {
    if (name == to_string(t)) return t;
  }
  fail(ErrorCode::invalid_argument, "unknown trainer '" + name + "'");
}

void validate(const TrainOptions& options) {
  if (options.trainer == Trainer::adaboost_mrf) validate(options.boost);
  validate(options.mle);
  if (!(options.l2 >= 0.0)) fail(ErrorCode::invalid_argument, "l2 must be >= 0");
  if (!(options.bp.rate > 0.0)) fail(ErrorCode::invalid_argument, "bp rate must be > 0");
  if (options.bp.max_rounds < 1) fail(ErrorCode::invalid_argument, "bp max rounds must be >= 1");
  if (options.threads < 0) fail(ErrorCode::invalid_argument, "threads must be >= 0");
}

std::vector<Example> make_examples(const ActivityTemplate& tmpl, const std::vector<Sequence>& train) {
  std::vector<Example> out;
  out.reserve(train.size());
  for (const Sequence& seq : train) {
    if (!seq.train) fail(ErrorCode::invalid_argument, "test sequence passed to training");
    auto net = std::make_shared<const MarkovNetwork>(tmpl.network(seq.length()));
    std::vector<std::vector<EdgeId>> trees;
    if (tmpl.flat()) {
      std::vector<EdgeId> chain(net->num_edges());
      std::iota(chain.begin(), chain.end(), 0);
      trees.push_back(std::move(chain));
    } else {
      for (auto& t : spanning_trees_for_grid(*net)) trees.push_back(std::move(t.edges));
    }
    out.push_back(make_example(net, tmpl, to_instance(tmpl, seq, true), std::move(trees)));
  }
  return out;
}

namespace {

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

}  // namespace

TrainOutcome train_model(const RoomModel& room, const std::vector<Sequence>& train,
                         const TrainOptions& options,
                         const std::function<void(const std::string&)>& progress) {
  validate(options);
  if (train.empty()) fail(ErrorCode::invalid_argument, "no training sequences");
  const bool flat = options.trainer == Trainer::flat_crf;
  const ActivityTemplate tmpl(room, flat);
  const auto examples = make_examples(tmpl, train);

  TrainOutcome out;
  out.model.trainer = options.trainer;
  out.model.room = room;
  out.model.beta = options.boost.beta;
  out.model.tree_names = flat ? std::vector<std::string>{"bottom-chain"}
                              : std::vector<std::string>{"top-process", "bottom-process"};
  TrainConfig cfg;
  cfg.optimizer = options.mle;
  cfg.l2 = options.l2;
  cfg.compute.threads = options.threads;

  const auto log_iter = [&](const IterationLog& it) {
    if (progress) {
      progress(format("iteration=%d objective=%.10g grad_norm=%.6g step=%.6g", it.iteration, -it.objective,
                      it.grad_norm, it.step));
    }
  };

  if (options.trainer == Trainer::adaboost_mrf) {
    BoostConfig bc = options.boost;
    bc.train.l2 = options.l2;
    bc.train.compute.threads = options.threads;
    Ensemble ens = boost(examples, tmpl, 2, bc, [&](const RoundRecord& r) {
      if (progress) {
        progress(format("round=%d tree=%d loglik=%.10g descent=%.6g log_loss_h=%.10g accepted=%d", r.round,
                        r.selected_tree, r.weighted_loglik, r.descent, r.log_loss_h, r.accepted ? 1 : 0));
      }
    });
    out.model.params = ens.combined;
    out.model.members = std::move(ens.members);
    out.history.rounds = std::move(ens.history);
    out.history.stop_reason = ens.stop_reason;
    for (const auto& r : out.history.rounds) {
      out.history.grad_evals += std::accumulate(r.grad_evals.begin(), r.grad_evals.end(), 0LL);
    }
    out.lambda = std::move(ens.lambda);
    return out;
  }

  TrainResult tr;
  if (options.trainer == Trainer::mle_exact) {
    tr = mle_baseline(examples, tmpl, CollapsedChainEngine{}, cfg, {}, log_iter);
  } else if (options.trainer == Trainer::mle_bp) {
    tr = mle_baseline(examples, tmpl, LoopyBpEngine{options.bp}, cfg, {}, log_iter);
  } else {
    tr = mle_baseline(examples, tmpl, TreeEngine{0}, cfg, {}, log_iter);
  }
  out.model.params = std::move(tr.params);
  out.history.iterations = std::move(tr.log);
  out.history.grad_evals = tr.evaluations;
  out.history.stop_reason = tr.converged ? "converged" : "max-iters";
  return out;
}

Prediction decode(const Model& model, const Sequence& seq, Decoder decoder, const LoopyBpOptions& bp) {
  const ActivityTemplate tmpl(model.room, model.flat());
  if (model.params.size() != tmpl.dimension()) {
    fail(ErrorCode::schema_mismatch, "model parameters do not match the feature template");
  }
  const MarkovNetwork net = tmpl.network(seq.length());
  const Instance inst = to_unlabelled_instance(tmpl, seq);
  const Potentials pot = make_potentials(net, tmpl, tmpl.extract(net, inst), model.params);
  InferenceResult res;
  if (model.flat()) {
    std::vector<EdgeId> chain(net.num_edges());
    std::iota(chain.begin(), chain.end(), 0);
    res = tree_max_product(net, chain, pot, free_clamp(net));
  } else if (decoder == Decoder::exact) {
    res = exact_collapsed_chain(net, pot, free_clamp(net), true);
  } else {
    LoopyBpOptions opt = bp;
    opt.mode = BpMode::max;
    res = loopy_bp(net, pot, free_clamp(net), opt);
  }
  Prediction p;
  p.id = seq.id;
  p.converged = res.converged;
  const auto& x = *res.map_assignment;
  const int T = seq.length();
  for (int t = 0; t < T; ++t) {
    if (model.flat()) {
      p.bottom.push_back(x[net.node_at(0, t)]);
    } else {
      p.top.push_back(x[net.node_at(0, t)]);
      p.bottom.push_back(x[net.node_at(1, t)]);
    }
  }
  return p;
}

}  // namespace mrf
