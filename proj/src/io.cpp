#include "mrforest/io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mrforest/error.hpp"

namespace mrf {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& what) { fail(ErrorCode::parse_error, what); }

json room_json(const RoomModel& room) {
  json j;
  j["width"] = room.width;
  j["height"] = room.height;
  j["cols"] = room.cols;
  j["rows"] = room.rows;
  j["landmarks"] = json::array();
  for (const auto& l : room.landmarks) j["landmarks"].push_back({{"name", l.name}, {"x", l.pos.x}, {"y", l.pos.y}});
  j["primitives"] = json::array();
  for (std::size_t k = 0; k < room.primitives.size(); ++k) {
    const auto& p = room.primitives[k];
    j["primitives"].push_back(
        {{"id", k + 1}, {"from", room.landmarks[p.from].name}, {"to", room.landmarks[p.to].name}});
  }
  j["compositions"] = json::array();
  for (std::size_t k = 0; k < room.compositions.size(); ++k) {
    const auto& c = room.compositions[k];
    json prims = json::array(), rep = json::array();
    for (int p : c.primitives) prims.push_back(p + 1);
    for (int p : c.repeat) rep.push_back(p + 1);
    j["compositions"].push_back({{"id", k + 1},
                                 {"name", c.name},
                                 {"primitives", prims},
                                 {"repeat", rep},
                                 {"repeat_probability", c.repeat_probability}});
  }
  return j;
}

RoomModel room_from(const json& j) {
  RoomModel room;
  room.width = j.at("width").get<double>();
  room.height = j.at("height").get<double>();
  room.cols = j.at("cols").get<int>();
  room.rows = j.at("rows").get<int>();
  std::map<std::string, int> index;
  for (const auto& l : j.at("landmarks")) {
    const auto name = l.at("name").get<std::string>();
    if (index.count(name)) bad("room: duplicate landmark '" + name + "'");
    index[name] = static_cast<int>(room.landmarks.size());
    room.landmarks.push_back({name, {l.at("x").get<double>(), l.at("y").get<double>()}});
  }
  const auto landmark = [&](const json& v) {
    const auto it = index.find(v.get<std::string>());
    if (it == index.end()) bad("room: unknown landmark '" + v.get<std::string>() + "'");
    return it->second;
  };
  for (const auto& p : j.at("primitives")) room.primitives.push_back({landmark(p.at("from")), landmark(p.at("to"))});
  for (const auto& c : j.at("compositions")) {
    Composition comp;
    comp.name = c.at("name").get<std::string>();
    for (const auto& p : c.at("primitives")) comp.primitives.push_back(p.get<int>() - 1);
    if (c.contains("repeat")) {
      for (const auto& p : c.at("repeat")) comp.repeat.push_back(p.get<int>() - 1);
    }
    comp.repeat_probability = c.value("repeat_probability", 0.0);
    room.compositions.push_back(std::move(comp));
  }
  validate(room);
  return room;
}

json labels_json(const std::vector<int>& labels, const std::vector<char>& visible) {
  json out = json::array();
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (visible[t] && labels[t] >= 0) {
      out.push_back(labels[t] + 1);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

json flags_json(const std::vector<char>& visible) {
  json out = json::array();
  for (char v : visible) out.push_back(v ? 1 : 0);
  return out;
}

json states_json(const std::vector<int>& states) {
  json out = json::array();
  for (int s : states) out.push_back(s + 1);
  return out;
}

void read_labels(const json& labels, const json& flags, int T, int states, std::vector<int>& out,
                 std::vector<char>& visible) {
  if (!labels.is_array() || static_cast<int>(labels.size()) != T || !flags.is_array() ||
      static_cast<int>(flags.size()) != T) {
    bad("label arrays must have one entry per slice");
  }
  out.assign(T, -1);
  visible.assign(T, 0);
  for (int t = 0; t < T; ++t) {
    const int flag = flags[t].get<int>();
    if (flag != 0 && flag != 1) bad("visibility flags must be 0 or 1");
    if (flag == 1) {
      if (labels[t].is_null()) bad("visible slot " + std::to_string(t) + " has no label");
      const int s = labels[t].get<int>();
      if (s < 1 || s > states) bad("label " + std::to_string(s) + " out of range 1.." + std::to_string(states));
      out[t] = s - 1;
      visible[t] = 1;
    } else if (!labels[t].is_null()) {
      bad("hidden slot " + std::to_string(t) + " carries a label");
    }
  }
}

json vector_json(const ParameterVector& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

ParameterVector vector_from(const json& j) {
  ParameterVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  return v;
}

json level_json(const LevelMetrics& m) {
  json classes = json::array();
  for (const auto& c : m.classes) {
    classes.push_back({{"label", c.label + 1},
                       {"counted", c.counted},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"tp", c.tp},
                       {"fp", c.fp},
                       {"fn", c.fn}});
  }
  return {{"macro_f1", m.macro_f1}, {"slices", m.slices}, {"classes", classes}};
}

}  // namespace

std::string room_to_json(const RoomModel& room) { return room_json(room).dump(2) + "\n"; }

RoomModel room_from_json(const std::string& text) {
  try {
    return room_from(json::parse(text));
  } catch (const json::exception& e) {
    bad(std::string("room config: ") + e.what());
  }
}

void write_dataset(std::ostream& out, const std::vector<Sequence>& data) {
  for (const Sequence& s : data) {
    json j;
    j["schema"] = kDatasetSchema;
    j["id"] = s.id;
    j["split"] = s.train ? "train" : "test";
    if (!s.train) j["activity"] = s.activity + 1;
    j["length"] = s.length();
    j["channels"] = s.channels;
    j["top"] = labels_json(s.top, s.top_visible);
    j["bottom"] = labels_json(s.bottom, s.bottom_visible);
    j["top_visible"] = flags_json(s.top_visible);
    j["bottom_visible"] = flags_json(s.bottom_visible);
    out << j.dump() << '\n';
  }
}

void write_dataset_file(const std::string& path, const std::vector<Sequence>& data) {
  std::ostringstream out;
  write_dataset(out, data);
  write_text_file(path, out.str());
}

std::vector<Sequence> read_dataset(std::istream& in, Split split) {
  std::vector<Sequence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.value("schema", std::string()) != kDatasetSchema) bad("unknown record schema");
      const auto sp = j.at("split").get<std::string>();
      if (sp != "train" && sp != "test") bad("split must be 'train' or 'test'");
      const bool train = sp == "train";
      if ((split == Split::train && !train) || (split == Split::test && train)) continue;
      Sequence s;
      s.id = j.at("id").get<int>();
      s.train = train;
      s.activity = j.contains("activity") ? j.at("activity").get<int>() - 1 : -1;
      const int T = j.at("length").get<int>();
      if (T < 1) bad("length must be >= 1");
      const auto& ch = j.at("channels");
      if (!ch.is_array() || static_cast<int>(ch.size()) != T) bad("channels must have one row per slice");
      for (const auto& row : ch) {
        if (!row.is_array() || row.size() != static_cast<std::size_t>(kChannels)) {
          bad("each channel row needs 5 values");
        }
        std::vector<double> r;
        for (const auto& v : row) r.push_back(v.get<double>());
        s.channels.push_back(std::move(r));
      }
      read_labels(j.at("top"), j.at("top_visible"), T, kTopStates, s.top, s.top_visible);
      read_labels(j.at("bottom"), j.at("bottom_visible"), T, kBottomStates, s.bottom, s.bottom_visible);
      if (!train) {
        for (int t = 0; t < T; ++t) {
          if (!s.top_visible[t] || !s.bottom_visible[t]) bad("test records must be fully labelled");
        }
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      bad("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::parse_error) throw;
      bad("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Sequence> read_dataset_file(const std::string& path, Split split) {
  std::istringstream in(read_text_file(path));
  try {
    return read_dataset(in, split);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::parse_error) throw;
    bad(path + ": " + e.what());
  }
}

std::vector<Sequence> strip_labels(std::vector<Sequence> data) {
  for (auto& s : data) {
    s.activity = -1;
    s.plan.clear();
    s.top.assign(s.length(), -1);
    s.bottom.assign(s.length(), -1);
    s.top_visible.assign(s.length(), 0);
    s.bottom_visible.assign(s.length(), 0);
  }
  return data;
}

std::string model_to_json(const Model& model) {
  const ActivityTemplate tmpl(model.room, model.flat());
  json j;
  j["schema"] = kModelSchema;
  j["trainer"] = to_string(model.trainer);
  j["levels"] = model.flat() ? 1 : 2;
  j["state_sizes"] = model.flat() ? json::array({kBottomStates}) : json::array({kTopStates, kBottomStates});
  j["room"] = room_json(model.room);
  json blocks = json::array();
  for (const auto& b : tmpl.blocks()) {
    blocks.push_back({{"name", b.name},
                      {"kind", to_string(b.kind)},
                      {"offset", b.offset},
                      {"rows", b.rows},
                      {"cols", b.cols},
                      {"components", b.components}});
  }
  j["blocks"] = blocks;
  j["dimension"] = tmpl.dimension();
  j["beta"] = model.beta;
  j["trees"] = model.tree_names;
  j["params"] = vector_json(model.params);
  json members = json::array();
  for (const auto& m : model.members) {
    members.push_back({{"tree_id", m.tree_id}, {"alpha", m.alpha}, {"params", vector_json(m.params)}});
  }
  j["members"] = members;
  return j.dump(1) + "\n";
}

Model model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("model: ") + e.what());
  }
  try {
    if (j.value("schema", std::string()) != kModelSchema) {
      fail(ErrorCode::schema_mismatch, "model: expected schema " + std::string(kModelSchema));
    }
    Model m;
    m.trainer = parse_trainer(j.at("trainer").get<std::string>());
    m.room = room_from(j.at("room"));
    m.beta = j.at("beta").get<double>();
    m.tree_names = j.at("trees").get<std::vector<std::string>>();
    const ActivityTemplate tmpl(m.room, m.flat());
    if (j.at("dimension").get<int>() != tmpl.dimension() || j.at("blocks").size() != tmpl.blocks().size()) {
      fail(ErrorCode::schema_mismatch, "model: feature layout does not match this build");
    }
    for (std::size_t k = 0; k < tmpl.blocks().size(); ++k) {
      const auto& b = tmpl.blocks()[k];
      const auto& jb = j.at("blocks")[k];
      if (jb.at("name").get<std::string>() != b.name || jb.at("offset").get<int>() != b.offset ||
          jb.at("rows").get<int>() != b.rows || jb.at("cols").get<int>() != b.cols ||
          jb.at("components").get<int>() != b.components) {
        fail(ErrorCode::schema_mismatch, "model: block '" + b.name + "' does not match this build");
      }
    }
    m.params = vector_from(j.at("params"));
    if (m.params.size() != tmpl.dimension()) fail(ErrorCode::schema_mismatch, "model: parameter length mismatch");
    for (const auto& jm : j.at("members")) {
      EnsembleMember em{jm.at("tree_id").get<int>(), vector_from(jm.at("params")), jm.at("alpha").get<double>()};
      if (em.params.size() != tmpl.dimension()) fail(ErrorCode::schema_mismatch, "model: member length mismatch");
      m.members.push_back(std::move(em));
    }
    return m;
  } catch (const json::exception& e) {
    bad(std::string("model: ") + e.what());
  }
}

void write_model_file(const std::string& path, const Model& model) { write_text_file(path, model_to_json(model)); }

Model read_model_file(const std::string& path) { return model_from_json(read_text_file(path)); }

void write_history(std::ostream& out, const TrainHistory& history, int instances) {
  for (const auto& r : history.rounds) {
    json j;
    j["round"] = r.round;
    j["selected_tree"] = r.selected_tree;
    j["tree_objectives"] = r.tree_objectives;
    j["weighted_loglik"] = r.weighted_loglik;
    j["descent"] = r.descent;
    j["accepted"] = r.accepted;
    j["alpha"] = r.alpha;
    j["alphas"] = r.alphas;
    j["log_loss_h"] = r.log_loss_h;
    j["loss_increased"] = r.loss_increased;
    j["lambda_entropy"] = r.lambda_entropy;
    j["lambda_sum"] = r.lambda_sum;
    j["lambda_up"] = r.lambda_up;
    j["s"] = r.s;
    j["grad_evals"] = r.grad_evals;
    j["tree_sweeps"] = r.tree_sweeps;
    j["instances"] = instances;
    out << j.dump() << '\n';
  }
  for (const auto& it : history.iterations) {
    json j;
    j["iteration"] = it.iteration;
    j["loglik"] = -it.objective;
    j["grad_norm"] = it.grad_norm;
    j["step"] = it.step;
    out << j.dump() << '\n';
  }
  json summary;
  summary["summary"] = {{"grad_evals", history.grad_evals},
                        {"rounds", history.rounds.size()},
                        {"iterations", history.iterations.size()},
                        {"stop_reason", history.stop_reason},
                        {"instances", instances}};
  out << summary.dump() << '\n';
}

void write_timing(std::ostream& out, const TrainHistory& history, double total_seconds) {
  for (const auto& r : history.rounds) out << json{{"round", r.round}, {"seconds", r.seconds}}.dump() << '\n';
  out << json{{"total_seconds", total_seconds}}.dump() << '\n';
}

void write_predictions(std::ostream& out, const std::vector<Prediction>& preds) {
  for (const auto& p : preds) {
    json j;
    j["id"] = p.id;
    if (!p.top.empty()) j["top"] = states_json(p.top);
    j["bottom"] = states_json(p.bottom);
    j["converged"] = p.converged;
    out << j.dump() << '\n';
  }
}

std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Prediction p;
      p.id = j.at("id").get<int>();
      if (j.contains("top")) {
        for (const auto& v : j.at("top")) p.top.push_back(v.get<int>() - 1);
      }
      for (const auto& v : j.at("bottom")) p.bottom.push_back(v.get<int>() - 1);
      p.converged = j.value("converged", true);
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      bad("predictions line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

EvalReport evaluate(const std::vector<Prediction>& preds, const std::vector<Sequence>& truth) {
  std::map<int, const Sequence*> by_id;
  for (const auto& s : truth) by_id[s.id] = &s;
  if (preds.empty()) fail(ErrorCode::invalid_argument, "evaluate: no predictions");
  EvalReport rep;
  rep.has_top = !preds.front().top.empty();
  MacroF1 top(kTopStates), bottom(kBottomStates);
  for (const auto& p : preds) {
    const auto it = by_id.find(p.id);
    if (it == by_id.end()) fail(ErrorCode::invalid_argument, "evaluate: no ground truth for sequence " + std::to_string(p.id));
    const Sequence& s = *it->second;
    if (static_cast<int>(p.bottom.size()) != s.length()) {
      fail(ErrorCode::invalid_argument, "evaluate: length mismatch for sequence " + std::to_string(p.id));
    }
    for (int t = 0; t < s.length(); ++t) {
      if (!s.bottom_visible[t] || !s.top_visible[t]) {
        fail(ErrorCode::invalid_argument, "evaluate: ground truth of sequence " + std::to_string(p.id) + " is incomplete");
      }
    }
    bottom.add(s.bottom, p.bottom);
    if (rep.has_top) {
      if (static_cast<int>(p.top.size()) != s.length()) {
        fail(ErrorCode::invalid_argument, "evaluate: top length mismatch for sequence " + std::to_string(p.id));
      }
      top.add(s.top, p.top);
    } else if (!p.top.empty()) {
      fail(ErrorCode::invalid_argument, "evaluate: predictions mix one- and two-level output");
    }
  }
  rep.bottom = bottom.result();
  if (rep.has_top) rep.top = top.result();
  return rep;
}

std::string metrics_to_json(const EvalReport& report) {
  json j;
  j["definition"] =
      "macro-F1 = unweighted mean of per-class F1 over slice-level decisions; classes absent from both "
      "truth and prediction are excluded";
  if (report.has_top) j["top"] = level_json(report.top);
  j["bottom"] = level_json(report.bottom);
  return j.dump(2) + "\n";
}

void write_timeline(std::ostream& out, const std::vector<Prediction>& preds, const std::vector<Sequence>& truth) {
  std::map<int, const Sequence*> by_id;
  for (const auto& s : truth) by_id[s.id] = &s;
  for (const auto& p : preds) {
    const auto it = by_id.find(p.id);
    if (it == by_id.end()) continue;
    json j;
    j["id"] = p.id;
    j["bottom_truth"] = states_json(it->second->bottom);
    j["bottom_pred"] = states_json(p.bottom);
    if (!p.top.empty()) {
      j["top_truth"] = states_json(it->second->top);
      j["top_pred"] = states_json(p.top);
    }
    out << j.dump() << '\n';
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) bad("cannot write " + path);
  out << text;
  if (!out) bad("write failed: " + path);
}

}  // namespace mrf
