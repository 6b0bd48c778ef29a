#include <gtest/gtest.h>

#include <json.hpp>
#include <random>
#include <sstream>

#include "mrforest/error.hpp"
#include "mrforest/io.hpp"

namespace mrf {
namespace {

std::vector<Sequence> small_dataset() {
  GeneratorConfig cfg;
  cfg.num_train = 3;
  cfg.num_test = 2;
  cfg.min_length = 20;
  cfg.max_length = 30;
  return generate_dataset(default_room(), cfg);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::invalid_argument;
}

TEST(Dataset, RoundTripKeepsObservationsBitExact) {
  const auto data = small_dataset();
  std::stringstream ss;
  write_dataset(ss, data);
  const auto back = read_dataset(ss, Split::all);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].id, data[i].id);
    EXPECT_EQ(back[i].train, data[i].train);
    EXPECT_EQ(back[i].channels, data[i].channels);
    EXPECT_EQ(back[i].top_visible, data[i].top_visible);
    EXPECT_EQ(back[i].bottom_visible, data[i].bottom_visible);
    for (int t = 0; t < data[i].length(); ++t) {
      EXPECT_EQ(back[i].bottom[t], data[i].bottom_visible[t] ? data[i].bottom[t] : -1);
      EXPECT_EQ(back[i].top[t], data[i].top_visible[t] ? data[i].top[t] : -1);
    }
  }
  EXPECT_EQ(back[0].activity, -1);
  EXPECT_EQ(back[4].activity, data[4].activity);
}

TEST(Dataset, FileStoresStatesOneBasedAndHidesMaskedLabels) {
  const auto data = small_dataset();
  std::stringstream ss;
  write_dataset(ss, data);
  std::string line;
  std::getline(ss, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_FALSE(j.contains("activity"));
  for (int t = 0; t < data[0].length(); ++t) {
    if (data[0].bottom_visible[t]) {
      EXPECT_EQ(j["bottom"][t].get<int>(), data[0].bottom[t] + 1);
    } else {
      EXPECT_TRUE(j["bottom"][t].is_null());
    }
  }
}

TEST(Dataset, SplitFilter) {
  const auto data = small_dataset();
  std::stringstream a, b;
  write_dataset(a, data);
  b.str(a.str());
  EXPECT_EQ(read_dataset(a, Split::train).size(), 3u);
  const auto test = read_dataset(b, Split::test);
  ASSERT_EQ(test.size(), 2u);
  EXPECT_FALSE(test[0].train);
}

TEST(Dataset, ParseErrorsCarryLineNumbers) {
  const auto data = small_dataset();
  std::stringstream ss;
  write_dataset(ss, data);
  std::string text = ss.str();
  const auto second = text.find('\n') + 1;
  text.insert(second, "{not json}\n");
  std::istringstream in(text);
  try {
    read_dataset(in, Split::all);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Dataset, RejectsMalformedRecords) {
  const auto check = [](const std::string& line) {
    std::istringstream in(line + "\n");
    EXPECT_EQ(code_of([&] { read_dataset(in, Split::all); }), ErrorCode::parse_error) << line;
  };
  const std::string head = R"({"schema":"mrforest.dataset/1","id":0,"split":"train","length":1,)";
  const std::string ch = R"("channels":[[0,0,0,0,0]],)";
  check(head + ch + R"("top":[1],"bottom":[13],"top_visible":[1],"bottom_visible":[1]})");
  check(head + ch + R"("top":[null],"bottom":[1],"top_visible":[1],"bottom_visible":[1]})");
  check(head + ch + R"("top":[2],"bottom":[1],"top_visible":[0],"bottom_visible":[1]})");
  check(head + R"("channels":[[0,0,0]],"top":[1],"bottom":[1],"top_visible":[1],"bottom_visible":[1]})");
  check(R"({"schema":"other","id":0})");
  std::istringstream ok(head + ch + R"("top":[null],"bottom":[12],"top_visible":[0],"bottom_visible":[1]})");
  const auto s = read_dataset(ok, Split::all);
  EXPECT_EQ(s[0].bottom[0], 11);
  EXPECT_EQ(s[0].top[0], -1);
}

TEST(Dataset, StripLabels) {
  const auto s = strip_labels(small_dataset());
  for (const auto& q : s) {
    for (int t = 0; t < q.length(); ++t) {
      EXPECT_EQ(q.bottom[t], -1);
      EXPECT_EQ(q.top_visible[t], 0);
    }
  }
}

Model random_model(Trainer trainer) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  Model m;
  m.trainer = trainer;
  m.room = default_room();
  const ActivityTemplate tmpl(m.room, m.flat());
  m.params.resize(tmpl.dimension());
  for (int k = 0; k < m.params.size(); ++k) m.params[k] = g(rng) * 1e-3 / 7.0;
  m.tree_names = {"top-process", "bottom-process"};
  if (trainer == Trainer::adaboost_mrf) {
    m.members.push_back({1, m.params * 3.0, 0.95});
    m.members.push_back({0, m.params / 3.0, 0.05});
  }
  return m;
}

TEST(ModelFile, RoundTripIsBitExact) {
  for (Trainer t : {Trainer::adaboost_mrf, Trainer::flat_crf}) {
    const Model m = random_model(t);
    const std::string text = model_to_json(m);
    const Model back = model_from_json(text);
    EXPECT_EQ(back.trainer, m.trainer);
    EXPECT_EQ(back.params, m.params);
    ASSERT_EQ(back.members.size(), m.members.size());
    for (std::size_t k = 0; k < m.members.size(); ++k) {
      EXPECT_EQ(back.members[k].params, m.members[k].params);
      EXPECT_EQ(back.members[k].alpha, m.members[k].alpha);
      EXPECT_EQ(back.members[k].tree_id, m.members[k].tree_id);
    }
    EXPECT_EQ(model_to_json(back), text);
  }
}

TEST(ModelFile, LayoutMismatchIsSchemaError) {
  const Model m = random_model(Trainer::mle_exact);
  auto j = nlohmann::ordered_json::parse(model_to_json(m));
  j["blocks"][1]["components"] = 24;
  EXPECT_EQ(code_of([&] { model_from_json(j.dump()); }), ErrorCode::schema_mismatch);
  j = nlohmann::ordered_json::parse(model_to_json(m));
  j["schema"] = "mrforest.model/0";
  EXPECT_EQ(code_of([&] { model_from_json(j.dump()); }), ErrorCode::schema_mismatch);
  j = nlohmann::ordered_json::parse(model_to_json(m));
  j["params"].erase(0);
  EXPECT_EQ(code_of([&] { model_from_json(j.dump()); }), ErrorCode::schema_mismatch);
  EXPECT_EQ(code_of([&] { model_from_json("{"); }), ErrorCode::parse_error);
}

TEST(Room, JsonRoundTrip) {
  const RoomModel r = default_room();
  const RoomModel back = room_from_json(room_to_json(r));
  EXPECT_EQ(room_to_json(back), room_to_json(r));
  EXPECT_EQ(back.compositions[0].repeat, r.compositions[0].repeat);
  EXPECT_EQ(back.primitives[7].from, r.primitives[7].from);
}

TEST(Room, ShippedConfigIsTheDefaultRoom) {
  EXPECT_EQ(room_to_json(room_from_json(read_text_file(MRFOREST_ROOM_CONFIG))), room_to_json(default_room()));
}

TEST(Predictions, RoundTripAndEvaluate) {
  const auto data = small_dataset();
  std::vector<Sequence> test(data.begin() + 3, data.end());
  std::vector<Prediction> preds;
  for (const auto& s : test) preds.push_back({s.id, s.top, s.bottom, true});
  std::stringstream ss;
  write_predictions(ss, preds);
  const auto back = read_predictions(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].bottom, preds[1].bottom);
  const auto rep = evaluate(back, test);
  EXPECT_TRUE(rep.has_top);
  EXPECT_DOUBLE_EQ(rep.bottom.macro_f1, 1.0);
  EXPECT_DOUBLE_EQ(rep.top.macro_f1, 1.0);
  const auto j = nlohmann::json::parse(metrics_to_json(rep));
  EXPECT_NE(j["definition"].get<std::string>().find("excluded"), std::string::npos);

  preds[0].bottom.pop_back();
  EXPECT_EQ(code_of([&] { evaluate(preds, test); }), ErrorCode::invalid_argument);
  preds[0] = {999, {}, {}, true};
  EXPECT_EQ(code_of([&] { evaluate(preds, test); }), ErrorCode::invalid_argument);
}

TEST(History, SummaryLineAndNoWallTime) {
  TrainHistory h;
  RoundRecord r;
  r.round = 1;
  r.seconds = 12.5;
  r.grad_evals = {3, 3};
  h.rounds.push_back(r);
  h.grad_evals = 6;
  h.stop_reason = "max-rounds";
  std::stringstream ss;
  write_history(ss, h, 4);
  const std::string text = ss.str();
  EXPECT_EQ(text.find("seconds"), std::string::npos);
  std::string first, last;
  std::getline(ss, first);
  std::getline(ss, last);
  const auto j = nlohmann::json::parse(last);
  EXPECT_EQ(j["summary"]["grad_evals"].get<int>(), 6);
  EXPECT_EQ(j["summary"]["stop_reason"].get<std::string>(), "max-rounds");
  std::stringstream t;
  write_timing(t, h, 20.0);
  EXPECT_NE(t.str().find("12.5"), std::string::npos);
}

TEST(Files, MissingFileIsParseError) {
  EXPECT_EQ(code_of([] { read_text_file("/nonexistent/mrforest/file"); }), ErrorCode::parse_error);
  EXPECT_EQ(code_of([] { write_text_file("/nonexistent/mrforest/file", "x"); }), ErrorCode::parse_error);
}

}  // namespace
}  // namespace mrf
