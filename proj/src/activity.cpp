#include "mrforest/activity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mrforest/error.hpp"

namespace mrf {

RoomModel default_room() {
  RoomModel room;
  room.landmarks = {
      {"Door", {0.3, 0.3}},         {"Cupboard", {5.5, 0.5}}, {"Fridge", {5.5, 3.5}},
      {"Dining chair", {3.0, 2.0}}, {"TV chair", {0.5, 3.5}}, {"Stove", {3.5, 3.7}},
  };
  enum { door, cupboard, fridge, dining, tv, stove };
  room.primitives = {
      {door, cupboard}, {cupboard, fridge}, {fridge, dining}, {dining, door},
      {door, tv},       {tv, cupboard},     {fridge, tv},     {tv, door},
      {fridge, stove},  {stove, dining},    {fridge, door},   {dining, fridge},
  };
  room.compositions = {
      {"short-meal", {2, 11, 10}, {2, 11}, 0.5},
      {"have-snack", {1, 6}, {}, 0.0},
      {"normal-meal", {0, 1, 8, 9, 3}, {}, 0.0},
  };
  return room;
}

void validate(const RoomModel& room) {
  if (!(room.width > 0.0 && room.height > 0.0)) fail(ErrorCode::invalid_argument, "room: extents must be > 0");
  if (room.cols < 1 || room.rows < 1) fail(ErrorCode::invalid_argument, "room: grid must be at least 1x1");
  if (room.num_cells() != 24) fail(ErrorCode::invalid_argument, "room: the quantization grid must have 24 cells");
  if (room.primitives.size() != static_cast<std::size_t>(kBottomStates)) {
    fail(ErrorCode::invalid_argument, "room: exactly 12 primitives are required");
  }
  if (room.compositions.size() != static_cast<std::size_t>(kTopStates)) {
    fail(ErrorCode::invalid_argument, "room: exactly 3 compositions are required");
  }
  const int nl = static_cast<int>(room.landmarks.size());
  for (const auto& p : room.primitives) {
    if (p.from < 0 || p.from >= nl || p.to < 0 || p.to >= nl || p.from == p.to) {
      fail(ErrorCode::invalid_argument, "room: primitive refers to an unknown landmark");
    }
  }
  for (const auto& c : room.compositions) {
    if (c.primitives.empty()) fail(ErrorCode::invalid_argument, "room: composition '" + c.name + "' is empty");
    for (int k : c.primitives) {
      if (k < 0 || k >= kBottomStates) fail(ErrorCode::invalid_argument, "room: unknown primitive in '" + c.name + "'");
    }
    for (std::size_t k = 1; k < c.primitives.size(); ++k) {
      if (room.primitives[c.primitives[k - 1]].to != room.primitives[c.primitives[k]].from) {
        fail(ErrorCode::invalid_argument, "room: composition '" + c.name + "' is not a connected path");
      }
    }
    if (!c.repeat.empty()) {
      const auto it = std::search(c.primitives.begin(), c.primitives.end(), c.repeat.begin(), c.repeat.end());
      if (it == c.primitives.end()) {
        fail(ErrorCode::invalid_argument, "room: repeat of '" + c.name + "' is not part of its chain");
      }
      if (room.primitives[c.repeat.back()].to != room.primitives[c.repeat.front()].from) {
        fail(ErrorCode::invalid_argument, "room: repeat of '" + c.name + "' does not return to its start");
      }
    }
    if (!(c.repeat_probability >= 0.0 && c.repeat_probability <= 1.0)) {
      fail(ErrorCode::invalid_argument, "room: repeat probability must be in [0,1]");
    }
  }
}

int quantize(const RoomModel& room, Point p) {
  const auto index = [](double v, double extent, int n) {
    const int k = static_cast<int>(std::floor(v * n / extent));
    return std::clamp(k, 0, n - 1);
  };
  const int col = index(p.x, room.width, room.cols);
  const int row = index(p.y, room.height, room.rows);
  return row * room.cols + col + 1;
}

std::vector<std::vector<double>> trajectory_channels(const std::vector<Point>& points) {
  std::vector<std::vector<double>> out(points.size(), std::vector<double>(kChannels, 0.0));
  for (std::size_t t = 0; t < points.size(); ++t) {
    const double vx = t == 0 ? 0.0 : points[t].x - points[t - 1].x;
    const double vy = t == 0 ? 0.0 : points[t].y - points[t - 1].y;
    out[t] = {points[t].x, points[t].y, vx, vy, std::hypot(vx, vy)};
  }
  return out;
}

void validate(const GeneratorConfig& config, const RoomModel& room) {
  validate(room);
  if (config.num_train < 0 || config.num_test < 0) fail(ErrorCode::invalid_argument, "generator: negative split size");
  if (!(config.hidden_fraction >= 0.0 && config.hidden_fraction <= 1.0)) {
    fail(ErrorCode::invalid_argument, "generator: hidden_fraction must be in [0,1]");
  }
  if (config.min_length < 1 || config.max_length < config.min_length) {
    fail(ErrorCode::invalid_argument, "generator: need 1 <= min_length <= max_length");
  }
  if (config.min_slices_per_primitive < 1) {
    fail(ErrorCode::invalid_argument, "generator: min_slices_per_primitive must be >= 1");
  }
  if (!std::isfinite(config.noise_sigma)) fail(ErrorCode::invalid_argument, "generator: noise_sigma must be finite");
}

namespace {

/// Hides exactly round(fraction * n) uniformly chosen slots.
std::vector<char> mask(int n, double fraction, std::mt19937_64& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> visible(n, 1);
  const auto hidden = static_cast<int>(std::llround(fraction * n));
  for (int k = 0; k < hidden; ++k) visible[order[k]] = 0;
  return visible;
}

}  // namespace

Sequence generate_sequence(const RoomModel& room, const GeneratorConfig& config, int index, bool train) {
  validate(config, room);
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  const double sigma = config.noise_sigma < 0.0 ? 0.05 * room.width : config.noise_sigma;

  Sequence s;
  s.id = index;
  s.train = train;
  s.activity = std::uniform_int_distribution<int>(0, static_cast<int>(room.compositions.size()) - 1)(rng);
  const Composition& comp = room.compositions[s.activity];
  std::vector<int> prims = comp.primitives;
  if (!comp.repeat.empty() && std::bernoulli_distribution(comp.repeat_probability)(rng)) {
    const auto it = std::search(prims.begin(), prims.end(), comp.repeat.begin(), comp.repeat.end());
    prims.insert(it + static_cast<std::ptrdiff_t>(comp.repeat.size()), comp.repeat.begin(), comp.repeat.end());
  }
  const int K = static_cast<int>(prims.size());
  const int floor_len = K * config.min_slices_per_primitive;
  const int lo = std::max(config.min_length, floor_len);
  const int T = std::uniform_int_distribution<int>(lo, std::max(lo, config.max_length))(rng);

  // Slices per primitive: the minimum plus a share of the rest proportional
  // to path length (largest remainder, ties to the earlier primitive).
  std::vector<double> dist(K);
  for (int k = 0; k < K; ++k) {
    const Point a = room.landmarks[room.primitives[prims[k]].from].pos;
    const Point b = room.landmarks[room.primitives[prims[k]].to].pos;
    dist[k] = std::hypot(b.x - a.x, b.y - a.y);
  }
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  const int extra = T - floor_len;
  std::vector<int> n(K, config.min_slices_per_primitive);
  std::vector<std::pair<double, int>> rem;
  int used = 0;
  for (int k = 0; k < K; ++k) {
    const double share = extra * dist[k] / total;
    const int whole = static_cast<int>(std::floor(share));
    n[k] += whole;
    used += whole;
    rem.emplace_back(share - whole, k);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < extra - used; ++k) ++n[rem[k].second];

  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<Point> noisy;
  int begin = 0;
  for (int k = 0; k < K; ++k) {
    const Point a = room.landmarks[room.primitives[prims[k]].from].pos;
    const Point b = room.landmarks[room.primitives[prims[k]].to].pos;
    for (int j = 0; j < n[k]; ++j) {
      const double f = n[k] > 1 ? static_cast<double>(j) / (n[k] - 1) : 0.5;
      s.clean.push_back({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
      s.bottom.push_back(prims[k]);
    }
    s.plan.push_back({prims[k], begin, begin + n[k]});
    begin += n[k];
  }
  for (const Point& p : s.clean) {
    const double dx = noise(rng);
    const double dy = noise(rng);
    noisy.push_back({p.x + dx, p.y + dy});
  }
  s.channels = trajectory_channels(noisy);
  s.top.assign(T, s.activity);
  if (train) {
    s.top_visible = mask(T, config.hidden_fraction, rng);
    s.bottom_visible = mask(T, config.hidden_fraction, rng);
  } else {
    s.top_visible.assign(T, 1);
    s.bottom_visible.assign(T, 1);
  }
  return s;
}

std::vector<Sequence> generate_dataset(const RoomModel& room, const GeneratorConfig& config) {
  validate(config, room);
  std::vector<Sequence> out;
  out.reserve(config.num_train + config.num_test);
  for (int i = 0; i < config.num_train + config.num_test; ++i) {
    out.push_back(generate_sequence(room, config, i, i < config.num_train));
  }
  return out;
}

ActivityTemplate::ActivityTemplate(RoomModel room, bool flat) : room_(std::move(room)), flat_(flat) {
  validate(room_);
  constexpr int top_offsets = 2 * kTopWindow / kTopWindowStep + 1;
  constexpr int bottom_offsets = 2 * kBottomWindow + 1;
  if (!flat_) {
    top_da_ = add_block({"top-data-association", FeatureKind::data_association, 1, kTopStates, 1,
                         top_offsets * room_.num_cells(), 0});
  }
  bottom_da_ = add_block({"bottom-data-association", FeatureKind::data_association, 1, kBottomStates, 1,
                          bottom_offsets * kChannels, 0});
  if (!flat_) {
    top_tr_ = add_block({"top-temporal", FeatureKind::temporal_relation, 2, kTopStates, kTopStates, 1, 0});
  }
  bottom_tr_ = add_block({"bottom-temporal", FeatureKind::temporal_relation, 2, kBottomStates, kBottomStates, 1, 0});
  if (!flat_) {
    cross_ = add_block({"cross", FeatureKind::cross_semantic_relation, 2, kTopStates, kBottomStates, 1, 0});
  }
}

MarkovNetwork ActivityTemplate::network(int slices) const {
  if (slices < 1) fail(ErrorCode::invalid_argument, "activity network needs at least one slice");
  return flat_ ? build_network(1, slices, {kBottomStates}) : build_network(2, slices, {kTopStates, kBottomStates});
}

CliqueFeatures ActivityTemplate::extract(const MarkovNetwork& net, const Instance& inst) const {
  const int levels = flat_ ? 1 : 2;
  if (!net.grid() || net.grid()->levels != levels) {
    fail(ErrorCode::schema_mismatch, "activity template applied to a network of the wrong shape");
  }
  const int T = net.grid()->slices;
  const int bottom = levels - 1;
  if (net.state_size(net.node_at(bottom, 0)) != kBottomStates ||
      (!flat_ && net.state_size(net.node_at(0, 0)) != kTopStates)) {
    fail(ErrorCode::schema_mismatch, "activity network has unexpected state sizes");
  }
  if (static_cast<int>(inst.observations.size()) != T) {
    fail(ErrorCode::schema_mismatch, "observation length does not match the network");
  }
  for (const auto& o : inst.observations) {
    if (static_cast<int>(o.size()) != kChannels) {
      fail(ErrorCode::schema_mismatch, "each slice needs exactly 5 observation channels");
    }
  }
  std::vector<int> cells(T);
  for (int t = 0; t < T; ++t) cells[t] = quantize(room_, {inst.observations[t][0], inst.observations[t][1]});

  CliqueFeatures out;
  out.nodes.resize(net.num_nodes());
  out.edges.resize(net.num_edges());
  for (int t = 0; t < T; ++t) {
    if (!flat_) {
      auto& terms = out.nodes[net.node_at(0, t)];
      terms.block = top_da_;
      for (int k = 0, eps = -kTopWindow; eps <= kTopWindow; ++k, eps += kTopWindowStep) {
        const int tau = t + eps;
        if (tau < 0 || tau >= T) continue;
        terms.entries.push_back({k * room_.num_cells() + cells[tau] - 1, 1.0});
      }
    }
    auto& terms = out.nodes[net.node_at(bottom, t)];
    terms.block = bottom_da_;
    for (int k = 0, eps = -kBottomWindow; eps <= kBottomWindow; ++k, ++eps) {
      const int tau = t + eps;
      if (tau < 0 || tau >= T) continue;
      for (int m = 0; m < kChannels; ++m) terms.entries.push_back({k * kChannels + m, inst.observations[tau][m]});
    }
  }
  for (int e = 0; e < net.num_edges(); ++e) {
    const Edge& edge = net.edge(e);
    const int la = net.level_of(edge.a);
    const int lb = net.level_of(edge.b);
    auto& terms = out.edges[e];
    if (la != lb) {
      terms.block = cross_;
    } else {
      terms.block = la == bottom ? bottom_tr_ : top_tr_;
    }
    terms.entries.push_back({0, 1.0});
  }
  return out;
}

namespace {

Instance build_instance(const ActivityTemplate& tmpl, const Sequence& seq, bool labels, bool hide) {
  const int T = seq.length();
  Instance inst;
  inst.observations = seq.channels;
  const int levels = tmpl.flat() ? 1 : 2;
  inst.labels.assign(static_cast<std::size_t>(levels) * T, std::nullopt);
  if (!labels) return inst;
  if (static_cast<int>(seq.top.size()) != T || static_cast<int>(seq.bottom.size()) != T ||
      static_cast<int>(seq.top_visible.size()) != T || static_cast<int>(seq.bottom_visible.size()) != T) {
    fail(ErrorCode::schema_mismatch, "sequence " + std::to_string(seq.id) + ": label length mismatch");
  }
  for (int t = 0; t < T; ++t) {
    if (!tmpl.flat() && (!hide || seq.top_visible[t])) inst.labels[t] = seq.top[t];
    if (!hide || seq.bottom_visible[t]) inst.labels[static_cast<std::size_t>(levels - 1) * T + t] = seq.bottom[t];
  }
  return inst;
}

}  // namespace

Instance to_instance(const ActivityTemplate& tmpl, const Sequence& seq, bool hide) {
  return build_instance(tmpl, seq, true, hide);
}

Instance to_unlabelled_instance(const ActivityTemplate& tmpl, const Sequence& seq) {
  return build_instance(tmpl, seq, false, false);
}

}  // namespace mrf
