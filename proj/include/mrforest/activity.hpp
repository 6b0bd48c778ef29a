#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mrforest/features.hpp"
#include "mrforest/graph.hpp"
#include "mrforest/instance.hpp"

namespace mrf {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Landmark {
  std::string name;
  Point pos;
};

struct Primitive {
  int from = 0;  // landmark index
  int to = 0;
};

struct Composition {
  std::string name;
  std::vector<int> primitives;  // 0-based primitive indices
  /// Inserted once more after its first occurrence with this probability.
  std::vector<int> repeat;
  double repeat_probability = 0.0;
};

/// Room geometry, quantization grid, primitive table and composition map.
struct RoomModel {
  double width = 6.0;
  double height = 4.0;
  int cols = 6;
  int rows = 4;
  std::vector<Landmark> landmarks;
  std::vector<Primitive> primitives;
  std::vector<Composition> compositions;

  int num_cells() const { return cols * rows; }
};

/// The shipped room: six landmarks, the twelve primitives, three activities.
RoomModel default_room();
void validate(const RoomModel& room);

/// Row-major cell index in 1..cols*rows with half-open cells; points outside
/// the room are clamped onto it.
int quantize(const RoomModel& room, Point p);

inline constexpr int kChannels = 5;  // X, Y, X-velocity, Y-velocity, speed

/// Per-slice channels; velocities are first differences (zero at slice 0).
std::vector<std::vector<double>> trajectory_channels(const std::vector<Point>& points);

struct Segment {
  int primitive = 0;  // 0-based
  int begin = 0;      // first slice
  int end = 0;        // one past the last slice
};

struct Sequence {
  int id = 0;
  bool train = true;
  int activity = 0;                     // 0-based top state
  std::vector<Segment> plan;
  std::vector<Point> clean;             // noise-free positions
  std::vector<std::vector<double>> channels;
  std::vector<int> top;                 // 0-based, per slice
  std::vector<int> bottom;
  std::vector<char> top_visible;        // 1 visible, 0 hidden
  std::vector<char> bottom_visible;

  int length() const { return static_cast<int>(channels.size()); }
};

struct GeneratorConfig {
  int num_train = 45;
  int num_test = 45;
  std::uint64_t seed = 7;
  double noise_sigma = -1.0;  // negative: 5% of the room width
  double hidden_fraction = 0.5;
  int min_length = 40;
  int max_length = 120;
  int min_slices_per_primitive = 4;
};

void validate(const GeneratorConfig& config, const RoomModel& room);

/// Sequence `index` drawn from its own generator seeded by (seed, index).
/// Train sequences hide round(hidden_fraction * T) slots per level; test
/// sequences keep every label visible.
Sequence generate_sequence(const RoomModel& room, const GeneratorConfig& config, int index, bool train);

/// Train sequences first (ids 0..num_train-1), then test sequences.
std::vector<Sequence> generate_dataset(const RoomModel& room, const GeneratorConfig& config);

inline constexpr int kTopStates = 3;
inline constexpr int kBottomStates = 12;
inline constexpr int kBottomWindow = 2;   // offsets -2..2
inline constexpr int kTopWindow = 20;     // offsets -20..20
inline constexpr int kTopWindowStep = 5;

/// Two-level features (top cells over a wide window, bottom channels over a
/// short window, temporal and cross indicators), or with `flat` only the
/// bottom level as a single chain.
class ActivityTemplate final : public FeatureTemplate {
 public:
  explicit ActivityTemplate(RoomModel room, bool flat = false);

  CliqueFeatures extract(const MarkovNetwork& net, const Instance& inst) const override;
  bool flat() const { return flat_; }
  const RoomModel& room() const { return room_; }

  /// Network for a sequence of `slices` slices.
  MarkovNetwork network(int slices) const;

 private:
  RoomModel room_;
  bool flat_;
  int top_da_ = -1, bottom_da_ = -1, top_tr_ = -1, bottom_tr_ = -1, cross_ = -1;
};

/// Instance over `tmpl.network(T)`. With `hide` the sequence's visibility
/// flags apply; otherwise every label is visible.
Instance to_instance(const ActivityTemplate& tmpl, const Sequence& seq, bool hide);

/// Observation-only instance for decoding.
Instance to_unlabelled_instance(const ActivityTemplate& tmpl, const Sequence& seq);

}  // namespace mrf
