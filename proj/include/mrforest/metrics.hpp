#pragma once

#include <span>
#include <vector>

namespace mrf {

struct ClassScore {
  int label = 0;
  long long tp = 0, fp = 0, fn = 0;
  double precision = 0.0;  // 0 when nothing was predicted as this class
  double recall = 0.0;     // 0 when the class never occurs
  double f1 = 0.0;
  bool counted = false;    // false: absent from truth and prediction
};

struct LevelMetrics {
  double macro_f1 = 0.0;
  long long slices = 0;
  std::vector<ClassScore> classes;
};

/// Slice-level per-class scores and their unweighted mean over classes seen
/// in the truth or the prediction. Labels are 0-based.
LevelMetrics macro_f1(std::span<const int> truth, std::span<const int> predicted, int num_classes);

/// Accumulates several sequences before scoring.
class MacroF1 {
 public:
  explicit MacroF1(int num_classes);
  void add(std::span<const int> truth, std::span<const int> predicted);
  LevelMetrics result() const;

 private:
  int num_classes_;
  std::vector<int> truth_, predicted_;
};

}  // namespace mrf
