#include "mrforest/metrics.hpp"

#include "mrforest/error.hpp"

namespace mrf {

LevelMetrics macro_f1(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  if (truth.size() != predicted.size()) fail(ErrorCode::invalid_argument, "macro_f1: length mismatch");
  if (num_classes < 1) fail(ErrorCode::invalid_argument, "macro_f1: need at least one class");
  LevelMetrics out;
  out.slices = static_cast<long long>(truth.size());
  out.classes.resize(num_classes);
  for (int c = 0; c < num_classes; ++c) out.classes[c].label = c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      fail(ErrorCode::invalid_argument, "macro_f1: label out of range");
    }
    if (t == p) {
      ++out.classes[t].tp;
    } else {
      ++out.classes[p].fp;
      ++out.classes[t].fn;
    }
  }
  int counted = 0;
  double sum = 0.0;
  for (auto& c : out.classes) {
    c.counted = c.tp + c.fp + c.fn > 0;
    if (!c.counted) continue;
    c.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    c.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    c.f1 = 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    sum += c.f1;
    ++counted;
  }
  out.macro_f1 = counted > 0 ? sum / counted : 0.0;
  return out;
}

MacroF1::MacroF1(int num_classes) : num_classes_(num_classes) {}

void MacroF1::add(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) fail(ErrorCode::invalid_argument, "macro_f1: length mismatch");
  truth_.insert(truth_.end(), truth.begin(), truth.end());
  predicted_.insert(predicted_.end(), predicted.begin(), predicted.end());
}

LevelMetrics MacroF1::result() const { return macro_f1(truth_, predicted_, num_classes_); }

}  // namespace mrf
