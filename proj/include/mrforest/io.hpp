#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mrforest/activity.hpp"
#include "mrforest/metrics.hpp"
#include "mrforest/pipeline.hpp"

namespace mrf {

inline constexpr const char* kModelSchema = "mrforest.model/1";
inline constexpr const char* kDatasetSchema = "mrforest.dataset/1";

// All files store states 1-based. Hidden train labels are written as null and
// their visibility flag as 0; test labels are always complete.

std::string room_to_json(const RoomModel& room);
RoomModel room_from_json(const std::string& text);  // parse_error / invalid_argument

void write_dataset(std::ostream& out, const std::vector<Sequence>& data);
void write_dataset_file(const std::string& path, const std::vector<Sequence>& data);

enum class Split { train, test, all };

/// Records of the requested split. Errors carry the 1-based line number.
/// Hidden slots come back as label -1 with visibility 0.
std::vector<Sequence> read_dataset(std::istream& in, Split split);
std::vector<Sequence> read_dataset_file(const std::string& path, Split split);

/// Observations only: every label is dropped. Used by decoding.
std::vector<Sequence> strip_labels(std::vector<Sequence> data);

std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);  // schema_mismatch on layout mismatch
void write_model_file(const std::string& path, const Model& model);
Model read_model_file(const std::string& path);

/// One JSON object per line: boosting rounds or optimizer iterations, then a
/// summary line. Wall time is excluded.
void write_history(std::ostream& out, const TrainHistory& history, int instances);
void write_timing(std::ostream& out, const TrainHistory& history, double total_seconds);

void write_predictions(std::ostream& out, const std::vector<Prediction>& preds);
std::vector<Prediction> read_predictions(std::istream& in);

struct EvalReport {
  bool has_top = false;
  LevelMetrics top;
  LevelMetrics bottom;
};

/// Scores predictions against the sequences with the same ids; throws
/// invalid_argument on missing ids or length mismatch.
EvalReport evaluate(const std::vector<Prediction>& preds, const std::vector<Sequence>& truth);

std::string metrics_to_json(const EvalReport& report);

/// Per-sequence truth/prediction rows for segmentation plots.
void write_timeline(std::ostream& out, const std::vector<Prediction>& preds,
                    const std::vector<Sequence>& truth);

/// Throws parse_error when the file cannot be read.
std::string read_text_file(const std::string& path);
/// Truncates and writes; throws parse_error when the file cannot be opened.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mrf
