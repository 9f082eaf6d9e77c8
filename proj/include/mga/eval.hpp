#pragma once

#include <string>
#include <vector>

#include "mga/tensor.hpp"

namespace mga {

struct Event {
  std::string clip_id;
  double onset = 0.0;
  double offset = 0.0;
  std::string label;
};

struct EvalConfig {
  double threshold = 0.5;
  int median_window = 7;
  double onset_collar = 0.200;
  double offset_collar_min = 0.200;
  double offset_collar_pct = 0.2;       // fraction of the reference length
  double frame_hop_out = 10.0 / 124.0;  // seconds per strong-head frame

  void validate() const;
};

struct ClassScore {
  std::string label;
  int tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct ScoreReport {
  std::vector<ClassScore> per_class;
  double macro_f1 = 0.0;

  std::string table() const;          // human-readable
  std::string machine_lines() const;  // class\ttp\tfp\tfn\tf1 per line
};

/// Threshold at cfg.threshold then per-class median filter
/// (edge-replicated). strong is [frames, classes]; result[t][c].
std::vector<std::vector<bool>> binarize_and_filter(const Tensor& strong,
                                                   const EvalConfig& cfg);

/// Maximal true runs become events: onset = start*hop, offset = (end+1)*hop.
std::vector<Event> decode_events(const std::vector<std::vector<bool>>& active,
                                 const std::string& clip_id,
                                 const std::vector<std::string>& class_names,
                                 const EvalConfig& cfg);

/// Event-based macro F1 with onset/offset collars and greedy one-to-one
/// matching in onset order per (clip, class). `classes` fixes the set of
/// scored labels; a class absent from refs and preds scores F1 = 0.
ScoreReport event_based_f1(const std::vector<Event>& refs,
                           const std::vector<Event>& preds,
                           const std::vector<std::string>& classes,
                           const EvalConfig& cfg);

/// Labels appearing in either event list, sorted, deduplicated.
std::vector<std::string> collect_labels(const std::vector<Event>& refs,
                                        const std::vector<Event>& preds);

// Annotation TSV: header `filename  onset  offset  event_label`, tab
// separated, seconds with >= 3 decimals.
std::vector<Event> read_event_tsv(const std::string& path);
void write_event_tsv(const std::string& path, const std::vector<Event>& events);

// Weak labels: `filename  event_labels` with comma-separated labels.
struct WeakLabels {
  std::string clip_id;
  std::vector<std::string> labels;
};
std::vector<WeakLabels> read_weak_tsv(const std::string& path);
void write_weak_tsv(const std::string& path, const std::vector<WeakLabels>& rows);

}  // namespace mga
