#include "mga/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mga {

namespace {
// absorbs float noise so a boundary difference of exactly one collar matches
constexpr double kCollarEps = 1e-9;
}

void EvalConfig::validate() const {
  if (median_window < 1 || median_window % 2 == 0)
    throw ConfigError("median_window must be odd and >= 1");
  if (onset_collar <= 0.0 || offset_collar_min <= 0.0)
    throw ConfigError("collars must be positive");
  if (threshold < 0.0 || threshold > 1.0)
    throw ConfigError("threshold must lie in [0,1]");
  if (frame_hop_out <= 0.0) throw ConfigError("frame_hop_out must be positive");
}

std::vector<std::vector<bool>> binarize_and_filter(const Tensor& strong,
                                                   const EvalConfig& cfg) {
  cfg.validate();
  if (strong.rank() != 2)
    throw DimensionError("binarize_and_filter wants [frames, classes], got " +
                         shape_str(strong.shape()));
  const int t = strong.extent(0), c = strong.extent(1);
  std::vector<std::vector<bool>> thresholded(t, std::vector<bool>(c));
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < c; ++j)
      thresholded[i][j] = strong.at({i, j}) > cfg.threshold;

  const int half = cfg.median_window / 2;
  std::vector<std::vector<bool>> out(t, std::vector<bool>(c));
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < t; ++i) {
      int ones = 0;
      for (int k = -half; k <= half; ++k) {
        int idx = i + k;
        idx = idx < 0 ? 0 : (idx >= t ? t - 1 : idx);  // edge replication
        ones += thresholded[idx][j] ? 1 : 0;
      }
      out[i][j] = 2 * ones > cfg.median_window;
    }
  }
  return out;
}

std::vector<Event> decode_events(const std::vector<std::vector<bool>>& active,
                                 const std::string& clip_id,
                                 const std::vector<std::string>& class_names,
                                 const EvalConfig& cfg) {
  std::vector<Event> events;
  if (active.empty()) return events;
  const int t = static_cast<int>(active.size());
  const int c = static_cast<int>(active[0].size());
  if (c != static_cast<int>(class_names.size()))
    throw DimensionError("decode_events: class name count mismatch");
  for (int j = 0; j < c; ++j) {
    int run_start = -1;
    for (int i = 0; i <= t; ++i) {
      const bool on = i < t && active[i][j];
      if (on && run_start < 0) run_start = i;
      if (!on && run_start >= 0) {
        events.push_back(Event{clip_id, run_start * cfg.frame_hop_out,
                               i * cfg.frame_hop_out, class_names[j]});
        run_start = -1;
      }
    }
  }
  return events;
}

std::vector<std::string> collect_labels(const std::vector<Event>& refs,
                                        const std::vector<Event>& preds) {
  std::set<std::string> labels;
  for (const Event& e : refs) labels.insert(e.label);
  for (const Event& e : preds) labels.insert(e.label);
  return {labels.begin(), labels.end()};
}

ScoreReport event_based_f1(const std::vector<Event>& refs,
                           const std::vector<Event>& preds,
                           const std::vector<std::string>& classes,
                           const EvalConfig& cfg) {
  cfg.validate();
  ScoreReport report;
  double f1_sum = 0.0;

  for (const std::string& cls : classes) {
    ClassScore score;
    score.label = cls;

    // bucket by clip, keep onset order
    std::map<std::string, std::vector<Event>> refs_by_clip, preds_by_clip;
    for (const Event& e : refs)
      if (e.label == cls) refs_by_clip[e.clip_id].push_back(e);
    for (const Event& e : preds)
      if (e.label == cls) preds_by_clip[e.clip_id].push_back(e);

    std::set<std::string> clips;
    for (auto& [clip, _] : refs_by_clip) clips.insert(clip);
    for (auto& [clip, _] : preds_by_clip) clips.insert(clip);

    for (const std::string& clip : clips) {
      auto& r = refs_by_clip[clip];
      auto& p = preds_by_clip[clip];
      auto by_onset = [](const Event& a, const Event& b) {
        return a.onset < b.onset;
      };
      std::stable_sort(r.begin(), r.end(), by_onset);
      std::stable_sort(p.begin(), p.end(), by_onset);

      std::vector<bool> pred_used(p.size(), false);
      int tp = 0;
      for (const Event& ref : r) {
        const double offset_collar =
            std::max(cfg.offset_collar_min,
                     cfg.offset_collar_pct * (ref.offset - ref.onset));
        for (size_t k = 0; k < p.size(); ++k) {
          if (pred_used[k]) continue;
          if (std::abs(p[k].onset - ref.onset) <= cfg.onset_collar + kCollarEps &&
              std::abs(p[k].offset - ref.offset) <= offset_collar + kCollarEps) {
            pred_used[k] = true;
            ++tp;
            break;
          }
        }
      }
      score.tp += tp;
      score.fn += static_cast<int>(r.size()) - tp;
      score.fp += static_cast<int>(p.size()) - tp;
    }

    const int denom_p = score.tp + score.fp;
    const int denom_r = score.tp + score.fn;
    score.precision = denom_p > 0 ? static_cast<double>(score.tp) / denom_p : 0.0;
    score.recall = denom_r > 0 ? static_cast<double>(score.tp) / denom_r : 0.0;
    const int denom_f = 2 * score.tp + score.fp + score.fn;
    score.f1 = denom_f > 0 ? 2.0 * score.tp / denom_f : 0.0;
    f1_sum += score.f1;
    report.per_class.push_back(score);
  }

  report.macro_f1 = classes.empty() ? 0.0 : f1_sum / classes.size();
  return report;
}

std::string ScoreReport::table() const {
  std::ostringstream os;
  os << "class                     tp    fp    fn   prec   recall     f1\n";
  char line[160];
  for (const ClassScore& s : per_class) {
    std::snprintf(line, sizeof(line), "%-22s %5d %5d %5d   %.3f    %.3f  %.3f\n",
                  s.label.c_str(), s.tp, s.fp, s.fn, s.precision, s.recall, s.f1);
    os << line;
  }
  std::snprintf(line, sizeof(line), "macro-F1: %.4f\n", macro_f1);
  os << line;
  return os.str();
}

std::string ScoreReport::machine_lines() const {
  std::ostringstream os;
  for (const ClassScore& s : per_class)
    os << s.label << '\t' << s.tp << '\t' << s.fp << '\t' << s.fn << '\t'
       << s.f1 << '\n';
  return os.str();
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

double parse_seconds(const std::string& s, const std::string& path, int lineno) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(path + ":" + std::to_string(lineno) +
                    ": malformed time value '" + s + "'");
  }
}

}  // namespace

std::vector<Event> read_event_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file: " + path);
  std::vector<Event> events;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("filename\t", 0) == 0) continue;  // header
    auto cols = split_tabs(line);
    if (cols.size() != 4)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 4 tab-separated columns, got " +
                      std::to_string(cols.size()));
    Event e;
    e.clip_id = cols[0];
    e.onset = parse_seconds(cols[1], path, lineno);
    e.offset = parse_seconds(cols[2], path, lineno);
    e.label = cols[3];
    if (!(e.onset < e.offset))
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": onset must precede offset");
    events.push_back(e);
  }
  return events;
}

void write_event_tsv(const std::string& path, const std::vector<Event>& events) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write annotation file: " + path);
  out << "filename\tonset\toffset\tevent_label\n";
  char line[512];
  for (const Event& e : events) {
    std::snprintf(line, sizeof(line), "%s\t%.3f\t%.3f\t%s\n", e.clip_id.c_str(),
                  e.onset, e.offset, e.label.c_str());
    out << line;
  }
  if (!out) throw IoError("short write: " + path);
}

std::vector<WeakLabels> read_weak_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weak label file: " + path);
  std::vector<WeakLabels> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("filename\t", 0) == 0) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 2 tab-separated columns");
    WeakLabels row;
    row.clip_id = cols[0];
    std::stringstream labels(cols[1]);
    std::string label;
    while (std::getline(labels, label, ','))
      if (!label.empty()) row.labels.push_back(label);
    rows.push_back(row);
  }
  return rows;
}

void write_weak_tsv(const std::string& path, const std::vector<WeakLabels>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write weak label file: " + path);
  out << "filename\tevent_labels\n";
  for (const WeakLabels& row : rows) {
    out << row.clip_id << '\t';
    for (size_t i = 0; i < row.labels.size(); ++i) {
      if (i) out << ',';
      out << row.labels[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("short write: " + path);
}

}  // namespace mga
