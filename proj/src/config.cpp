#include "mga/config.hpp"

#include <fstream>
#include <sstream>

namespace mga {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& where) {
  try {
    size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
}

int parse_int(const std::string& v, const std::string& where) {
  try {
    size_t used = 0;
    long d = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(d);
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& v, const std::string& where) {
  try {
    size_t used = 0;
    unsigned long long d = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<uint64_t>(d);
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected an unsigned integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected a boolean, got '" + v + "'");
}

}  // namespace

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'section.key = value'");
    apply_kv(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
  }
}

void RunConfig::apply_kv(const std::string& key, const std::string& value,
                         const std::string& where) {
  // features
  if (key == "features.sample_rate") features.sample_rate = parse_int(value, where);
  else if (key == "features.n_fft") features.n_fft = parse_int(value, where);
  else if (key == "features.hop") features.hop = parse_int(value, where);
  else if (key == "features.n_mels") features.n_mels = parse_int(value, where);
  else if (key == "features.fmin") features.fmin = parse_double(value, where);
  else if (key == "features.fmax") features.fmax = parse_double(value, where);
  else if (key == "features.log_floor") features.log_floor = parse_double(value, where);
  // model
  else if (key == "model.preset") {
    if (value != "full" && value != "tiny")
      throw ConfigError(where + ": model.preset must be full|tiny");
    preset = value;
  }
  else if (key == "model.n_classes") n_classes = parse_int(value, where);
  else if (key == "model.variant") variant = value;
  else if (key == "model.order") order = value;
  else if (key == "model.stage_global") stage_global = parse_bool(value, where);
  else if (key == "model.stage_local") stage_local = parse_bool(value, where);
  else if (key == "model.stage_frame") stage_frame = parse_bool(value, where);
  else if (key == "model.spatial_shift") spatial_shift = parse_bool(value, where);
  else if (key == "model.dropout") dropout = parse_double(value, where);
  // training
  else if (key == "train.lr") train.lr = parse_double(value, where);
  else if (key == "train.epochs") train.epochs = parse_int(value, where);
  else if (key == "train.batch_strong") train.batch_strong = parse_int(value, where);
  else if (key == "train.batch_weak") train.batch_weak = parse_int(value, where);
  else if (key == "train.batch_unlabeled") train.batch_unlabeled = parse_int(value, where);
  else if (key == "train.ema_alpha") train.ema_alpha = parse_double(value, where);
  else if (key == "train.consistency_max_weight")
    train.consistency_max_weight = parse_double(value, where);
  else if (key == "train.ramp_epochs") train.ramp_epochs = parse_int(value, where);
  else if (key == "train.noise_sigma") train.noise_sigma = parse_double(value, where);
  else if (key == "train.warmup_steps") train.warmup_steps = parse_int(value, where);
  else if (key == "train.seed") train.seed = parse_u64(value, where);
  // eval
  else if (key == "eval.threshold") eval.threshold = parse_double(value, where);
  else if (key == "eval.median_window") eval.median_window = parse_int(value, where);
  else if (key == "eval.onset_collar") eval.onset_collar = parse_double(value, where);
  else if (key == "eval.offset_collar_min")
    eval.offset_collar_min = parse_double(value, where);
  else if (key == "eval.offset_collar_pct")
    eval.offset_collar_pct = parse_double(value, where);
  // toy generator
  else if (key == "gen.n_strong") gen.n_strong = parse_int(value, where);
  else if (key == "gen.n_weak") gen.n_weak = parse_int(value, where);
  else if (key == "gen.n_unlabeled") gen.n_unlabeled = parse_int(value, where);
  else if (key == "gen.n_holdout") gen.n_holdout = parse_int(value, where);
  else if (key == "gen.min_events") gen.min_events = parse_int(value, where);
  else if (key == "gen.max_events") gen.max_events = parse_int(value, where);
  else if (key == "gen.min_duration") gen.min_duration = parse_double(value, where);
  else if (key == "gen.max_duration") gen.max_duration = parse_double(value, where);
  else if (key == "gen.background_sigma")
    gen.background_sigma = parse_double(value, where);
  // paths and run control
  else if (key == "paths.corpus_dir") corpus_dir = value;
  else if (key == "paths.features_dir") features_dir = value;
  else if (key == "paths.out_dir") out_dir = value;
  else if (key == "paths.checkpoint") checkpoint = value;
  else if (key == "train.resume_from") resume_from = value;
  else if (key == "train.resume_epoch") resume_epoch = parse_int(value, where);
  else if (key == "train.eval_every") eval_every = parse_int(value, where);
  else if (key == "seed") seed = parse_u64(value, where);
  else
    throw ConfigError(where + ": unknown key '" + key + "'");
}

ModelConfig RunConfig::model_config() const {
  ModelConfig cfg = preset == "tiny" ? ModelConfig::tiny() : ModelConfig::full();
  cfg.n_classes = n_classes;
  cfg.encoder.variant = conv_variant_from_string(variant);
  cfg.encoder.dropout = dropout;
  cfg.encoder.spatial_shift = spatial_shift;
  cfg.mga.order = mga_order_from_string(order);
  cfg.mga.stage_global = stage_global;
  cfg.mga.stage_local = stage_local;
  cfg.mga.stage_frame = stage_frame;
  cfg.validate();
  return cfg;
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << "features.sample_rate = " << features.sample_rate << "\n"
     << "features.n_fft = " << features.n_fft << "\n"
     << "features.hop = " << features.hop << "\n"
     << "features.n_mels = " << features.n_mels << "\n"
     << "features.fmin = " << features.fmin << "\n"
     << "features.fmax = " << features.fmax << "\n"
     << "features.log_floor = " << features.log_floor << "\n"
     << "model.preset = " << preset << "\n"
     << "model.n_classes = " << n_classes << "\n"
     << "model.variant = " << variant << "\n"
     << "model.order = " << order << "\n"
     << "model.stage_global = " << (stage_global ? "true" : "false") << "\n"
     << "model.stage_local = " << (stage_local ? "true" : "false") << "\n"
     << "model.stage_frame = " << (stage_frame ? "true" : "false") << "\n"
     << "model.spatial_shift = " << (spatial_shift ? "true" : "false") << "\n"
     << "model.dropout = " << dropout << "\n"
     << "train.lr = " << train.lr << "\n"
     << "train.epochs = " << train.epochs << "\n"
     << "train.batch_strong = " << train.batch_strong << "\n"
     << "train.batch_weak = " << train.batch_weak << "\n"
     << "train.batch_unlabeled = " << train.batch_unlabeled << "\n"
     << "train.ema_alpha = " << train.ema_alpha << "\n"
     << "train.consistency_max_weight = " << train.consistency_max_weight << "\n"
     << "train.ramp_epochs = " << train.ramp_epochs << "\n"
     << "train.noise_sigma = " << train.noise_sigma << "\n"
     << "train.warmup_steps = " << train.warmup_steps << "\n"
     << "train.seed = " << train.seed << "\n"
     << "train.eval_every = " << eval_every << "\n"
     << "eval.threshold = " << eval.threshold << "\n"
     << "eval.median_window = " << eval.median_window << "\n"
     << "eval.onset_collar = " << eval.onset_collar << "\n"
     << "eval.offset_collar_min = " << eval.offset_collar_min << "\n"
     << "eval.offset_collar_pct = " << eval.offset_collar_pct << "\n"
     << "gen.n_strong = " << gen.n_strong << "\n"
     << "gen.n_weak = " << gen.n_weak << "\n"
     << "gen.n_unlabeled = " << gen.n_unlabeled << "\n"
     << "gen.n_holdout = " << gen.n_holdout << "\n"
     << "paths.corpus_dir = " << corpus_dir << "\n"
     << "paths.features_dir = " << features_dir << "\n"
     << "paths.out_dir = " << out_dir << "\n"
     << "paths.checkpoint = " << checkpoint << "\n"
     << "seed = " << seed << "\n";
  return os.str();
}

}  // namespace mga
