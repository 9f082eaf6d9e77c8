// mganet: toy-scale sound event detection pipeline.
//
// Subcommands: gen, featurize, train, infer, eval, verify.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mga/audio.hpp"
#include "mga/config.hpp"
#include "mga/features.hpp"
#include "mga/model.hpp"
#include "mga/ops.hpp"
#include "mga/training.hpp"
#include "mga/verify.hpp"

namespace fs = std::filesystem;
using namespace mga;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CliArgs {
  std::string config_path;
  std::string out_dir;
  std::string preset;
  std::string checkpoint;
  int64_t seed = -1;
  std::vector<std::string> overrides;  // section.key=value
};

RunConfig resolve_config(const CliArgs& args, const std::string& default_preset) {
  RunConfig cfg;
  cfg.preset = default_preset;
  if (!args.config_path.empty()) cfg.apply_file(args.config_path);
  for (const std::string& kv : args.overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set wants section.key=value, got '" + kv + "'");
    cfg.apply_kv(kv.substr(0, eq), kv.substr(eq + 1), "--set " + kv);
  }
  if (args.seed >= 0) {
    cfg.seed = static_cast<uint64_t>(args.seed);
    cfg.train.seed = cfg.seed;
  }
  if (!args.preset.empty()) {
    if (args.preset != "full" && args.preset != "tiny")
      throw ConfigError("--preset must be full|tiny");
    cfg.preset = args.preset;
  }
  if (!args.out_dir.empty()) {
    cfg.out_dir = args.out_dir;
    // derived defaults follow --out unless the config file pinned them
    if (cfg.corpus_dir == "out/corpus")
      cfg.corpus_dir = (fs::path(cfg.out_dir) / "corpus").string();
    if (cfg.features_dir == "out/features")
      cfg.features_dir = (fs::path(cfg.out_dir) / "features").string();
  }
  if (!args.checkpoint.empty()) cfg.checkpoint = args.checkpoint;
  return cfg;
}

std::vector<std::string> read_classes(const std::string& dir) {
  std::ifstream in((fs::path(dir) / "classes.txt").string());
  if (!in) throw IoError("cannot open class list: " + dir + "/classes.txt");
  std::vector<std::string> classes;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) classes.push_back(line);
  }
  if (classes.empty()) throw DataError(dir + "/classes.txt lists no classes");
  return classes;
}

int cmd_gen(const CliArgs& args) {
  RunConfig cfg = resolve_config(args, "tiny");
  std::cout << cfg.echo();
  ToyCorpus corpus = generate_toy_dataset(cfg.gen, cfg.corpus_dir, cfg.seed);
  std::cout << "corpus written to " << cfg.corpus_dir << "\n"
            << "  strong: " << corpus.strong_ids.size() << " clips, "
            << corpus.strong_events.size() << " events\n"
            << "  weak: " << corpus.weak_ids.size() << " clips\n"
            << "  unlabeled: " << corpus.unlabeled_ids.size() << " clips\n"
            << "  holdout: " << corpus.holdout_ids.size() << " clips, "
            << corpus.holdout_events.size() << " events\n";
  return kExitOk;
}

int cmd_featurize(const CliArgs& args) {
  RunConfig cfg = resolve_config(args, "tiny");
  std::cout << cfg.echo();
  const fs::path audio_dir = fs::path(cfg.corpus_dir) / "audio";
  if (!fs::is_directory(audio_dir))
    throw IoError("corpus audio directory not found: " + audio_dir.string());
  fs::create_directories(cfg.features_dir);

  std::vector<fs::path> wavs;
  for (const auto& entry : fs::directory_iterator(audio_dir))
    if (entry.path().extension() == ".wav") wavs.push_back(entry.path());
  std::sort(wavs.begin(), wavs.end());

  std::ofstream manifest((fs::path(cfg.features_dir) / "manifest.tsv").string());
  manifest << "clip_id\tfile\tframes\tmels\tduration\n";
  for (const fs::path& wav_path : wavs) {
    const std::string clip_id = wav_path.stem().string();
    WavData wav = load_wav(wav_path.string(), cfg.features.sample_rate);
    MelSpectrogram mel = log_mel(wav.samples, cfg.features, clip_id);
    const std::string out_name = clip_id + ".mgaf";
    write_features((fs::path(cfg.features_dir) / out_name).string(), mel.values);
    char line[512];
    std::snprintf(line, sizeof(line), "%s\t%s\t%d\t%d\t%.6f\n", clip_id.c_str(),
                  out_name.c_str(), mel.values.extent(0), mel.values.extent(1),
                  mel.duration);
    manifest << line;
  }
  if (fs::exists(fs::path(cfg.corpus_dir) / "classes.txt"))
    fs::copy_file(fs::path(cfg.corpus_dir) / "classes.txt",
                  fs::path(cfg.features_dir) / "classes.txt",
                  fs::copy_options::overwrite_existing);
  std::cout << "featurized " << wavs.size() << " clips into " << cfg.features_dir
            << "\n";
  return kExitOk;
}

int cmd_train(const CliArgs& args) {
  RunConfig cfg = resolve_config(args, "tiny");
  std::cout << cfg.echo();
  if (!fs::is_directory(cfg.features_dir))
    throw IoError("features directory not found: " + cfg.features_dir +
                  " (run featurize first)");
  if (!fs::is_directory(cfg.corpus_dir))
    throw IoError("corpus directory not found: " + cfg.corpus_dir);

  const auto classes = read_classes(cfg.corpus_dir);
  RunConfig adjusted = cfg;
  adjusted.n_classes = static_cast<int>(classes.size());
  ModelConfig model_cfg = adjusted.model_config();

  MgaNet probe(model_cfg, 0);  // only for frame arithmetic
  const int out_frames = probe.out_frames(
      1 + static_cast<int>(cfg.gen.clip_seconds * cfg.features.sample_rate) /
              cfg.features.hop);
  TrainDataset data = load_train_dataset(cfg.corpus_dir, cfg.features_dir,
                                         classes, out_frames, cfg.gen.clip_seconds);

  Trainer trainer(model_cfg, cfg.train, std::move(data), cfg.seed);

  const fs::path ckpt_dir = fs::path(cfg.out_dir) / "checkpoints";
  fs::create_directories(ckpt_dir);
  std::ofstream log((fs::path(cfg.out_dir) / "train_log.txt").string(),
                    cfg.resume_from.empty() ? std::ios::trunc : std::ios::app);

  int start_epoch = 0;
  if (!cfg.resume_from.empty()) {
    load_checkpoint((fs::path(cfg.resume_from) / "student_latest.mgac").string(),
                    trainer.student().params());
    load_checkpoint((fs::path(cfg.resume_from) / "teacher_latest.mgac").string(),
                    trainer.teacher().params());
    start_epoch = cfg.resume_epoch;
    std::cout << "resumed from " << cfg.resume_from << " at epoch " << start_epoch
              << "\n";
  }

  EvalConfig eval_cfg = cfg.eval;
  eval_cfg.frame_hop_out = cfg.gen.clip_seconds / out_frames;

  std::vector<Event> train_refs;
  if (cfg.eval_every > 0)
    train_refs = read_event_tsv((fs::path(cfg.corpus_dir) / "strong.tsv").string());

  for (int epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
    auto losses = trainer.run_epoch(epoch);
    double mean_total = 0.0;
    for (size_t s = 0; s < losses.size(); ++s) {
      const LossBreakdown& l = losses[s];
      char line[256];
      std::snprintf(line, sizeof(line),
                    "epoch=%d step=%zu strong=%.6f weak=%.6f cons=%.6f w=%.4f "
                    "total=%.6f\n",
                    epoch, s, l.strong_bce, l.weak_bce, l.consistency_mse,
                    l.consistency_weight, l.total);
      log << line;
      mean_total += l.total;
    }
    mean_total /= losses.size();

    save_checkpoint((ckpt_dir / ("student_e" + std::to_string(epoch) + ".mgac")).string(),
                    trainer.student().params());
    save_checkpoint((ckpt_dir / ("teacher_e" + std::to_string(epoch) + ".mgac")).string(),
                    trainer.teacher().params());
    save_checkpoint((ckpt_dir / "student_latest.mgac").string(),
                    trainer.student().params());
    save_checkpoint((ckpt_dir / "teacher_latest.mgac").string(),
                    trainer.teacher().params());

    std::cout << "epoch " << epoch << " mean_loss " << mean_total;
    if (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
      ScoreReport report = evaluate_model(
          trainer.teacher(), trainer.data().features,
          trainer.data().split.strong_ids, train_refs, classes, eval_cfg);
      std::cout << " train_eb_f1 " << report.macro_f1;
      log << "epoch=" << epoch << " train_eb_f1=" << report.macro_f1 << "\n";
    }
    std::cout << "\n" << std::flush;
  }
  std::cout << "checkpoints in " << ckpt_dir.string()
            << " (teacher_latest.mgac is the inference artifact)\n";
  return kExitOk;
}

int cmd_infer(const CliArgs& args) {
  RunConfig cfg = resolve_config(args, "tiny");
  std::cout << cfg.echo();
  if (cfg.checkpoint.empty())
    throw ConfigError("infer needs paths.checkpoint (or --checkpoint)");
  const auto classes = read_classes(cfg.features_dir);
  RunConfig adjusted = cfg;
  adjusted.n_classes = static_cast<int>(classes.size());
  ModelConfig model_cfg = adjusted.model_config();
  MgaNet model(model_cfg, 0);
  load_checkpoint(cfg.checkpoint, model.params());

  std::ifstream manifest((fs::path(cfg.features_dir) / "manifest.tsv").string());
  if (!manifest)
    throw IoError("features manifest not found in " + cfg.features_dir);

  std::vector<Event> all_events;
  std::string line;
  int lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> cols;
    size_t pos = 0;
    while (true) {
      size_t tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() < 5)
      throw DataError(cfg.features_dir + "/manifest.tsv:" +
                      std::to_string(lineno) + ": malformed manifest line");
    const std::string clip_id = cols[0];
    Tensor feats = normalize_features(
        read_features((fs::path(cfg.features_dir) / cols[1]).string()));
    const double duration = std::stod(cols[4]);

    EvalConfig eval_cfg = cfg.eval;
    eval_cfg.frame_hop_out =
        duration / model.out_frames(feats.extent(0));
    auto events = predict_events(model, feats, clip_id, classes, eval_cfg);
    all_events.insert(all_events.end(), events.begin(), events.end());
  }
  fs::create_directories(cfg.out_dir);
  const std::string pred_path =
      (fs::path(cfg.out_dir) / "predictions.tsv").string();
  write_event_tsv(pred_path, all_events);
  std::cout << "wrote " << all_events.size() << " events to " << pred_path << "\n";
  return kExitOk;
}

int cmd_eval(const CliArgs& args, const std::string& pred_path,
             const std::string& ref_path) {
  RunConfig cfg = resolve_config(args, "tiny");
  auto preds = read_event_tsv(pred_path);
  auto refs = read_event_tsv(ref_path);
  // score over the union of labels unless the corpus pins a class list
  std::vector<std::string> classes = collect_labels(refs, preds);
  if (fs::exists(fs::path(cfg.corpus_dir) / "classes.txt"))
    classes = read_classes(cfg.corpus_dir);
  ScoreReport report = event_based_f1(refs, preds, classes, cfg.eval);
  std::cout << report.table() << "\n" << report.machine_lines();
  return kExitOk;
}

int cmd_verify(const CliArgs& args, const std::string& mutate) {
  RunConfig cfg = resolve_config(args, "tiny");
  (void)cfg;
  if (!mutate.empty()) {
    if (mutate != "ldsa-backward")
      throw ConfigError("unknown mutation hook: " + mutate);
    debug_hooks::corrupt_ldsa_backward = true;
    std::cout << "mutation hook active: " << mutate << "\n";
  }
  auto results = verify::run_all();
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name;
    if (!r.detail.empty()) std::cout << " - " << r.detail;
    std::cout << "\n";
    if (!r.pass) ++failed;
  }
  std::cout << results.size() - failed << "/" << results.size()
            << " checks passed\n";
  return failed == 0 ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MGA-Net sound event detection pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  CliArgs args;
  app.add_option("--config", args.config_path, "config file (section.key = value)");
  app.add_option("--seed", args.seed, "seed override");
  app.add_option("--preset", args.preset, "model preset: full|tiny");
  app.add_option("--out", args.out_dir, "output directory");
  app.add_option("--checkpoint", args.checkpoint, "checkpoint path (infer)");
  app.add_option("--set", args.overrides, "config override section.key=value")
      ->take_all();

  auto* gen = app.add_subcommand("gen", "generate the synthetic toy corpus");
  auto* featurize =
      app.add_subcommand("featurize", "extract log-mel features for the corpus");
  auto* train = app.add_subcommand("train", "run Mean Teacher training");
  auto* infer = app.add_subcommand("infer", "decode events with a checkpoint");
  auto* eval = app.add_subcommand("eval", "score predictions against references");
  std::string pred_path, ref_path;
  eval->add_option("predictions", pred_path, "predicted events TSV")->required();
  eval->add_option("references", ref_path, "reference events TSV")->required();
  auto* verify_cmd =
      app.add_subcommand("verify", "run the numeric verification suites");
  std::string mutate;
  verify_cmd->add_option("--mutate", mutate,
                         "deliberately corrupt a backward rule (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(args);
    if (featurize->parsed()) return cmd_featurize(args);
    if (train->parsed()) return cmd_train(args);
    if (infer->parsed()) return cmd_infer(args);
    if (eval->parsed()) return cmd_eval(args, pred_path, ref_path);
    if (verify_cmd->parsed()) return cmd_verify(args, mutate);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
