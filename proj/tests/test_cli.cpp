// Drives the installed binary end to end, checking exit codes and output
// formats. The binary path and fixture directory come from the build.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "test_util.hpp"

namespace fs = std::filesystem;
using mga::testutil::TempDir;

namespace {

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

CliResult run_cli(const std::string& args, const TempDir& dir) {
  const std::string out_path = dir.file("cli_stdout.txt");
  const std::string err_path = dir.file("cli_stderr.txt");
  const std::string cmd = std::string(MGANET_BIN) + " " + args + " > " +
                          out_path + " 2> " + err_path;
  const int raw = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(raw);
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

// tiny corpus shared by the pipeline tests in this file
const std::string kSmallGen =
    " --set gen.n_strong=4 --set gen.n_weak=2 --set gen.n_unlabeled=2"
    " --set gen.n_holdout=1";

const std::string kFastTrain =
    " --preset tiny --set train.batch_strong=2 --set train.batch_weak=1"
    " --set train.batch_unlabeled=1 --set train.warmup_steps=20"
    " --set train.ema_alpha=0.95 --set train.eval_every=0";

}  // namespace

TEST_CASE("no subcommand is a usage error (exit 1)") {
  TempDir dir("cli_usage");
  CHECK(run_cli("", dir).exit_code == 1);
  CHECK(run_cli("bogus-subcommand", dir).exit_code == 1);
}

TEST_CASE("unknown config keys are rejected (exit 1)") {
  TempDir dir("cli_badkey");
  {
    std::ofstream cfg(dir.file("bad.cfg"));
    cfg << "train.lr = 0.001\n";
    cfg << "nonsense.key = 1\n";
  }
  CliResult r = run_cli("gen --config " + dir.file("bad.cfg"), dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("unknown key") != std::string::npos);
}

TEST_CASE("gen echoes the resolved config and is seed-deterministic") {
  TempDir dir("cli_gen");
  CliResult a = run_cli("gen --out " + dir.file("a") + " --seed 11" + kSmallGen, dir);
  REQUIRE(a.exit_code == 0);
  CHECK(a.out.find("train.lr = 0.001") != std::string::npos);
  CHECK(a.out.find("seed = 11") != std::string::npos);

  CliResult b = run_cli("gen --out " + dir.file("b") + " --seed 11" + kSmallGen, dir);
  CliResult c = run_cli("gen --out " + dir.file("c") + " --seed 12" + kSmallGen, dir);
  REQUIRE(b.exit_code == 0);
  REQUIRE(c.exit_code == 0);
  CHECK(slurp(dir.file("a/corpus/strong.tsv")) ==
        slurp(dir.file("b/corpus/strong.tsv")));
  CHECK(slurp(dir.file("a/corpus/audio/strong_000.wav")) ==
        slurp(dir.file("b/corpus/audio/strong_000.wav")));
  CHECK(slurp(dir.file("a/corpus/strong.tsv")) !=
        slurp(dir.file("c/corpus/strong.tsv")));
}

TEST_CASE("gen with zero clips writes empty lists and exits 0") {
  TempDir dir("cli_gen0");
  CliResult r = run_cli(
      "gen --out " + dir.file("z") +
          " --set gen.n_strong=0 --set gen.n_weak=0 --set gen.n_unlabeled=0"
          " --set gen.n_holdout=0",
      dir);
  CHECK(r.exit_code == 0);
  const std::string strong = slurp(dir.file("z/corpus/strong.tsv"));
  CHECK(strong == "filename\tonset\toffset\tevent_label\n");
}

TEST_CASE("featurize requires the corpus; train requires features (exit 2)") {
  TempDir dir("cli_missing");
  CliResult f = run_cli("featurize --out " + dir.file("nope"), dir);
  CHECK(f.exit_code == 2);
  CHECK(f.err.find("not found") != std::string::npos);

  CliResult t = run_cli("train --out " + dir.file("nope"), dir);
  CHECK(t.exit_code == 2);
  CHECK(t.err.find("features") != std::string::npos);
}

TEST_CASE("full pipeline: gen, featurize, short train, infer, eval") {
  TempDir dir("cli_pipe");
  const std::string out = dir.file("run");
  REQUIRE(run_cli("gen --out " + out + " --seed 3" + kSmallGen, dir).exit_code == 0);
  REQUIRE(run_cli("featurize --out " + out, dir).exit_code == 0);

  CliResult t = run_cli("train --out " + out + " --seed 3" + kFastTrain +
                            " --set train.epochs=2",
                        dir);
  REQUIRE(t.exit_code == 0);
  CHECK(fs::exists(out + "/checkpoints/teacher_latest.mgac"));
  CHECK(fs::exists(out + "/train_log.txt"));
  CHECK(t.out.find("model.preset = tiny") != std::string::npos);

  CliResult i = run_cli("infer --out " + out + " --preset tiny --checkpoint " +
                            out + "/checkpoints/teacher_latest.mgac",
                        dir);
  REQUIRE(i.exit_code == 0);
  CHECK(fs::exists(out + "/predictions.tsv"));

  CliResult e = run_cli("eval " + out + "/predictions.tsv " + out +
                            "/corpus/strong.tsv --set paths.corpus_dir=" + out +
                            "/corpus",
                        dir);
  CHECK(e.exit_code == 0);
  CHECK(e.out.find("macro-F1:") != std::string::npos);
}

TEST_CASE("training resumes from a checkpoint onto the same trajectory") {
  TempDir dir("cli_resume");
  const std::string cont = dir.file("cont");
  const std::string split = dir.file("split");
  REQUIRE(run_cli("gen --out " + cont + " --seed 5" + kSmallGen, dir).exit_code == 0);
  REQUIRE(run_cli("featurize --out " + cont, dir).exit_code == 0);
  fs::create_directories(split);
  fs::copy(cont + "/corpus", split + "/corpus", fs::copy_options::recursive);
  fs::copy(cont + "/features", split + "/features", fs::copy_options::recursive);

  // continuous three epochs
  REQUIRE(run_cli("train --out " + cont + " --seed 5" + kFastTrain +
                      " --set train.epochs=3",
                  dir).exit_code == 0);
  // two epochs, then resume for the third
  REQUIRE(run_cli("train --out " + split + " --seed 5" + kFastTrain +
                      " --set train.epochs=2",
                  dir).exit_code == 0);
  REQUIRE(run_cli("train --out " + split + " --seed 5" + kFastTrain +
                      " --set train.epochs=3 --set train.resume_from=" + split +
                      "/checkpoints --set train.resume_epoch=2",
                  dir).exit_code == 0);

  auto first_step_loss = [&](const std::string& log_path, int epoch) {
    std::ifstream in(log_path);
    std::string line;
    const std::string tag = "epoch=" + std::to_string(epoch) + " step=0 ";
    while (std::getline(in, line)) {
      if (line.rfind(tag, 0) == 0) {
        const std::string key = "total=";
        return std::stod(line.substr(line.find(key) + key.size()));
      }
    }
    FAIL("no loss line for epoch in " << log_path);
    return 0.0;
  };
  const double continuous = first_step_loss(cont + "/train_log.txt", 2);
  const double resumed = first_step_loss(split + "/train_log.txt", 2);
  CHECK(std::abs(resumed - continuous) / continuous <= 0.05);
}

TEST_CASE("eval of identical files scores macro 1, empty predictions score 0") {
  TempDir dir("cli_eval");
  {
    std::ofstream refs(dir.file("refs.tsv"));
    refs << "filename\tonset\toffset\tevent_label\n";
    refs << "a\t1.000\t2.000\tDog\n";
    refs << "b\t0.500\t4.000\tCat\n";
  }
  {
    std::ofstream empty(dir.file("empty.tsv"));
    empty << "filename\tonset\toffset\tevent_label\n";
  }
  CliResult same = run_cli("eval " + dir.file("refs.tsv") + " " + dir.file("refs.tsv"), dir);
  CHECK(same.exit_code == 0);
  CHECK(same.out.find("macro-F1: 1.0000") != std::string::npos);

  CliResult none = run_cli("eval " + dir.file("empty.tsv") + " " + dir.file("refs.tsv"), dir);
  CHECK(none.exit_code == 0);
  CHECK(none.out.find("macro-F1: 0.0000") != std::string::npos);
}

TEST_CASE("the shipped fixture pair reproduces its frozen report") {
  TempDir dir("cli_fixture");
  CliResult r = run_cli("eval " + std::string(FIXTURES_DIR) + "/eval_preds.tsv " +
                            std::string(FIXTURES_DIR) + "/eval_refs.tsv",
                        dir);
  REQUIRE(r.exit_code == 0);
  // derived by hand: Dog TP 2 FP 1 FN 1 (F1 2/3), Cat TP 0 FP 1 FN 1
  CHECK(r.out.find("Cat\t0\t1\t1\t0") != std::string::npos);
  CHECK(r.out.find("Dog\t2\t1\t1\t0.666667") != std::string::npos);
  CHECK(r.out.find("macro-F1: 0.3333") != std::string::npos);
}

TEST_CASE("malformed TSV lines are reported with their line number (exit 2)") {
  TempDir dir("cli_badtsv");
  {
    std::ofstream bad(dir.file("bad.tsv"));
    bad << "filename\tonset\toffset\tevent_label\n";
    bad << "a\t1.0\t2.0\tDog\n";
    bad << "b\tonset_goes_here\t2.0\tCat\n";
  }
  CliResult r = run_cli("eval " + dir.file("bad.tsv") + " " + dir.file("bad.tsv"), dir);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find(":3") != std::string::npos);
}

TEST_CASE("verify fails loudly when the LDSA backward rule is corrupted") {
  TempDir dir("cli_mutate");
  CliResult r = run_cli("verify --mutate ldsa-backward", dir);
  CHECK(r.exit_code == 3);
  CHECK(r.out.find("[FAIL]") != std::string::npos);
}
