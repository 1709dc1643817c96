#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "alfr/experiment.hpp"
#include "support.hpp"

using namespace alfr;
using alfr::test::TempDir;

namespace {

std::string small_config(const std::string& name,
                         const std::string& method = "max_stacks = 2\nepochs_per_stack = 3\nthreshold = none\n") {
  return "[run]\nname = " + name +
         "\nseed = 1\n"
         "[dataset]\nsource = synthetic\nsynthetic = leaky_feature\nrows = 400\ndim = 6\n"
         "[method]\nkind = alfr_ds\n" +
         method +
         "[architecture]\nlatent_dim = 4\nencoder_hidden = 8\ndecoder_hidden = 8\nadversary_hidden = 8\n"
         "decoder_output = identity\n"
         "[optimizer]\nbatch_size = 32\n"
         "[eval]\nrepeats = 2\n";
}

ExperimentConfig config_in(const TempDir& dir, const std::string& text) {
  auto c = parse_config_text(text, dir.path());
  c.output_root = dir.path() / "runs";
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const TempDir& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = env + " '" + std::string(ALFR_CLI_PATH) + "' " + args + " >'" + out.string() + "' 2>'" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

class EnvGuard {
 public:
  EnvGuard(const char* name, const std::string& value) : name_(name) { ::setenv(name, value.c_str(), 1); }
  ~EnvGuard() { ::unsetenv(name_); }

 private:
  const char* name_;
};

std::string config_error_field(const std::string& text) {
  try {
    validate_config(parse_config_text(text));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

// ------------------------------------------------------------ config ----

TEST(Config, DefaultsAndOverrides) {
  const auto c = parse_config_text(
      "[method]\nkind = alfr\nalpha = 0.5\n[optimizer]\nlearning_rate = 0.002\nadversary_learning_rate = 0.004\n");
  EXPECT_EQ(c.method.kind, MethodKind::alfr);
  EXPECT_EQ(c.method.alpha, 0.5);
  EXPECT_EQ(c.optimizer.actor.learning_rate, 0.002);
  EXPECT_EQ(c.optimizer.adversary.learning_rate, 0.004);
  EXPECT_EQ(c.optimizer.batch_size, 128u);
  EXPECT_EQ(c.method.threshold, 0.6);
  EXPECT_EQ(c.arch.latent_dim, 40u);
  EXPECT_EQ(c.eval.probes.size(), 2u);
  EXPECT_EQ(c.alfr_config().alpha, 0.5);
}

TEST(Config, ThresholdNoneDisablesTheConstraint) {
  const auto c = parse_config_text("[method]\nthreshold = none\n");
  EXPECT_FALSE(c.method.threshold.has_value());
  EXPECT_FALSE(c.alfr_ds_config().constraint.has_value());
  const auto d = parse_config_text("[method]\nthreshold = 0.7\n");
  EXPECT_EQ(d.alfr_ds_config().constraint->threshold, 0.7);
}

TEST(Config, UncensoredMeansZeroAlpha) {
  const auto c = parse_config_text("[method]\nkind = uncensored\nalpha = 3\n");
  EXPECT_EQ(c.alfr_config().alpha, 0.0);
}

TEST(Config, RelativePathsResolveAgainstTheConfigDirectory) {
  const auto c = parse_config_text("[run]\noutput_root = out\n[dataset]\nsource = csv\npath = t.csv\n", "/cfg");
  EXPECT_EQ(c.output_root, std::filesystem::path("/cfg/out"));
  EXPECT_EQ(c.dataset.table, std::filesystem::path("/cfg/t.csv"));
  const auto abs = parse_config_text("[dataset]\npath = /data/t.csv\n", "/cfg");
  EXPECT_EQ(abs.dataset.table, std::filesystem::path("/data/t.csv"));
}

TEST(Config, UnknownKeysAndBadValuesNameTheField) {
  auto field = [](const std::string& text) {
    try {
      parse_config_text(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("none");
  };
  EXPECT_EQ(field("[method]\nbogus = 1\n"), "method.bogus");
  EXPECT_EQ(field("[nosuch]\nkey = 1\n"), "nosuch.key");
  EXPECT_EQ(field("[method]\nepochs = abc\n"), "method.epochs");
  EXPECT_EQ(field("[method]\nkind = magic\n"), "method.kind");
  EXPECT_EQ(field("[method]\nalpha = 1x\n"), "method.alpha");
  EXPECT_EQ(field("[eval]\nprobes = linear, forest\n"), "eval.probes");
  EXPECT_EQ(field("[architecture]\nhidden_activation = swish\n"), "architecture.hidden_activation");
}

TEST(Config, ValidationNamesTheField) {
  EXPECT_EQ(config_error_field("[method]\nthreshold = 0.3\n"), "method.threshold");
  EXPECT_EQ(config_error_field("[method]\nalpha = -1\n"), "method.alpha");
  EXPECT_EQ(config_error_field("[optimizer]\nbatch_size = 0\n"), "optimizer.batch_size");
  EXPECT_EQ(config_error_field("[optimizer]\nadversary_learning_rate = 0\n"), "optimizer.adversary_learning_rate");
  EXPECT_EQ(config_error_field("[dataset]\ntrain_fraction = 1\n"), "dataset.train_fraction");
  EXPECT_EQ(config_error_field("[dataset]\nsource = mnist\nimages = /nonexistent/a\nlabels = /nonexistent/b\n"),
            "dataset.images");
  EXPECT_EQ(config_error_field("[dataset]\nsource = csv\n"), "dataset.path");
  EXPECT_EQ(config_error_field("[eval]\nrepeats = 0\n"), "eval.repeats");
  EXPECT_EQ(config_error_field("[run]\nname = a/b\n"), "run.name");
  EXPECT_EQ(config_error_field(""), "");
}

TEST(Config, EnvironmentOverridesOutputRoot) {
  auto c = parse_config_text("[run]\noutput_root = /somewhere\n");
  EXPECT_EQ(resolve_output_root(c), std::filesystem::path("/somewhere"));
  EnvGuard env(kOutputRootEnv, "/elsewhere");
  EXPECT_EQ(resolve_output_root(c), std::filesystem::path("/elsewhere"));
}

TEST(Config, ShippedConfigsParse) {
  const auto dir = std::filesystem::path(ALFR_SOURCE_DIR) / "configs";
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".ini") continue;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    ++count;
  }
  EXPECT_GT(count, 0u);
}

// --------------------------------------------------------------- run ----

TEST(Run, WritesAllArtifacts) {
  TempDir dir("run");
  const auto outcome = run_experiment(config_in(dir, small_config("a")));
  ASSERT_EQ(outcome.exit_code, kExitOk) << outcome.message;
  const auto run = outcome.run_dir;
  EXPECT_EQ(run, dir.path() / "runs" / "a");
  for (const char* f : {"manifest.json", "metrics.tsv", "timing.tsv", "eval.tsv", "encoder_0.cnsr", "encoder_1.cnsr",
                        "decoder.cnsr", "adversary.cnsr"})
    EXPECT_TRUE(std::filesystem::exists(run / f)) << f;

  const auto manifest = read_manifest(run);
  EXPECT_EQ(manifest["status"], "complete");
  EXPECT_EQ(manifest["terminated_by"], "epoch_budget");
  EXPECT_EQ(manifest["epochs_run"], 6);
  EXPECT_EQ(manifest["stack_scores"].size(), 2u);
  EXPECT_EQ(manifest["data"]["train_rows"], 320);
  EXPECT_EQ(manifest["data"]["eval_rows"], 80);

  std::istringstream metrics(slurp(run / "metrics.tsv"));
  std::string line;
  std::getline(metrics, line);
  EXPECT_EQ(line, kMetricsHeader);
  std::size_t rows = 0;
  while (std::getline(metrics, line)) ++rows;
  EXPECT_EQ(rows, 6u);
}

TEST(Run, MetricsAreByteIdenticalAcrossRuns) {
  TempDir a("det_a"), b("det_b");
  const auto ra = run_experiment(config_in(a, small_config("x")));
  const auto rb = run_experiment(config_in(b, small_config("x")));
  ASSERT_EQ(ra.exit_code, kExitOk);
  ASSERT_EQ(rb.exit_code, kExitOk);
  EXPECT_EQ(slurp(ra.run_dir / "metrics.tsv"), slurp(rb.run_dir / "metrics.tsv"));
  EXPECT_EQ(slurp(ra.run_dir / "eval.tsv"), slurp(rb.run_dir / "eval.tsv"));
  EXPECT_EQ(slurp(ra.run_dir / "encoder_1.cnsr"), slurp(rb.run_dir / "encoder_1.cnsr"));
}

TEST(Run, ManifestRoundTripsThroughLoadRun) {
  TempDir dir("load");
  const auto outcome = run_experiment(config_in(dir, small_config("l")));
  ASSERT_EQ(outcome.exit_code, kExitOk);
  const auto run = load_run(outcome.run_dir);
  EXPECT_EQ(run.stack.size(), 2u);
  const auto data = make_synthetic(SyntheticKind::leaky_feature, 400, 6, derive_seed(1, SeedStream::synthetic));
  EXPECT_EQ(run.stack.encode(data.X).cols(), 4);
}

TEST(Run, IncompleteRunIsNotLoadable) {
  TempDir dir("incomplete");
  std::filesystem::create_directories(dir / "r");
  write_text(dir / "r" / "manifest.json", R"({"format_version": 1, "status": "running"})");
  EXPECT_THROW(read_manifest(dir / "r"), LoadError);
  write_text(dir / "r" / "manifest.json", R"({"format_version": 99, "status": "complete"})");
  EXPECT_THROW(read_manifest(dir / "r"), LoadError);
}

// ------------------------------------------------------- exit codes ----

TEST(ExitCodes, ConfigErrorIsTwo) {
  TempDir dir("exit2");
  write_text(dir / "bad.ini", "[method]\nthreshold = 2\n");
  const auto r = cli(dir, "validate '" + (dir / "bad.ini").string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("method.threshold"), std::string::npos) << r.err;
  EXPECT_EQ(cli(dir, "run '" + (dir / "bad.ini").string() + "'").code, 2);
  EXPECT_EQ(cli(dir, "run '" + (dir / "missing.ini").string() + "'").code, 2);
  EXPECT_EQ(cli(dir, "censor a b --space sideways").code, 2);
  write_text(dir / "good.ini", small_config("g"));
  const auto ok = cli(dir, "validate '" + (dir / "good.ini").string() + "'");
  EXPECT_EQ(ok.code, 0);
  EXPECT_EQ(ok.out, "ok\n");
}

TEST(ExitCodes, NumericAbortIsThree) {
  TempDir dir("exit3");
  std::string table;
  for (int i = 0; i < 60; ++i) table += std::to_string(i % 2) + ",1e200," + std::to_string(i) + ",0.5\n";
  write_text(dir / "huge.csv", table);
  write_text(dir / "c.ini", "[run]\nname = huge\noutput_root = runs\n[dataset]\nsource = csv\npath = huge.csv\n"
                            "[architecture]\nlatent_dim = 2\nencoder_hidden = 4\ndecoder_hidden = 4\n"
                            "adversary_hidden = 4\ndecoder_output = identity\n");
  const auto r = cli(dir, "run '" + (dir / "c.ini").string() + "'");
  EXPECT_EQ(r.code, 3) << r.err;
  const auto manifest = nlohmann::json::parse(slurp(dir / "runs" / "huge" / "manifest.json"));
  EXPECT_EQ(manifest["status"], "numeric_abort");
}

TEST(ExitCodes, DeadlineWithoutConstraintIsFour) {
  TempDir dir("exit4");
  write_text(dir / "c.ini", small_config("late", "max_stacks = 1\nepochs_per_stack = 1\nthreshold = 0.5\n"));
  const auto r = cli(dir, "run '" + (dir / "c.ini").string() + "'", "ALFR_OUTPUT_ROOT='" + (dir / "env").string() + "'");
  const auto manifest = nlohmann::json::parse(slurp(dir / "env" / "late" / "manifest.json"));
  ASSERT_GT(manifest["stack_scores"][0].get<double>(), 0.5);
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_EQ(manifest["terminated_by"], "deadline");
  EXPECT_EQ(manifest["status"], "complete");
}

// ----------------------------------------------------------- compare ----

TEST(Compare, OrderInvariantAndComplete) {
  TempDir dir("compare");
  auto c1 = config_in(dir, small_config("b_run"));
  auto c2 = config_in(dir, small_config("a_run"));
  c2.method.kind = MethodKind::uncensored;
  ASSERT_EQ(run_experiment(c1).exit_code, kExitOk);
  ASSERT_EQ(run_experiment(c2).exit_code, kExitOk);
  const auto a = dir / "runs" / "a_run", b = dir / "runs" / "b_run";
  const auto t1 = compare_runs({a, b}), t2 = compare_runs({b, a});
  EXPECT_EQ(t1.to_text(), t2.to_text());
  EXPECT_EQ(t1.to_json(), t2.to_json());
  ASSERT_EQ(t1.rows.size(), 2u);
  EXPECT_EQ(t1.rows[0].run, "a_run");
  EXPECT_EQ(t1.rows[0].method, "uncensored");
  EXPECT_EQ(t1.rows[1].method, "alfr_ds");
  EXPECT_EQ(t1.probe_kinds, (std::vector<std::string>{"linear", "mlp"}));
  EXPECT_EQ(compare_runs({a}).rows.size(), 1u);

  const auto r = cli(dir, "compare --json '" + b.string() + "' '" + a.string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out), t1.to_json());
  const auto text = cli(dir, "compare '" + a.string() + "' '" + b.string() + "'");
  EXPECT_EQ(text.out, t1.to_text());
}

TEST(Compare, MissingDirectoryIsNamed) {
  TempDir dir("compare_missing");
  const auto missing = dir / "nope";
  try {
    compare_runs({missing});
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.path(), missing.string());
  }
  const auto r = cli(dir, "compare '" + missing.string() + "'");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find(missing.string()), std::string::npos);
}

// ------------------------------------------------------------ censor ----

TEST(Censor, EmptyStackIsIdentity) {
  TempDir dir("censor_id");
  const auto outcome = run_experiment(config_in(dir, small_config("id")));
  ASSERT_EQ(outcome.exit_code, kExitOk);
  auto manifest = nlohmann::json::parse(slurp(outcome.run_dir / "manifest.json"));
  manifest["encoders"] = nlohmann::json::array();
  write_json(outcome.run_dir / "manifest.json", manifest);
  const auto data = make_synthetic(SyntheticKind::leaky_feature, 50, 6, 3);
  save_embedding_table(dir / "in.csv", data, TableFormat::csv_with_label_column);
  const auto out = censor_export(outcome.run_dir, dir / "in.csv", CensorSpace::latent);
  EXPECT_EQ(out, outcome.run_dir / "censored_latent.csv");
  EXPECT_EQ(slurp(out), slurp(dir / "in.csv"));
}

TEST(Censor, LatentAndOriginalShapes) {
  TempDir dir("censor_shape");
  const auto outcome = run_experiment(config_in(dir, small_config("s")));
  ASSERT_EQ(outcome.exit_code, kExitOk);
  const auto data = make_synthetic(SyntheticKind::leaky_feature, 70, 6, 4);
  save_embedding_table(dir / "in.f32", data, TableFormat::raw_f32le_with_sidecar_labels);
  const auto r = cli(dir, "censor '" + outcome.run_dir.string() + "' '" + (dir / "in.f32").string() +
                              "' --space original --output '" + (dir / "orig.f32").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto orig = load_embedding_table(dir / "orig.f32", TableFormat::raw_f32le_with_sidecar_labels);
  EXPECT_EQ(orig.rows(), 70u);
  EXPECT_EQ(orig.dim(), 6u);
  EXPECT_EQ(orig.S, data.S);
  const auto latent = load_embedding_table(
      censor_export(outcome.run_dir, dir / "in.f32", CensorSpace::latent), TableFormat::raw_f32le_with_sidecar_labels);
  EXPECT_EQ(latent.rows(), 70u);
  EXPECT_EQ(latent.dim(), 4u);
}

TEST(Censor, ExportedLatentReproducesStoredProbeScores) {
  TempDir dir("censor_probe");
  const auto config = config_in(dir, small_config("p"));
  const auto outcome = run_experiment(config);
  ASSERT_EQ(outcome.exit_code, kExitOk);
  const auto [train, eval] = train_eval_split(config, load_dataset(config));
  save_embedding_table(dir / "eval.csv", eval, TableFormat::csv_with_label_column);
  const auto exported = load_embedding_table(censor_export(outcome.run_dir, dir / "eval.csv", CensorSpace::latent),
                                             TableFormat::csv_with_label_column);
  const auto specs = config.eval.probe_specs(config.seed);
  const auto again = evaluate_representation(exported.X, exported.S, specs, config.eval.repeats,
                                             config.eval.probe_train_fraction);
  const auto stored = read_manifest(outcome.run_dir)["eval"];
  ASSERT_EQ(again.size(), stored.size());
  for (std::size_t i = 0; i < again.size(); ++i)
    EXPECT_NEAR(again[i].mean_accuracy, stored[i]["mean_accuracy"].get<double>(), 0.02);
}

TEST(Censor, MissingRunIsAnError) {
  TempDir dir("censor_missing");
  write_text(dir / "t.csv", "1,0.5\n");
  EXPECT_THROW(censor_export(dir / "none", dir / "t.csv", CensorSpace::latent), LoadError);
  EXPECT_EQ(cli(dir, "censor '" + (dir / "none").string() + "' '" + (dir / "t.csv").string() + "'").code, 1);
}
