#pragma once

// Config-driven experiment runner: run, compare, censor export.
//
// Run directory layout:
//   manifest.json   config echo, seed, termination, file list, eval table
//   metrics.tsv     one line per epoch, flushed as written
//   timing.tsv      wall-clock seconds per epoch
//   eval.tsv        probe accuracies (mean, std, runs)
//   encoder_<k>.cnsr, decoder.cnsr, adversary.cnsr

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "alfr/data.hpp"
#include "alfr/error.hpp"
#include "alfr/eval.hpp"
#include "alfr/serialize.hpp"
#include "alfr/training.hpp"

namespace alfr {

inline constexpr int kManifestFormatVersion = 1;
inline constexpr const char* kOutputRootEnv = "ALFR_OUTPUT_ROOT";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitNumericAbort = 3,
  kExitDeadline = 4,
};

enum class DatasetSource { mnist, csv, raw, synthetic };
enum class MethodKind { uncensored, alfr, alfr_ds };

inline const char* to_string(MethodKind m) {
  switch (m) {
    case MethodKind::uncensored: return "uncensored";
    case MethodKind::alfr: return "alfr";
    case MethodKind::alfr_ds: return "alfr_ds";
  }
  return "?";
}

struct DatasetSection {
  DatasetSource source = DatasetSource::synthetic;
  std::filesystem::path images, labels, table;
  int protected_digit = 8;
  SyntheticKind synthetic = SyntheticKind::leaky_feature;
  std::size_t rows = 4000;
  std::size_t dim = 8;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 42;
  std::size_t max_rows = 0;  // 0: use every row
};

struct MethodSection {
  MethodKind kind = MethodKind::alfr_ds;
  double alpha = 1.0;
  std::size_t epochs = 30;
  InterleaveSchedule schedule = InterleaveSchedule::per_batch;
  std::size_t max_stacks = 3;
  std::size_t epochs_per_stack = 10;
  std::optional<double> threshold = 0.6;  // none: train every stack
  std::size_t adversary_finetune_epochs = 2;
  bool reinit_adversary_per_stack = false;
  ReconstructionScale reconstruction = ReconstructionScale::per_element;
};

struct OptimizerSection {
  std::size_t batch_size = 128;
  AdamHyper actor;
  AdamHyper adversary{3e-3};
};

struct EvalSection {
  std::vector<ProbeKind> probes{ProbeKind::linear, ProbeKind::mlp};
  std::size_t repeats = 10;
  std::size_t probe_epochs = 30;
  std::size_t probe_batch_size = 64;
  std::vector<std::size_t> probe_hidden{64};
  double probe_learning_rate = 1e-2;
  double probe_train_fraction = 0.7;

  std::vector<ProbeSpec> probe_specs(std::uint64_t seed) const {
    std::vector<ProbeSpec> specs;
    for (auto kind : probes) {
      ProbeSpec s;
      s.kind = kind;
      s.epochs = probe_epochs;
      s.batch_size = probe_batch_size;
      s.hidden = probe_hidden;
      s.optimizer.learning_rate = probe_learning_rate;
      s.seed = derive_seed(seed, SeedStream::probe, static_cast<std::uint64_t>(kind));
      specs.push_back(std::move(s));
    }
    return specs;
  }
};

struct ExperimentConfig {
  std::string name = "run";
  std::uint64_t seed = 0;
  std::filesystem::path output_root = "runs";
  DatasetSection dataset;
  MethodSection method;
  Architecture arch;
  OptimizerSection optimizer;
  EvalSection eval;
  std::filesystem::path source_path;  // config file this came from, if any

  AlfrConfig alfr_config() const {
    AlfrConfig c;
    c.alpha = method.kind == MethodKind::uncensored ? 0.0 : method.alpha;
    c.epochs = method.epochs;
    c.batch_size = optimizer.batch_size;
    c.arch = arch;
    c.actor = optimizer.actor;
    c.adversary = optimizer.adversary;
    c.seed = seed;
    c.schedule = method.schedule;
    c.reconstruction = method.reconstruction;
    return c;
  }

  AlfrDsConfig alfr_ds_config() const {
    AlfrDsConfig c;
    c.max_stacks = method.max_stacks;
    c.epochs_per_stack = method.epochs_per_stack;
    c.batch_size = optimizer.batch_size;
    if (method.threshold) c.constraint = HypothesisConstraint{ScoreKind::adversary_accuracy, *method.threshold};
    else c.constraint.reset();
    c.arch = arch;
    c.reconstruction = method.reconstruction;
    c.adversary_finetune_epochs = method.adversary_finetune_epochs;
    c.reinit_adversary_per_stack = method.reinit_adversary_per_stack;
    c.actor = optimizer.actor;
    c.adversary = optimizer.adversary;
    c.seed = seed;
    return c;
  }
};

// ---------------------------------------------------------- parsing ----

namespace detail {

class IniReader {
 public:
  explicit IniReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    auto v = sec->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  std::string str(const std::string& section, const std::string& key, const std::string& fallback) {
    return raw(section, key).value_or(fallback);
  }

  double real(const std::string& section, const std::string& key, double fallback) {
    auto v = raw(section, key);
    if (!v) return fallback;
    double out = 0.0;
    if (!parse_double(*v, out) || !std::isfinite(out)) throw ConfigError(section + "." + key, "expected a number, got '" + *v + "'");
    return out;
  }

  std::uint64_t integer(const std::string& section, const std::string& key, std::uint64_t fallback) {
    auto v = raw(section, key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
      throw ConfigError(section + "." + key, "expected a non-negative integer, got '" + *v + "'");
    return out;
  }

  bool boolean(const std::string& section, const std::string& key, bool fallback) {
    auto v = raw(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(section + "." + key, "expected true or false, got '" + *v + "'");
  }

  std::vector<std::size_t> sizes(const std::string& section, const std::string& key, std::vector<std::size_t> fallback) {
    auto v = raw(section, key);
    if (!v) return fallback;
    std::vector<std::size_t> out;
    for (auto cell : split_commas(*v)) {
      const std::string t = trim(std::string(cell));
      if (t.empty()) continue;
      std::size_t n = 0;
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
      if (ec != std::errc() || ptr != t.data() + t.size() || n == 0)
        throw ConfigError(section + "." + key, "expected a comma list of positive integers, got '" + *v + "'");
      out.push_back(n);
    }
    return out;
  }

  template <typename Enum>
  Enum choice(const std::string& section, const std::string& key, Enum fallback,
              std::initializer_list<std::pair<const char*, Enum>> options) {
    auto v = raw(section, key);
    if (!v) return fallback;
    std::string allowed;
    for (const auto& [name, value] : options) {
      if (*v == name) return value;
      allowed += (allowed.empty() ? "" : "|") + std::string(name);
    }
    throw ConfigError(section + "." + key, "expected one of " + allowed + ", got '" + *v + "'");
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty())
        throw ConfigError(section, "key outside of any section");
      for (const auto& [key, value] : body)
        if (!used_.count(section + "." + key)) throw ConfigError(section + "." + key, "unknown key");
    }
  }

 private:
  static std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  const boost::property_tree::ptree& tree_;
  std::set<std::string> used_;
};

inline Activation activation_choice(IniReader& r, const std::string& key, Activation fallback) {
  return r.choice("architecture", key, fallback,
                  {{"identity", Activation::identity},
                   {"relu", Activation::relu},
                   {"sigmoid", Activation::sigmoid},
                   {"tanh", Activation::tanh}});
}

inline AdamHyper adam_section(IniReader& r, const std::string& prefix, const AdamHyper& fallback) {
  AdamHyper h;
  h.learning_rate = r.real("optimizer", prefix + "learning_rate", fallback.learning_rate);
  h.beta1 = r.real("optimizer", prefix + "beta1", fallback.beta1);
  h.beta2 = r.real("optimizer", prefix + "beta2", fallback.beta2);
  h.epsilon = r.real("optimizer", prefix + "epsilon", fallback.epsilon);
  return h;
}

}  // namespace detail

/// Parses INI text. Relative dataset paths resolve against `base_dir`.
inline ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {}) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  detail::IniReader r(tree);
  ExperimentConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  c.name = r.str("run", "name", c.name);
  c.seed = r.integer("run", "seed", c.seed);
  if (auto v = r.raw("run", "output_root")) c.output_root = resolve(*v);

  auto& d = c.dataset;
  d.source = r.choice("dataset", "source", d.source,
                      {{"mnist", DatasetSource::mnist},
                       {"csv", DatasetSource::csv},
                       {"raw", DatasetSource::raw},
                       {"synthetic", DatasetSource::synthetic}});
  if (auto v = r.raw("dataset", "images")) d.images = resolve(*v);
  if (auto v = r.raw("dataset", "labels")) d.labels = resolve(*v);
  if (auto v = r.raw("dataset", "path")) d.table = resolve(*v);
  d.protected_digit = static_cast<int>(r.integer("dataset", "protected_digit", 8));
  d.synthetic = r.choice("dataset", "synthetic", d.synthetic,
                         {{"leaky_feature", SyntheticKind::leaky_feature},
                          {"noise_bit", SyntheticKind::noise_bit},
                          {"xor_protected", SyntheticKind::xor_protected}});
  d.rows = r.integer("dataset", "rows", d.rows);
  d.dim = r.integer("dataset", "dim", d.dim);
  d.train_fraction = r.real("dataset", "train_fraction", d.train_fraction);
  d.split_seed = r.integer("dataset", "split_seed", d.split_seed);
  d.max_rows = r.integer("dataset", "max_rows", d.max_rows);

  auto& m = c.method;
  m.kind = r.choice("method", "kind", m.kind,
                    {{"uncensored", MethodKind::uncensored}, {"alfr", MethodKind::alfr}, {"alfr_ds", MethodKind::alfr_ds}});
  m.alpha = r.real("method", "alpha", m.alpha);
  m.epochs = r.integer("method", "epochs", m.epochs);
  m.schedule = r.choice("method", "schedule", m.schedule,
                        {{"per_batch", InterleaveSchedule::per_batch}, {"per_epoch", InterleaveSchedule::per_epoch}});
  m.max_stacks = r.integer("method", "max_stacks", m.max_stacks);
  m.epochs_per_stack = r.integer("method", "epochs_per_stack", m.epochs_per_stack);
  if (r.str("method", "threshold", "") == "none") m.threshold.reset();
  else m.threshold = r.real("method", "threshold", *m.threshold);
  m.adversary_finetune_epochs = r.integer("method", "adversary_finetune_epochs", m.adversary_finetune_epochs);
  m.reinit_adversary_per_stack = r.boolean("method", "reinit_adversary_per_stack", m.reinit_adversary_per_stack);
  m.reconstruction = r.choice("method", "reconstruction", m.reconstruction,
                              {{"per_element", ReconstructionScale::per_element},
                               {"per_row", ReconstructionScale::per_row}});

  auto& a = c.arch;
  a.latent_dim = r.integer("architecture", "latent_dim", a.latent_dim);
  a.encoder_hidden = r.integer("architecture", "encoder_hidden", a.encoder_hidden);
  a.stack_hidden = r.integer("architecture", "stack_hidden", a.stack_hidden);
  a.decoder_hidden = r.sizes("architecture", "decoder_hidden", a.decoder_hidden);
  a.adversary_hidden = r.sizes("architecture", "adversary_hidden", a.adversary_hidden);
  a.hidden_activation = detail::activation_choice(r, "hidden_activation", a.hidden_activation);
  a.latent_activation = detail::activation_choice(r, "latent_activation", a.latent_activation);
  a.decoder_output = detail::activation_choice(r, "decoder_output", a.decoder_output);

  auto& o = c.optimizer;
  o.batch_size = r.integer("optimizer", "batch_size", o.batch_size);
  o.actor = detail::adam_section(r, "", o.actor);
  o.adversary = detail::adam_section(r, "adversary_", o.adversary);

  auto& e = c.eval;
  if (auto v = r.raw("eval", "probes")) {
    e.probes.clear();
    for (auto cell : detail::split_commas(*v)) {
      std::string t(cell);
      t.erase(std::remove_if(t.begin(), t.end(), [](char ch) { return ch == ' ' || ch == '\t'; }), t.end());
      if (t == "linear") e.probes.push_back(ProbeKind::linear);
      else if (t == "mlp") e.probes.push_back(ProbeKind::mlp);
      else if (!t.empty()) throw ConfigError("eval.probes", "unknown probe '" + t + "' (expected linear|mlp)");
    }
  }
  e.repeats = r.integer("eval", "repeats", e.repeats);
  e.probe_epochs = r.integer("eval", "probe_epochs", e.probe_epochs);
  e.probe_batch_size = r.integer("eval", "probe_batch_size", e.probe_batch_size);
  e.probe_hidden = r.sizes("eval", "probe_hidden", e.probe_hidden);
  e.probe_learning_rate = r.real("eval", "probe_learning_rate", e.probe_learning_rate);
  e.probe_train_fraction = r.real("eval", "probe_train_fraction", e.probe_train_fraction);

  r.reject_unknown();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto c = parse_config_text(buf.str(), path.parent_path());
  c.source_path = path;
  return c;
}

/// Field-level validation, including existence of referenced files.
inline void validate_config(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* field, const std::string& msg) {
    if (!ok) throw ConfigError(field, msg);
  };
  require(!c.name.empty() && c.name.find('/') == std::string::npos, "run.name", "must be a non-empty name without '/'");
  const auto& d = c.dataset;
  switch (d.source) {
    case DatasetSource::mnist:
      require(!d.images.empty(), "dataset.images", "required for source=mnist");
      require(!d.labels.empty(), "dataset.labels", "required for source=mnist");
      require(std::filesystem::exists(d.images), "dataset.images", "file not found: " + d.images.string());
      require(std::filesystem::exists(d.labels), "dataset.labels", "file not found: " + d.labels.string());
      require(d.protected_digit >= 0 && d.protected_digit <= 9, "dataset.protected_digit", "must be in 0..9");
      break;
    case DatasetSource::csv:
    case DatasetSource::raw:
      require(!d.table.empty(), "dataset.path", "required for table sources");
      require(std::filesystem::exists(d.table), "dataset.path", "file not found: " + d.table.string());
      if (d.source == DatasetSource::raw)
        require(std::filesystem::exists(sidecar_path(d.table)), "dataset.path",
                "label sidecar not found: " + sidecar_path(d.table).string());
      break;
    case DatasetSource::synthetic:
      require(d.rows >= 2, "dataset.rows", "must be >= 2");
      require(d.dim >= 2, "dataset.dim", "must be >= 2");
      break;
  }
  require(d.train_fraction > 0.0 && d.train_fraction < 1.0, "dataset.train_fraction", "must lie in (0,1)");
  require(d.max_rows == 0 || d.max_rows >= 2, "dataset.max_rows", "must be 0 or >= 2");

  const auto& m = c.method;
  require(std::isfinite(m.alpha) && m.alpha >= 0.0, "method.alpha", "must be finite and >= 0");
  require(m.epochs >= 1, "method.epochs", "must be >= 1");
  require(m.max_stacks >= 1, "method.max_stacks", "must be >= 1");
  require(m.epochs_per_stack >= 1, "method.epochs_per_stack", "must be >= 1");
  require(!m.threshold || (*m.threshold >= 0.5 && *m.threshold <= 1.0), "method.threshold", "must lie in [0.5, 1] or be none");

  const auto& a = c.arch;
  require(a.latent_dim >= 1, "architecture.latent_dim", "must be >= 1");
  require(a.encoder_hidden >= 1, "architecture.encoder_hidden", "must be >= 1");

  const auto& o = c.optimizer;
  require(o.batch_size >= 1, "optimizer.batch_size", "must be >= 1");
  for (const auto* h : {&o.actor, &o.adversary}) {
    const char* which = h == &o.actor ? "optimizer.learning_rate" : "optimizer.adversary_learning_rate";
    require(h->learning_rate > 0.0, which, "must be > 0");
    require(h->beta1 >= 0.0 && h->beta1 < 1.0, "optimizer.beta1", "must lie in [0,1)");
    require(h->beta2 >= 0.0 && h->beta2 < 1.0, "optimizer.beta2", "must lie in [0,1)");
    require(h->epsilon > 0.0, "optimizer.epsilon", "must be > 0");
  }

  const auto& e = c.eval;
  require(!e.probes.empty(), "eval.probes", "at least one probe kind is required");
  require(e.repeats >= 1, "eval.repeats", "must be >= 1");
  require(e.probe_epochs >= 1, "eval.probe_epochs", "must be >= 1");
  require(e.probe_batch_size >= 1, "eval.probe_batch_size", "must be >= 1");
  require(e.probe_learning_rate > 0.0, "eval.probe_learning_rate", "must be > 0");
  require(e.probe_train_fraction > 0.0 && e.probe_train_fraction < 1.0, "eval.probe_train_fraction", "must lie in (0,1)");
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  auto path = [](const std::filesystem::path& p) { return p.string(); };
  const char* sources[] = {"mnist", "csv", "raw", "synthetic"};
  const char* synth[] = {"leaky_feature", "noise_bit", "xor_protected"};
  nlohmann::json probes = nlohmann::json::array();
  for (auto k : c.eval.probes) probes.push_back(to_string(k));
  auto adam = [](const AdamHyper& h) {
    return nlohmann::json{{"learning_rate", h.learning_rate}, {"beta1", h.beta1}, {"beta2", h.beta2}, {"epsilon", h.epsilon}};
  };
  return {
      {"run", {{"name", c.name}, {"seed", c.seed}, {"output_root", path(c.output_root)}}},
      {"dataset",
       {{"source", sources[static_cast<int>(c.dataset.source)]},
        {"images", path(c.dataset.images)},
        {"labels", path(c.dataset.labels)},
        {"path", path(c.dataset.table)},
        {"protected_digit", c.dataset.protected_digit},
        {"synthetic", synth[static_cast<int>(c.dataset.synthetic)]},
        {"rows", c.dataset.rows},
        {"dim", c.dataset.dim},
        {"train_fraction", c.dataset.train_fraction},
        {"split_seed", c.dataset.split_seed},
        {"max_rows", c.dataset.max_rows}}},
      {"method",
       {{"kind", to_string(c.method.kind)},
        {"alpha", c.method.alpha},
        {"epochs", c.method.epochs},
        {"schedule", c.method.schedule == InterleaveSchedule::per_batch ? "per_batch" : "per_epoch"},
        {"max_stacks", c.method.max_stacks},
        {"epochs_per_stack", c.method.epochs_per_stack},
        {"threshold", c.method.threshold ? nlohmann::json(*c.method.threshold) : nlohmann::json("none")},
        {"adversary_finetune_epochs", c.method.adversary_finetune_epochs},
        {"reinit_adversary_per_stack", c.method.reinit_adversary_per_stack},
        {"reconstruction", c.method.reconstruction == ReconstructionScale::per_element ? "per_element" : "per_row"}}},
      {"architecture",
       {{"latent_dim", c.arch.latent_dim},
        {"encoder_hidden", c.arch.encoder_hidden},
        {"stack_hidden", c.arch.stack_hidden},
        {"decoder_hidden", c.arch.decoder_hidden},
        {"adversary_hidden", c.arch.adversary_hidden},
        {"hidden_activation", to_string(c.arch.hidden_activation)},
        {"latent_activation", to_string(c.arch.latent_activation)},
        {"decoder_output", to_string(c.arch.decoder_output)}}},
      {"optimizer", {{"batch_size", c.optimizer.batch_size}, {"actor", adam(c.optimizer.actor)}, {"adversary", adam(c.optimizer.adversary)}}},
      {"eval",
       {{"probes", probes},
        {"repeats", c.eval.repeats},
        {"probe_epochs", c.eval.probe_epochs},
        {"probe_batch_size", c.eval.probe_batch_size},
        {"probe_hidden", c.eval.probe_hidden},
        {"probe_learning_rate", c.eval.probe_learning_rate},
        {"probe_train_fraction", c.eval.probe_train_fraction}}},
  };
}

// ---------------------------------------------------------- running ----

inline LabeledDataset load_dataset(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  LabeledDataset data;
  switch (d.source) {
    case DatasetSource::mnist: data = load_mnist_idx(d.images, d.labels, d.protected_digit); break;
    case DatasetSource::csv: data = load_embedding_table(d.table, TableFormat::csv_with_label_column); break;
    case DatasetSource::raw: data = load_embedding_table(d.table, TableFormat::raw_f32le_with_sidecar_labels); break;
    case DatasetSource::synthetic:
      data = make_synthetic(d.synthetic, d.rows, d.dim, derive_seed(c.seed, SeedStream::synthetic));
      break;
  }
  if (d.max_rows != 0 && d.max_rows < data.rows()) {
    const auto idx = shuffled_indices(data.rows(), derive_seed(d.split_seed, SeedStream::split, 1));
    auto name = data.name;
    data = data.subset(std::span(idx).first(d.max_rows));
    data.name = name;
  }
  data.validate();
  return data;
}

inline std::pair<LabeledDataset, LabeledDataset> train_eval_split(const ExperimentConfig& c, const LabeledDataset& data) {
  return split(data, SplitSpec{c.dataset.train_fraction, c.dataset.split_seed});
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline constexpr const char* kMetricsHeader =
    "epoch\tstack_index\treconstruction_mse\tadversary_cross_entropy\tbatch_mean_dampening";

inline std::string metrics_line(const MetricsRecord& m) {
  return std::to_string(m.epoch) + '\t' + std::to_string(m.stack_index) + '\t' + detail::format_double(m.reconstruction_mse) +
         '\t' + detail::format_double(m.adversary_cross_entropy) + '\t' + detail::format_double(m.batch_mean_dampening);
}

struct RunOutcome {
  int exit_code = kExitOk;
  std::filesystem::path run_dir;
  std::string message;
  Termination terminated_by = Termination::epoch_budget;
  std::vector<EvalResult> eval;
  double final_eval_mse = 0.0;
};

inline std::filesystem::path resolve_output_root(const ExperimentConfig& c) {
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return c.output_root;
}

inline nlohmann::json eval_to_json(const std::vector<EvalResult>& results) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results)
    out.push_back({{"probe", to_string(r.probe_kind)},
                   {"mean_accuracy", r.mean_accuracy},
                   {"std_accuracy", r.std_accuracy},
                   {"runs", r.runs},
                   {"accuracies", r.accuracies}});
  return out;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw LoadError(path.string(), "cannot open for writing");
  out << j.dump(2) << '\n';
}

/// Trains, evaluates, and writes a run directory. Never throws for
/// config, numeric, or I/O failures; those map to exit codes.
inline RunOutcome run_experiment(const ExperimentConfig& config) {
  RunOutcome outcome;
  try {
    validate_config(config);
  } catch (const ConfigError& e) {
    outcome.exit_code = kExitConfigError;
    outcome.message = e.what();
    return outcome;
  }

  nlohmann::json manifest{{"format_version", kManifestFormatVersion},
                          {"config", config_to_json(config)},
                          {"seed", config.seed},
                          {"method", to_string(config.method.kind)},
                          {"status", "running"}};
  try {
    const auto data = load_dataset(config);
    const auto [train, eval] = train_eval_split(config, data);
    outcome.run_dir = resolve_output_root(config) / config.name;
    std::filesystem::create_directories(outcome.run_dir);
    manifest["data"] = {{"name", data.name}, {"rows", data.rows()}, {"dim", data.dim()},
                        {"train_rows", train.rows()}, {"eval_rows", eval.rows()}};
    write_json(outcome.run_dir / "manifest.json", manifest);

    std::ofstream metrics(outcome.run_dir / "metrics.tsv");
    std::ofstream timing(outcome.run_dir / "timing.tsv");
    metrics << kMetricsHeader << '\n' << std::flush;
    timing << "epoch\twall_time\n" << std::flush;
    auto on_epoch = [&](const MetricsRecord& m) {
      metrics << metrics_line(m) << '\n' << std::flush;
      timing << m.epoch << '\t' << detail::format_double(m.wall_time) << '\n' << std::flush;
    };

    TrainReport report;
    try {
      report = config.method.kind == MethodKind::alfr_ds ? train_alfr_ds(train, config.alfr_ds_config(), on_epoch)
                                                         : train_alfr(train, config.alfr_config(), on_epoch);
    } catch (const NumericError& e) {
      manifest["status"] = "numeric_abort";
      manifest["error"] = e.what();
      write_json(outcome.run_dir / "manifest.json", manifest);
      outcome.exit_code = kExitNumericAbort;
      outcome.message = e.what();
      return outcome;
    }

    nlohmann::json encoders = nlohmann::json::array();
    for (std::size_t k = 0; k < report.stack.size(); ++k) {
      const std::string file = "encoder_" + std::to_string(k) + ".cnsr";
      save_network(outcome.run_dir / file, report.stack.encoder(k));
      encoders.push_back(file);
    }
    save_network(outcome.run_dir / "decoder.cnsr", report.decoder);
    save_network(outcome.run_dir / "adversary.cnsr", report.adversary);

    const auto specs = config.eval.probe_specs(config.seed);
    outcome.eval = evaluate_censoring(report.stack, eval, specs, config.eval.repeats, config.eval.probe_train_fraction);
    outcome.final_eval_mse = reconstruction_error(report.stack, report.decoder, eval);
    outcome.terminated_by = report.terminated_by;

    std::ofstream eval_tsv(outcome.run_dir / "eval.tsv");
    eval_tsv << "probe\tmean_accuracy\tstd_accuracy\truns\n";
    for (const auto& r : outcome.eval)
      eval_tsv << to_string(r.probe_kind) << '\t' << detail::format_double(r.mean_accuracy) << '\t'
               << detail::format_double(r.std_accuracy) << '\t' << r.runs << '\n';

    manifest["status"] = "complete";
    manifest["terminated_by"] = to_string(report.terminated_by);
    manifest["epochs_run"] = report.metrics.size();
    manifest["stack_scores"] = report.stack_scores;
    manifest["encoders"] = encoders;
    manifest["decoder"] = "decoder.cnsr";
    manifest["adversary"] = "adversary.cnsr";
    manifest["eval"] = eval_to_json(outcome.eval);
    manifest["final_eval_mse"] = outcome.final_eval_mse;
    if (!report.metrics.empty()) manifest["final_train_mse"] = report.metrics.back().reconstruction_mse;
    write_json(outcome.run_dir / "manifest.json", manifest);

    if (config.method.kind == MethodKind::alfr_ds && report.terminated_by == Termination::deadline) {
      outcome.exit_code = kExitDeadline;
      outcome.message = "deadline reached without meeting the censoring constraint";
    }
    return outcome;
  } catch (const ConfigError& e) {
    outcome.exit_code = kExitConfigError;
    outcome.message = e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = kExitFailure;
    outcome.message = e.what();
  }
  return outcome;
}

// ---------------------------------------------------------- loading ----

inline nlohmann::json read_manifest(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw LoadError(run_dir.string(), "no manifest.json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(run_dir.string(), std::string("unreadable manifest: ") + e.what());
  }
  if (j.value("status", "") != "complete") throw LoadError(run_dir.string(), "run is not complete");
  if (j.value("format_version", 0) != kManifestFormatVersion)
    throw LoadError(run_dir.string(), "unsupported manifest format_version");
  return j;
}

struct LoadedRun {
  nlohmann::json manifest;
  EncoderStack stack;
  DenseNetwork decoder;
};

inline LoadedRun load_run(const std::filesystem::path& run_dir, bool with_decoder = true) {
  LoadedRun run;
  run.manifest = read_manifest(run_dir);
  try {
    run.stack = EncoderStack(run.manifest.at("data").at("dim").get<std::size_t>());
    for (const auto& file : run.manifest.at("encoders")) run.stack.push(load_network(run_dir / file.get<std::string>()));
    run.stack.freeze_top();
    if (with_decoder) {
      run.decoder = load_network(run_dir / run.manifest.at("decoder").get<std::string>());
      run.decoder.freeze();
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(run_dir.string(), std::string("incomplete manifest: ") + e.what());
  }
  return run;
}

// ---------------------------------------------------------- compare ----

struct ComparisonRow {
  std::string run;
  std::string method;
  std::map<std::string, std::pair<double, double>> probes;  // kind -> (mean, std)
  double final_eval_mse = 0.0;
  std::string terminated_by;
};

struct ComparisonTable {
  std::vector<std::string> probe_kinds;
  std::vector<ComparisonRow> rows;

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row{{"run", r.run}, {"method", r.method}, {"final_eval_mse", r.final_eval_mse},
                         {"terminated_by", r.terminated_by}};
      for (const auto& [kind, ms] : r.probes) row[kind] = {{"mean", ms.first}, {"std", ms.second}};
      out.push_back(row);
    }
    return out;
  }

  std::string to_text() const {
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header{"run", "method"};
    for (const auto& k : probe_kinds) header.push_back(k);
    header.push_back("eval_mse");
    header.push_back("terminated_by");
    cells.push_back(header);
    for (const auto& r : rows) {
      std::vector<std::string> line{r.run, r.method};
      for (const auto& k : probe_kinds) {
        auto it = r.probes.find(k);
        std::ostringstream s;
        if (it == r.probes.end()) s << "-";
        else s << std::fixed << std::setprecision(3) << it->second.first << " ± " << it->second.second;
        line.push_back(s.str());
      }
      std::ostringstream mse;
      mse << std::setprecision(6) << r.final_eval_mse;
      line.push_back(mse.str());
      line.push_back(r.terminated_by);
      cells.push_back(line);
    }
    // "±" is two bytes but one column wide
    auto width = [](const std::string& s) {
      std::size_t w = 0;
      for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
      return w;
    };
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& line : cells)
      for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], width(line[i]));
    std::ostringstream out;
    for (const auto& line : cells) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        out << line[i];
        if (i + 1 < line.size()) out << std::string(widths[i] - width(line[i]) + 2, ' ');
      }
      out << '\n';
    }
    return out.str();
  }
};

/// Rows are ordered by run name then path, independent of argument order.
inline ComparisonTable compare_runs(std::vector<std::filesystem::path> run_dirs) {
  if (run_dirs.empty()) throw std::invalid_argument("compare needs at least one run directory");
  std::sort(run_dirs.begin(), run_dirs.end(), [](const auto& a, const auto& b) {
    const auto an = a.lexically_normal().filename().string(), bn = b.lexically_normal().filename().string();
    return an != bn ? an < bn : a.string() < b.string();
  });
  ComparisonTable table;
  std::set<std::string> kinds;
  for (const auto& dir : run_dirs) {
    const auto m = read_manifest(dir);
    ComparisonRow row;
    try {
      row.run = m.at("config").at("run").at("name").get<std::string>();
      row.method = m.at("method").get<std::string>();
      row.final_eval_mse = m.at("final_eval_mse").get<double>();
      row.terminated_by = m.at("terminated_by").get<std::string>();
      for (const auto& e : m.at("eval")) {
        const auto kind = e.at("probe").get<std::string>();
        row.probes[kind] = {e.at("mean_accuracy").get<double>(), e.at("std_accuracy").get<double>()};
        kinds.insert(kind);
      }
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(dir.string(), std::string("incomplete manifest: ") + e.what());
    }
    table.rows.push_back(std::move(row));
  }
  for (const char* k : {"linear", "mlp"})
    if (kinds.count(k)) table.probe_kinds.push_back(k);
  return table;
}

// ----------------------------------------------------------- censor ----

enum class CensorSpace { latent, original };

/// e(X) or d(e(X)) of a table, as a dataset carrying the input labels.
inline LabeledDataset censor_table(const EncoderStack& stack, const DenseNetwork* decoder, const LabeledDataset& input,
                                   CensorSpace space) {
  LabeledDataset out;
  out.name = input.name;
  out.S = input.S;
  if (space == CensorSpace::latent) {
    out.X = stack.encode(input.X);
  } else {
    if (decoder == nullptr || decoder->empty()) throw std::invalid_argument("original space needs a decoder");
    out.X = censor_original(stack, *decoder, input.X);
  }
  return out;
}

/// Writes the censored table in the input's format. Returns the output path.
inline std::filesystem::path censor_export(const std::filesystem::path& run_dir, const std::filesystem::path& table,
                                           CensorSpace space, std::filesystem::path output = {}) {
  const auto run = load_run(run_dir, space == CensorSpace::original);
  const auto format = infer_table_format(table);
  const auto input = load_embedding_table(table, format);
  const auto censored = censor_table(run.stack, &run.decoder, input, space);
  if (output.empty())
    output = run_dir / ((space == CensorSpace::latent ? "censored_latent" : "censored_original") + table.extension().string());
  save_embedding_table(output, censored, format);
  return output;
}

}  // namespace alfr
