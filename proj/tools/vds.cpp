// vds: command-line pipeline over VDSR bundles and VDSM modules.
//
//   synth   generate a synthetic bundle
//   bases   semantic bases of a bundle's LM head
//   eval    label-space classification with similarity or matmul logits
//   train   fit the clustering module
//   knn     k-nearest-neighbor accuracy and sibling rate
//   report  aggregate CSV and PCA scatter before/after clustering
//   flops   cost of one logits computation

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csv_report.hpp"
#include "vds/byte_io.hpp"
#include "vds/error.hpp"
#include "vds/knn.hpp"
#include "vds/metrics.hpp"
#include "vds/projection.hpp"
#include "vds/repr_store.hpp"
#include "vds/semantic_basis.hpp"
#include "vds/semantic_logits.hpp"
#include "vds/simd.hpp"
#include "vds/trainer.hpp"

namespace {

using namespace vds;
using cli::CsvReport;

constexpr const char* kToolVersion = "1.0.0";

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

LogitsMode mode_from_flag(const std::string& name) {
  const auto mode = parse_logits_mode(name);
  if (!mode) throw Error(ErrorCode::InvalidArgument, "unknown mode '" + name + "'");
  return *mode;
}

const std::map<std::string, LogitsMode>& mode_names() {
  static const std::map<std::string, LogitsMode> names = [] {
    std::map<std::string, LogitsMode> m;
    for (auto mode : kAllModes) m.emplace(std::string(to_string(mode)), mode);
    return m;
  }();
  return names;
}

/// Records the subcommand, every resolved flag and input digests. Wall time is
/// not part of it (reports must be byte-identical across reruns); it goes to stderr.
void embed_manifest(CsvReport& report, const CLI::App& sub,
                    const std::vector<std::string>& inputs) {
  report.manifest("tool_version", kToolVersion);
  report.manifest("subcommand", sub.get_name());
  report.manifest("kernels", std::string(simd::to_string(simd::active().isa)));
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "-h,--help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ";") + r;
    } else {
      value = opt->get_default_str();
    }
    report.manifest("flag" + opt->get_name(), value);
  }
  for (const auto& path : inputs)
    if (!path.empty()) report.manifest("sha256:" + path, cli::sha256_file(path));
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  ~Timer() {
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "wall_seconds=%.3f\n", s);
  }
};

void add_classification(CsvReport& report, const std::string& stage, const ReprBundle& bundle,
                        const SemanticBases& bases, LogitsMode mode, double tau,
                        const MatrixD& train_reps, const MatrixD& test_reps) {
  const ClassScorer scorer(bundle, bases, mode);
  const std::string m(to_string(mode));
  const auto split = [&](const std::string& name, const MatrixD& reps,
                         const std::vector<std::uint32_t>& truth) {
    const auto pred = scorer.predict_all(reps);
    report.add(stage, m, "", name + "_accuracy", accuracy(pred, truth));
    report.add(stage, m, "", name + "_macro_f1", macro_f1(pred, truth, bundle.n_classes));
    if (truth.size() >= 2) report.add(stage, m, "", name + "_ari", ari(pred, truth));
    double prob = 0.0;
    for (std::size_t i = 0; i < reps.rows(); ++i)
      prob += to_probs(scorer.scores(reps.row(i)), tau).probs[truth[i]];
    report.add(stage, m, "", name + "_mean_true_prob", prob / static_cast<double>(reps.rows()));
  };
  split("train", train_reps, bundle.train_labels);
  split("test", test_reps, bundle.test_labels);
}

struct Inputs {
  ReprBundle bundle;
  MatrixD train;
  MatrixD test;
};

Inputs load(const std::string& path) {
  Inputs in{read_bundle(path), {}, {}};
  in.train = matrix_cast<double>(in.bundle.train_reps);
  in.test = matrix_cast<double>(in.bundle.test_reps);
  return in;
}

void apply_module(Inputs& in, const std::string& module_path) {
  const ModuleFile module = read_module(module_path);
  if (module.params.d != in.bundle.d)
    throw Error(ErrorCode::ShapeMismatch, "module d does not match the bundle");
  in.train = transform_all(module.params, in.train);
  in.test = transform_all(module.params, in.test);
}

void add_knn(CsvReport& report, const std::string& stage, const ReprBundle& bundle,
             const MatrixD& train, const MatrixD& test, const std::vector<std::size_t>& ks) {
  for (auto k : ks) {
    const auto score = knn_eval(bundle, train, test, KnnConfig{k});
    const std::string ks_text = std::to_string(k);
    report.add(stage, "knn-cosine", ks_text, "test_accuracy", score.accuracy);
    report.add(stage, "knn-cosine", ks_text, "test_macro_f1", score.macro_f1);
    if (k < train.rows())
      report.add(stage, "knn-cosine", ks_text, "train_sibling_rate",
                 sibling_rate(train, bundle.train_labels, k));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vocabulary-defined semantics toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // synth
  SynthSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a deterministic synthetic bundle");
  synth_cmd->add_option("--seed", synth.seed, "RNG seed");
  synth_cmd->add_option("--dim", synth.d, "Latent dimension d")->check(CLI::Range(2, 1 << 16));
  synth_cmd->add_option("--vocab", synth.v, "Vocabulary size v")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--classes", synth.n_classes, "Number of classes")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--train", synth.n_train, "Training samples")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--test", synth.n_test, "Test samples")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", synth.noise_sigma, "Noise standard deviation")
      ->check(CLI::NonNegativeNumber);
  synth.mix = false;
  synth_cmd->add_flag("--mix", synth.mix, "Apply a hidden random invertible mixing matrix");
  synth_cmd->add_option("--out", synth_out, "Output VDSR file")->required();

  // bases
  std::string bases_in, bases_out, bases_report;
  double bases_rcond = kDefaultRcond;
  auto* bases_cmd = app.add_subcommand("bases", "Semantic bases from the LM-head pseudoinverse");
  bases_cmd->add_option("--in", bases_in, "Input VDSR bundle")->required();
  bases_cmd->add_option("--rcond", bases_rcond, "Relative singular-value cutoff");
  bases_cmd->add_option("--out", bases_out, "Output f32 matrix (sidecar written to <out>.json)")
      ->required();
  bases_cmd->add_option("--report", bases_report, "CSV report path (default: stdout)");

  // eval
  std::string eval_in, eval_mode = "sim-all", eval_module, eval_out;
  double eval_tau = 1.0, eval_rcond = kDefaultRcond;
  auto* eval_cmd = app.add_subcommand("eval", "Label-space classification accuracy, F1 and ARI");
  eval_cmd->add_option("--in", eval_in, "Input VDSR bundle")->required();
  eval_cmd->add_option("--mode", eval_mode, "Logits mode")
      ->check(CLI::IsMember({"sim-all", "mat-mul", "sim-all-exp", "mat-mul-exp"}));
  eval_cmd->add_option("--tau", eval_tau, "Softmax temperature for reported probabilities")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--rcond", eval_rcond, "Relative singular-value cutoff");
  eval_cmd->add_option("--use-module", eval_module, "Apply a trained VDSM module first");
  eval_cmd->add_option("--out", eval_out, "CSV report path (default: stdout)");

  // train
  TrainConfig train_cfg;
  std::string train_in, train_out, train_report, train_mode = "sim-all",
                                                 train_support = "full-vocabulary";
  double train_rcond = kDefaultRcond;
  auto* train_cmd = app.add_subcommand("train", "Train the neural clustering module");
  train_cmd->add_option("--in", train_in, "Input VDSR bundle")->required();
  train_cmd->add_option("--epochs", train_cfg.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", train_cfg.batch_size, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train_cfg.seed, "RNG seed");
  train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--mode", train_mode, "Logits mode of the loss")
      ->check(CLI::IsMember(mode_names()));
  train_cmd->add_option("--tau", train_cfg.tau, "Softmax temperature of the loss")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--loss-support", train_support, "Cross-entropy support")
      ->check(CLI::IsMember({"full-vocabulary", "label-tokens"}));
  train_cmd->add_option("--rcond", train_rcond, "Relative singular-value cutoff");
  train_cmd->add_option("--out", train_out, "Output VDSM module")->required();
  train_cmd->add_option("--report", train_report, "CSV report path (default: stdout)");

  // knn
  std::string knn_in, knn_module, knn_out;
  std::vector<std::size_t> knn_ks{1, 16};
  auto* knn_cmd = app.add_subcommand("knn", "k-nearest-neighbor decisions and sibling rate");
  knn_cmd->add_option("--in", knn_in, "Input VDSR bundle")->required();
  knn_cmd->add_option("--k", knn_ks, "Neighbor count (repeatable)")->check(CLI::PositiveNumber);
  knn_cmd->add_option("--use-module", knn_module, "Apply a trained VDSM module first");
  knn_cmd->add_option("--out", knn_out, "CSV report path (default: stdout)");

  // report
  std::string report_in, report_module, report_csv, report_svg;
  double report_tau = 1.0, report_rcond = kDefaultRcond;
  std::uint64_t report_seed = 42;
  std::vector<std::size_t> report_ks{1, 16};
  auto* report_cmd =
      app.add_subcommand("report", "Aggregate CSV and PCA scatter before/after clustering");
  report_cmd->add_option("--in", report_in, "Input VDSR bundle")->required();
  report_cmd->add_option("--module", report_module, "Trained VDSM module")->required();
  report_cmd->add_option("--k", report_ks, "Neighbor count (repeatable)")->check(CLI::PositiveNumber);
  report_cmd->add_option("--tau", report_tau, "Softmax temperature for reported probabilities")
      ->check(CLI::PositiveNumber);
  report_cmd->add_option("--rcond", report_rcond, "Relative singular-value cutoff");
  report_cmd->add_option("--seed", report_seed, "Seed of the PCA power iteration");
  report_cmd->add_option("--csv", report_csv, "CSV report path (default: stdout)");
  report_cmd->add_option("--svg", report_svg, "SVG scatter path")->required();

  // flops
  std::string flops_mode = "sim-all";
  std::uint64_t flops_dim = 4096, flops_vocab = 128256;
  auto* flops_cmd = app.add_subcommand("flops", "FLOPs of one logits computation");
  flops_cmd->add_option("--mode", flops_mode, "Logits mode")->check(CLI::IsMember(mode_names()));
  flops_cmd->add_option("--dim", flops_dim, "Latent dimension d")->check(CLI::PositiveNumber);
  flops_cmd->add_option("--vocab", flops_vocab, "Vocabulary size v")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    Timer timer;
    if (*synth_cmd) {
      write_bundle(gen_synthetic(synth), synth_out);
    } else if (*bases_cmd) {
      const ReprBundle bundle = read_bundle(bases_in);
      const SemanticBases bases = head_bases(bundle, bases_rcond);
      write_bases(bases, bases_out);
      CsvReport report;
      embed_manifest(report, *bases_cmd, {bases_in});
      const auto penrose =
          check_penrose(matrix_cast<double>(bundle.lm_head), bases.bases, 1e-8);
      for (std::size_t i = 0; i < 4; ++i)
        report.add("bases", "", "", "penrose_residual_" + std::to_string(i + 1),
                   penrose.residuals[i]);
      report.emit(bases_report);
    } else if (*eval_cmd) {
      Inputs in = load(eval_in);
      const SemanticBases bases = head_bases(in.bundle, eval_rcond);
      if (!eval_module.empty()) apply_module(in, eval_module);
      CsvReport report;
      embed_manifest(report, *eval_cmd, {eval_in, eval_module});
      add_classification(report, eval_module.empty() ? "baseline" : "clustered", in.bundle, bases,
                         mode_from_flag(eval_mode), eval_tau, in.train, in.test);
      report.emit(eval_out);
    } else if (*train_cmd) {
      const ReprBundle bundle = read_bundle(train_in);
      const SemanticBases bases = head_bases(bundle, train_rcond);
      train_cfg.mode = mode_from_flag(train_mode);
      train_cfg.loss_support = *parse_loss_support(train_support);
      const TrainResult result = train(bundle, bases, train_cfg);
      write_module({result.params, train_cfg.mode, train_cfg.tau, train_cfg.seed, train_cfg.epochs},
                   train_out);

      CsvReport report;
      embed_manifest(report, *train_cmd, {train_in});
      const std::string m(to_string(train_cfg.mode));
      for (std::size_t e = 0; e < result.report.epoch_loss.size(); ++e) {
        char metric[32];
        std::snprintf(metric, sizeof metric, "loss_epoch_%04zu", e + 1);
        report.add("train", m, "", metric, result.report.epoch_loss[e]);
      }
      report.add("train", m, "", "weight_count", static_cast<double>(result.report.weight_count));
      report.add("train", m, "", "parameter_count",
                 static_cast<double>(result.report.parameter_count));
      for (const auto& acc : result.report.accuracy) {
        report.add("trained", std::string(to_string(acc.mode)), "", "train_accuracy", acc.train);
        report.add("trained", std::string(to_string(acc.mode)), "", "test_accuracy", acc.test);
      }
      report.emit(train_report);
    } else if (*knn_cmd) {
      Inputs in = load(knn_in);
      CsvReport report;
      embed_manifest(report, *knn_cmd, {knn_in, knn_module});
      add_knn(report, "raw", in.bundle, in.train, in.test, knn_ks);
      if (!knn_module.empty()) {
        apply_module(in, knn_module);
        add_knn(report, "clustered", in.bundle, in.train, in.test, knn_ks);
      }
      report.emit(knn_out);
    } else if (*report_cmd) {
      Inputs in = load(report_in);
      const SemanticBases bases = head_bases(in.bundle, report_rcond);
      CsvReport report;
      embed_manifest(report, *report_cmd, {report_in, report_module});
      for (auto mode : kAllModes)
        report.add("flops", std::string(to_string(mode)), "", "flops_per_logits",
                   static_cast<double>(estimate_flops(mode, in.bundle.d, in.bundle.v)));

      const MatrixD raw_test = in.test;
      for (auto mode : kPredictionModes)
        add_classification(report, "baseline", in.bundle, bases, mode, report_tau, in.train,
                           in.test);
      add_knn(report, "raw", in.bundle, in.train, in.test, report_ks);

      apply_module(in, report_module);
      for (auto mode : kPredictionModes)
        add_classification(report, "clustered", in.bundle, bases, mode, report_tau, in.train,
                           in.test);
      add_knn(report, "clustered", in.bundle, in.train, in.test, report_ks);
      report.emit(report_csv);

      const Projection2D before = pca_2d(raw_test, report_seed);
      const Projection2D after = pca_2d(in.test, report_seed);
      const ScatterPanel panels[] = {{"test representations (raw)", &before, in.bundle.test_labels},
                                     {"test representations (clustered)", &after,
                                      in.bundle.test_labels}};
      byte_io::write_file(report_svg, scatter_svg(panels));
    } else if (*flops_cmd) {
      std::cout << estimate_flops(mode_from_flag(flops_mode), flops_dim, flops_vocab) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? kNumericalError : kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
