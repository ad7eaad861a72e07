#include "vds/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "vds/error.hpp"
#include "vds/metrics.hpp"
#include "vds/rng.hpp"

namespace vds {

namespace {

double global_norm(const ClusterModuleParams& grads) {
  double sum = 0.0;
  grads.for_each_group([&](std::string_view, auto values) {
    for (double x : values) sum += x * x;
  });
  return std::sqrt(sum);
}

void gather(const MatrixD& reps, const std::vector<std::uint32_t>& labels,
            std::span<const std::size_t> rows, Batch& batch) {
  batch.reps = MatrixD(rows.size(), reps.cols());
  batch.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = reps.row(rows[i]);
    std::copy(src.begin(), src.end(), batch.reps.row(i).begin());
    batch.labels[i] = labels[rows[i]];
  }
}

// params -= scale * grads; false when any parameter leaves the finite range.
bool descend(ClusterModuleParams& params, const ClusterModuleParams& grads, double scale) {
  std::vector<std::span<const double>> steps;
  grads.for_each_group([&](std::string_view, std::span<const double> g) { steps.push_back(g); });
  bool finite = true;
  std::size_t group = 0;
  params.for_each_group([&](std::string_view, std::span<double> values) {
    const auto g = steps[group++];
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] -= scale * g[i];
      finite = finite && std::isfinite(values[i]);
    }
  });
  return finite;
}

}  // namespace

std::vector<ModeAccuracy> evaluate_modes(const ReprBundle& bundle, const SemanticBases& bases,
                                         const MatrixD& train_reps, const MatrixD& test_reps) {
  std::vector<ModeAccuracy> out;
  for (auto mode : kPredictionModes) {
    const ClassScorer scorer(bundle, bases, mode);
    out.push_back({mode, accuracy(scorer.predict_all(train_reps), bundle.train_labels),
                   accuracy(scorer.predict_all(test_reps), bundle.test_labels)});
  }
  return out;
}

TrainResult train(const ReprBundle& bundle, const SemanticBases& bases, const TrainConfig& config) {
  if (config.epochs < 1 || config.batch_size < 1)
    throw Error(ErrorCode::InvalidArgument, "epochs and batch size must be >= 1");
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate))
    throw Error(ErrorCode::InvalidArgument, "learning rate must be finite and >= 0");
  require_module_dim(bundle.d);

  const auto started = std::chrono::steady_clock::now();
  const ClusteringObjective objective(bundle, bases, config.mode, config.tau, config.loss_support,
                                      config.aggregation);
  Rng rng(config.seed);
  TrainResult result{ClusterModuleParams::initialize(bundle.d, rng), {}};
  auto& params = result.params;

  const MatrixD train_reps = matrix_cast<double>(bundle.train_reps);
  const std::size_t n = bundle.n_train();
  std::vector<std::size_t> order(n);
  std::vector<double> sample_loss(n), batch_loss;
  Batch batch;
  ClusterModuleParams grads;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t start = 0; start < n; start += config.batch_size, ++step) {
      const std::size_t count = std::min(config.batch_size, n - start);
      const std::span<const std::size_t> rows(order.data() + start, count);
      gather(train_reps, bundle.train_labels, rows, batch);

      double l;
      try {
        l = objective.loss_and_grad(params, batch, grads, &batch_loss);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFiniteIntermediate && e.code() != ErrorCode::ZeroVector)
          throw;
        throw Error(ErrorCode::Diverged, "step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(l))
        throw Error(ErrorCode::Diverged, "loss is not finite at step " + std::to_string(step));
      // Stored by sample index so the epoch mean does not depend on shuffle order.
      for (std::size_t i = 0; i < count; ++i) sample_loss[rows[i]] = batch_loss[i];

      const double norm = global_norm(grads);
      const double scale =
          config.learning_rate * (norm > config.clip_norm ? config.clip_norm / norm : 1.0);
      const bool finite = descend(params, grads, scale);
      if (!finite)
        throw Error(ErrorCode::Diverged,
                    "parameters are not finite after step " + std::to_string(step));
    }
    double total = 0.0;
    for (double x : sample_loss) total += x;
    result.report.epoch_loss.push_back(total / static_cast<double>(n));
  }

  result.report.accuracy = evaluate_modes(bundle, bases, transform_all(params, train_reps),
                                          transform_all(params, matrix_cast<double>(bundle.test_reps)));
  result.report.weight_count = params.weight_count();
  result.report.parameter_count = params.parameter_count();
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace vds
