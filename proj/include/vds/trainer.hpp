#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vds/neural_cluster.hpp"
#include "vds/objective.hpp"

namespace vds {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  std::uint64_t seed = 42;
  double learning_rate = 1e-3;
  LogitsMode mode = LogitsMode::SimAll;
  double tau = 10.0;
  LossSupport loss_support = LossSupport::FullVocabulary;
  VerbalizerAggregation aggregation = VerbalizerAggregation::Mean;
  double clip_norm = 10.0;
};

struct ModeAccuracy {
  LogitsMode mode;
  double train = 0.0;
  double test = 0.0;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean loss per epoch
  std::vector<ModeAccuracy> accuracy;  // after training, one entry per prediction mode
  double wall_seconds = 0.0;
  std::size_t weight_count = 0;
  std::size_t parameter_count = 0;
};

struct TrainResult {
  ClusterModuleParams params;
  TrainReport report;
};

/// Mini-batch gradient descent on the clustering objective: epochs x shuffled
/// batches, global-norm clipping, fixed learning rate. Deterministic in seed.
TrainResult train(const ReprBundle& bundle, const SemanticBases& bases, const TrainConfig& config);

/// Accuracy of each prediction mode on (optionally transformed) representations.
std::vector<ModeAccuracy> evaluate_modes(const ReprBundle& bundle, const SemanticBases& bases,
                                         const MatrixD& train_reps, const MatrixD& test_reps);

/// Trained module file: "VDSM", u32 version, u64 header length, JSON header
/// {d, mode, tau, seed, epochs}, then f32 parameter blocks in field order.
struct ModuleFile {
  ClusterModuleParams params;
  LogitsMode mode = LogitsMode::SimAll;
  double tau = 10.0;
  std::uint64_t seed = 42;
  std::size_t epochs = 100;
};

std::string encode_module(const ModuleFile& module);
ModuleFile decode_module(const std::string& bytes);
void write_module(const ModuleFile& module, const std::filesystem::path& path);
ModuleFile read_module(const std::filesystem::path& path);

}  // namespace vds
