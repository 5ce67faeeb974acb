#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dbcc/config.hpp"
#include "dbcc/dataset.hpp"
#include "dbcc/optimizer.hpp"

namespace dbcc {

struct EpochLog {
  int epoch = 0;
  double train_mse = 0.0;
  double val_angular_deg = 0.0;
};

struct TrainResult {
  ModelF model;  // best-validation parameters
  std::vector<EpochLog> curve;
  int best_epoch = 0;
  double best_val_angular_deg = 0.0;
  long long degenerate_estimates = 0;

  /// One line per epoch: epoch <tab> train-mse <tab> val-mean-angular-error-deg.
  std::string log_text() const;
};

struct EvalResult {
  MetricsReport report;
  std::vector<Illuminant> estimates;
  long long degenerate = 0;  // substituted by the neutral illuminant
};

/// Mean angular error of a model over a sample list. Images run at native
/// size when the shape chain allows it, otherwise they are resized to the
/// configured input. Degenerate estimates fall back to neutral gray.
EvalResult evaluate(const ModelF& model, const std::vector<Sample>& samples, double gamma);

/// Minibatch Adam on the MSE between estimated and ground-truth illuminants.
/// Deterministic for a fixed config: shuffling and augmentation draw from
/// per-epoch streams of cfg.seed. Keeps the best-validation parameters.
TrainResult train(const RunConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, double gamma,
                  const std::function<void(const EpochLog&)>& on_epoch = nullptr);

/// Deterministic shuffled k-fold partition; folds are disjoint, their union
/// is [0, n), and sizes differ by at most one.
struct Fold {
  std::vector<int> train;
  std::vector<int> test;
};
std::vector<Fold> kfold_split(int n, int k, uint64_t seed);

/// Loads every manifest entry into memory in manifest order.
std::vector<Sample> load_all(const DatasetManifest& m);

}  // namespace dbcc
