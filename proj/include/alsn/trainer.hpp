#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "alsn/arch.hpp"
#include "alsn/data.hpp"
#include "alsn/genome.hpp"
#include "alsn/metrics.hpp"
#include "alsn/parameters.hpp"

namespace alsn {

struct TrainConfig {
  int epochs = 25;
  double lr = 1e-3;
  int lr_drop_after = 20;  // epochs after this one run at lr / 10
  int accumulation = 10;   // forwards per optimizer step
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  bool augment = true;
  std::uint64_t seed = 1;
  int match_radius = 1;
  // When set: last.ckpt and best.ckpt (highest validation F) are written
  // after every epoch and metrics.csv gets one row per epoch.
  std::filesystem::path out_dir;
  bool verbose = false;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double val_best_f = 0;
  int optimizer_steps = 0;
  double lr = 0;
};

struct TrainedModel {
  Genome genome;
  std::unique_ptr<Network<float>> network;
  double best_val_f = 0;
  int best_epoch = 0;
  int epochs_done = 0;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochMetrics> epochs;  // only the epochs run by this call
};

double learning_rate_at(const TrainConfig& cfg, int epoch);

// Forward + loss + backward for one sample; gradients accumulate in the
// network's parameters. Returns the loss.
double accumulate_sample(const Network<float>& net, const Sample& sample);

// Seed for the network's initial weights under a training seed.
std::uint64_t init_seed_for(std::uint64_t seed);

// Retrains `genome` from scratch, or continues from `resume_from` (a
// last.ckpt written by an earlier call with the same config).
TrainResult train(const Genome& genome, const NetConfig& net, const TrainConfig& cfg,
                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::filesystem::path& resume_from = {});

// Fuse-head predictions over `dataset`, scored by pr_curve.
PrReport evaluate(const Network<float>& net, const std::vector<Sample>& dataset, int match_radius);

// Model checkpoints carry the parameters, the genome text, the net config
// and the training position alongside the optimizer state.
struct ModelCheckpoint {
  Genome genome;
  NetConfig net;
  std::unique_ptr<Network<float>> network;
  int epoch = 0;
  double best_val_f = 0;
  int best_epoch = 0;
};

void save_model(const std::filesystem::path& path, const Network<float>& net, const Genome& genome, int epoch,
                double best_val_f, int best_epoch);
ModelCheckpoint load_model(const std::filesystem::path& path);

}  // namespace alsn
