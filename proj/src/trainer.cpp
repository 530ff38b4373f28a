#include "alsn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "alsn/checkpoint.hpp"

namespace alsn {

namespace {

constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kShuffleTag = 0x5a4f;
constexpr std::uint64_t kAugmentTag = 0xa06e;

Tensor<float> text_tensor(const std::string& text) {
  Tensor<float> t({static_cast<int>(std::max<std::size_t>(text.size(), 1))});
  for (std::size_t i = 0; i < text.size(); ++i) t.values[i] = static_cast<unsigned char>(text[i]);
  return t;
}

std::string tensor_text(const Tensor<float>& t) {
  std::string s;
  for (float v : t.values)
    if (v != 0.0f) s.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  return s;
}

const Tensor<float>& required(const std::vector<NamedTensor>& ts, const std::string& name,
                              const std::filesystem::path& path) {
  const NamedTensor* t = find_tensor(ts, name);
  if (!t) throw std::runtime_error(path.string() + ": checkpoint lacks " + name);
  return t->tensor;
}

}  // namespace

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  return epoch > cfg.lr_drop_after ? cfg.lr / 10.0 : cfg.lr;
}

std::uint64_t init_seed_for(std::uint64_t seed) { return derive_seed(seed, {kInitTag}); }

double accumulate_sample(const Network<float>& net, const Sample& sample) {
  Graph<float> g;
  const auto out = net.forward(g, image_tensor<float>(sample.image));
  const NodeId loss = net.loss(g, out, mask_tensor<float>(sample.mask));
  const double value = g.scalar(loss);
  if (std::isfinite(value)) g.backward(loss);
  return value;
}

void save_model(const std::filesystem::path& path, const Network<float>& net, const Genome& genome, int epoch,
                double best_val_f, int best_epoch) {
  std::vector<NamedTensor> ts = export_parameters(net.params(), true);
  const NetConfig& c = net.plan().config;
  ts.push_back({"meta.net", Tensor<float>({4}, {static_cast<float>(c.stages), static_cast<float>(c.nodes),
                                                static_cast<float>(c.channels), static_cast<float>(c.image_size)})});
  ts.push_back({"meta.genome", text_tensor(encode_text(genome))});
  ts.push_back({"meta.epoch", Tensor<float>({1}, {static_cast<float>(epoch)})});
  ts.push_back({"meta.best_f", Tensor<float>({1}, {static_cast<float>(best_val_f)})});
  ts.push_back({"meta.best_epoch", Tensor<float>({1}, {static_cast<float>(best_epoch)})});
  write_checkpoint(path, ts);
}

ModelCheckpoint load_model(const std::filesystem::path& path) {
  const std::vector<NamedTensor> ts = read_checkpoint(path);
  ModelCheckpoint m;
  const auto& net = required(ts, "meta.net", path);
  if (net.size() != 4) throw std::runtime_error(path.string() + ": meta.net must hold 4 values");
  m.net.stages = static_cast<int>(net.values[0]);
  m.net.nodes = static_cast<int>(net.values[1]);
  m.net.channels = static_cast<int>(net.values[2]);
  m.net.image_size = static_cast<int>(net.values[3]);
  m.genome = decode_text(tensor_text(required(ts, "meta.genome", path)));
  m.epoch = static_cast<int>(required(ts, "meta.epoch", path).values.at(0));
  m.best_val_f = required(ts, "meta.best_f", path).values.at(0);
  m.best_epoch = static_cast<int>(required(ts, "meta.best_epoch", path).values.at(0));
  m.network = std::make_unique<Network<float>>(build_plan(m.genome, m.net), 0);
  import_parameters(m.network->params(), ts);
  return m;
}

PrReport evaluate(const Network<float>& net, const std::vector<Sample>& dataset, int match_radius) {
  std::vector<Tensor<float>> scores;
  std::vector<GrayImage> targets;
  scores.reserve(dataset.size());
  for (const auto& s : dataset) {
    scores.push_back(net.predict_fuse(image_tensor<float>(s.image)));
    targets.push_back(s.mask);
  }
  return pr_curve(scores, targets, default_thresholds(), match_radius);
}

TrainResult train(const Genome& genome, const NetConfig& net_cfg, const TrainConfig& cfg,
                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::filesystem::path& resume_from) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.accumulation < 1) throw std::invalid_argument("train: accumulation must be >= 1");
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");

  TrainResult result;
  TrainedModel& model = result.model;
  model.genome = validate_and_repair(genome).genome;
  int start_epoch = 1;
  if (!resume_from.empty()) {
    ModelCheckpoint ck = load_model(resume_from);
    if (!(ck.genome == model.genome))
      throw std::runtime_error(resume_from.string() + ": checkpoint genome differs from the requested genome");
    model.network = std::move(ck.network);
    model.best_val_f = ck.best_val_f;
    model.best_epoch = ck.best_epoch;
    start_epoch = ck.epoch + 1;
  } else {
    model.network = std::make_unique<Network<float>>(build_plan(model.genome, net_cfg), init_seed_for(cfg.seed));
  }
  model.epochs_done = start_epoch - 1;
  Network<float>& net = *model.network;

  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path metrics_path = cfg.out_dir.empty() ? std::filesystem::path() : cfg.out_dir / "metrics.csv";
  if (!metrics_path.empty() && start_epoch == 1) {
    std::ofstream f(metrics_path, std::ios::trunc);
    f << "epoch,train_loss,val_best_f\n";
  }

  for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(cfg.seed, {kShuffleTag, static_cast<std::uint64_t>(epoch)}));
    shuffle.shuffle(order.begin(), order.end());

    AdamOptions adam{learning_rate_at(cfg, epoch), cfg.beta1, cfg.beta2, cfg.weight_decay, 1e-8};
    double loss_sum = 0;
    int pending = 0, steps = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Sample& raw = train_set[static_cast<std::size_t>(order[i])];
      double loss = 0;
      if (cfg.augment) {
        Rng aug(derive_seed(cfg.seed, {kAugmentTag, static_cast<std::uint64_t>(epoch), i}));
        loss = accumulate_sample(net, augment(raw, aug));
      } else {
        loss = accumulate_sample(net, raw);
      }
      if (!std::isfinite(loss))
        throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) + " on sample " +
                                 std::to_string(order[i]));
      loss_sum += loss;
      if (++pending == cfg.accumulation) {
        net.params().adam_step(adam);
        pending = 0;
        ++steps;
      }
    }
    net.params().zero_grad();  // an incomplete accumulation window is dropped

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.optimizer_steps = steps;
    m.lr = adam.lr;
    m.val_best_f = val_set.empty() ? 0.0 : evaluate(net, val_set, cfg.match_radius).best_f;
    const bool improved = epoch == 1 || m.val_best_f > model.best_val_f;
    if (improved) {
      // Stored at checkpoint precision so resumed runs compare identically.
      model.best_val_f = static_cast<float>(m.val_best_f);
      model.best_epoch = epoch;
    }
    model.epochs_done = epoch;
    result.epochs.push_back(m);

    if (!cfg.out_dir.empty()) {
      save_model(cfg.out_dir / "last.ckpt", net, model.genome, epoch, model.best_val_f, model.best_epoch);
      if (improved) save_model(cfg.out_dir / "best.ckpt", net, model.genome, epoch, model.best_val_f, model.best_epoch);
      std::ofstream f(metrics_path, std::ios::app);
      char line[128];
      std::snprintf(line, sizeof line, "%d,%.6f,%.6f\n", epoch, m.train_loss, m.val_best_f);
      f << line;
    }
    if (cfg.verbose) {
      std::fprintf(stderr, "epoch %d/%d  lr %.2e  train_loss %.5f  val_best_f %.4f  steps %d\n", epoch, cfg.epochs,
                   m.lr, m.train_loss, m.val_best_f, steps);
    }
  }
  return result;
}

}  // namespace alsn
