#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "alsn/trainer.hpp"

using namespace alsn;
namespace fs = std::filesystem;

namespace {

NetConfig small_net() {
  NetConfig cfg;
  cfg.image_size = 32;
  cfg.channels = 4;
  return cfg;
}

TrainConfig small_train(int epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = 17;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("alsn_train_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<float> flat_weights(const Network<float>& net) {
  std::vector<float> out;
  for (const auto& p : net.params().items()) out.insert(out.end(), p.value.values.begin(), p.value.values.end());
  return out;
}

}  // namespace

TEST_CASE("learning rate drops tenfold after the configured epoch") {
  TrainConfig cfg;
  CHECK(learning_rate_at(cfg, 1) == 1e-3);
  CHECK(learning_rate_at(cfg, 20) == 1e-3);
  CHECK(learning_rate_at(cfg, 21) == doctest::Approx(1e-4));
  CHECK(learning_rate_at(cfg, 25) == doctest::Approx(1e-4));
}

TEST_CASE("one optimizer step per full accumulation window") {
  const auto data = generate(31, 25, 32);
  const TrainResult r = train(srn_preset(), small_net(), small_train(1), data, {});
  REQUIRE(r.epochs.size() == 1);
  CHECK(r.epochs[0].optimizer_steps == 2);
  CHECK(std::isfinite(r.epochs[0].train_loss));
  CHECK(r.model.epochs_done == 1);
  CHECK_THROWS_AS(train(srn_preset(), small_net(), small_train(0), data, {}), std::invalid_argument);
  CHECK_THROWS_AS(train(srn_preset(), small_net(), small_train(1), {}, {}), std::invalid_argument);
}

TEST_CASE("same seed, same trained weights") {
  const auto data = generate(32, 10, 32);
  const TrainResult a = train(srn_preset(), small_net(), small_train(1), data, {});
  const TrainResult b = train(srn_preset(), small_net(), small_train(1), data, {});
  CHECK(flat_weights(*a.model.network) == flat_weights(*b.model.network));
}

TEST_CASE("resuming reproduces an uninterrupted run") {
  const auto all = generate(33, 24, 32);
  const DatasetSplit split = split_dataset(all, 0.25);
  const fs::path straight = scratch("straight"), halves = scratch("halves");

  TrainConfig cfg = small_train(2);
  cfg.out_dir = straight;
  const TrainResult full = train(srn_preset(), small_net(), cfg, split.train, split.val);

  TrainConfig first = small_train(1);
  first.out_dir = halves;
  train(srn_preset(), small_net(), first, split.train, split.val);
  cfg.out_dir = halves;
  const TrainResult resumed = train(srn_preset(), small_net(), cfg, split.train, split.val, halves / "last.ckpt");

  REQUIRE(resumed.epochs.size() == 1);
  CHECK(resumed.epochs[0].epoch == 2);
  CHECK(flat_weights(*resumed.model.network) == flat_weights(*full.model.network));
  CHECK(resumed.model.best_val_f == full.model.best_val_f);
  CHECK(resumed.epochs[0].train_loss == full.epochs[1].train_loss);

  std::ifstream a(straight / "metrics.csv"), b(halves / "metrics.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str().rfind("epoch,train_loss,val_best_f\n", 0) == 0);
  CHECK(sa.str() == sb.str());
  CHECK(fs::exists(straight / "best.ckpt"));

  Rng rng(3);
  CHECK_THROWS(train(random_genome(rng), small_net(), cfg, split.train, split.val, halves / "last.ckpt"));
  fs::remove_all(straight);
  fs::remove_all(halves);
}

TEST_CASE("model checkpoints carry genome and config") {
  const fs::path dir = scratch("model");
  fs::create_directories(dir);
  Rng rng(4);
  const Genome g = random_genome(rng);
  const Network<float> net(build_plan(g, small_net()), 8);
  save_model(dir / "m.ckpt", net, g, 3, 0.5, 2);
  const ModelCheckpoint back = load_model(dir / "m.ckpt");
  CHECK(back.genome == g);
  CHECK(back.net.image_size == 32);
  CHECK(back.net.channels == 4);
  CHECK(back.epoch == 3);
  CHECK(back.best_val_f == 0.5);
  CHECK(back.best_epoch == 2);
  CHECK(flat_weights(*back.network) == flat_weights(net));
  CHECK_THROWS(load_model(dir / "absent.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("evaluation scores the fuse head") {
  const auto data = generate(34, 4, 32);
  const Network<float> net(build_plan(srn_preset(), small_net()), 1);
  const PrReport r = evaluate(net, data, 1);
  CHECK(r.points.size() == 99);
  for (const auto& p : r.points) {
    CHECK(p.f >= 0.0);
    CHECK(p.f <= 1.0);
  }
}

TEST_CASE("an untrained model predicts 0.5 everywhere") {
  const auto data = generate(35, 3, 32);
  const Network<float> net(build_plan(srn_preset(), small_net()), 2);
  for (const auto& s : data)
    for (float v : net.predict(image_tensor<float>(s.image))[0].values) CHECK(v == 0.5f);
  const PrReport r = evaluate(net, data, 1);
  for (const auto& p : r.points) {
    if (p.threshold <= 0.5) CHECK(p.recall == 1.0);
    else CHECK(p.recall == 0.0);
  }
  CHECK(evaluate(net, data, 1).points[10].precision == r.points[10].precision);
}

TEST_CASE("full retraining on the bundled set") {
  // 25 epochs of the default schedule on the 200/50 split of the corpus.
  const DatasetSplit split = split_dataset(generate(20240601, 250, 64), 0.2);
  const Genome g = srn_preset();
  const NetConfig net;
  TrainConfig cfg;
  cfg.seed = 1;
  const Network<float> untrained(build_plan(g, net), init_seed_for(cfg.seed));
  const double f0 = best_f(evaluate(untrained, split.val, cfg.match_radius)).f;
  const TrainResult r = train(g, net, cfg, split.train, split.val);
  REQUIRE(r.epochs.size() == 25);
  MESSAGE("epoch 1 loss " << r.epochs.front().train_loss << ", epoch 25 loss " << r.epochs.back().train_loss
                          << ", untrained F " << f0 << ", trained F " << r.model.best_val_f);
  CHECK(r.epochs.back().train_loss < r.epochs.front().train_loss);
  CHECK(r.model.best_val_f > f0);
  CHECK(r.epochs[0].optimizer_steps == 20);
  CHECK(r.epochs[20].lr == doctest::Approx(1e-4));
}
