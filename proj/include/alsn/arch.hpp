#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alsn/genome.hpp"
#include "alsn/graph.hpp"
#include "alsn/parameters.hpp"
#include "alsn/rng.hpp"

namespace alsn {

struct NetConfig {
  int stages = 5;       // S
  int nodes = 4;        // P
  int channels = 8;     // C, width of every LSU
  int image_size = 64;  // square training canvas

  // Backbone widths 8, 16, 32, 64, 64, ... (doubling, capped at 64).
  std::vector<int> backbone_widths() const;
  // Spatial sizes must be divisible by this.
  int stride_multiple() const { return 1 << (stages - 1); }
};

struct LsuNode {
  int pred = 0;  // index of the single predecessor, 0 = input node
  int op = 0;    // vocabulary index
};

// Input node 0, intermediate nodes 1..P, output = sum of nodes 0..P.
struct LsuGraph {
  std::vector<LsuNode> nodes;
};

LsuGraph lsu_graph(const LsuGenes& genes);

struct StageSpec {
  int channels = 0;
  int stride = 1;
};

enum class SourceKind { kBackbone, kUnit };

// One aligned input of a unit: 1x1 conv to C channels, then bilinear
// upsampling by `upsample`.
struct UnitSource {
  SourceKind kind = SourceKind::kBackbone;
  int stage = 0;  // 0-based backbone stage or source unit stage
  int upsample = 1;
};

struct UnitPlan {
  int stage = 0;  // 0-based
  LsuGraph lsu;
  std::vector<UnitSource> sources;
};

struct FusePlan {
  int stage = 0;  // resolution: the shallowest connected unit's stage
  LsuGraph lsu;
  std::vector<UnitSource> sources;
};

inline constexpr int kFuseHead = -1;

// 1x1 conv to a single channel, upsampling to image resolution by repeated
// 2x steps, sigmoid.
struct HeadPlan {
  int unit = kFuseHead;  // stage of the unit, or kFuseHead
  int upsample = 1;
  bool supervised = true;
};

struct NetworkPlan {
  NetConfig config;
  std::vector<StageSpec> stages;
  std::vector<UnitPlan> units;  // ascending stage order
  FusePlan fuse;
  std::vector<HeadPlan> heads;  // fuse head first, then supervised units ascending

  const UnitPlan* unit_at(int stage) const;
  int connection_count() const;
};

// Decodes a genome. The genome is repaired first; decoding never fails on a
// well-formed genome.
NetworkPlan build_plan(const Genome& g, const NetConfig& cfg);

// Human-readable summary, one line per unit.
std::string describe_plan(const NetworkPlan& plan);

// conv + bias, weights He-uniform initialized, bias zero.
template <typename T>
struct ConvLayer {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;
  int dilation = 1;

  static ConvLayer create(ParameterSet<T>& params, const std::string& name, int cin, int cout, int kernel,
                          int dilation, Rng& rng);
  NodeId apply(Graph<T>& g, NodeId x) const;
};

// A Linear Span Unit bound to its parameters. Conv nodes apply conv+relu;
// skip nodes forward their predecessor; the output sum has no activation.
template <typename T>
class LsuModule {
 public:
  LsuModule() = default;
  LsuModule(const LsuGraph& graph, int channels, ParameterSet<T>& params, const std::string& prefix, Rng& rng);

  NodeId forward(Graph<T>& g, NodeId input) const;
  const LsuGraph& graph() const { return graph_; }
  // Conv layer for node p (1-based); null members for skip nodes.
  const ConvLayer<T>& layer(int p) const { return layers_[static_cast<std::size_t>(p - 1)]; }
  int channels() const { return channels_; }

 private:
  LsuGraph graph_;
  int channels_ = 0;
  std::vector<ConvLayer<T>> layers_;
};

// An instantiated plan: backbone, units, fuse unit and heads with their
// parameters. Confined to one thread.
template <typename T>
class Network {
 public:
  struct Outputs {
    std::vector<NodeId> scores;        // per plan.heads entry, 1 x H x W in (0,1)
    std::vector<NodeId> logits;        // the scores before the sigmoid
    std::vector<NodeId> unit_outputs;  // per plan.units entry
    NodeId fuse_output = -1;
  };

  Network(NetworkPlan plan, std::uint64_t init_seed);

  Outputs forward(Graph<T>& g, const Tensor<T>& image) const;
  // Sum of balanced BCE over every supervised head.
  NodeId loss(Graph<T>& g, const Outputs& out, const Tensor<T>& target) const;

  // Score maps for every head (no gradient bookkeeping kept).
  std::vector<Tensor<T>> predict(const Tensor<T>& image) const;
  Tensor<T> predict_fuse(const Tensor<T>& image) const;
  // Each unit's output, bilinearly resized to image resolution.
  std::vector<Tensor<T>> unit_features(const Tensor<T>& image) const;

  const NetworkPlan& plan() const { return plan_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

 private:
  struct Aligned {
    ConvLayer<T> conv;
    UnitSource source;
  };
  struct UnitModule {
    std::vector<Aligned> inputs;
    LsuModule<T> lsu;
  };

  NodeId upsample(Graph<T>& g, NodeId x, int factor, bool repeated_2x) const;

  NetworkPlan plan_;
  ParameterSet<T> params_;
  std::vector<std::pair<ConvLayer<T>, ConvLayer<T>>> backbone_;
  std::vector<UnitModule> units_;
  UnitModule fuse_;
  std::vector<ConvLayer<T>> heads_;
};

extern template struct ConvLayer<float>;
extern template struct ConvLayer<double>;
extern template class LsuModule<float>;
extern template class LsuModule<double>;
extern template class Network<float>;
extern template class Network<double>;

}  // namespace alsn
