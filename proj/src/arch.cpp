#include "alsn/arch.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace alsn {

std::vector<int> NetConfig::backbone_widths() const {
  std::vector<int> w;
  for (int s = 0; s < stages; ++s) w.push_back(std::min(8 << s, 64));
  return w;
}

LsuGraph lsu_graph(const LsuGenes& genes) {
  LsuGraph l;
  for (std::size_t p = 0; p < genes.edges.size(); ++p) l.nodes.push_back({genes.edges[p], genes.ops[p]});
  return l;
}

const UnitPlan* NetworkPlan::unit_at(int stage) const {
  for (const auto& u : units)
    if (u.stage == stage) return &u;
  return nullptr;
}

int NetworkPlan::connection_count() const {
  int n = 0;
  for (const auto& u : units)
    for (const auto& s : u.sources)
      if (s.kind == SourceKind::kUnit) ++n;
  return n;
}

NetworkPlan build_plan(const Genome& genome, const NetConfig& cfg) {
  if (genome.stages != cfg.stages || genome.nodes != cfg.nodes)
    throw std::invalid_argument("genome S/P (" + std::to_string(genome.stages) + "/" + std::to_string(genome.nodes) +
                                ") does not match network config (" + std::to_string(cfg.stages) + "/" +
                                std::to_string(cfg.nodes) + ")");
  const Genome g = validate_and_repair(genome).genome;
  NetworkPlan plan;
  plan.config = cfg;
  const auto widths = cfg.backbone_widths();
  for (int s = 0; s < cfg.stages; ++s) plan.stages.push_back({widths[s], 1 << s});

  for (int s = 0; s < cfg.stages; ++s) {
    if (!g.active(s)) continue;
    UnitPlan u;
    u.stage = s;
    u.lsu = lsu_graph(g.lsus[s]);
    u.sources.push_back({SourceKind::kBackbone, s, 1});
    for (std::size_t j = 0; j < g.connections[s].size(); ++j) {
      if (!g.connections[s][j]) continue;
      const int t = s + 1 + static_cast<int>(j);
      u.sources.push_back({SourceKind::kUnit, t, 1 << (t - s)});
    }
    plan.units.push_back(std::move(u));
  }

  int fuse_stage = cfg.stages;
  for (int s = 0; s < cfg.stages; ++s)
    if (g.fuse_inputs[s]) fuse_stage = std::min(fuse_stage, s);
  plan.fuse.stage = fuse_stage;
  plan.fuse.lsu = lsu_graph(g.lsus[g.fuse_index()]);
  for (int s = 0; s < cfg.stages; ++s)
    if (g.fuse_inputs[s]) plan.fuse.sources.push_back({SourceKind::kUnit, s, 1 << (s - fuse_stage)});

  plan.heads.push_back({kFuseHead, 1 << fuse_stage, true});
  for (const auto& u : plan.units)
    if (g.supervision[u.stage]) plan.heads.push_back({u.stage, 1 << u.stage, true});
  return plan;
}

std::string describe_plan(const NetworkPlan& plan) {
  std::ostringstream os;
  auto describe_lsu = [&](const LsuGraph& l) {
    os << " lsu[";
    for (std::size_t p = 0; p < l.nodes.size(); ++p)
      os << (p ? " " : "") << 'n' << (p + 1) << "=" << operator_name(l.nodes[p].op) << "(n" << l.nodes[p].pred << ")";
    os << "]";
  };
  auto describe_sources = [&](const std::vector<UnitSource>& sources) {
    for (const auto& s : sources) {
      if (s.kind == SourceKind::kBackbone)
        os << " <-backbone" << (s.stage + 1);
      else
        os << " <-U" << (s.stage + 1) << " x" << s.upsample;
    }
  };
  for (const auto& u : plan.units) {
    os << 'U' << (u.stage + 1) << " @1/" << (1 << u.stage) << ':';
    describe_sources(u.sources);
    describe_lsu(u.lsu);
    os << '\n';
  }
  os << "F @1/" << (1 << plan.fuse.stage) << ':';
  describe_sources(plan.fuse.sources);
  describe_lsu(plan.fuse.lsu);
  os << '\n';
  os << "heads:";
  for (const auto& h : plan.heads) os << ' ' << (h.unit == kFuseHead ? std::string("F") : "U" + std::to_string(h.unit + 1));
  os << '\n';
  return os.str();
}

template <typename T>
ConvLayer<T> ConvLayer<T>::create(ParameterSet<T>& params, const std::string& name, int cin, int cout, int kernel,
                                  int dilation, Rng& rng) {
  ConvLayer<T> c;
  c.weight = &params.add(name + ".weight", {cout, cin, kernel, kernel});
  c.bias = &params.add(name + ".bias", {cout});
  c.dilation = dilation;
  const double bound = std::sqrt(6.0 / (static_cast<double>(cin) * kernel * kernel));
  for (T& w : c.weight->value.values) w = static_cast<T>(rng.uniform(-bound, bound));
  return c;
}

template <typename T>
NodeId ConvLayer<T>::apply(Graph<T>& g, NodeId x) const {
  return g.conv2d(x, g.parameter(*weight), g.parameter(*bias), dilation);
}

template <typename T>
LsuModule<T>::LsuModule(const LsuGraph& graph, int channels, ParameterSet<T>& params, const std::string& prefix,
                        Rng& rng)
    : graph_(graph), channels_(channels) {
  for (std::size_t p = 0; p < graph.nodes.size(); ++p) {
    const LsuNode& n = graph.nodes[p];
    if (n.pred < 0 || n.pred > static_cast<int>(p))
      throw std::invalid_argument(prefix + ": node " + std::to_string(p + 1) + " reads node " + std::to_string(n.pred));
    const OperatorSpec op = operator_spec(n.op);
    if (op.is_skip()) {
      layers_.emplace_back();
    } else {
      layers_.push_back(ConvLayer<T>::create(params, prefix + ".node" + std::to_string(p + 1), channels, channels,
                                             op.kernel, op.dilation, rng));
    }
  }
}

template <typename T>
NodeId LsuModule<T>::forward(Graph<T>& g, NodeId input) const {
  const auto& in = g.value(input);
  if (in.rank() != 3 || in.dim(0) != channels_)
    throw std::invalid_argument("LSU expects " + std::to_string(channels_) + " input channels, got shape " +
                                shape_string(in.shape));
  std::vector<NodeId> values = {input};
  for (std::size_t p = 0; p < graph_.nodes.size(); ++p) {
    const NodeId src = values[static_cast<std::size_t>(graph_.nodes[p].pred)];
    const ConvLayer<T>& layer = layers_[p];
    values.push_back(layer.weight ? g.relu(layer.apply(g, src)) : src);
  }
  if (values.size() == 1) return input;
  return g.add_n(values);
}

template <typename T>
Network<T>::Network(NetworkPlan plan, std::uint64_t init_seed) : plan_(std::move(plan)) {
  Rng rng(init_seed);
  const NetConfig& cfg = plan_.config;
  int cin = 1;
  for (int s = 0; s < cfg.stages; ++s) {
    const int w = plan_.stages[s].channels;
    const std::string name = "backbone.s" + std::to_string(s + 1);
    auto c1 = ConvLayer<T>::create(params_, name + ".conv1", cin, w, 3, 1, rng);
    auto c2 = ConvLayer<T>::create(params_, name + ".conv2", w, w, 3, 1, rng);
    backbone_.emplace_back(c1, c2);
    cin = w;
  }
  auto make_inputs = [&](const std::vector<UnitSource>& sources, const std::string& prefix) {
    std::vector<Aligned> out;
    for (const auto& s : sources) {
      const bool tap = s.kind == SourceKind::kBackbone;
      const int from = tap ? plan_.stages[s.stage].channels : cfg.channels;
      const std::string name = prefix + (tap ? ".tap" : ".from" + std::to_string(s.stage + 1));
      out.push_back({ConvLayer<T>::create(params_, name, from, cfg.channels, 1, 1, rng), s});
    }
    return out;
  };
  for (const auto& u : plan_.units) {
    const std::string prefix = "unit" + std::to_string(u.stage + 1);
    UnitModule m;
    m.inputs = make_inputs(u.sources, prefix);
    m.lsu = LsuModule<T>(u.lsu, cfg.channels, params_, prefix + ".lsu", rng);
    units_.push_back(std::move(m));
  }
  fuse_.inputs = make_inputs(plan_.fuse.sources, "fuse");
  fuse_.lsu = LsuModule<T>(plan_.fuse.lsu, cfg.channels, params_, "fuse.lsu", rng);
  for (const auto& h : plan_.heads) {
    const std::string name = h.unit == kFuseHead ? "head.fuse" : "head.unit" + std::to_string(h.unit + 1);
    heads_.push_back(ConvLayer<T>::create(params_, name, cfg.channels, 1, 1, 1, rng));
    std::fill(heads_.back().weight->value.values.begin(), heads_.back().weight->value.values.end(), T(0));
  }
}

template <typename T>
NodeId Network<T>::upsample(Graph<T>& g, NodeId x, int factor, bool repeated_2x) const {
  if (factor == 1) return x;
  if (!repeated_2x) return g.upsample_bilinear(x, factor);
  for (int f = factor; f > 1; f /= 2) x = g.upsample_bilinear(x, 2);
  return x;
}

template <typename T>
typename Network<T>::Outputs Network<T>::forward(Graph<T>& g, const Tensor<T>& image) const {
  const NetConfig& cfg = plan_.config;
  if (image.rank() != 3 || image.dim(0) != 1)
    throw std::invalid_argument("network input must be 1xHxW, got " + shape_string(image.shape));
  const int m = cfg.stride_multiple();
  if (image.dim(1) % m != 0 || image.dim(2) % m != 0)
    throw std::invalid_argument("image size " + std::to_string(image.dim(1)) + "x" + std::to_string(image.dim(2)) +
                                " is not divisible by " + std::to_string(m));

  std::vector<NodeId> taps;
  NodeId x = g.constant(image);
  for (int s = 0; s < cfg.stages; ++s) {
    if (s > 0) x = g.maxpool2(x);
    x = g.relu(backbone_[s].first.apply(g, x));
    x = g.relu(backbone_[s].second.apply(g, x));
    taps.push_back(x);
  }

  Outputs out;
  out.unit_outputs.assign(plan_.units.size(), -1);
  std::vector<NodeId> by_stage(static_cast<std::size_t>(cfg.stages), -1);
  auto gather = [&](const std::vector<Aligned>& inputs) {
    std::vector<NodeId> terms;
    for (const auto& a : inputs) {
      const NodeId src = a.source.kind == SourceKind::kBackbone ? taps[a.source.stage] : by_stage[a.source.stage];
      terms.push_back(upsample(g, a.conv.apply(g, src), a.source.upsample, false));
    }
    return terms.size() == 1 ? terms[0] : g.add_n(terms);
  };
  for (int i = static_cast<int>(plan_.units.size()) - 1; i >= 0; --i) {
    const NodeId n0 = gather(units_[i].inputs);
    const NodeId y = units_[i].lsu.forward(g, n0);
    out.unit_outputs[i] = y;
    by_stage[plan_.units[i].stage] = y;
  }
  out.fuse_output = fuse_.lsu.forward(g, gather(fuse_.inputs));

  for (std::size_t h = 0; h < plan_.heads.size(); ++h) {
    const HeadPlan& hp = plan_.heads[h];
    const NodeId feat = hp.unit == kFuseHead ? out.fuse_output : by_stage[hp.unit];
    const NodeId logits = upsample(g, heads_[h].apply(g, feat), hp.upsample, true);
    out.logits.push_back(logits);
    out.scores.push_back(g.sigmoid(logits));
  }
  return out;
}

template <typename T>
NodeId Network<T>::loss(Graph<T>& g, const Outputs& out, const Tensor<T>& target) const {
  std::vector<NodeId> terms;
  for (std::size_t h = 0; h < plan_.heads.size(); ++h)
    if (plan_.heads[h].supervised) terms.push_back(g.balanced_bce_logits(out.logits[h], target));
  return terms.size() == 1 ? terms[0] : g.add_n(terms);
}

template <typename T>
std::vector<Tensor<T>> Network<T>::predict(const Tensor<T>& image) const {
  Graph<T> g;
  const Outputs out = forward(g, image);
  std::vector<Tensor<T>> maps;
  for (NodeId id : out.scores) maps.push_back(g.value(id));
  return maps;
}

template <typename T>
Tensor<T> Network<T>::predict_fuse(const Tensor<T>& image) const {
  Graph<T> g;
  const Outputs out = forward(g, image);
  return g.value(out.scores.front());
}

template <typename T>
std::vector<Tensor<T>> Network<T>::unit_features(const Tensor<T>& image) const {
  Graph<T> g;
  const Outputs out = forward(g, image);
  std::vector<Tensor<T>> feats;
  for (std::size_t i = 0; i < plan_.units.size(); ++i)
    feats.push_back(g.value(g.upsample_bilinear(out.unit_outputs[i], 1 << plan_.units[i].stage)));
  return feats;
}

template struct ConvLayer<float>;
template struct ConvLayer<double>;
template class LsuModule<float>;
template class LsuModule<double>;
template class Network<float>;
template class Network<double>;

}  // namespace alsn
