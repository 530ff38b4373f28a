#include "alsn/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace alsn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Columns are output pixels, rows are (channel, ky, kx) taps.
template <typename T>
void im2col(const T* in, int channels, int h, int w, int k, int d, T* col) {
  const int pad = d * (k - 1) / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const T* plane = in + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      const int oy = ky * d - pad;
      for (int kx = 0; kx < k; ++kx) {
        const int ox = kx * d - pad;
        T* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int x_begin = std::clamp(-ox, 0, w);
        const int x_end = std::clamp(w - ox, 0, w);
        for (int y = 0; y < h; ++y) {
          T* dst = row + static_cast<std::size_t>(y) * w;
          const int iy = y + oy;
          if (iy < 0 || iy >= h || x_begin >= x_end) {
            std::fill(dst, dst + w, T(0));
            continue;
          }
          std::fill(dst, dst + x_begin, T(0));
          std::copy(plane + static_cast<std::size_t>(iy) * w + x_begin + ox,
                    plane + static_cast<std::size_t>(iy) * w + x_end + ox, dst + x_begin);
          std::fill(dst + x_end, dst + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int channels, int h, int w, int k, int d, T* out) {
  const int pad = d * (k - 1) / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    T* plane = out + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      const int oy = ky * d - pad;
      for (int kx = 0; kx < k; ++kx) {
        const int ox = kx * d - pad;
        const T* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int x_begin = std::clamp(-ox, 0, w);
        const int x_end = std::clamp(w - ox, 0, w);
        if (x_begin >= x_end) continue;
        for (int y = 0; y < h; ++y) {
          const int iy = y + oy;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(y) * w;
          T* dst = plane + static_cast<std::size_t>(iy) * w + ox;
          for (int x = x_begin; x < x_end; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

// Source taps and weights for align-corners-false bilinear resampling
// along one axis.
struct AxisTaps {
  std::vector<int> lo, hi;
  std::vector<double> w_lo, w_hi;
};

AxisTaps axis_taps(int in_size, int factor) {
  const int out_size = in_size * factor;
  AxisTaps t;
  t.lo.resize(out_size);
  t.hi.resize(out_size);
  t.w_lo.resize(out_size);
  t.w_hi.resize(out_size);
  for (int o = 0; o < out_size; ++o) {
    double src = (o + 0.5) / factor - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in_size - 1) i0 = in_size - 1;
    const int i1 = std::min(i0 + 1, in_size - 1);
    const double l1 = src - i0;
    t.lo[o] = i0;
    t.hi[o] = i1;
    t.w_lo[o] = 1.0 - l1;
    t.w_hi[o] = l1;
  }
  return t;
}

}  // namespace

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw std::out_of_range("graph node id " + std::to_string(id) + " out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

template <typename T>
typename Graph<T>::Node& Graph<T>::mut(NodeId id) {
  return const_cast<Node&>(static_cast<const Graph&>(*this).node(id));
}

template <typename T>
NodeId Graph<T>::push(Node n) {
  n.value.grad.clear();
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
Buffer<T>& Graph<T>::ensure_grad(Node& n) {
  if (n.value.grad.empty()) n.value.grad.assign(n.value.size(), T(0));
  return n.value.grad;
}

template <typename T>
T Graph<T>::scalar(NodeId id) const {
  const auto& v = node(id).value;
  require(v.size() == 1, "scalar(): node is not a scalar, shape " + shape_string(v.shape));
  return v.values[0];
}

template <typename T>
NodeId Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::variable(Tensor<T> value) {
  Node n;
  n.kind = OpKind::kVariable;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::parameter(Parameter<T>& p) {
  Node n;
  n.kind = OpKind::kParameter;
  n.value.shape = p.value.shape;
  n.value.values = p.value.values;
  n.requires_grad = true;
  n.param = &p;
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::conv2d(NodeId input, NodeId weight, NodeId bias, int dilation) {
  const auto& x = node(input).value;
  const auto& wt = node(weight).value;
  const auto& b = node(bias).value;
  require(x.rank() == 3, "conv2d: input must be CxHxW, got " + shape_string(x.shape));
  require(wt.rank() == 4, "conv2d: weight must be CoutxCinxkxk, got " + shape_string(wt.shape));
  require(wt.dim(2) == wt.dim(3) && wt.dim(2) % 2 == 1, "conv2d: kernel must be square and odd, got " +
                                                            shape_string(wt.shape));
  require(wt.dim(1) == x.dim(0), "conv2d: input has " + std::to_string(x.dim(0)) +
                                     " channels but weight expects " + std::to_string(wt.dim(1)) +
                                     " (input " + shape_string(x.shape) + ", weight " +
                                     shape_string(wt.shape) + ")");
  require(b.rank() == 1 && b.dim(0) == wt.dim(0), "conv2d: bias shape " + shape_string(b.shape) +
                                                      " does not match " + std::to_string(wt.dim(0)) +
                                                      " output channels");
  require(dilation >= 1, "conv2d: dilation must be positive");

  const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int cout = wt.dim(0), k = wt.dim(2);
  const int kk = cin * k * k;
  const int hw = h * w;

  Node n;
  n.kind = OpKind::kConv2d;
  n.inputs = {input, weight, bias};
  n.attr = dilation;
  n.requires_grad = node(input).requires_grad || node(weight).requires_grad || node(bias).requires_grad;
  n.value = Tensor<T>({cout, h, w});

  const T* col_ptr = x.values.data();
  if (k != 1) {
    n.saved.resize(static_cast<std::size_t>(kk) * hw);
    im2col(x.values.data(), cin, h, w, k, dilation, n.saved.data());
    col_ptr = n.saved.data();
  }
  ConstMapMat<T> wm(wt.values.data(), cout, kk);
  ConstMapMat<T> cm(col_ptr, kk, hw);
  MapMat<T> om(n.value.values.data(), cout, hw);
  om.noalias() = wm * cm;
  for (int c = 0; c < cout; ++c) om.row(c).array() += b.values[static_cast<std::size_t>(c)];
  return push(std::move(n));
}

template <typename T>
void Graph<T>::backward_conv2d(Node& n) {
  Node& xn = mut(n.inputs[0]);
  Node& wn = mut(n.inputs[1]);
  Node& bn = mut(n.inputs[2]);
  const int cin = xn.value.dim(0), h = xn.value.dim(1), w = xn.value.dim(2);
  const int cout = wn.value.dim(0), k = wn.value.dim(2);
  const int kk = cin * k * k;
  const int hw = h * w;
  ConstMapMat<T> gout(n.value.grad.data(), cout, hw);
  const T* col_ptr = k == 1 ? xn.value.values.data() : n.saved.data();
  ConstMapMat<T> cm(col_ptr, kk, hw);
  if (wn.requires_grad) {
    MapMat<T> gw(ensure_grad(wn).data(), cout, kk);
    gw.noalias() += gout * cm.transpose();
  }
  if (bn.requires_grad) {
    auto& gb = ensure_grad(bn);
    for (int c = 0; c < cout; ++c) gb[static_cast<std::size_t>(c)] += gout.row(c).sum();
  }
  if (xn.requires_grad) {
    ConstMapMat<T> wm(wn.value.values.data(), cout, kk);
    auto& gx = ensure_grad(xn);
    if (k == 1) {
      MapMat<T> gxm(gx.data(), kk, hw);
      gxm.noalias() += wm.transpose() * gout;
    } else {
      RowMat<T> gcol = wm.transpose() * gout;
      col2im_add(gcol.data(), cin, h, w, k, n.attr, gx.data());
    }
  }
}

template <typename T>
NodeId Graph<T>::upsample_bilinear(NodeId input, int factor) {
  const auto& x = node(input).value;
  require(factor >= 1, "upsample_bilinear: factor must be >= 1, got " + std::to_string(factor));
  require(x.rank() == 3, "upsample_bilinear: input must be CxHxW, got " + shape_string(x.shape));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = h * factor, ow = w * factor;
  Node n;
  n.kind = OpKind::kUpsample;
  n.inputs = {input};
  n.attr = factor;
  n.requires_grad = node(input).requires_grad;
  n.value = Tensor<T>({c, oh, ow});
  if (factor == 1) {
    n.value.values = x.values;
    return push(std::move(n));
  }
  const AxisTaps ty = axis_taps(h, factor);
  const AxisTaps tx = axis_taps(w, factor);
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < oh; ++oy) {
      const T wy0 = static_cast<T>(ty.w_lo[oy]), wy1 = static_cast<T>(ty.w_hi[oy]);
      for (int ox = 0; ox < ow; ++ox) {
        const T wx0 = static_cast<T>(tx.w_lo[ox]), wx1 = static_cast<T>(tx.w_hi[ox]);
        const T top = wx0 * x.at(ch, ty.lo[oy], tx.lo[ox]) + wx1 * x.at(ch, ty.lo[oy], tx.hi[ox]);
        const T bot = wx0 * x.at(ch, ty.hi[oy], tx.lo[ox]) + wx1 * x.at(ch, ty.hi[oy], tx.hi[ox]);
        n.value.at(ch, oy, ox) = wy0 * top + wy1 * bot;
      }
    }
  }
  return push(std::move(n));
}

template <typename T>
void Graph<T>::backward_upsample(Node& n) {
  Node& xn = mut(n.inputs[0]);
  if (!xn.requires_grad) return;
  auto& gx = ensure_grad(xn);
  const int factor = n.attr;
  if (factor == 1) {
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.value.grad[i];
    return;
  }
  const int c = xn.value.dim(0), h = xn.value.dim(1), w = xn.value.dim(2);
  const int oh = h * factor, ow = w * factor;
  const AxisTaps ty = axis_taps(h, factor);
  const AxisTaps tx = axis_taps(w, factor);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    T* g = gx.data() + ch * hw;
    for (int oy = 0; oy < oh; ++oy) {
      const T wy0 = static_cast<T>(ty.w_lo[oy]), wy1 = static_cast<T>(ty.w_hi[oy]);
      T* row0 = g + static_cast<std::size_t>(ty.lo[oy]) * w;
      T* row1 = g + static_cast<std::size_t>(ty.hi[oy]) * w;
      for (int ox = 0; ox < ow; ++ox) {
        const T go = n.value.grad[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox];
        const T wx0 = static_cast<T>(tx.w_lo[ox]), wx1 = static_cast<T>(tx.w_hi[ox]);
        row0[tx.lo[ox]] += go * wy0 * wx0;
        row0[tx.hi[ox]] += go * wy0 * wx1;
        row1[tx.lo[ox]] += go * wy1 * wx0;
        row1[tx.hi[ox]] += go * wy1 * wx1;
      }
    }
  }
}

template <typename T>
NodeId Graph<T>::relu(NodeId input) {
  Node n;
  n.kind = OpKind::kRelu;
  n.inputs = {input};
  n.requires_grad = node(input).requires_grad;
  n.value = node(input).value;
  n.value.grad.clear();
  for (T& v : n.value.values) v = v > T(0) ? v : T(0);
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::sigmoid(NodeId input) {
  Node n;
  n.kind = OpKind::kSigmoid;
  n.inputs = {input};
  n.requires_grad = node(input).requires_grad;
  n.value = node(input).value;
  n.value.grad.clear();
  for (T& v : n.value.values) v = T(1) / (T(1) + std::exp(-v));
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::add(NodeId a, NodeId b) {
  const NodeId terms[2] = {a, b};
  return add_n(terms);
}

template <typename T>
NodeId Graph<T>::add_n(std::span<const NodeId> terms) {
  require(!terms.empty(), "add: needs at least one operand");
  const auto& first = node(terms[0]).value;
  Node n;
  n.kind = OpKind::kAdd;
  n.inputs.assign(terms.begin(), terms.end());
  n.value = Tensor<T>(first.shape);
  for (NodeId t : terms) {
    const auto& v = node(t).value;
    require(v.shape == first.shape, "add: shape mismatch " + shape_string(first.shape) + " vs " +
                                        shape_string(v.shape));
    n.requires_grad = n.requires_grad || node(t).requires_grad;
    for (std::size_t i = 0; i < v.size(); ++i) n.value.values[i] += v.values[i];
  }
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::maxpool2(NodeId input) {
  const auto& x = node(input).value;
  require(x.rank() == 3, "maxpool2: input must be CxHxW, got " + shape_string(x.shape));
  require(x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0,
          "maxpool2: spatial dims must be even, got " + shape_string(x.shape));
  const int c = x.dim(0), oh = x.dim(1) / 2, ow = x.dim(2) / 2;
  Node n;
  n.kind = OpKind::kMaxPool2;
  n.inputs = {input};
  n.requires_grad = node(input).requires_grad;
  n.value = Tensor<T>({c, oh, ow});
  n.saved_index.resize(n.value.size());
  std::size_t o = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx, ++o) {
        int best_y = 2 * y, best_x = 2 * xx;
        T best = x.at(ch, best_y, best_x);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const T v = x.at(ch, 2 * y + dy, 2 * xx + dx);
            if (v > best) {
              best = v;
              best_y = 2 * y + dy;
              best_x = 2 * xx + dx;
            }
          }
        }
        n.value.values[o] = best;
        n.saved_index[o] = (ch * x.dim(1) + best_y) * x.dim(2) + best_x;
      }
    }
  }
  return push(std::move(n));
}

template <typename T>
void Graph<T>::backward_maxpool(Node& n) {
  Node& xn = mut(n.inputs[0]);
  if (!xn.requires_grad) return;
  auto& gx = ensure_grad(xn);
  for (std::size_t o = 0; o < n.saved_index.size(); ++o)
    gx[static_cast<std::size_t>(n.saved_index[o])] += n.value.grad[o];
}

template <typename T>
NodeId Graph<T>::bce_node(OpKind kind, NodeId input, const Buffer<T>& probs, const Tensor<T>& target) {
  const auto& x = node(input).value;
  const char* op = kind == OpKind::kBalancedBce ? "balanced_bce" : "balanced_bce_logits";
  require(x.shape == target.shape, std::string(op) + ": prediction " + shape_string(x.shape) + " and target " +
                                       shape_string(target.shape) + " differ");
  const std::size_t count = x.size();
  std::size_t negatives = 0;
  for (std::size_t i = 0; i < count; ++i) {
    require(!std::isnan(x.values[i]), std::string(op) + ": NaN in prediction at index " + std::to_string(i));
    const T y = target.values[i];
    require(y == T(0) || y == T(1), std::string(op) + ": target must be 0 or 1, got " + std::to_string(y) +
                                        " at index " + std::to_string(i));
    if (y == T(0)) ++negatives;
  }
  T pos_w = static_cast<T>(static_cast<double>(negatives) / static_cast<double>(count));
  T neg_w = T(1) - pos_w;
  if (negatives == 0 || negatives == count) pos_w = neg_w = T(1);  // single-class target: plain BCE
  const T lo = static_cast<T>(kBceClamp), hi = T(1) - static_cast<T>(kBceClamp);
  T acc = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const T yh = std::clamp(probs[i], lo, hi);
    acc += target.values[i] == T(1) ? pos_w * std::log(yh) : neg_w * std::log(T(1) - yh);
  }
  Node n;
  n.kind = kind;
  n.inputs = {input};
  n.requires_grad = node(input).requires_grad;
  n.value = Tensor<T>({1});
  n.value.values[0] = -acc / static_cast<T>(count);
  n.saved = target.values;
  n.saved.push_back(pos_w);
  n.saved.push_back(neg_w);
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::balanced_bce(NodeId pred, const Tensor<T>& target) {
  return bce_node(OpKind::kBalancedBce, pred, node(pred).value.values, target);
}

template <typename T>
NodeId Graph<T>::balanced_bce_logits(NodeId logits, const Tensor<T>& target) {
  const auto& z = node(logits).value.values;
  Buffer<T> probs(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) probs[i] = T(1) / (T(1) + std::exp(-z[i]));
  return bce_node(OpKind::kBalancedBceLogits, logits, probs, target);
}

template <typename T>
void Graph<T>::backward_bce_logits(Node& n) {
  Node& zn = mut(n.inputs[0]);
  if (!zn.requires_grad) return;
  auto& gz = ensure_grad(zn);
  const std::size_t count = zn.value.size();
  const T pos_w = n.saved[count], neg_w = n.saved[count + 1];
  const T scale = n.value.grad[0] / static_cast<T>(count);
  for (std::size_t i = 0; i < count; ++i) {
    const T p = T(1) / (T(1) + std::exp(-zn.value.values[i]));
    const T d = n.saved[i] == T(1) ? pos_w * (p - T(1)) : neg_w * p;
    gz[i] += scale * d;
  }
}

template <typename T>
void Graph<T>::backward_bce(Node& n) {
  Node& pn = mut(n.inputs[0]);
  if (!pn.requires_grad) return;
  auto& gp = ensure_grad(pn);
  const std::size_t count = pn.value.size();
  const T pos_w = n.saved[count], neg_w = n.saved[count + 1];
  const T scale = n.value.grad[0] / static_cast<T>(count);
  const T lo = static_cast<T>(kBceClamp), hi = T(1) - static_cast<T>(kBceClamp);
  for (std::size_t i = 0; i < count; ++i) {
    const T yh = pn.value.values[i];
    if (yh < lo || yh > hi) continue;  // clamped region is flat
    const T d = n.saved[i] == T(1) ? -pos_w / yh : neg_w / (T(1) - yh);
    gp[i] += scale * d;
  }
}

template <typename T>
void Graph<T>::backward(NodeId loss) {
  if (nodes_.empty()) throw std::logic_error("backward: graph has no nodes; run the forward pass first");
  Node& ln = mut(loss);
  if (ln.value.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_string(ln.value.shape));
  for (auto& n : nodes_) n.value.grad.clear();
  ensure_grad(ln)[0] = T(1);

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.value.grad.empty()) continue;
    switch (n.kind) {
      case OpKind::kConstant:
      case OpKind::kVariable:
        break;
      case OpKind::kParameter: {
        auto& pg = n.param->value.grad;
        if (pg.size() != n.value.grad.size()) pg.assign(n.value.grad.size(), T(0));
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.value.grad[i];
        break;
      }
      case OpKind::kConv2d:
        backward_conv2d(n);
        break;
      case OpKind::kUpsample:
        backward_upsample(n);
        break;
      case OpKind::kRelu: {
        Node& xn = mut(n.inputs[0]);
        if (!xn.requires_grad) break;
        auto& gx = ensure_grad(xn);
        for (std::size_t i = 0; i < gx.size(); ++i)
          if (xn.value.values[i] > T(0)) gx[i] += n.value.grad[i];
        break;
      }
      case OpKind::kSigmoid: {
        Node& xn = mut(n.inputs[0]);
        if (!xn.requires_grad) break;
        auto& gx = ensure_grad(xn);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          const T s = n.value.values[i];
          gx[i] += n.value.grad[i] * s * (T(1) - s);
        }
        break;
      }
      case OpKind::kAdd:
        for (NodeId in : n.inputs) {
          Node& xn = mut(in);
          if (!xn.requires_grad) continue;
          auto& gx = ensure_grad(xn);
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.value.grad[i];
        }
        break;
      case OpKind::kMaxPool2:
        backward_maxpool(n);
        break;
      case OpKind::kBalancedBce:
        backward_bce(n);
        break;
      case OpKind::kBalancedBceLogits:
        backward_bce_logits(n);
        break;
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace alsn
