#pragma once

#include <array>
#include <string>
#include <vector>

#include "dbcc/tensor.hpp"

namespace dbcc {

enum class Pad { SameZero, Valid };

/// Convolution geometry. Point-wise kernels are always 1x1; depth-wise kernels
/// are (P,Q) with P,Q odd when padding is SameZero (centered kernel).
struct ConvSpec {
  int stride = 1;
  Pad pad = Pad::SameZero;
  int kernel_h = 1;
  int kernel_w = 1;
  int count = 1;  // filters (point-wise / dense) or depth multiplier (depth-wise)
};

enum class OpKind {
  Leaf,
  PointwiseConv,
  Conv2d,
  DepthwiseConv,
  AvgPool2,
  AvgDown,
  Relu,
  Add,
  Mul,
  Scale,
  ConcatDepth,
  SpatialSum,
  GroupDepthSum,
  SumAll,
  L2Normalize,
  MseLoss,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::PointwiseConv: return "pointwise_conv";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::DepthwiseConv: return "depthwise_conv";
    case OpKind::AvgPool2: return "avg_pool";
    case OpKind::AvgDown: return "avg_down";
    case OpKind::Relu: return "relu";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::ConcatDepth: return "concat_depth";
    case OpKind::SpatialSum: return "spatial_sum";
    case OpKind::GroupDepthSum: return "group_depth_sum";
    case OpKind::SumAll: return "sum_all";
    case OpKind::L2Normalize: return "l2_normalize";
    case OpKind::MseLoss: return "mse_loss";
  }
  return "?";
}

/// Contiguous 3-way channel partition, larger groups first.
/// K=128 gives sizes (43,43,42).
inline std::array<int, 4> depth_group_bounds(int k) {
  if (k < 3) throw ShapeError("group_depth_sum: need at least 3 channels, got " + std::to_string(k));
  const int base = k / 3, rem = k % 3;
  std::array<int, 4> b{0, 0, 0, 0};
  for (int g = 0; g < 3; ++g) b[g + 1] = b[g] + base + (g < rem ? 1 : 0);
  return b;
}

/// Reverse-mode tape. Nodes are created by the op builders below; ids are
/// topologically ordered by construction. One graph per forward pass.
template <typename T>
class GraphT {
 public:
  using Id = int;

  struct Node {
    OpKind kind = OpKind::Leaf;
    TensorT<T> value;
    TensorT<T> grad;   // allocated during backward for nodes that need it
    std::vector<Id> inputs;
    bool requires_grad = false;
    bool is_param = false;
    std::string name;  // parameters only
    int stride = 1;    // conv/pool context
    int factor = 1;    // avg_down context
  };

  Id input(TensorT<T> value, std::string name = "") {
    return add_leaf(std::move(value), false, std::move(name));
  }

  Id param(TensorT<T> value, std::string name) {
    return add_leaf(std::move(value), true, std::move(name));
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  const TensorT<T>& value(Id id) const { return node(id).value; }
  const TensorT<T>& grad(Id id) const {
    const Node& n = node(id);
    if (n.grad.empty())
      throw Error("no gradient recorded for node " + std::to_string(id) + " (" + op_name(n.kind) + ")");
    return n.grad;
  }
  bool requires_grad(Id id) const { return node(id).requires_grad; }

  // ---- operators -------------------------------------------------------

  /// out[i,j,f] = sum_m W[m,f] * x[i*s, j*s, m] (+ bias[f]); W given as [1,1,M,F].
  Id pointwise_conv(Id w, Id bias, Id x, int stride) {
    const TensorT<T>& wt = value_of(w);
    const TensorT<T>& xt = value_of(x);
    detail::require(wt.rank() == 4 && wt.shape()[0] == 1 && wt.shape()[1] == 1,
                    "pointwise_conv: weights must be [1,1,M,F], got " + wt.shape().str());
    detail::require(xt.rank() == 3, "pointwise_conv: input must be rank 3");
    if (stride != 1 && stride != 2)
      throw ShapeError("pointwise_conv: stride must be 1 or 2, got " + std::to_string(stride));
    const int m = wt.shape()[2], f = wt.shape()[3];
    detail::require(xt.shape()[2] == m, "pointwise_conv: channel mismatch, input " +
                                            xt.shape().str() + " vs weights " + wt.shape().str());
    if (bias >= 0)
      detail::require(value_of(bias).size() == f, "pointwise_conv: bias size mismatch");

    const int kin = xt.shape()[0], lin = xt.shape()[1];
    const int kout = ceil_div(kin, stride), lout = ceil_div(lin, stride);
    TensorT<T> out(Shape{kout, lout, f});
    const T* bp = bias >= 0 ? value_of(bias).raw() : nullptr;
    for (int i = 0; i < kout; ++i)
      for (int j = 0; j < lout; ++j) {
        const T* xin = xt.raw() + xt.idx3(i * stride, j * stride, 0);
        T* acc = out.raw() + out.idx3(i, j, 0);
        if (bp)
          for (int c = 0; c < f; ++c) acc[c] = bp[c];
        for (int c = 0; c < m; ++c) {
          const T xv = xin[c];
          const T* wrow = wt.raw() + static_cast<long long>(c) * f;
          for (int q = 0; q < f; ++q) acc[q] += xv * wrow[q];
        }
      }
    Node n = make(OpKind::PointwiseConv, std::move(out), {w, bias, x});
    n.stride = stride;
    return push(std::move(n));
  }

  /// Dense conv, centered kernel, same-zero padding: W[P,Q,C,F], P,Q odd.
  Id conv2d(Id w, Id bias, Id x, int stride) {
    const TensorT<T>& wt = value_of(w);
    const TensorT<T>& xt = value_of(x);
    detail::require(wt.rank() == 4, "conv2d: weights must be rank 4 [P,Q,C,F]");
    detail::require(xt.rank() == 3, "conv2d: input must be rank 3");
    const int p = wt.shape()[0], q = wt.shape()[1], c = wt.shape()[2], f = wt.shape()[3];
    detail::require(p % 2 == 1 && q % 2 == 1, "conv2d: kernel dims must be odd for centered padding");
    detail::require(xt.shape()[2] == c, "conv2d: channel mismatch, input " + xt.shape().str() +
                                            " vs weights " + wt.shape().str());
    detail::require(stride >= 1, "conv2d: stride must be positive");
    if (bias >= 0) detail::require(value_of(bias).size() == f, "conv2d: bias size mismatch");

    const int kin = xt.shape()[0], lin = xt.shape()[1];
    const int kout = ceil_div(kin, stride), lout = ceil_div(lin, stride);
    const int ph = p / 2, qh = q / 2;
    TensorT<T> out(Shape{kout, lout, f});
    const T* bp = bias >= 0 ? value_of(bias).raw() : nullptr;
    std::vector<T> acc(static_cast<size_t>(f));
    for (int i = 0; i < kout; ++i)
      for (int j = 0; j < lout; ++j) {
        for (int t = 0; t < f; ++t) acc[t] = bp ? bp[t] : T(0);
        for (int dp = 0; dp < p; ++dp) {
          const int ii = i * stride + dp - ph;
          if (ii < 0 || ii >= kin) continue;
          for (int dq = 0; dq < q; ++dq) {
            const int jj = j * stride + dq - qh;
            if (jj < 0 || jj >= lin) continue;
            const T* xin = xt.raw() + xt.idx3(ii, jj, 0);
            const T* wk = wt.raw() + wt.idx4(dp, dq, 0, 0);
            for (int cc = 0; cc < c; ++cc) {
              const T xv = xin[cc];
              const T* wrow = wk + static_cast<long long>(cc) * f;
              for (int t = 0; t < f; ++t) acc[t] += xv * wrow[t];
            }
          }
        }
        T* op = out.raw() + out.idx3(i, j, 0);
        for (int t = 0; t < f; ++t) op[t] = acc[t];
      }
    Node n = make(OpKind::Conv2d, std::move(out), {w, bias, x});
    n.stride = stride;
    return push(std::move(n));
  }

  /// Per-channel conv with depth multiplier: W[P,Q,C,m], stride 1, same-zero
  /// padding. Output channel k reads input channel k/m and filter k%m.
  Id depthwise_conv(Id w, Id x) {
    const TensorT<T>& wt = value_of(w);
    const TensorT<T>& xt = value_of(x);
    detail::require(wt.rank() == 4, "depthwise_conv: weights must be rank 4 [P,Q,C,m]");
    detail::require(xt.rank() == 3, "depthwise_conv: input must be rank 3");
    const int p = wt.shape()[0], q = wt.shape()[1], c = wt.shape()[2], m = wt.shape()[3];
    detail::require(p % 2 == 1 && q % 2 == 1, "depthwise_conv: kernel dims must be odd");
    detail::require(xt.shape()[2] == c, "depthwise_conv: channel mismatch, input " +
                                            xt.shape().str() + " vs weights " + wt.shape().str());

    const int kin = xt.shape()[0], lin = xt.shape()[1];
    const int ph = p / 2, qh = q / 2;
    TensorT<T> out(Shape{kin, lin, c * m});
    for (int i = 0; i < kin; ++i)
      for (int j = 0; j < lin; ++j) {
        T* op = out.raw() + out.idx3(i, j, 0);
        for (int k = 0; k < c * m; ++k) op[k] = T(0);
        for (int dp = 0; dp < p; ++dp) {
          const int ii = i + dp - ph;
          if (ii < 0 || ii >= kin) continue;
          for (int dq = 0; dq < q; ++dq) {
            const int jj = j + dq - qh;
            if (jj < 0 || jj >= lin) continue;
            const T* xin = xt.raw() + xt.idx3(ii, jj, 0);
            const T* wk = wt.raw() + wt.idx4(dp, dq, 0, 0);
            for (int cc = 0; cc < c; ++cc)
              for (int u = 0; u < m; ++u) op[cc * m + u] += wk[cc * m + u] * xin[cc];
          }
        }
      }
    return push(make(OpKind::DepthwiseConv, std::move(out), {w, x}));
  }

  /// 2x2 mean pooling with stride 2; spatial dims must be even.
  Id avg_pool2(Id x) { return avg_down_impl(x, 2, OpKind::AvgPool2); }

  /// f x f mean pooling with stride f (Design B shared-path downsampling).
  Id avg_down(Id x, int factor) { return avg_down_impl(x, factor, OpKind::AvgDown); }

  Id relu(Id x) {
    const TensorT<T>& xt = value_of(x);
    TensorT<T> out(xt.shape());
    for (long long i = 0; i < xt.size(); ++i) out[i] = xt[i] > T(0) ? xt[i] : T(0);
    return push(make(OpKind::Relu, std::move(out), {x}));
  }

  Id add(Id a, Id b) {
    TensorT<T> out = dbcc::add(value_of(a), value_of(b));
    return push(make(OpKind::Add, std::move(out), {a, b}));
  }

  /// Hadamard product; this is the channel-wise weighted pooling of the head.
  Id mul(Id a, Id b) {
    TensorT<T> out = dbcc::mul(value_of(a), value_of(b));
    return push(make(OpKind::Mul, std::move(out), {a, b}));
  }

  /// Scalar broadcast product: s is a single-element tensor.
  Id scale(Id x, Id s) {
    const TensorT<T>& xt = value_of(x);
    const TensorT<T>& st = value_of(s);
    detail::require(st.size() == 1, "scale: scalar operand must have one element");
    TensorT<T> out(xt.shape());
    const T sv = st[0];
    for (long long i = 0; i < xt.size(); ++i) out[i] = xt[i] * sv;
    return push(make(OpKind::Scale, std::move(out), {x, s}));
  }

  Id concat_depth(Id a, Id b) {
    TensorT<T> out = dbcc::concat_depth(value_of(a), value_of(b));
    return push(make(OpKind::ConcatDepth, std::move(out), {a, b}));
  }

  /// Per-channel sum over all spatial positions: [K,L,C] -> [1,1,C].
  Id spatial_sum(Id x) {
    const TensorT<T>& xt = value_of(x);
    detail::require(xt.rank() == 3, "spatial_sum: input must be rank 3");
    const int k = xt.shape()[0], l = xt.shape()[1], c = xt.shape()[2];
    TensorT<T> out(Shape{1, 1, c});
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < l; ++j) {
        const T* xin = xt.raw() + xt.idx3(i, j, 0);
        for (int cc = 0; cc < c; ++cc) out[cc] += xin[cc];
      }
    return push(make(OpKind::SpatialSum, std::move(out), {x}));
  }

  /// [1,1,K] -> [1,1,3]; contiguous groups, larger groups first.
  Id group_depth_sum(Id x) {
    const TensorT<T>& xt = value_of(x);
    detail::require(xt.rank() == 3 && xt.shape()[0] == 1 && xt.shape()[1] == 1,
                    "group_depth_sum: input must be [1,1,K]");
    const auto bounds = depth_group_bounds(xt.shape()[2]);
    TensorT<T> out(Shape{1, 1, 3});
    for (int g = 0; g < 3; ++g) {
      T s = T(0);
      for (int k = bounds[g]; k < bounds[g + 1]; ++k) s += xt[k];
      out[g] = s;
    }
    return push(make(OpKind::GroupDepthSum, std::move(out), {x}));
  }

  /// Sum of every element, as a scalar tensor of shape [1].
  Id sum_all(Id x) {
    const TensorT<T>& xt = value_of(x);
    TensorT<T> out(Shape{1});
    T s = T(0);
    for (long long i = 0; i < xt.size(); ++i) s += xt[i];
    out[0] = s;
    return push(make(OpKind::SumAll, std::move(out), {x}));
  }

  /// v / ||v||_2 on a 3-vector; near-zero input is a degenerate estimate.
  Id l2_normalize(Id x) {
    const TensorT<T>& xt = value_of(x);
    detail::require(xt.size() == 3, "l2_normalize: input must have 3 elements");
    const double n = std::sqrt(static_cast<double>(xt[0]) * xt[0] +
                               static_cast<double>(xt[1]) * xt[1] +
                               static_cast<double>(xt[2]) * xt[2]);
    if (!(n > 1e-12))
      throw DegenerateEstimate("l2_normalize: input norm " + std::to_string(n) +
                               " below 1e-12");
    TensorT<T> out(xt.shape());
    for (int i = 0; i < 3; ++i) out[i] = static_cast<T>(static_cast<double>(xt[i]) / n);
    return push(make(OpKind::L2Normalize, std::move(out), {x}));
  }

  /// (1/3) * sum((est - gt)^2); both inputs must be unit-normalized.
  Id mse_loss(Id est, Id gt) {
    const TensorT<T>& e = value_of(est);
    const TensorT<T>& g = value_of(gt);
    detail::require(e.size() == 3 && g.size() == 3, "mse_loss: expected 3-element illuminants");
    check_unit_norm(e, "estimate");
    check_unit_norm(g, "ground truth");
    T s = T(0);
    for (int i = 0; i < 3; ++i) {
      const T d = e[i] - g[i];
      s += d * d;
    }
    TensorT<T> out(Shape{1});
    out[0] = s / T(3);
    return push(make(OpKind::MseLoss, std::move(out), {est, gt}));
  }

  // ---- reverse pass ----------------------------------------------------

  /// Reverse topological traversal from a scalar loss; fills grads for every
  /// node on a path from a parameter to the loss. Non-parameter leaves are
  /// skipped unless they were created with requires_grad via param().
  void backward(Id loss) {
    Node& ln = node(loss);
    if (ln.value.size() != 1) throw Error("backward: loss must be scalar");
    if (!ln.requires_grad)
      throw Error("backward: loss does not depend on any parameter");
    for (Node& n : nodes_)
      if (n.requires_grad) n.grad = TensorT<T>(n.value.shape());
    ln.grad[0] = T(1);
    for (Id id = loss; id >= 0; --id) {
      Node& n = node(id);
      if (!n.requires_grad || n.kind == OpKind::Leaf) continue;
      if (n.grad.empty() || id > loss) continue;
      backward_one(n);
    }
    for (const Node& n : nodes_)
      if (n.is_param) n.grad.check_finite("backward gradient");
  }

 private:
  std::vector<Node> nodes_;

  static int ceil_div(int a, int b) { return (a + b - 1) / b; }

  Node& node(Id id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(Id id) const { return nodes_[static_cast<size_t>(id)]; }
  const TensorT<T>& value_of(Id id) const { return node(id).value; }

  Id add_leaf(TensorT<T> value, bool is_param, std::string name) {
    value.check_finite(is_param ? "param leaf" : "input leaf");
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    n.requires_grad = is_param;
    n.is_param = is_param;
    n.name = std::move(name);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Node make(OpKind kind, TensorT<T> out, std::vector<Id> inputs) {
    Node n;
    n.kind = kind;
    n.value = std::move(out);
    for (Id i : inputs)
      if (i >= 0 && node(i).requires_grad) n.requires_grad = true;
    n.inputs = std::move(inputs);
    n.value.check_finite(op_name(kind));
    return n;
  }

  Id push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id avg_down_impl(Id x, int factor, OpKind kind) {
    const TensorT<T>& xt = value_of(x);
    detail::require(xt.rank() == 3, "avg pooling: input must be rank 3");
    detail::require(factor >= 1, "avg pooling: factor must be positive");
    const int k = xt.shape()[0], l = xt.shape()[1], c = xt.shape()[2];
    if (k % factor != 0 || l % factor != 0)
      throw ShapeError(std::string(op_name(kind)) + ": spatial dims " + xt.shape().str() +
                       " not divisible by window " + std::to_string(factor));
    const T inv = T(1) / static_cast<T>(factor * factor);
    TensorT<T> out(Shape{k / factor, l / factor, c});
    for (int i = 0; i < k / factor; ++i)
      for (int j = 0; j < l / factor; ++j) {
        T* op = out.raw() + out.idx3(i, j, 0);
        for (int di = 0; di < factor; ++di)
          for (int dj = 0; dj < factor; ++dj) {
            const T* xin = xt.raw() + xt.idx3(i * factor + di, j * factor + dj, 0);
            for (int cc = 0; cc < c; ++cc) op[cc] += xin[cc];
          }
        for (int cc = 0; cc < c; ++cc) op[cc] *= inv;
      }
    Node n = make(kind, std::move(out), {x});
    n.factor = factor;
    return push(std::move(n));
  }

  static void check_unit_norm(const TensorT<T>& v, const char* which) {
    const double n = std::sqrt(static_cast<double>(v[0]) * v[0] +
                               static_cast<double>(v[1]) * v[1] +
                               static_cast<double>(v[2]) * v[2]);
    if (std::abs(n - 1.0) > 1e-4)
      throw Error(std::string("mse_loss: ") + which + " is not unit-normalized (norm " +
                  std::to_string(n) + ")");
  }

  TensorT<T>& grad_buf(Id id) { return node(id).grad; }
  bool wants(Id id) const { return id >= 0 && node(id).requires_grad; }

  void backward_one(Node& n) {
    const TensorT<T>& g = n.grad;
    switch (n.kind) {
      case OpKind::PointwiseConv: {
        const Id w = n.inputs[0], bias = n.inputs[1], x = n.inputs[2];
        const TensorT<T>& wt = value_of(w);
        const TensorT<T>& xt = value_of(x);
        const int m = wt.shape()[2], f = wt.shape()[3];
        const int kout = n.value.shape()[0], lout = n.value.shape()[1];
        const int s = n.stride;
        for (int i = 0; i < kout; ++i)
          for (int j = 0; j < lout; ++j) {
            const T* gp = g.raw() + g.idx3(i, j, 0);
            const T* xin = xt.raw() + xt.idx3(i * s, j * s, 0);
            if (wants(w)) {
              TensorT<T>& gw = grad_buf(w);
              for (int c = 0; c < m; ++c) {
                const T xv = xin[c];
                T* gwr = gw.raw() + static_cast<long long>(c) * f;
                for (int t = 0; t < f; ++t) gwr[t] += xv * gp[t];
              }
            }
            if (wants(x)) {
              T* gx = grad_buf(x).raw() + xt.idx3(i * s, j * s, 0);
              for (int c = 0; c < m; ++c) {
                const T* wrow = wt.raw() + static_cast<long long>(c) * f;
                T acc = T(0);
                for (int t = 0; t < f; ++t) acc += gp[t] * wrow[t];
                gx[c] += acc;
              }
            }
            if (wants(bias)) {
              T* gb = grad_buf(bias).raw();
              for (int t = 0; t < f; ++t) gb[t] += gp[t];
            }
          }
        break;
      }
      case OpKind::Conv2d: {
        const Id w = n.inputs[0], bias = n.inputs[1], x = n.inputs[2];
        const TensorT<T>& wt = value_of(w);
        const TensorT<T>& xt = value_of(x);
        const int p = wt.shape()[0], q = wt.shape()[1], c = wt.shape()[2], f = wt.shape()[3];
        const int kin = xt.shape()[0], lin = xt.shape()[1];
        const int kout = n.value.shape()[0], lout = n.value.shape()[1];
        const int ph = p / 2, qh = q / 2, s = n.stride;
        for (int i = 0; i < kout; ++i)
          for (int j = 0; j < lout; ++j) {
            const T* gp = g.raw() + g.idx3(i, j, 0);
            if (wants(bias)) {
              T* gb = grad_buf(bias).raw();
              for (int t = 0; t < f; ++t) gb[t] += gp[t];
            }
            for (int dp = 0; dp < p; ++dp) {
              const int ii = i * s + dp - ph;
              if (ii < 0 || ii >= kin) continue;
              for (int dq = 0; dq < q; ++dq) {
                const int jj = j * s + dq - qh;
                if (jj < 0 || jj >= lin) continue;
                const T* xin = xt.raw() + xt.idx3(ii, jj, 0);
                if (wants(w)) {
                  T* gw = grad_buf(w).raw() + wt.idx4(dp, dq, 0, 0);
                  for (int cc = 0; cc < c; ++cc) {
                    const T xv = xin[cc];
                    T* gwr = gw + static_cast<long long>(cc) * f;
                    for (int t = 0; t < f; ++t) gwr[t] += xv * gp[t];
                  }
                }
                if (wants(x)) {
                  T* gx = grad_buf(x).raw() + xt.idx3(ii, jj, 0);
                  const T* wk = wt.raw() + wt.idx4(dp, dq, 0, 0);
                  for (int cc = 0; cc < c; ++cc) {
                    const T* wrow = wk + static_cast<long long>(cc) * f;
                    T acc = T(0);
                    for (int t = 0; t < f; ++t) acc += gp[t] * wrow[t];
                    gx[cc] += acc;
                  }
                }
              }
            }
          }
        break;
      }
      case OpKind::DepthwiseConv: {
        const Id w = n.inputs[0], x = n.inputs[1];
        const TensorT<T>& wt = value_of(w);
        const TensorT<T>& xt = value_of(x);
        const int p = wt.shape()[0], q = wt.shape()[1], c = wt.shape()[2], m = wt.shape()[3];
        const int kin = xt.shape()[0], lin = xt.shape()[1];
        const int ph = p / 2, qh = q / 2;
        for (int i = 0; i < kin; ++i)
          for (int j = 0; j < lin; ++j) {
            const T* gp = g.raw() + g.idx3(i, j, 0);
            for (int dp = 0; dp < p; ++dp) {
              const int ii = i + dp - ph;
              if (ii < 0 || ii >= kin) continue;
              for (int dq = 0; dq < q; ++dq) {
                const int jj = j + dq - qh;
                if (jj < 0 || jj >= lin) continue;
                const T* xin = xt.raw() + xt.idx3(ii, jj, 0);
                if (wants(w)) {
                  T* gw = grad_buf(w).raw() + wt.idx4(dp, dq, 0, 0);
                  for (int cc = 0; cc < c; ++cc)
                    for (int u = 0; u < m; ++u) gw[cc * m + u] += gp[cc * m + u] * xin[cc];
                }
                if (wants(x)) {
                  T* gx = grad_buf(x).raw() + xt.idx3(ii, jj, 0);
                  const T* wk = wt.raw() + wt.idx4(dp, dq, 0, 0);
                  for (int cc = 0; cc < c; ++cc) {
                    T acc = T(0);
                    for (int u = 0; u < m; ++u) acc += gp[cc * m + u] * wk[cc * m + u];
                    gx[cc] += acc;
                  }
                }
              }
            }
          }
        break;
      }
      case OpKind::AvgPool2:
      case OpKind::AvgDown: {
        const Id x = n.inputs[0];
        if (!wants(x)) break;
        const int fct = n.factor;
        const T inv = T(1) / static_cast<T>(fct * fct);
        TensorT<T>& gx = grad_buf(x);
        const int kout = n.value.shape()[0], lout = n.value.shape()[1], c = n.value.shape()[2];
        for (int i = 0; i < kout; ++i)
          for (int j = 0; j < lout; ++j) {
            const T* gp = g.raw() + g.idx3(i, j, 0);
            for (int di = 0; di < fct; ++di)
              for (int dj = 0; dj < fct; ++dj) {
                T* gxr = gx.raw() + gx.idx3(i * fct + di, j * fct + dj, 0);
                for (int cc = 0; cc < c; ++cc) gxr[cc] += gp[cc] * inv;
              }
          }
        break;
      }
      case OpKind::Relu: {
        const Id x = n.inputs[0];
        if (!wants(x)) break;
        const TensorT<T>& xt = value_of(x);
        TensorT<T>& gx = grad_buf(x);
        // subgradient 0 at exactly 0
        for (long long i = 0; i < xt.size(); ++i)
          if (xt[i] > T(0)) gx[i] += g[i];
        break;
      }
      case OpKind::Add: {
        for (int k = 0; k < 2; ++k) {
          const Id a = n.inputs[static_cast<size_t>(k)];
          if (!wants(a)) continue;
          TensorT<T>& ga = grad_buf(a);
          for (long long i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        break;
      }
      case OpKind::Mul: {
        const Id a = n.inputs[0], b = n.inputs[1];
        const TensorT<T>& at = value_of(a);
        const TensorT<T>& bt = value_of(b);
        if (wants(a)) {
          TensorT<T>& ga = grad_buf(a);
          for (long long i = 0; i < g.size(); ++i) ga[i] += g[i] * bt[i];
        }
        if (wants(b)) {
          TensorT<T>& gb = grad_buf(b);
          for (long long i = 0; i < g.size(); ++i) gb[i] += g[i] * at[i];
        }
        break;
      }
      case OpKind::Scale: {
        const Id x = n.inputs[0], s = n.inputs[1];
        const TensorT<T>& xt = value_of(x);
        const T sv = value_of(s)[0];
        if (wants(x)) {
          TensorT<T>& gx = grad_buf(x);
          for (long long i = 0; i < g.size(); ++i) gx[i] += g[i] * sv;
        }
        if (wants(s)) {
          T acc = T(0);
          for (long long i = 0; i < g.size(); ++i) acc += g[i] * xt[i];
          grad_buf(s)[0] += acc;
        }
        break;
      }
      case OpKind::ConcatDepth: {
        const Id a = n.inputs[0], b = n.inputs[1];
        const int h = n.value.shape()[0], w = n.value.shape()[1];
        const int ca = value_of(a).shape()[2], cb = value_of(b).shape()[2];
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) {
            const T* gp = g.raw() + g.idx3(i, j, 0);
            if (wants(a)) {
              T* ga = grad_buf(a).raw() + grad_buf(a).idx3(i, j, 0);
              for (int k = 0; k < ca; ++k) ga[k] += gp[k];
            }
            if (wants(b)) {
              T* gb = grad_buf(b).raw() + grad_buf(b).idx3(i, j, 0);
              for (int k = 0; k < cb; ++k) gb[k] += gp[ca + k];
            }
          }
        break;
      }
      case OpKind::SpatialSum: {
        const Id x = n.inputs[0];
        if (!wants(x)) break;
        TensorT<T>& gx = grad_buf(x);
        const TensorT<T>& xt = value_of(x);
        const int k = xt.shape()[0], l = xt.shape()[1], c = xt.shape()[2];
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < l; ++j) {
            T* gxr = gx.raw() + gx.idx3(i, j, 0);
            for (int cc = 0; cc < c; ++cc) gxr[cc] += g[cc];
          }
        break;
      }
      case OpKind::GroupDepthSum: {
        const Id x = n.inputs[0];
        if (!wants(x)) break;
        TensorT<T>& gx = grad_buf(x);
        const auto bounds = depth_group_bounds(value_of(x).shape()[2]);
        for (int grp = 0; grp < 3; ++grp)
          for (int k = bounds[grp]; k < bounds[grp + 1]; ++k) gx[k] += g[grp];
        break;
      }
      case OpKind::SumAll: {
        const Id x = n.inputs[0];
        if (!wants(x)) break;
        TensorT<T>& gx = grad_buf(x);
        for (long long i = 0; i < gx.size(); ++i) gx[i] += g[0];
        break;
      }
      case OpKind::L2Normalize: {
        const Id x = n.inputs[0];
        if (!wants(x)) break;
        const TensorT<T>& xt = value_of(x);
        const TensorT<T>& y = n.value;
        const double norm = std::sqrt(static_cast<double>(xt[0]) * xt[0] +
                                      static_cast<double>(xt[1]) * xt[1] +
                                      static_cast<double>(xt[2]) * xt[2]);
        // d(v/|v|)/dv = (I - y y^T) / |v|
        double dot = 0.0;
        for (int i = 0; i < 3; ++i) dot += static_cast<double>(g[i]) * y[i];
        TensorT<T>& gx = grad_buf(x);
        for (int i = 0; i < 3; ++i)
          gx[i] += static_cast<T>((static_cast<double>(g[i]) - dot * y[i]) / norm);
        break;
      }
      case OpKind::MseLoss: {
        const Id est = n.inputs[0], gt = n.inputs[1];
        const TensorT<T>& e = value_of(est);
        const TensorT<T>& t = value_of(gt);
        const T go = g[0];
        if (wants(est)) {
          TensorT<T>& ge = grad_buf(est);
          for (int i = 0; i < 3; ++i) ge[i] += go * T(2) / T(3) * (e[i] - t[i]);
        }
        if (wants(gt)) {
          TensorT<T>& gg = grad_buf(gt);
          for (int i = 0; i < 3; ++i) gg[i] += go * T(2) / T(3) * (t[i] - e[i]);
        }
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }
};

using GraphF = GraphT<float>;
using GraphD = GraphT<double>;

}  // namespace dbcc
