#pragma once

#include <string>
#include <vector>

#include "dbcc/graph.hpp"

namespace dbcc {

enum class Design { Baseline, A, B };

inline const char* design_name(Design d) {
  switch (d) {
    case Design::Baseline: return "baseline";
    case Design::A: return "a";
    case Design::B: return "b";
  }
  return "?";
}

inline Design design_from(const std::string& s) {
  if (s == "baseline") return Design::Baseline;
  if (s == "a") return Design::A;
  if (s == "b") return Design::B;
  throw FormatError("unknown design '" + s + "' (expected a, b or baseline)");
}

/// How Design A realizes the shared-path operator: one 3x3 conv with stride 4,
/// or two chained 3x3 convs with stride 2. Parameter counts differ slightly.
enum class SharedPath { Stride4, DoubleStride2 };

/// Named parameter tensors in a fixed registration order.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    TensorT<T> value;
  };

  int add(std::string name, TensorT<T> value) {
    entries_.push_back({std::move(name), std::move(value)});
    return static_cast<int>(entries_.size() - 1);
  }

  int size() const { return static_cast<int>(entries_.size()); }
  Entry& operator[](int i) { return entries_[static_cast<size_t>(i)]; }
  const Entry& operator[](int i) const { return entries_[static_cast<size_t>(i)]; }

  long long scalar_count() const {
    long long n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

 private:
  std::vector<Entry> entries_;
};

/// Parameter node ids for one forward pass, in store order. A parameter used
/// at several graph sites must map to a single node so its gradient
/// accumulates across uses (the shared kernel w_sc in particular).
template <typename T>
struct BoundParams {
  std::vector<typename GraphT<T>::Id> node_of;
  typename GraphT<T>::Id operator[](int param_index) const {
    return node_of[static_cast<size_t>(param_index)];
  }
};

template <typename T>
BoundParams<T> bind_params(GraphT<T>& g, const ParamStore<T>& store) {
  BoundParams<T> bound;
  bound.node_of.reserve(static_cast<size_t>(store.size()));
  for (int i = 0; i < store.size(); ++i)
    bound.node_of.push_back(g.param(store[i].value, store[i].name));
  return bound;
}

/// Color unit f_c: ReLU of a stride-2 point-wise convolution.
template <typename T>
typename GraphT<T>::Id color_unit(GraphT<T>& g, typename GraphT<T>::Id w,
                                  typename GraphT<T>::Id bias, typename GraphT<T>::Id x) {
  return g.relu(g.pointwise_conv(w, bias, x, 2));
}

/// Semantic unit h_s: 2x2 average pool of ReLU of a depth-wise convolution.
template <typename T>
typename GraphT<T>::Id semantic_unit(GraphT<T>& g, typename GraphT<T>::Id w,
                                     typename GraphT<T>::Id x) {
  return g.avg_pool2(g.relu(g.depthwise_conv(w, x)));
}

/// Channel-wise weighted pooling: Hadamard mask of color features by the
/// semantic map.
template <typename T>
typename GraphT<T>::Id channelwise_weighted_pool(GraphT<T>& g, typename GraphT<T>::Id s,
                                                 typename GraphT<T>::Id c) {
  return g.mul(s, c);
}

/// Spatial reduction, 3-group depth reduction, L2 normalization.
template <typename T>
typename GraphT<T>::Id reduction_head(GraphT<T>& g, typename GraphT<T>::Id pooled) {
  return g.l2_normalize(g.group_depth_sum(g.spatial_sum(pooled)));
}

/// One dual-branch stage. Maps two (H,W,D) inputs to two (H/4,W/4,2D) outputs.
struct BlockConfig {
  Design design = Design::A;
  int in_depth = 0;
  int dw_kernel = 3;
  SharedPath shared_path = SharedPath::Stride4;
  bool cross_terms = true;  // false drops the w_sc terms entirely (Eq-18-style ablation)

  int out_depth() const { return 2 * in_depth; }
};

/// Parameter indices of one block inside a ParamStore.
struct BlockParamIds {
  int sem1_w = -1, sem2_w = -1;
  int col1_w = -1, col1_b = -1, col2_w = -1, col2_b = -1;
  // Shared path: Design A conv kernels or Design B scalars.
  int ws = -1, wc = -1, wsc = -1;
  // Second-stage kernels when Design A uses two stride-2 convs.
  int ws2 = -1, wc2 = -1, wsc2 = -1;
};

/// Registers one block's parameters. Branch units in design-a/b blocks keep
/// depth (multiplier 1, D filters) so concat with the D-channel shared path
/// yields 2D. The baseline block has no shared path; its first units double
/// depth instead.
template <typename T>
BlockParamIds init_block_params(ParamStore<T>& store, const BlockConfig& cfg,
                                const std::string& prefix, Rng& rng) {
  BlockParamIds p;
  const int d = cfg.in_depth;
  const int k = cfg.dw_kernel;
  const bool base = cfg.design == Design::Baseline;
  const int m1 = base ? 2 : 1;             // first semantic unit depth multiplier
  const int f1 = base ? 2 * d : d;         // first color unit filters
  const int mid = base ? 2 * d : d;        // depth entering the second units

  p.sem1_w = store.add(prefix + ".sem1.w",
                       random_init<T>(Shape{k, k, d, m1}, k * k, rng));
  p.sem2_w = store.add(prefix + ".sem2.w",
                       random_init<T>(Shape{k, k, mid, 1}, k * k, rng));
  p.col1_w = store.add(prefix + ".col1.w", random_init<T>(Shape{1, 1, d, f1}, d, rng));
  p.col1_b = store.add(prefix + ".col1.b", TensorT<T>::zeros(Shape{f1}));
  p.col2_w = store.add(prefix + ".col2.w", random_init<T>(Shape{1, 1, mid, mid}, mid, rng));
  p.col2_b = store.add(prefix + ".col2.b", TensorT<T>::zeros(Shape{mid}));

  if (cfg.design == Design::A) {
    auto kernel = [&](double gain) {
      TensorT<T> t = random_init<T>(Shape{3, 3, d, d}, 9 * d, rng);
      if (gain != 1.0)
        for (long long i = 0; i < t.size(); ++i) t[i] = static_cast<T>(t[i] * gain);
      return t;
    };
    // w_sc starts at 0.1x scale so training begins near the no-sharing regime.
    p.ws = store.add(prefix + ".shared.ws", kernel(1.0));
    p.wc = store.add(prefix + ".shared.wc", kernel(1.0));
    p.wsc = store.add(prefix + ".shared.wsc", kernel(0.1));
    if (cfg.shared_path == SharedPath::DoubleStride2) {
      p.ws2 = store.add(prefix + ".shared.ws2", kernel(1.0));
      p.wc2 = store.add(prefix + ".shared.wc2", kernel(1.0));
      p.wsc2 = store.add(prefix + ".shared.wsc2", kernel(0.1));
    }
  } else if (cfg.design == Design::B) {
    // Identity-shortcut start: w_s = w_c = 1, w_sc = 0.
    p.ws = store.add(prefix + ".shared.ws", TensorT<T>::full(Shape{1}, T(1)));
    p.wc = store.add(prefix + ".shared.wc", TensorT<T>::full(Shape{1}, T(1)));
    p.wsc = store.add(prefix + ".shared.wsc", TensorT<T>::zeros(Shape{1}));
  }
  return p;
}

template <typename T>
struct BlockOut {
  using Id = typename GraphT<T>::Id;
  Id o_s = -1, o_c = -1;                // block outputs
  Id o_s_units = -1, o_c_units = -1;    // branch-specific parts o'
  Id o_s_shared = -1, o_c_shared = -1;  // shared-path parts o'' (design blocks)
};

template <typename T>
BlockOut<T> forward_block(GraphT<T>& g, const BlockConfig& cfg, const BlockParamIds& p,
                          const BoundParams<T>& bp, typename GraphT<T>::Id i_s,
                          typename GraphT<T>::Id i_c) {
  using Id = typename GraphT<T>::Id;
  const Shape& ss = g.value(i_s).shape();
  const Shape& cs = g.value(i_c).shape();
  detail::require(ss == cs, "block: branch inputs differ, " + ss.str() + " vs " + cs.str());
  detail::require(ss.rank() == 3 && ss[2] == cfg.in_depth,
                  "block: expected depth " + std::to_string(cfg.in_depth) + ", got " + ss.str());
  detail::require(ss[0] % 4 == 0 && ss[1] % 4 == 0,
                  "block: spatial dims must be divisible by 4, got " + ss.str());

  BlockOut<T> out;
  Id s1 = semantic_unit(g, bp[p.sem1_w], i_s);
  out.o_s_units = semantic_unit(g, bp[p.sem2_w], s1);
  Id c1 = color_unit(g, bp[p.col1_w], bp[p.col1_b], i_c);
  out.o_c_units = color_unit(g, bp[p.col2_w], bp[p.col2_b], c1);

  if (cfg.design == Design::Baseline) {
    out.o_s = out.o_s_units;
    out.o_c = out.o_c_units;
    return out;
  }

  if (cfg.design == Design::A) {
    auto apply = [&](int k1, int k2, Id x) {
      if (cfg.shared_path == SharedPath::Stride4) return g.conv2d(bp[k1], -1, x, 4);
      return g.conv2d(bp[k2], -1, g.conv2d(bp[k1], -1, x, 2), 2);
    };
    Id s_own = apply(p.ws, p.ws2, i_s);
    Id c_own = apply(p.wc, p.wc2, i_c);
    if (cfg.cross_terms) {
      out.o_s_shared = g.add(s_own, apply(p.wsc, p.wsc2, i_c));
      out.o_c_shared = g.add(apply(p.wsc, p.wsc2, i_s), c_own);
    } else {
      out.o_s_shared = s_own;
      out.o_c_shared = c_own;
    }
  } else {
    Id s_own = g.scale(i_s, bp[p.ws]);
    Id c_own = g.scale(i_c, bp[p.wc]);
    if (cfg.cross_terms) {
      out.o_s_shared = g.avg_down(g.add(s_own, g.scale(i_c, bp[p.wsc])), 4);
      out.o_c_shared = g.avg_down(g.add(g.scale(i_s, bp[p.wsc]), c_own), 4);
    } else {
      out.o_s_shared = g.avg_down(s_own, 4);
      out.o_c_shared = g.avg_down(c_own, 4);
    }
  }

  out.o_s = g.concat_depth(out.o_s_units, out.o_s_shared);
  out.o_c = g.concat_depth(out.o_c_units, out.o_c_shared);
  return out;
}

}  // namespace dbcc
