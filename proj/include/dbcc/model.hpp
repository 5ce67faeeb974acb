#pragma once

#include <string>
#include <vector>

#include "dbcc/blocks.hpp"

namespace dbcc {

/// Architecture description. The defaults reproduce the published shape chain
/// (512,512,3) -> (256,256,32) -> (64,64,64) -> (16,16,128) -> (1,1,3).
struct ModelConfig {
  Design design = Design::A;
  int stem_filters = 32;
  int num_blocks = 2;
  int dw_kernel = 3;
  SharedPath shared_path = SharedPath::Stride4;
  int input_h = 512;
  int input_w = 512;

  int block_in_depth(int block_index) const { return stem_filters << block_index; }
  int head_channels() const { return stem_filters << num_blocks; }
  int spatial_divisor() const { return 2 << (2 * num_blocks); }  // stem /2, each block /4

  void validate() const {
    if (stem_filters < 1) throw FormatError("model: stem_filters must be >= 1");
    if (num_blocks < 1) throw FormatError("model: at least one block required");
    if (dw_kernel < 1 || dw_kernel % 2 == 0)
      throw FormatError("model: dw_kernel must be odd and positive");
    if (head_channels() < 3)
      throw FormatError("model: head needs >= 3 channels, got " +
                        std::to_string(head_channels()));
    check_input(input_h, input_w);
  }

  void check_input(int h, int w) const {
    const int d = spatial_divisor();
    if (h < d || w < d || h % d != 0 || w % d != 0)
      throw ShapeError("input " + std::to_string(h) + "x" + std::to_string(w) +
                       " must be divisible by " + std::to_string(d) + " for " +
                       std::to_string(num_blocks) + " blocks");
  }

  std::string serialize() const {
    std::string s;
    s += "design = " + std::string(design_name(design)) + "\n";
    s += "stem_filters = " + std::to_string(stem_filters) + "\n";
    s += "blocks = " + std::to_string(num_blocks) + "\n";
    s += "dw_kernel = " + std::to_string(dw_kernel) + "\n";
    s += std::string("shared_path = ") +
         (shared_path == SharedPath::Stride4 ? "stride4" : "double2") + "\n";
    s += "input_height = " + std::to_string(input_h) + "\n";
    s += "input_width = " + std::to_string(input_w) + "\n";
    return s;
  }

  static ModelConfig deserialize(const std::string& text);
};

template <typename T>
class Model {
 public:
  static Model init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    m.stem_w_ = m.params_.add(
        "stem.w", random_init<T>(Shape{3, 3, 3, cfg.stem_filters}, 27, rng));
    m.stem_b_ = m.params_.add("stem.b", TensorT<T>::zeros(Shape{cfg.stem_filters}));
    for (int b = 0; b < cfg.num_blocks; ++b) {
      BlockConfig bc = m.block_config(b);
      m.blocks_.push_back(
          init_block_params(m.params_, bc, "block" + std::to_string(b + 1), rng));
    }
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  BlockConfig block_config(int b) const {
    BlockConfig bc;
    bc.design = cfg_.design;
    bc.in_depth = cfg_.block_in_depth(b);
    bc.dw_kernel = cfg_.dw_kernel;
    bc.shared_path = cfg_.shared_path;
    bc.cross_terms = cross_terms_;
    return bc;
  }

  /// Ablation switch used to exercise the Eq-18 regime (w_sc terms removed).
  void set_cross_terms(bool on) { cross_terms_ = on; }

  struct Forward {
    using Id = typename GraphT<T>::Id;
    Id stem = -1;
    Id pooled = -1;
    Id estimate = -1;
    std::vector<BlockOut<T>> blocks;
    BoundParams<T> bound;
  };

  /// Records the full forward pass on g. The stem output feeds both branches.
  Forward forward(GraphT<T>& g, typename GraphT<T>::Id image) const {
    const Shape& in = g.value(image).shape();
    detail::require(in.rank() == 3 && in[2] == 3,
                    "model: input must be [H,W,3], got " + in.str());
    cfg_.check_input(in[0], in[1]);

    Forward f;
    f.bound = bind_params(g, params_);
    f.stem = g.conv2d(f.bound[stem_w_], f.bound[stem_b_], image, 2);
    auto i_s = f.stem, i_c = f.stem;
    for (int b = 0; b < cfg_.num_blocks; ++b) {
      f.blocks.push_back(forward_block(g, block_config(b), blocks_[b], f.bound, i_s, i_c));
      i_s = f.blocks.back().o_s;
      i_c = f.blocks.back().o_c;
    }
    f.pooled = channelwise_weighted_pool(g, i_s, i_c);
    f.estimate = reduction_head(g, f.pooled);
    return f;
  }

  /// One-shot inference. Throws DegenerateEstimate on a near-zero head input.
  Illuminant estimate(const TensorT<T>& image) const {
    GraphT<T> g;
    auto fwd = forward(g, g.input(image, "image"));
    return illuminant_from(g.value(fwd.estimate));
  }

 private:
  ModelConfig cfg_;
  ParamStore<T> params_;
  int stem_w_ = -1, stem_b_ = -1;
  std::vector<BlockParamIds> blocks_;
  bool cross_terms_ = true;
};

using ModelF = Model<float>;
using ModelD = Model<double>;

/// Per-layer cost accounting. Convolutions are 2 flops per multiply-accumulate;
/// pooling and elementwise ops cost 1 flop per element touched.
struct LayerStat {
  std::string name;
  long long params = 0;
  long long flops = 0;
  int out_h = 0, out_w = 0, out_c = 0;
};

std::vector<LayerStat> model_stats(const ModelConfig& cfg, int input_h, int input_w);
long long count_params(const ModelConfig& cfg);
long long count_flops(const ModelConfig& cfg, int input_h, int input_w);

}  // namespace dbcc
