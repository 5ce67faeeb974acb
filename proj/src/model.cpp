#include "dbcc/model.hpp"

namespace dbcc {

namespace {

long long area(int h, int w) { return static_cast<long long>(h) * w; }

}  // namespace

std::vector<LayerStat> model_stats(const ModelConfig& cfg, int input_h, int input_w) {
  cfg.validate();
  cfg.check_input(input_h, input_w);
  std::vector<LayerStat> rows;
  auto push = [&](std::string name, long long params, long long flops, int h, int w, int c) {
    rows.push_back({std::move(name), params, flops, h, w, c});
  };

  int h = input_h / 2, w = input_w / 2;
  const int f = cfg.stem_filters;
  push("stem.conv3x3s2", 3LL * 3 * 3 * f + f, 2LL * area(h, w) * f * (3 * 3 * 3), h, w, f);

  for (int b = 0; b < cfg.num_blocks; ++b) {
    const std::string pre = "block" + std::to_string(b + 1) + ".";
    const int d = cfg.block_in_depth(b);
    const int k = cfg.dw_kernel;
    const bool base = cfg.design == Design::Baseline;
    const int m1 = base ? 2 : 1;
    const int mid = base ? 2 * d : d;

    // semantic branch: depthwise + relu at input res, pool to half; twice
    push(pre + "sem1.dw", static_cast<long long>(k) * k * d * m1,
         2LL * area(h, w) * d * m1 * k * k + area(h, w) * d * m1 /*relu*/ +
             area(h, w) * d * m1 /*pool*/,
         h / 2, w / 2, d * m1);
    push(pre + "sem2.dw", static_cast<long long>(k) * k * mid,
         2LL * area(h / 2, w / 2) * mid * k * k + area(h / 2, w / 2) * mid +
             area(h / 2, w / 2) * mid,
         h / 4, w / 4, mid);

    // color branch: stride-2 pointwise + relu; twice
    const int f1 = base ? 2 * d : d;
    push(pre + "col1.pw", static_cast<long long>(d) * f1 + f1,
         2LL * area(h / 2, w / 2) * f1 * d + area(h / 2, w / 2) * f1, h / 2, w / 2, f1);
    push(pre + "col2.pw", static_cast<long long>(mid) * mid + mid,
         2LL * area(h / 4, w / 4) * mid * mid + area(h / 4, w / 4) * mid, h / 4, w / 4, mid);

    if (cfg.design == Design::A) {
      if (cfg.shared_path == SharedPath::Stride4) {
        // three kernels, four applications (w_sc is applied to both inputs)
        const long long per_conv = 2LL * area(h / 4, w / 4) * d * (9 * d);
        push(pre + "shared.conv3x3s4", 3LL * 9 * d * d,
             4 * per_conv + 2 * area(h / 4, w / 4) * d /*adds*/, h / 4, w / 4, d);
      } else {
        const long long stage1 = 2LL * area(h / 2, w / 2) * d * (9 * d);
        const long long stage2 = 2LL * area(h / 4, w / 4) * d * (9 * d);
        push(pre + "shared.conv3x3s2x2", 6LL * 9 * d * d,
             4 * (stage1 + stage2) + 2 * area(h / 4, w / 4) * d, h / 4, w / 4, d);
      }
    } else if (cfg.design == Design::B) {
      // per output: two scalar multiplies, one add, one 4x4 average downsample
      push(pre + "shared.scalars", 3, 2LL * (3 * area(h, w) * d + area(h, w) * d), h / 4,
           w / 4, d);
    }

    h /= 4;
    w /= 4;
  }

  const int hc = cfg.head_channels();
  push("head.weighted_pool", 0, area(h, w) * hc, h, w, hc);
  push("head.spatial_sum", 0, area(h, w) * hc, 1, 1, hc);
  push("head.group_depth_sum", 0, hc, 1, 1, 3);
  push("head.l2_normalize", 0, 12, 1, 1, 3);
  return rows;
}

long long count_params(const ModelConfig& cfg) {
  long long n = 0;
  for (const LayerStat& r : model_stats(cfg, cfg.spatial_divisor(), cfg.spatial_divisor()))
    n += r.params;
  return n;
}

long long count_flops(const ModelConfig& cfg, int input_h, int input_w) {
  long long n = 0;
  for (const LayerStat& r : model_stats(cfg, input_h, input_w)) n += r.flops;
  return n;
}

}  // namespace dbcc
