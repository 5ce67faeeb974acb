#include "dbcc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dbcc {

namespace {

TensorF network_input(const Sample& s, const ModelConfig& mc, double gamma) {
  TensorF img = apply_mask(s.image, s.mask);
  const int h = img.shape()[0], w = img.shape()[1];
  const int d = mc.spatial_divisor();
  if (h < d || w < d || h % d != 0 || w % d != 0)
    img = resize_bilinear(img, mc.input_h, mc.input_w);
  return gamma_correct(img, gamma);
}

TensorF gt_tensor(const Illuminant& gt) {
  TensorF t(Shape{1, 1, 3});
  t[0] = static_cast<float>(gt.r);
  t[1] = static_cast<float>(gt.g);
  t[2] = static_cast<float>(gt.b);
  return t;
}

}  // namespace

std::string TrainResult::log_text() const {
  std::ostringstream s;
  for (const EpochLog& e : curve) {
    char line[96];
    std::snprintf(line, sizeof(line), "%d\t%.8f\t%.5f\n", e.epoch, e.train_mse,
                  e.val_angular_deg);
    s << line;
  }
  return s.str();
}

EvalResult evaluate(const ModelF& model, const std::vector<Sample>& samples, double gamma) {
  EvalResult r;
  std::vector<double> errors;
  errors.reserve(samples.size());
  for (const Sample& s : samples) {
    Illuminant est;
    try {
      est = model.estimate(network_input(s, model.config(), gamma));
    } catch (const DegenerateEstimate&) {
      ++r.degenerate;
      const double u = 1.0 / std::sqrt(3.0);
      est = {u, u, u};
    }
    r.estimates.push_back(est);
    errors.push_back(angular_error_deg(s.gt, est));
  }
  r.report = summarize(std::move(errors));
  return r;
}

TrainResult train(const RunConfig& cfg, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, double gamma,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (train_set.empty()) throw Error("train: empty training set");

  Rng init_rng(cfg.seed);
  ModelF model = ModelF::init(cfg.model, init_rng);
  AdamState<float> adam = AdamState<float>::init(model.params());
  const AdamConfig acfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};

  AugmentConfig aug;
  aug.crop = cfg.augment;
  aug.crop_min = cfg.crop_min;
  aug.hflip = cfg.augment && cfg.hflip;
  aug.vflip = cfg.augment && cfg.vflip;
  aug.out_h = cfg.model.input_h;
  aug.out_w = cfg.model.input_w;

  TrainResult result;
  ParamStore<float> best = model.params();
  double best_val = 1e300;
  int best_epoch = 0;
  int since_best = 0;

  const int n = static_cast<int>(train_set.size());
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  std::vector<TensorF> grads;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng erng = Rng::stream(cfg.seed, static_cast<uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(erng.next_int(i + 1))]);

    double loss_sum = 0.0;
    long long loss_count = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      grads.assign(static_cast<size_t>(model.params().size()), TensorF());
      int contributed = 0;

      for (int bi = start; bi < stop; ++bi) {
        const Sample& s = train_set[static_cast<size_t>(order[static_cast<size_t>(bi)])];
        TensorF input;
        if (cfg.augment) {
          Sample a = augment(s, aug, erng);
          input = network_input(a, cfg.model, gamma);
        } else {
          input = network_input(s, cfg.model, gamma);
        }

        GraphF g;
        auto image = g.input(std::move(input), "image");
        typename GraphF::Id loss;
        ModelF::Forward fwd;
        try {
          fwd = model.forward(g, image);
          loss = g.mse_loss(fwd.estimate, g.input(gt_tensor(s.gt), "gt"));
        } catch (const DegenerateEstimate&) {
          ++result.degenerate_estimates;
          continue;
        }
        g.backward(loss);
        loss_sum += static_cast<double>(g.value(loss)[0]);
        ++loss_count;
        ++contributed;
        for (int p = 0; p < model.params().size(); ++p) {
          const TensorF& gp = g.grad(fwd.bound[p]);
          TensorF& acc = grads[static_cast<size_t>(p)];
          if (acc.empty())
            acc = gp;
          else
            for (long long e = 0; e < gp.size(); ++e) acc[e] += gp[e];
        }
      }
      if (contributed == 0) continue;

      const float inv = 1.0f / static_cast<float>(contributed);
      for (TensorF& gp : grads)
        for (long long e = 0; e < gp.size(); ++e) gp[e] *= inv;
      if (cfg.grad_clip > 0.0) clip_global_norm(grads, cfg.grad_clip);
      adam_step(model.params(), grads, adam, acfg);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_mse = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    if (!val_set.empty()) {
      EvalResult ev = evaluate(model, val_set, gamma);
      log.val_angular_deg = ev.report.mean;
      result.degenerate_estimates += ev.degenerate;
    }
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log);

    if (val_set.empty() || log.val_angular_deg < best_val) {
      best_val = val_set.empty() ? log.train_mse : log.val_angular_deg;
      best = model.params();
      best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }

  model.params() = best;
  result.model = std::move(model);
  result.best_epoch = best_epoch;
  result.best_val_angular_deg = best_val;
  return result;
}

std::vector<Fold> kfold_split(int n, int k, uint64_t seed) {
  if (k < 1 || k > n) throw Error("kfold_split: need 1 <= k <= dataset size");
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.next_int(i + 1))]);

  std::vector<Fold> folds(static_cast<size_t>(k));
  int pos = 0;
  for (int f = 0; f < k; ++f) {
    const int size = n / k + (f < n % k ? 1 : 0);
    for (int i = 0; i < size; ++i)
      folds[static_cast<size_t>(f)].test.push_back(order[static_cast<size_t>(pos++)]);
    std::sort(folds[static_cast<size_t>(f)].test.begin(), folds[static_cast<size_t>(f)].test.end());
  }
  for (int f = 0; f < k; ++f)
    for (int g = 0; g < k; ++g)
      if (g != f)
        folds[static_cast<size_t>(f)].train.insert(folds[static_cast<size_t>(f)].train.end(),
                                                   folds[static_cast<size_t>(g)].test.begin(),
                                                   folds[static_cast<size_t>(g)].test.end());
  for (Fold& f : folds) std::sort(f.train.begin(), f.train.end());
  return folds;
}

std::vector<Sample> load_all(const DatasetManifest& m) {
  std::vector<Sample> out;
  out.reserve(m.entries.size());
  for (size_t i = 0; i < m.entries.size(); ++i) out.push_back(load_sample(m, i));
  return out;
}

}  // namespace dbcc
