#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dbcc/checkpoint.hpp"
#include "dbcc/train.hpp"

namespace fs = std::filesystem;
using namespace dbcc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;

const std::vector<std::string> kConfigKeys = {
    "design",     "stem_filters", "blocks",    "dw_kernel",      "shared_path",
    "input_height", "input_width", "lr",        "batch_size",     "epochs",
    "beta1",      "beta2",        "adam_eps",  "grad_clip",      "patience",
    "seed",       "augment",      "crop_min",  "hflip",          "vflip",
    "train_manifest", "val_manifest", "val_count", "folds",      "run_dir"};

struct ConfigCli {
  std::string config_file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value configuration file");
    for (const std::string& key : kConfigKeys) {
      auto* opt = app->add_option("--" + key, "override config key " + key);
      opt->each([this, key](const std::string& v) { overrides[key] = v; });
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    return cfg;
  }
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::gmtime(&t));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("short write to '" + path + "'");
}

std::string per_sample_csv(const std::vector<Sample>& samples, const EvalResult& ev) {
  std::ostringstream s;
  s.precision(9);
  s << "sample_id,gt_r,gt_g,gt_b,est_r,est_g,est_b,angular_error_deg\n";
  for (size_t i = 0; i < samples.size(); ++i) {
    const Illuminant& gt = samples[i].gt;
    const Illuminant& et = ev.estimates[i];
    s << i << "," << gt.r << "," << gt.g << "," << gt.b << "," << et.r << "," << et.g << ","
      << et.b << "," << ev.report.errors[i] << "\n";
  }
  return s.str();
}

int cmd_train(const ConfigCli& cc) {
  RunConfig cfg = cc.resolve();
  if (cfg.train_manifest.empty()) throw IoError("manifest not found: no train_manifest configured");
  DatasetManifest manifest = read_manifest(cfg.train_manifest);
  if (manifest.entries.empty()) throw FormatError("manifest has no entries");

  std::vector<Sample> all = load_all(manifest);
  std::vector<Sample> train_set, val_set;
  if (!cfg.val_manifest.empty()) {
    train_set = std::move(all);
    val_set = load_all(read_manifest(cfg.val_manifest));
  } else if (cfg.val_count > 0) {
    if (cfg.val_count >= static_cast<int>(all.size()))
      throw FormatError("val_count leaves no training samples");
    val_set.assign(all.end() - cfg.val_count, all.end());
    train_set.assign(all.begin(), all.end() - cfg.val_count);
  } else {
    train_set = std::move(all);
  }

  std::string run_dir = cfg.run_dir;
  if (run_dir.empty()) run_dir = "run_" + timestamp() + "_seed" + std::to_string(cfg.seed);
  fs::create_directories(run_dir);
  write_text(run_dir + "/config.txt", cfg.serialize());

  std::cerr << "training " << design_name(cfg.model.design) << " on " << train_set.size()
            << " samples (" << val_set.size() << " validation)\n";
  TrainResult result = train(cfg, train_set, val_set, manifest.gamma, [](const EpochLog& e) {
    std::printf("%d\t%.8f\t%.5f\n", e.epoch, e.train_mse, e.val_angular_deg);
    std::fflush(stdout);
  });

  write_text(run_dir + "/train_log.tsv", result.log_text());
  save_checkpoint(run_dir + "/model.ckpt", cfg.model, result.model.params());
  std::cerr << "best epoch " << result.best_epoch << ", val mean angular error "
            << result.best_val_angular_deg << " deg, degenerate estimates "
            << result.degenerate_estimates << "\n";
  std::cout << run_dir << "/model.ckpt\n";
  return kExitOk;
}

int cmd_eval(const ConfigCli& cc, const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& out_dir, int folds) {
  DatasetManifest manifest = read_manifest(manifest_path);
  if (manifest.entries.empty()) throw FormatError("manifest has no entries");
  std::vector<Sample> samples = load_all(manifest);
  fs::create_directories(out_dir);

  EvalResult ev;
  if (folds > 0) {
    RunConfig cfg = cc.resolve();
    auto parts = kfold_split(static_cast<int>(samples.size()), folds, cfg.seed);
    std::vector<double> pooled(samples.size(), 0.0);
    std::vector<Illuminant> estimates(samples.size());
    for (size_t f = 0; f < parts.size(); ++f) {
      std::vector<Sample> tr, te;
      for (int i : parts[f].train) tr.push_back(samples[static_cast<size_t>(i)]);
      for (int i : parts[f].test) te.push_back(samples[static_cast<size_t>(i)]);
      std::cerr << "fold " << (f + 1) << "/" << parts.size() << ": " << tr.size() << " train, "
                << te.size() << " test\n";
      TrainResult tres = train(cfg, tr, te, manifest.gamma);
      EvalResult fev = evaluate(tres.model, te, manifest.gamma);
      ev.degenerate += fev.degenerate;
      for (size_t j = 0; j < parts[f].test.size(); ++j) {
        pooled[static_cast<size_t>(parts[f].test[j])] = fev.report.errors[j];
        estimates[static_cast<size_t>(parts[f].test[j])] = fev.estimates[j];
      }
    }
    ev.report = summarize(pooled);
    ev.estimates = std::move(estimates);
  } else {
    ModelF model = load_model(ckpt_path);
    ev = evaluate(model, samples, manifest.gamma);
  }

  write_text(out_dir + "/per_sample.csv", per_sample_csv(samples, ev));
  write_text(out_dir + "/summary.csv", report_csv(ev.report));
  std::cout << report_csv(ev.report);
  return kExitOk;
}

int cmd_wb(const std::string& ckpt_path, const std::string& in_path, const std::string& out_path,
           const std::string& gt_str) {
  ModelF model = load_model(ckpt_path);
  TensorF image = read_ppm(in_path);

  const ModelConfig& mc = model.config();
  TensorF net_in = image;
  const int d = mc.spatial_divisor();
  if (image.shape()[0] % d != 0 || image.shape()[1] % d != 0 || image.shape()[0] < d ||
      image.shape()[1] < d)
    net_in = resize_bilinear(image, mc.input_h, mc.input_w);
  net_in = gamma_correct(net_in, 1.0 / 2.2);

  const Illuminant est = model.estimate(net_in);
  std::printf("%.6f %.6f %.6f\n", est.r, est.g, est.b);
  if (!gt_str.empty()) {
    double r, g, b;
    if (std::sscanf(gt_str.c_str(), "%lf,%lf,%lf", &r, &g, &b) != 3)
      throw FormatError("--gt expects r,g,b");
    std::printf("angular_error_deg %.4f\n", angular_error_deg(normalize_illuminant(r, g, b), est));
  }
  write_ppm(out_path, white_balance(image, est), 65535);
  return kExitOk;
}

int cmd_count(const ConfigCli& cc, int height, int width) {
  RunConfig cfg = cc.resolve();
  const int h = height > 0 ? height : cfg.model.input_h;
  const int w = width > 0 ? width : cfg.model.input_w;

  std::printf("%-10s %12s %14s  at %dx%d\n", "design", "params", "flops", h, w);
  for (Design d : {Design::A, Design::B, Design::Baseline}) {
    ModelConfig mc = cfg.model;
    mc.design = d;
    mc.input_h = h;
    mc.input_w = w;
    std::printf("%-10s %12lld %14lld\n", design_name(d), count_params(mc), count_flops(mc, h, w));
  }
  return kExitOk;
}

int cmd_synth(int n, const std::string& out_dir, uint64_t seed, int size) {
  if (n < 1) throw FormatError("synth: --n must be >= 1");
  if (size < 8) throw FormatError("synth: --size must be >= 8");
  generate_synthetic_dataset(n, size, seed, out_dir);
  std::cout << out_dir << "/manifest.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-branch color constancy toolkit"};
  app.require_subcommand(1);

  ConfigCli train_cc, eval_cc, count_cc;

  auto* train_cmd = app.add_subcommand("train", "train a model from a dataset manifest");
  train_cc.attach(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (or k-fold retrain) on a manifest");
  std::string eval_ckpt, eval_manifest, eval_out = "eval_out";
  int eval_folds = 0;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path (omit with --folds)");
  eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest csv")->required();
  eval_cmd->add_option("--out-dir", eval_out, "directory for per_sample.csv and summary.csv");
  eval_cmd->add_option("--folds", eval_folds, "k-fold cross-validation (trains per fold)");
  eval_cc.attach(eval_cmd);

  auto* wb_cmd = app.add_subcommand("wb", "white-balance an image with a trained model");
  std::string wb_ckpt, wb_in, wb_out, wb_gt;
  wb_cmd->add_option("--checkpoint", wb_ckpt)->required();
  wb_cmd->add_option("input", wb_in, "input PPM")->required();
  wb_cmd->add_option("output", wb_out, "output PPM")->required();
  wb_cmd->add_option("--gt", wb_gt, "ground truth r,g,b to report the angular error");

  auto* count_cmd = app.add_subcommand("count", "parameter and flop accounting per design");
  int count_h = 0, count_w = 0;
  count_cmd->add_option("--height", count_h, "input height (default: config)");
  count_cmd->add_option("--width", count_w, "input width (default: config)");
  count_cc.attach(count_cmd);

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  int synth_n = 0, synth_size = 64;
  uint64_t synth_seed = 1;
  std::string synth_out;
  synth_cmd->add_option("--n", synth_n, "number of samples")->required();
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--size", synth_size, "square image size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_cc);
    if (eval_cmd->parsed()) {
      if (eval_folds <= 0 && eval_ckpt.empty())
        throw FormatError("eval: --checkpoint is required unless --folds is given");
      return cmd_eval(eval_cc, eval_ckpt, eval_manifest, eval_out, eval_folds);
    }
    if (wb_cmd->parsed()) return cmd_wb(wb_ckpt, wb_in, wb_out, wb_gt);
    if (count_cmd->parsed()) return cmd_count(count_cc, count_h, count_w);
    if (synth_cmd->parsed()) return cmd_synth(synth_n, synth_out, synth_seed, synth_size);
  } catch (const DegenerateEstimate& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
