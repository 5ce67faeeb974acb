#include "dbcc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dbcc {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double csv_double(const std::string& s, const std::string& ctx) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end == s.c_str() || *end != '\0')
    throw FormatError("manifest: bad number '" + s + "' in " + ctx);
  return v;
}

int csv_int(const std::string& s, const std::string& ctx) {
  return static_cast<int>(csv_double(s, ctx));
}

}  // namespace

std::string DatasetManifest::image_path(size_t i) const {
  const std::string& f = entries[i].file;
  if (!f.empty() && f.front() == '/') return f;
  return root.empty() ? f : root + "/" + f;
}

DatasetManifest read_manifest(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("manifest not found: '" + csv_path + "'");

  DatasetManifest m;
  m.root = fs::path(csv_path).parent_path().string();

  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string ctx = csv_path + ":" + std::to_string(lineno);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      // optional directive: "# gamma = <value>"
      std::istringstream ds(line.substr(1));
      std::string key, eq, val;
      if (ds >> key >> eq >> val && key == "gamma" && eq == "=")
        m.gamma = csv_double(val, ctx);
      continue;
    }
    if (!header_seen) {
      auto cols = split_csv(line);
      if (cols.size() < 4 || cols[0] != "file" || cols[1] != "gt_r" || cols[2] != "gt_g" ||
          cols[3] != "gt_b")
        throw FormatError("manifest: missing or malformed header row in " + ctx);
      header_seen = true;
      continue;
    }
    auto cols = split_csv(line);
    if (cols.size() < 4 || (cols.size() - 4) % 4 != 0)
      throw FormatError("manifest: expected file,gt_r,gt_g,gt_b[,mask_x,mask_y,mask_w,mask_h]* in " + ctx);
    ManifestEntry e;
    e.file = cols[0];
    const double r = csv_double(cols[1], ctx);
    const double g = csv_double(cols[2], ctx);
    const double b = csv_double(cols[3], ctx);
    if (r < 0 || g < 0 || b < 0 || (r == 0 && g == 0 && b == 0))
      throw FormatError("manifest: ground truth must be nonnegative and nonzero in " + ctx);
    e.gt = normalize_illuminant(r, g, b);
    for (size_t i = 4; i + 3 < cols.size(); i += 4) {
      MaskRect rect{csv_int(cols[i], ctx), csv_int(cols[i + 1], ctx), csv_int(cols[i + 2], ctx),
                    csv_int(cols[i + 3], ctx)};
      if (rect.w < 1 || rect.h < 1 || rect.x < 0 || rect.y < 0)
        throw FormatError("manifest: bad mask rectangle in " + ctx);
      e.mask.push_back(rect);
    }
    m.entries.push_back(std::move(e));
  }
  if (!header_seen) throw FormatError("manifest: empty file '" + csv_path + "'");
  return m;
}

void write_manifest(const std::string& csv_path, const DatasetManifest& m) {
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + csv_path + "'");
  char buf[128];
  std::snprintf(buf, sizeof(buf), "# gamma = %.17g\n", m.gamma);
  out << buf;
  out << "file,gt_r,gt_g,gt_b\n";
  for (const ManifestEntry& e : m.entries) {
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g", e.gt.r, e.gt.g, e.gt.b);
    out << e.file << buf;
    for (const MaskRect& r : e.mask)
      out << "," << r.x << "," << r.y << "," << r.w << "," << r.h;
    out << "\n";
  }
  if (!out) throw IoError("short write to '" + csv_path + "'");
}

Sample load_sample(const DatasetManifest& m, size_t i) {
  const std::string path = m.image_path(i);
  if (!fs::exists(path)) throw IoError("manifest references missing file '" + path + "'");
  Sample s;
  s.image = read_ppm(path);
  s.gt = m.entries[i].gt;
  s.mask = m.entries[i].mask;
  for (const MaskRect& r : s.mask)
    if (r.x + r.w > s.image.shape()[1] || r.y + r.h > s.image.shape()[0])
      throw FormatError("mask rectangle exceeds image bounds in '" + path + "'");
  return s;
}

Sample synthesize(const TensorF& base, const Illuminant& light, double noise_sigma, Rng* rng) {
  detail::require(base.rank() == 3 && base.shape()[2] == 3,
                  "synthesize: base must be [H,W,3]");
  const double mx = std::max(light.r, std::max(light.g, light.b));
  if (!(light.r > 1e-9 && light.g > 1e-9 && light.b > 1e-9))
    throw Error("synthesize: illuminant channels must be positive (white balance would not invert)");
  const double tint[3] = {light.r / mx, light.g / mx, light.b / mx};

  Sample s;
  s.gt = normalize_illuminant(light.r, light.g, light.b);
  s.image = TensorF(base.shape());
  for (long long i = 0; i < base.size(); ++i) {
    double v = static_cast<double>(base[i]) * tint[i % 3];
    if (noise_sigma > 0.0 && rng) v += rng->normal(0.0, noise_sigma);
    s.image[i] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
  }
  return s;
}

TensorF white_balance(const TensorF& image, const Illuminant& light) {
  detail::require(image.rank() == 3 && image.shape()[2] == 3,
                  "white_balance: image must be [H,W,3]");
  if (!(light.r > 1e-9 && light.g > 1e-9 && light.b > 1e-9))
    throw Error("white_balance: illuminant channels must be positive");
  const double mx = std::max(light.r, std::max(light.g, light.b));
  const double inv[3] = {mx / light.r, mx / light.g, mx / light.b};
  TensorF out(image.shape());
  for (long long i = 0; i < image.size(); ++i) {
    const double v = static_cast<double>(image[i]) * inv[i % 3];
    out[i] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
  }
  return out;
}

TensorF apply_mask(const TensorF& image, const std::vector<MaskRect>& mask) {
  if (mask.empty()) return image;
  TensorF out = image;
  for (const MaskRect& r : mask)
    for (int i = r.y; i < r.y + r.h && i < out.shape()[0]; ++i)
      for (int j = r.x; j < r.x + r.w && j < out.shape()[1]; ++j)
        for (int c = 0; c < 3; ++c) out.at(i, j, c) = 0.0f;
  return out;
}

TensorF random_base_scene(int size, Rng& rng) {
  TensorF img(Shape{size, size, 3});

  auto rand_color = [&](double lo, double hi) {
    return std::array<double, 3>{rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
  };

  // background: flat gray, flat color, or a two-color gradient
  const int kind = rng.next_int(3);
  if (kind == 0) {
    const double u = rng.uniform(0.15, 0.85);
    for (long long i = 0; i < img.size(); ++i) img[i] = static_cast<float>(u);
  } else if (kind == 1) {
    const auto c = rand_color(0.1, 0.85);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        for (int k = 0; k < 3; ++k) img.at(i, j, k) = static_cast<float>(c[k]);
  } else {
    const auto c0 = rand_color(0.05, 0.85);
    const auto c1 = rand_color(0.05, 0.85);
    const bool vertical = rng.next_bool();
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        const double t = static_cast<double>(vertical ? i : j) / (size - 1);
        for (int k = 0; k < 3; ++k)
          img.at(i, j, k) = static_cast<float>((1.0 - t) * c0[k] + t * c1[k]);
      }
  }

  auto paint_rect = [&](const std::array<double, 3>& c, double min_frac, double max_frac) {
    const int w = std::max(2, static_cast<int>(rng.uniform(min_frac, max_frac) * size));
    const int h = std::max(2, static_cast<int>(rng.uniform(min_frac, max_frac) * size));
    const int x = rng.next_int(std::max(1, size - w));
    const int y = rng.next_int(std::max(1, size - h));
    for (int i = y; i < y + h; ++i)
      for (int j = x; j < x + w; ++j)
        for (int k = 0; k < 3; ++k) img.at(i, j, k) = static_cast<float>(c[k]);
  };

  const int rects = 3 + rng.next_int(6);
  for (int r = 0; r < rects; ++r) paint_rect(rand_color(0.05, 0.9), 0.1, 0.6);

  // achromatic reference patch in most scenes
  if (rng.next_double() < 0.85) {
    const double u = rng.uniform(0.3, 0.9);
    paint_rect({u, u, u}, 0.15, 0.35);
  }

  for (long long i = 0; i < img.size(); ++i)
    if (img[i] > 0.9f) img[i] = 0.9f;
  return img;
}

Illuminant random_illuminant(Rng& rng) {
  return normalize_illuminant(rng.uniform(0.4, 1.0), rng.uniform(0.4, 1.0),
                              rng.uniform(0.4, 1.0));
}

DatasetManifest generate_synthetic_dataset(int n, int size, uint64_t seed,
                                           const std::string& out_dir) {
  if (n < 1) throw Error("generate_synthetic_dataset: n must be >= 1");
  fs::create_directories(out_dir + "/images");

  DatasetManifest m;
  m.root = out_dir;
  m.gamma = 1.0 / 2.2;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const TensorF base = random_base_scene(size, rng);
    const Illuminant light = random_illuminant(rng);
    const Sample s = synthesize(base, light);

    char name[64];
    std::snprintf(name, sizeof(name), "images/img_%05d.ppm", i);
    write_ppm(out_dir + "/" + name, s.image, 65535);
    m.entries.push_back({name, s.gt, {}});
  }
  write_manifest(out_dir + "/manifest.csv", m);
  return m;
}

Sample augment(const Sample& s, const AugmentConfig& cfg, Rng& rng) {
  const int h = s.image.shape()[0], w = s.image.shape()[1];
  const int short_side = std::min(h, w);

  int side = short_side, x0 = 0, y0 = 0;
  if (cfg.crop) {
    const double frac = rng.uniform(cfg.crop_min, 1.0);
    side = std::max(1, static_cast<int>(std::lround(frac * short_side)));
    if (side > h || side > w) throw Error("augment: crop larger than image");
    x0 = side < w ? rng.next_int(w - side + 1) : 0;
    y0 = side < h ? rng.next_int(h - side + 1) : 0;
  }
  const bool fh = cfg.hflip && rng.next_bool();
  const bool fv = cfg.vflip && rng.next_bool();

  TensorF cut(Shape{side, side, 3});
  for (int i = 0; i < side; ++i) {
    const int si = y0 + (fv ? side - 1 - i : i);
    for (int j = 0; j < side; ++j) {
      const int sj = x0 + (fh ? side - 1 - j : j);
      for (int c = 0; c < 3; ++c) cut.at(i, j, c) = s.image.at(si, sj, c);
    }
  }

  Sample out;
  out.gt = s.gt;  // the illuminant is a global property
  out.image = resize_bilinear(cut, cfg.out_h, cfg.out_w);

  const double sy = static_cast<double>(cfg.out_h) / side;
  const double sx = static_cast<double>(cfg.out_w) / side;
  for (const MaskRect& r : s.mask) {
    // intersect with the crop window
    int rx0 = std::max(r.x, x0), ry0 = std::max(r.y, y0);
    int rx1 = std::min(r.x + r.w, x0 + side), ry1 = std::min(r.y + r.h, y0 + side);
    if (rx0 >= rx1 || ry0 >= ry1) continue;
    rx0 -= x0;
    rx1 -= x0;
    ry0 -= y0;
    ry1 -= y0;
    if (fh) {
      const int t = rx0;
      rx0 = side - rx1;
      rx1 = side - t;
    }
    if (fv) {
      const int t = ry0;
      ry0 = side - ry1;
      ry1 = side - t;
    }
    MaskRect nr;
    nr.x = static_cast<int>(std::floor(rx0 * sx));
    nr.y = static_cast<int>(std::floor(ry0 * sy));
    nr.w = std::min(cfg.out_w, static_cast<int>(std::ceil(rx1 * sx))) - nr.x;
    nr.h = std::min(cfg.out_h, static_cast<int>(std::ceil(ry1 * sy))) - nr.y;
    if (nr.w > 0 && nr.h > 0) out.mask.push_back(nr);
  }
  return out;
}

}  // namespace dbcc
