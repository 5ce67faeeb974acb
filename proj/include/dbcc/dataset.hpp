#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dbcc/image_io.hpp"
#include "dbcc/metrics.hpp"

namespace dbcc {

/// One labeled image: linear-light pixels in [0,1], unit-norm ground truth,
/// optional exclusion rectangles.
struct Sample {
  TensorF image;
  Illuminant gt;
  std::vector<MaskRect> mask;
};

/// CSV-backed dataset index. Grammar:
///   file,gt_r,gt_g,gt_b[,mask_x,mask_y,mask_w,mask_h]*
/// Header row required; `#` lines are comments. A `# gamma = <g>` directive
/// tells loaders which power to apply before feeding the network (the stored
/// pixels stay linear).
struct ManifestEntry {
  std::string file;
  Illuminant gt;
  std::vector<MaskRect> mask;
};

struct DatasetManifest {
  std::string root;                  // directory containing the csv
  std::vector<ManifestEntry> entries;
  double gamma = 1.0 / 2.2;          // network-input gamma

  std::string image_path(size_t i) const;
};

DatasetManifest read_manifest(const std::string& csv_path);
void write_manifest(const std::string& csv_path, const DatasetManifest& m);

/// Loads entry i: image stays linear; gt and mask attach.
Sample load_sample(const DatasetManifest& m, size_t i);

/// Image formation: image = base * (L / max(L)) per channel, clipped to [0,1];
/// gt is the unit-normalized illuminant. Channels of L must be positive.
Sample synthesize(const TensorF& base, const Illuminant& light, double noise_sigma = 0.0,
                  Rng* rng = nullptr);

/// Inverse of synthesize on unclipped pixels: divide by L / max(L), clip.
TensorF white_balance(const TensorF& image, const Illuminant& light);

/// Zeroes masked rectangles (network-input convention for excluded regions).
TensorF apply_mask(const TensorF& image, const std::vector<MaskRect>& mask);

/// Procedural scene sampler: gradient or flat background, colored rectangles,
/// usually an achromatic patch. Values stay <= 0.9 so synthesis never clips.
TensorF random_base_scene(int size, Rng& rng);

/// Illuminant with channels uniform in [0.4, 1.0], then unit-normalized.
Illuminant random_illuminant(Rng& rng);

/// Writes n synthesized samples (16-bit PPM) plus manifest.csv under out_dir
/// with layout out_dir/images/*.ppm. Returns the manifest.
DatasetManifest generate_synthetic_dataset(int n, int size, uint64_t seed,
                                           const std::string& out_dir);

struct AugmentConfig {
  bool crop = true;
  double crop_min = 0.6;  // fraction of the short side
  bool hflip = true;
  bool vflip = true;
  int out_h = 64;
  int out_w = 64;
};

/// Random square crop + independent horizontal/vertical flips, then bilinear
/// resize to (out_h, out_w). The global illuminant label is unchanged; mask
/// rectangles follow the geometry.
Sample augment(const Sample& s, const AugmentConfig& cfg, Rng& rng);

}  // namespace dbcc
