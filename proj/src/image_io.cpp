#include "dbcc/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace dbcc {

namespace {

/// Next whitespace-separated token, skipping `#` comments.
std::string next_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw FormatError("unexpected end of PPM header in '" + path + "'");
  return tok;
}

int header_int(std::istream& in, const std::string& path, const char* what) {
  const std::string tok = next_token(in, path);
  for (char ch : tok)
    if (!std::isdigit(static_cast<unsigned char>(ch)))
      throw FormatError(std::string("malformed PPM ") + what + " '" + tok + "' in '" + path + "'");
  long v = std::strtol(tok.c_str(), nullptr, 10);
  if (v < 1 || v > 1 << 20)
    throw FormatError(std::string("PPM ") + what + " out of range in '" + path + "'");
  return static_cast<int>(v);
}

}  // namespace

TensorF read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path + "'");

  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6')
    throw FormatError("unsupported PPM magic (only binary P6 is handled) in '" + path + "'");

  const int width = header_int(in, path, "width");
  const int height = header_int(in, path, "height");
  const int maxval = header_int(in, path, "maxval");
  if (maxval > 65535) throw FormatError("PPM maxval " + std::to_string(maxval) + " exceeds 65535");
  // exactly one whitespace byte separates the header from the payload
  const int sep = in.get();
  if (sep == EOF || !std::isspace(sep)) throw FormatError("missing payload separator in '" + path + "'");

  const bool wide = maxval > 255;
  const size_t bytes = static_cast<size_t>(width) * height * 3 * (wide ? 2 : 1);
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<size_t>(in.gcount()) != bytes)
    throw FormatError("truncated PPM payload in '" + path + "'");

  TensorF img(Shape{height, width, 3});
  const float inv = 1.0f / static_cast<float>(maxval);
  size_t p = 0;
  for (long long i = 0; i < img.size(); ++i) {
    int v;
    if (wide) {
      v = (static_cast<int>(raw[p]) << 8) | raw[p + 1];  // big-endian
      p += 2;
    } else {
      v = raw[p++];
    }
    img[i] = static_cast<float>(v) * inv;
  }
  return img;
}

void write_ppm(const std::string& path, const TensorF& image, int maxval) {
  detail::require(image.rank() == 3 && image.shape()[2] == 3,
                  "write_ppm: image must be [H,W,3], got " + image.shape().str());
  if (maxval != 255 && maxval != 65535)
    throw FormatError("write_ppm: maxval must be 255 or 65535");

  const int h = image.shape()[0], w = image.shape()[1];
  std::string payload;
  payload.reserve(static_cast<size_t>(image.size()) * (maxval > 255 ? 2 : 1));
  for (long long i = 0; i < image.size(); ++i) {
    float x = image[i];
    if (x < 0.0f) x = 0.0f;
    if (x > 1.0f) x = 1.0f;
    const int v = static_cast<int>(std::lround(static_cast<double>(x) * maxval));
    if (maxval > 255) {
      payload.push_back(static_cast<char>((v >> 8) & 0xff));
      payload.push_back(static_cast<char>(v & 0xff));
    } else {
      payload.push_back(static_cast<char>(v & 0xff));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image '" + path + "'");
  out << "P6\n" << w << " " << h << "\n" << maxval << "\n";
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

TensorF gamma_correct(const TensorF& image, double gamma) {
  if (gamma == 1.0) return image;
  TensorF out(image.shape());
  for (long long i = 0; i < image.size(); ++i)
    out[i] = static_cast<float>(std::pow(static_cast<double>(image[i]), gamma));
  return out;
}

TensorF resize_bilinear(const TensorF& image, int out_h, int out_w) {
  detail::require(image.rank() == 3, "resize: image must be rank 3");
  const int h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
  if (h == out_h && w == out_w) return image;
  detail::require(out_h >= 1 && out_w >= 1, "resize: bad target size");

  TensorF out(Shape{out_h, out_w, c});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int i = 0; i < out_h; ++i) {
    // pixel-center alignment
    double fy = (i + 0.5) * sy - 0.5;
    if (fy < 0) fy = 0;
    int y0 = static_cast<int>(fy);
    if (y0 > h - 2) y0 = h - 2;
    if (y0 < 0) y0 = 0;
    const double wy = h == 1 ? 0.0 : std::min(1.0, fy - y0);
    for (int j = 0; j < out_w; ++j) {
      double fx = (j + 0.5) * sx - 0.5;
      if (fx < 0) fx = 0;
      int x0 = static_cast<int>(fx);
      if (x0 > w - 2) x0 = w - 2;
      if (x0 < 0) x0 = 0;
      const double wx = w == 1 ? 0.0 : std::min(1.0, fx - x0);
      const int y1 = h == 1 ? y0 : y0 + 1;
      const int x1 = w == 1 ? x0 : x0 + 1;
      for (int k = 0; k < c; ++k) {
        const double top = (1.0 - wx) * image.at(y0, x0, k) + wx * image.at(y0, x1, k);
        const double bot = (1.0 - wx) * image.at(y1, x0, k) + wx * image.at(y1, x1, k);
        out.at(i, j, k) = static_cast<float>((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

}  // namespace dbcc
