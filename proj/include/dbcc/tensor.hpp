#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbcc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct DegenerateEstimate : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};

enum class Precision { f32, f64 };

/// Dense shape, rank 1..4, row-major with channels last: [H,W,C] or [N,H,W,C].
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> dims) : dims_(dims) { validate(); }
  explicit Shape(std::vector<int> dims) : dims_(std::move(dims)) { validate(); }

  int rank() const { return static_cast<int>(dims_.size()); }
  int operator[](int i) const { return dims_[static_cast<size_t>(i)]; }
  const std::vector<int>& dims() const { return dims_; }

  long long elems() const {
    long long n = 1;
    for (int d : dims_) n *= d;
    return n;
  }

  bool operator==(const Shape& o) const { return dims_ == o.dims_; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "(";
    for (size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + ")";
  }

 private:
  void validate() const {
    if (dims_.empty() || dims_.size() > 4)
      throw ShapeError("shape rank must be 1..4, got " + std::to_string(dims_.size()));
    long long n = 1;
    for (int d : dims_) {
      if (d < 1) throw ShapeError("shape dims must be >= 1, got " + str());
      n *= d;
      if (n >= (1LL << 31)) throw ShapeError("element count overflow for shape " + str());
    }
  }

  std::vector<int> dims_;
};

/// Deterministic counter-style generator (splitmix64). The raw 64-bit stream
/// and every derived draw are identical across platforms for a given seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  /// Independent stream derived from a root seed; stream 0 differs from Rng(root).
  static Rng stream(uint64_t root, uint64_t index) {
    Rng r(root ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    r.next_u64();
    return r;
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n).
  int next_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

  bool next_bool() { return (next_u64() >> 63) != 0; }

  /// Box-Muller; consumes two draws per pair, caching the second.
  double normal(double mean, double sigma) {
    if (have_cached_) {
      have_cached_ = false;
      return mean + sigma * cached_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return mean + sigma * r * std::cos(a);
  }

 private:
  uint64_t state_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

/// Dense row-major tensor; immutable by convention once an op has produced it.
template <typename T>
class TensorT {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);

 public:
  TensorT() = default;
  explicit TensorT(const Shape& shape, T fill = T(0))
      : shape_(shape), data_(static_cast<size_t>(shape.elems()), fill) {}

  static TensorT zeros(const Shape& s) { return TensorT(s, T(0)); }
  static TensorT ones(const Shape& s) { return TensorT(s, T(1)); }
  static TensorT full(const Shape& s, T v) { return TensorT(s, v); }

  static constexpr Precision precision() {
    return std::is_same_v<T, float> ? Precision::f32 : Precision::f64;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return shape_.rank(); }
  long long size() const { return static_cast<long long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }

  T& operator[](long long i) { return data_[static_cast<size_t>(i)]; }
  T operator[](long long i) const { return data_[static_cast<size_t>(i)]; }

  // Flat index of (i,j,k) in [H,W,C] is (i*W + j)*C + k.
  long long idx3(int i, int j, int k) const {
    return (static_cast<long long>(i) * shape_[1] + j) * shape_[2] + k;
  }
  long long idx4(int a, int b, int c, int d) const {
    return ((static_cast<long long>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
  }

  T& at(int i, int j, int k) { return data_[static_cast<size_t>(idx3(i, j, k))]; }
  T at(int i, int j, int k) const { return data_[static_cast<size_t>(idx3(i, j, k))]; }
  T& at4(int a, int b, int c, int d) { return data_[static_cast<size_t>(idx4(a, b, c, d))]; }
  T at4(int a, int b, int c, int d) const { return data_[static_cast<size_t>(idx4(a, b, c, d))]; }

  /// Fail-fast NaN/Inf policy: the context names the producing operation.
  void check_finite(const char* context) const {
    for (size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(static_cast<double>(data_[i])))
        throw NumericError(std::string("non-finite value produced by ") + context +
                           " at flat index " + std::to_string(i) + " of shape " + shape_.str());
    }
  }

  bool operator==(const TensorT& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}
}  // namespace detail

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  TensorT<T> out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require(a.shape() == b.shape(), "sub: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  TensorT<T> out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require(a.shape() == b.shape(), "mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  TensorT<T> out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
TensorT<T> maximum(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require(a.shape() == b.shape(), "max: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  TensorT<T> out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& a) {
  TensorT<T> out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  TensorT<T> out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

/// Channels of a precede channels of b; spatial dims must match.
template <typename T>
TensorT<T> concat_depth(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require(a.rank() == 3 && b.rank() == 3, "concat_depth: rank-3 tensors required");
  detail::require(a.shape()[0] == b.shape()[0] && a.shape()[1] == b.shape()[1],
                  "concat_depth: spatial mismatch " + a.shape().str() + " vs " + b.shape().str());
  const int h = a.shape()[0], w = a.shape()[1], ca = a.shape()[2], cb = b.shape()[2];
  TensorT<T> out(Shape{h, w, ca + cb});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      for (int k = 0; k < ca; ++k) out.at(i, j, k) = a.at(i, j, k);
      for (int k = 0; k < cb; ++k) out.at(i, j, ca + k) = b.at(i, j, k);
    }
  return out;
}

/// Channels [c0, c1) of a rank-3 tensor.
template <typename T>
TensorT<T> slice_depth(const TensorT<T>& a, int c0, int c1) {
  detail::require(a.rank() == 3, "slice_depth: rank-3 tensor required");
  detail::require(0 <= c0 && c0 < c1 && c1 <= a.shape()[2], "slice_depth: bad channel range");
  const int h = a.shape()[0], w = a.shape()[1];
  TensorT<T> out(Shape{h, w, c1 - c0});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = c0; k < c1; ++k) out.at(i, j, k - c0) = a.at(i, j, k);
  return out;
}

template <typename T>
double sum(const TensorT<T>& a) {
  double s = 0.0;
  for (long long i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]);
  return s;
}

/// Glorot-style uniform init on (-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
TensorT<T> random_init(const Shape& shape, int fan_in, Rng& rng) {
  detail::require(fan_in >= 1, "random_init: fan_in must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  TensorT<T> out(shape);
  for (long long i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(rng.uniform(-bound, bound));
  return out;
}

/// Unit-normalized RGB triple (estimated or ground-truth illuminant).
struct Illuminant {
  double r = 0.0, g = 0.0, b = 0.0;
};

inline Illuminant normalize_illuminant(double r, double g, double b) {
  const double n = std::sqrt(r * r + g * g + b * b);
  if (!(n > 1e-12)) throw DegenerateEstimate("illuminant vector has near-zero norm");
  return Illuminant{r / n, g / n, b / n};
}

template <typename T>
Illuminant illuminant_from(const TensorT<T>& t) {
  detail::require(t.size() == 3, "illuminant_from: expected 3 elements, got shape " + t.shape().str());
  return Illuminant{static_cast<double>(t[0]), static_cast<double>(t[1]),
                    static_cast<double>(t[2])};
}

}  // namespace dbcc
