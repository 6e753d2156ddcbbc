#pragma once

// Dense nonnegative tensors and probability tensors.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "tensorank/error.hpp"
#include "tensorank/scheme.hpp"

namespace tensorank {

inline constexpr double kSimplexTol = 1e-12;

/// Compensated sum; dense tensors reach 2^24 cells.
inline double stable_sum(std::span<const double> xs) {
  long double acc = 0.0L;
  for (double x : xs) acc += x;
  return static_cast<double>(acc);
}

class NonnegTensor {
 public:
  NonnegTensor() = default;

  explicit NonnegTensor(Shape shape) : shape_(std::move(shape)), data_(shape_.cells(), 0.0) {}

  NonnegTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == shape_.cells(), ErrorKind::input, "tensor data does not match its shape");
    for (double x : data_)
      require(x >= 0.0 && std::isfinite(x), ErrorKind::input, "tensor entries must be finite and nonnegative");
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::span<const double> data() const { return data_; }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double at(std::span<const Level> cell) const { return data_[shape_.flat(cell)]; }

  /// Mutable access for builders; callers keep entries nonnegative.
  std::vector<double>& raw() { return data_; }

  double sum() const { return stable_sum(data_); }

  double max_abs_diff(const NonnegTensor& other) const {
    require(shape_ == other.shape_, ErrorKind::input, "shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) worst = std::max(worst, std::abs(data_[i] - other.data_[i]));
    return worst;
  }

 protected:
  Shape shape_;
  std::vector<double> data_;
};

/// Nonnegative tensor whose entries sum to one (within kSimplexTol).
class ProbabilityTensor : public NonnegTensor {
 public:
  ProbabilityTensor() = default;

  ProbabilityTensor(Shape shape, std::vector<double> data) : NonnegTensor(std::move(shape), std::move(data)) {
    double s = sum();
    require(std::abs(s - 1.0) <= kSimplexTol, ErrorKind::numeric,
            "probability tensor sums to " + std::to_string(s));
  }

  /// Rescales a nonnegative tensor to unit mass.
  static ProbabilityTensor normalized(const NonnegTensor& t) {
    double s = t.sum();
    require(s > 0.0 && std::isfinite(s), ErrorKind::numeric, "cannot normalize a tensor with zero mass");
    std::vector<double> d(t.data().begin(), t.data().end());
    for (double& x : d) x /= s;
    double s2 = stable_sum(d);
    for (double& x : d) x /= s2;
    return ProbabilityTensor(t.shape(), std::move(d));
  }

  static ProbabilityTensor uniform(const Shape& shape) {
    return ProbabilityTensor(shape, std::vector<double>(shape.cells(), 1.0 / static_cast<double>(shape.cells())));
  }

  bool strictly_positive() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return x > 0.0; });
  }
};

inline NonnegTensor hadamard(const NonnegTensor& a, const NonnegTensor& b) {
  require(a.shape() == b.shape(), ErrorKind::input, "hadamard: shape mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return NonnegTensor(a.shape(), std::move(out));
}

inline NonnegTensor add(const NonnegTensor& a, const NonnegTensor& b) {
  require(a.shape() == b.shape(), ErrorKind::input, "add: shape mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return NonnegTensor(a.shape(), std::move(out));
}

/// Marginal table over the variables in `keep` (sorted ascending, distinct).
inline ProbabilityTensor marginal(const ProbabilityTensor& pi, std::vector<Var> keep) {
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  require(!keep.empty(), ErrorKind::input, "marginal needs at least one variable");
  for (Var v : keep) require(v >= 0 && v < pi.shape().p(), ErrorKind::input, "marginal variable out of range");
  Shape out_shape = pi.shape().restrict(keep);
  std::vector<double> out(out_shape.cells(), 0.0);
  std::vector<Level> sub(keep.size());
  for (CellCursor c(pi.shape()); !c.done(); c.next()) {
    for (std::size_t t = 0; t < keep.size(); ++t) sub[t] = c[keep[t]];
    out[out_shape.flat(sub)] += pi[c.flat()];
  }
  return ProbabilityTensor::normalized(NonnegTensor(out_shape, std::move(out)));
}

/// A product event B_1 x ... x B_p, one sorted level list per variable.
using ProductEvent = std::vector<std::vector<Level>>;

inline double event_probability(const NonnegTensor& t, const ProductEvent& block) {
  long double acc = 0.0L;
  for_each_cell_in(t.shape(), block, [&](std::span<const Level>, std::size_t flat) { acc += t[flat]; });
  return static_cast<double>(acc);
}

/// pi restricted to `block` and renormalized.
inline ProbabilityTensor condition(const ProbabilityTensor& pi, const ProductEvent& block) {
  require(static_cast<int>(block.size()) == pi.shape().p(), ErrorKind::input, "event arity mismatch");
  double mass = event_probability(pi, block);
  require(mass > 0.0, ErrorKind::numeric, "conditioning on a zero-probability event");
  std::vector<double> out(pi.size(), 0.0);
  for_each_cell_in(pi.shape(), block, [&](std::span<const Level>, std::size_t flat) { out[flat] = pi[flat] / mass; });
  return ProbabilityTensor::normalized(NonnegTensor(pi.shape(), std::move(out)));
}

}  // namespace tensorank
