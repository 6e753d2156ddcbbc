#pragma once

// Index spaces for dense tensors over categorical variables.
//
// Levels and variables are 0-based throughout the library. Level 0 is the
// corner (baseline) level of the log-linear parametrization. File formats and
// the CLI use 1-based indices and convert at the boundary.

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tensorank/error.hpp"

namespace tensorank {

using Level = int;
using Var = int;

inline constexpr std::size_t kDefaultCellCap = std::size_t{1} << 24;

/// Row-major multi-index space d_1 x ... x d_p (last variable fastest).
/// Dimensions of size 1 are allowed; this is also used for core tensors.
class Shape {
 public:
  Shape() = default;

  explicit Shape(std::vector<int> dims, std::size_t cell_cap = kDefaultCellCap)
      : dims_(std::move(dims)) {
    require(!dims_.empty(), ErrorKind::input, "shape must have at least one mode");
    strides_.assign(dims_.size(), 1);
    std::size_t total = 1;
    for (std::size_t j = dims_.size(); j-- > 0;) {
      require(dims_[j] >= 1, ErrorKind::input, "mode sizes must be positive");
      strides_[j] = total;
      if (total > cell_cap / static_cast<std::size_t>(dims_[j])) {
        fail(ErrorKind::cap_exceeded,
             "cell count exceeds cap of " + std::to_string(cell_cap));
      }
      total *= static_cast<std::size_t>(dims_[j]);
    }
    cells_ = total;
  }

  int p() const { return static_cast<int>(dims_.size()); }
  int levels(Var j) const { return dims_[static_cast<std::size_t>(j)]; }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t cells() const { return cells_; }
  std::size_t stride(Var j) const { return strides_[static_cast<std::size_t>(j)]; }

  std::size_t flat(std::span<const Level> cell) const {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < dims_.size(); ++j) idx += strides_[j] * static_cast<std::size_t>(cell[j]);
    return idx;
  }

  std::vector<Level> unflatten(std::size_t idx) const {
    std::vector<Level> cell(dims_.size());
    for (std::size_t j = 0; j < dims_.size(); ++j) {
      cell[j] = static_cast<Level>(idx / strides_[j]);
      idx %= strides_[j];
    }
    return cell;
  }

  bool contains(std::span<const Level> cell) const {
    if (cell.size() != dims_.size()) return false;
    for (std::size_t j = 0; j < dims_.size(); ++j)
      if (cell[j] < 0 || cell[j] >= dims_[j]) return false;
    return true;
  }

  /// Shape restricted to the listed modes, in the listed order.
  Shape restrict(std::span<const Var> vars) const {
    std::vector<int> d;
    d.reserve(vars.size());
    for (Var v : vars) d.push_back(levels(v));
    return Shape(std::move(d));
  }

  friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> strides_;
  std::size_t cells_ = 0;
};

/// The variable set V with its level counts d_j >= 2.
class VariableScheme : public Shape {
 public:
  VariableScheme() = default;

  explicit VariableScheme(std::vector<int> levels, std::size_t cell_cap = kDefaultCellCap)
      : Shape(validated(std::move(levels)), cell_cap) {}

  VariableScheme(int p, int d) : VariableScheme(std::vector<int>(static_cast<std::size_t>(p), d)) {}

  /// Accepts an already-built shape, re-checking the d_j >= 2 requirement.
  static VariableScheme from_shape(const Shape& s) { return VariableScheme(s.dims()); }

 private:
  static std::vector<int> validated(std::vector<int> levels) {
    require(!levels.empty(), ErrorKind::input, "scheme needs at least one variable");
    for (int d : levels)
      require(d >= 2, ErrorKind::input,
              "every variable needs at least 2 levels (got " + std::to_string(d) + ")");
    return levels;
  }
};

/// Odometer over all cells of a shape, in flat-index order.
class CellCursor {
 public:
  explicit CellCursor(const Shape& shape)
      : dims_(shape.dims()), cell_(dims_.size(), 0), total_(shape.cells()) {}

  bool done() const { return flat_ >= total_; }
  std::size_t flat() const { return flat_; }
  const std::vector<Level>& cell() const { return cell_; }
  Level operator[](Var j) const { return cell_[static_cast<std::size_t>(j)]; }

  void next() {
    ++flat_;
    for (std::size_t j = dims_.size(); j-- > 0;) {
      if (++cell_[j] < dims_[j]) return;
      cell_[j] = 0;
    }
  }

 private:
  std::vector<int> dims_;
  std::vector<Level> cell_;
  std::size_t total_;
  std::size_t flat_ = 0;
};

/// Visits every cell of a product event B_1 x ... x B_p, given as explicit
/// per-variable level lists. Calls fn(cell, flat_index).
template <class Fn>
void for_each_cell_in(const Shape& shape, const std::vector<std::vector<Level>>& sets, Fn&& fn) {
  const std::size_t p = sets.size();
  for (const auto& s : sets)
    if (s.empty()) return;
  std::vector<std::size_t> pos(p, 0);
  std::vector<Level> cell(p);
  for (std::size_t j = 0; j < p; ++j) cell[j] = sets[j][0];
  while (true) {
    fn(std::span<const Level>(cell), shape.flat(cell));
    std::size_t j = p;
    while (j-- > 0) {
      if (++pos[j] < sets[j].size()) {
        cell[j] = sets[j][pos[j]];
        break;
      }
      pos[j] = 0;
      cell[j] = sets[j][0];
    }
    if (j == static_cast<std::size_t>(-1)) return;
  }
}

inline std::vector<Level> all_levels(int d) {
  std::vector<Level> v(static_cast<std::size_t>(d));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

/// Comma-joined list with an offset applied to each entry (1 for display).
template <class Range>
std::string join(const Range& r, int offset = 0, const char* sep = ",") {
  std::ostringstream os;
  bool first = true;
  for (const auto& x : r) {
    if (!first) os << sep;
    os << (x + offset);
    first = false;
  }
  return os.str();
}

}  // namespace tensorank
