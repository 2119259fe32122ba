#pragma once

// Boxes, finite unions of boxes, tensor grids and a deterministic
// block-parallel loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "regcalc/error.hpp"
#include "regcalc/expr.hpp"

namespace regcalc {

/// Open axis-aligned box (lo, hi) with finite bounds.
struct Box {
  std::vector<double> lo, hi;

  Box() = default;
  Box(std::vector<double> l, std::vector<double> h) : lo(std::move(l)), hi(std::move(h)) {
    if (lo.size() != hi.size()) throw ConfigError("box bounds have different dimensions");
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (!std::isfinite(lo[i]) || !std::isfinite(hi[i])) throw ConfigError("box bounds must be finite");
      if (!(lo[i] < hi[i])) throw ConfigError("degenerate box: lo >= hi in coordinate " + std::to_string(i + 1));
    }
  }

  std::size_t dim() const { return lo.size(); }
  double width(std::size_t i) const { return hi[i] - lo[i]; }

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < dim(); ++i) v *= width(i);
    return v;
  }

  bool contains(std::span<const double> p) const {
    for (std::size_t i = 0; i < dim(); ++i)
      if (!(p[i] > lo[i] && p[i] < hi[i])) return false;
    return true;
  }

  bool contains_closed(std::span<const double> p) const {
    for (std::size_t i = 0; i < dim(); ++i)
      if (!(p[i] >= lo[i] && p[i] <= hi[i])) return false;
    return true;
  }

  /// Each side pulled in by `fraction` of the width.
  Box shrunk(double fraction) const {
    Box b = *this;
    for (std::size_t i = 0; i < dim(); ++i) {
      const double m = fraction * width(i);
      b.lo[i] += m;
      b.hi[i] -= m;
    }
    return b;
  }

  /// Each side pulled in by the absolute distance `margin`; nullopt when empty.
  std::optional<Box> shrunk_by(double margin) const {
    Box b = *this;
    for (std::size_t i = 0; i < dim(); ++i) {
      b.lo[i] += margin;
      b.hi[i] -= margin;
      if (!(b.lo[i] < b.hi[i])) return std::nullopt;
    }
    return b;
  }

  std::optional<Box> intersect(const Box& o) const {
    Box b = *this;
    for (std::size_t i = 0; i < dim(); ++i) {
      b.lo[i] = std::max(lo[i], o.lo[i]);
      b.hi[i] = std::min(hi[i], o.hi[i]);
      if (!(b.lo[i] < b.hi[i])) return std::nullopt;
    }
    return b;
  }

  bool inside(const Box& o) const {
    for (std::size_t i = 0; i < dim(); ++i)
      if (lo[i] < o.lo[i] || hi[i] > o.hi[i]) return false;
    return true;
  }

  std::vector<double> midpoint() const {
    std::vector<double> m(dim());
    for (std::size_t i = 0; i < dim(); ++i) m[i] = 0.5 * (lo[i] + hi[i]);
    return m;
  }

  std::string describe() const {
    std::string s;
    for (std::size_t i = 0; i < dim(); ++i) {
      if (i) s += " x ";
      s += "(" + detail::format_number(lo[i]) + ", " + detail::format_number(hi[i]) + ")";
    }
    return s;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Finite union of bounded open boxes of one dimension.
class Domain {
 public:
  Domain() = default;
  explicit Domain(std::vector<Box> boxes) : boxes_(std::move(boxes)) {
    if (boxes_.empty()) throw ConfigError("a domain needs at least one box");
    for (const auto& b : boxes_)
      if (b.dim() != boxes_.front().dim()) throw ConfigError("domain boxes have different dimensions");
  }
  Domain(Box b) : Domain(std::vector<Box>{std::move(b)}) {}  // NOLINT: implicit by design

  std::size_t dim() const { return boxes_.empty() ? 0 : boxes_.front().dim(); }
  const std::vector<Box>& boxes() const { return boxes_; }

  bool contains(std::span<const double> p) const {
    return std::any_of(boxes_.begin(), boxes_.end(), [&](const Box& b) { return b.contains(p); });
  }

  Box bounding_box() const {
    Box b = boxes_.front();
    for (const auto& o : boxes_)
      for (std::size_t i = 0; i < dim(); ++i) {
        b.lo[i] = std::min(b.lo[i], o.lo[i]);
        b.hi[i] = std::max(b.hi[i], o.hi[i]);
      }
    return b;
  }

  /// Compact exhaustion: every box pulled in by 2^-l / 4 of its width per side.
  std::vector<Box> exhaustion(int level) const {
    std::vector<Box> out;
    for (const auto& b : boxes_) out.push_back(b.shrunk(std::ldexp(0.25, -level)));
    return out;
  }

  std::string describe() const {
    std::string s;
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
      if (i) s += " u ";
      s += boxes_[i].describe();
    }
    return s;
  }

 private:
  std::vector<Box> boxes_;
};

/// Tensor grid over a box: `intervals` cells per axis; closed grids use the
/// cell corners (intervals + 1 points per axis), open grids the cell midpoints.
class Grid {
 public:
  Grid(Box box, std::size_t intervals, bool closed) : box_(std::move(box)), m_(intervals), closed_(closed) {
    if (m_ == 0) throw ConfigError("grid needs at least one interval per axis");
    per_axis_ = closed_ ? m_ + 1 : m_;
    size_ = 1;
    for (std::size_t i = 0; i < box_.dim(); ++i) size_ *= per_axis_;
  }

  std::size_t size() const { return size_; }
  std::size_t per_axis() const { return per_axis_; }
  const Box& box() const { return box_; }

  /// Volume of one cell.
  double cell_volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < box_.dim(); ++i) v *= box_.width(i) / static_cast<double>(m_);
    return v;
  }

  double step(std::size_t axis) const { return box_.width(axis) / static_cast<double>(m_); }

  void point(std::size_t index, std::span<double> out) const {
    for (std::size_t i = 0; i < box_.dim(); ++i) {
      const std::size_t k = index % per_axis_;
      index /= per_axis_;
      const double t = closed_ ? static_cast<double>(k) : static_cast<double>(k) + 0.5;
      out[i] = k == m_ && closed_ ? box_.hi[i] : box_.lo[i] + t * step(i);
    }
  }

  std::vector<double> point(std::size_t index) const {
    std::vector<double> p(box_.dim());
    point(index, p);
    return p;
  }

 private:
  Box box_;
  std::size_t m_;
  bool closed_;
  std::size_t per_axis_ = 0;
  std::size_t size_ = 0;
};

/// Cell midpoints of a tensor grid on the bounding box that fall inside U,
/// with about `target` grid points in total.
inline std::vector<std::vector<double>> domain_samples(const Domain& U, std::size_t target) {
  const auto n = static_cast<double>(U.dim());
  const auto per_axis = static_cast<std::size_t>(
      std::ceil(std::pow(static_cast<double>(std::max<std::size_t>(target, 1)), 1.0 / n) - 1e-9));
  Grid grid(U.bounding_box(), per_axis, false);
  std::vector<std::vector<double>> out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto p = grid.point(g);
    if (U.contains(p)) out.push_back(std::move(p));
  }
  return out;
}

inline constexpr std::size_t kBlockSize = 2048;

/// Runs `fn(begin, end)` over fixed-size blocks of [0, n) on up to `jobs`
/// threads and returns the per-block results in block order. Block
/// boundaries do not depend on `jobs`, so reductions are reproducible.
template <class F>
auto parallel_blocks(std::size_t n, int jobs, F&& fn) -> std::vector<decltype(fn(std::size_t{}, std::size_t{}))> {
  using R = decltype(fn(std::size_t{}, std::size_t{}));
  const std::size_t blocks = (n + kBlockSize - 1) / kBlockSize;
  std::vector<R> out(blocks);
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) out[b] = fn(b * kBlockSize, std::min(n, (b + 1) * kBlockSize));
    return out;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&, w] {
      for (std::size_t b = w; b < blocks; b += workers) {
        try {
          out[b] = fn(b * kBlockSize, std::min(n, (b + 1) * kBlockSize));
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

/// Runs `fn(i)` for every i in [0, n) on up to `jobs` threads.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace regcalc
