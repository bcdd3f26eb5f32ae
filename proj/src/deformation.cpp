#include "ctrlattack/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace ctrlattack {

SpatialProjection::SpatialProjection(std::size_t code_dim, std::size_t grid_side, std::uint64_t seed)
    : grid_side_(grid_side), seed_(seed) {
  if (code_dim == 0 || grid_side == 0) {
    throw InvalidArgument("projection needs code_dim >= 1 and grid_side >= 1 (code_dim=" +
                          std::to_string(code_dim) + ", grid_side=" + std::to_string(grid_side) + ")");
  }
  const std::size_t cols = grid_side * grid_side * 2;
  matrix_ = Matrix(code_dim, cols);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < code_dim; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      matrix_(r, c) = normal(rng);
      sq += matrix_(r, c) * matrix_(r, c);
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t c = 0; c < cols; ++c) matrix_(r, c) *= inv;
  }
}

SpatialProjection build_projection(std::size_t code_dim, std::size_t grid_side, std::uint64_t seed) {
  return SpatialProjection(code_dim, grid_side, seed);
}

Vec2 VectorGrid::mean() const {
  Vec2 acc;
  for (const Vec2& v : values_) acc += v;
  const double n = static_cast<double>(values_.size());
  return {acc.x / n, acc.y / n};
}

bool VectorGrid::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); });
}

CoarseVelocityField project_code(std::span<const double> code, const SpatialProjection& projection) {
  const Matrix& p = projection.matrix();
  if (code.size() != p.rows()) {
    throw ShapeError("code has length " + std::to_string(code.size()) + ", projection expects " +
                     std::to_string(p.rows()));
  }
  const std::size_t s = projection.grid_side();
  CoarseVelocityField field(s, s);
  auto cells = field.values();
  for (std::size_t cell = 0; cell < cells.size(); ++cell) {
    double vx = 0.0;
    double vy = 0.0;
    for (std::size_t i = 0; i < code.size(); ++i) {
      vx += code[i] * p(i, 2 * cell);
      vy += code[i] * p(i, 2 * cell + 1);
    }
    cells[cell] = {vx, vy};
  }
  return field;
}

std::vector<double> project_code_adjoint(const CoarseVelocityField& field_grad,
                                         const SpatialProjection& projection) {
  const Matrix& p = projection.matrix();
  const std::size_t s = projection.grid_side();
  if (field_grad.height() != s || field_grad.width() != s) throw ShapeError("field gradient shape mismatch");
  std::vector<double> out(p.rows(), 0.0);
  auto cells = field_grad.values();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t cell = 0; cell < cells.size(); ++cell) {
      acc += p(i, 2 * cell) * cells[cell].x + p(i, 2 * cell + 1) * cells[cell].y;
    }
    out[i] = acc;
  }
  return out;
}

namespace {

// Source coordinate along one axis for output index i under corner alignment.
double aligned_source(std::size_t i, std::size_t out_n, std::size_t src_n) {
  if (src_n == 1) return 0.0;
  if (out_n == 1) return 0.5 * static_cast<double>(src_n - 1);
  return static_cast<double>(i) * static_cast<double>(src_n - 1) / static_cast<double>(out_n - 1);
}

struct Stencil {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

Stencil stencil(double coord, std::size_t n) {
  const std::size_t lo = std::min(static_cast<std::size_t>(std::floor(coord)), n - 1);
  const std::size_t hi = std::min(lo + 1, n - 1);
  return {lo, hi, coord - static_cast<double>(lo)};
}

}  // namespace

DisplacementField upsample_to_roi(const VectorGrid& field, std::size_t roi_height, std::size_t roi_width) {
  if (roi_height == 0 || roi_width == 0) throw InvalidArgument("ROI dimensions must be >= 1");
  if (field.size() == 0) throw InvalidArgument("cannot upsample an empty field");
  DisplacementField out(roi_height, roi_width);
  for (std::size_t r = 0; r < roi_height; ++r) {
    const Stencil sy = stencil(aligned_source(r, roi_height, field.height()), field.height());
    for (std::size_t c = 0; c < roi_width; ++c) {
      const Stencil sx = stencil(aligned_source(c, roi_width, field.width()), field.width());
      const Vec2 top = (1.0 - sx.frac) * field(sy.lo, sx.lo) + sx.frac * field(sy.lo, sx.hi);
      const Vec2 bottom = (1.0 - sx.frac) * field(sy.hi, sx.lo) + sx.frac * field(sy.hi, sx.hi);
      out(r, c) = (1.0 - sy.frac) * top + sy.frac * bottom;
    }
  }
  return out;
}

CoarseVelocityField upsample_to_roi_adjoint(const VectorGrid& roi_grad, std::size_t coarse_height,
                                            std::size_t coarse_width) {
  CoarseVelocityField out(coarse_height, coarse_width);
  for (std::size_t r = 0; r < roi_grad.height(); ++r) {
    const Stencil sy = stencil(aligned_source(r, roi_grad.height(), coarse_height), coarse_height);
    for (std::size_t c = 0; c < roi_grad.width(); ++c) {
      const Stencil sx = stencil(aligned_source(c, roi_grad.width(), coarse_width), coarse_width);
      const Vec2 g = roi_grad(r, c);
      out(sy.lo, sx.lo) += ((1.0 - sy.frac) * (1.0 - sx.frac)) * g;
      out(sy.lo, sx.hi) += ((1.0 - sy.frac) * sx.frac) * g;
      out(sy.hi, sx.lo) += (sy.frac * (1.0 - sx.frac)) * g;
      out(sy.hi, sx.hi) += (sy.frac * sx.frac) * g;
    }
  }
  return out;
}

SamplingGrid make_roi_grid(const BoundingBox& box, std::size_t grid_height, std::size_t grid_width) {
  if (!box.well_formed()) throw InvalidArgument("degenerate ROI box");
  if (grid_height == 0 || grid_width == 0) throw InvalidArgument("grid dimensions must be >= 1");
  auto linspace = [](double lo, double hi, std::size_t n, std::size_t i) {
    if (n == 1) return 0.5 * (lo + hi);
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  SamplingGrid grid(grid_height, grid_width);
  for (std::size_t r = 0; r < grid_height; ++r) {
    const double y = linspace(box.y0, box.y1, grid_height, r);
    for (std::size_t c = 0; c < grid_width; ++c) grid(r, c) = {linspace(box.x0, box.x1, grid_width, c), y};
  }
  return grid;
}

SamplingGrid modulate_grid(const SamplingGrid& grid, const VectorGrid& displacement) {
  if (grid.height() != displacement.height() || grid.width() != displacement.width()) {
    throw ShapeError("grid is " + std::to_string(grid.height()) + "x" + std::to_string(grid.width()) +
                     ", displacement is " + std::to_string(displacement.height()) + "x" +
                     std::to_string(displacement.width()));
  }
  SamplingGrid out = grid;
  auto dst = out.values();
  auto src = displacement.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

namespace {

// Clamped bilinear cell for coordinate `coord` on an axis of n pixels.
struct Cell {
  std::size_t lo;
  std::size_t hi;
  double frac;
  bool clamped;  // coordinate outside [0, n-1) in the right-sided sense
};

Cell locate(double coord, std::size_t n) {
  const double last = static_cast<double>(n - 1);
  if (n == 1 || !(coord >= 0.0)) return {0, 0, 0.0, true};
  if (coord >= last) return {n - 1, n - 1, 0.0, true};
  const std::size_t lo = static_cast<std::size_t>(std::floor(coord));
  return {lo, lo + 1, coord - static_cast<double>(lo), false};
}

}  // namespace

FeatureMap grid_sample(const FeatureMap& features, const SamplingGrid& grid) {
  if (features.empty()) throw InvalidArgument("cannot sample an empty feature map");
  const std::size_t channels = features.channels();
  FeatureMap out(grid.height(), grid.width(), channels);
  for (std::size_t r = 0; r < grid.height(); ++r) {
    for (std::size_t c = 0; c < grid.width(); ++c) {
      const Vec2 p = grid(r, c);
      const Cell cx = locate(p.x, features.width());
      const Cell cy = locate(p.y, features.height());
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double a = features(cy.lo, cx.lo, ch);
        const double b = features(cy.lo, cx.hi, ch);
        const double d = features(cy.hi, cx.lo, ch);
        const double e = features(cy.hi, cx.hi, ch);
        const double top = cx.frac == 0.0 ? a : (1.0 - cx.frac) * a + cx.frac * b;
        const double bottom = cx.frac == 0.0 ? d : (1.0 - cx.frac) * d + cx.frac * e;
        out(r, c, ch) = cy.frac == 0.0 ? top : (1.0 - cy.frac) * top + cy.frac * bottom;
      }
    }
  }
  return out;
}

SampleJacobian grid_sample_jacobian(const FeatureMap& features, const SamplingGrid& grid) {
  if (features.empty()) throw InvalidArgument("cannot sample an empty feature map");
  const std::size_t channels = features.channels();
  SampleJacobian jac(grid.height(), grid.width(), channels);
  for (std::size_t r = 0; r < grid.height(); ++r) {
    for (std::size_t c = 0; c < grid.width(); ++c) {
      const Vec2 p = grid(r, c);
      const Cell cx = locate(p.x, features.width());
      const Cell cy = locate(p.y, features.height());
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double a = features(cy.lo, cx.lo, ch);
        const double b = features(cy.lo, cx.hi, ch);
        const double d = features(cy.hi, cx.lo, ch);
        const double e = features(cy.hi, cx.hi, ch);
        Vec2 g;
        if (!cx.clamped) g.x = (1.0 - cy.frac) * (b - a) + cy.frac * (e - d);
        if (!cy.clamped) g.y = (1.0 - cx.frac) * (d - a) + cx.frac * (e - b);
        jac(r, c, ch) = g;
      }
    }
  }
  return jac;
}

}  // namespace ctrlattack
