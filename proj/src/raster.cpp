#include "cytobench/raster.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <deque>

#include "cytobench/error.hpp"

namespace cytobench {

PixelBox intersect(const PixelBox& a, const PixelBox& b) {
  return {std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
}

Mask::Mask(int width, int height) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw InvalidArgument("mask dimensions must be non-negative");
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

PixelBox Mask::bounds() const {
  PixelBox b{width_, height_, -1, -1};
  for (int y = 0; y < height_; ++y) {
    const std::uint8_t* r = row(y);
    for (int x = 0; x < width_; ++x) {
      if (r[x]) {
        b.x0 = std::min(b.x0, x);
        b.x1 = std::max(b.x1, x);
        b.y0 = std::min(b.y0, y);
        b.y1 = std::max(b.y1, y);
      }
    }
  }
  if (b.x1 < 0) return {};
  return b;
}

bool Mask::subset_of(const Mask& other) const {
  if (width_ != other.width_ || height_ != other.height_) {
    throw InvalidArgument("mask dimensions differ");
  }
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

int LabelMap::max_label() const {
  int m = 0;
  for (int v : labels) m = std::max(m, v);
  return m;
}

Mask LabelMap::mask_of(int label) const {
  Mask m(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (at(x, y) == label) m.set(x, y);
    }
  }
  return m;
}

Mask rasterize(const Polygon& poly, int width, int height) {
  Mask out(width, height);
  const auto ring = poly.vertices();
  const std::size_t n = ring.size();
  const Box b = poly.bounds();
  const int ylo = std::max(0, static_cast<int>(std::floor(b.y - 0.5)));
  const int yhi = std::min(height - 1, static_cast<int>(std::ceil(b.bottom())));

#pragma omp parallel for schedule(static)
  for (int y = ylo; y <= yhi; ++y) {
    const double py = y + 0.5;
    std::vector<double> xs;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point& a = ring[i];
      const Point& c = ring[j];
      if ((a.y <= py) != (c.y <= py)) xs.push_back(a.x + (py - a.y) * (c.x - a.x) / (c.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    std::uint8_t* r = out.row(y);
    // Center px is inside iff xs[2k] <= px < xs[2k+1].
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      double lo_c = xs[k];
      double hi_c = xs[k + 1];
      long j0 = static_cast<long>(std::ceil(lo_c - 0.5));
      while (j0 + 0.5 < lo_c) ++j0;
      while (j0 - 0.5 >= lo_c) --j0;
      long j1 = static_cast<long>(std::ceil(hi_c - 0.5)) - 1;
      while (j1 + 0.5 >= hi_c) --j1;
      while (j1 + 1.5 < hi_c) ++j1;
      j0 = std::max(j0, 0L);
      j1 = std::min(j1, static_cast<long>(width) - 1);
      for (long x = j0; x <= j1; ++x) r[x] = 1;
    }
  }
  return out;
}

namespace {

// Bit grid over a pixel box, used for per-object work without touching the whole image.
struct LocalGrid {
  int x0 = 0, y0 = 0, w = 0, h = 0;
  std::vector<std::uint8_t> bits;

  LocalGrid(int x0_, int y0_, int w_, int h_)
      : x0(x0_), y0(y0_), w(w_), h(h_), bits(static_cast<std::size_t>(w_) * h_, 0) {}
  bool in(int x, int y) const { return x >= 0 && y >= 0 && x < w && y < h; }
  std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * w + x]; }
};

constexpr std::array<int, 4> kDx{1, 0, -1, 0};
constexpr std::array<int, 4> kDy{0, 1, 0, -1};

// Keeps only the 4-connected piece of `g` containing (sx, sy).
LocalGrid isolate_piece(const LocalGrid& g, int sx, int sy) {
  LocalGrid out(g.x0, g.y0, g.w, g.h);
  std::deque<std::pair<int, int>> queue{{sx, sy}};
  out.at(sx, sy) = 1;
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k], ny = y + kDy[k];
      if (g.in(nx, ny) && g.at(nx, ny) && !out.at(nx, ny)) {
        out.at(nx, ny) = 1;
        queue.emplace_back(nx, ny);
      }
    }
  }
  return out;
}

// Fills holes of a grid whose frame (one pixel margin) is guaranteed to be
// outside the object or to lie on the image border.
void fill_local_holes(LocalGrid& g) {
  LocalGrid outside(g.x0, g.y0, g.w, g.h);
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int x, int y) {
    if (!g.at(x, y) && !outside.at(x, y)) {
      outside.at(x, y) = 1;
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < g.w; ++x) {
    seed(x, 0);
    seed(x, g.h - 1);
  }
  for (int y = 0; y < g.h; ++y) {
    seed(0, y);
    seed(g.w - 1, y);
  }
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k], ny = y + kDy[k];
      if (g.in(nx, ny) && !g.at(nx, ny) && !outside.at(nx, ny)) {
        outside.at(nx, ny) = 1;
        queue.emplace_back(nx, ny);
      }
    }
  }
  for (std::size_t i = 0; i < g.bits.size(); ++i) g.bits[i] = outside.bits[i] ? 0 : 1;
}

// Crack-following trace of the single hole-free 4-connected object in `g`.
// The grid carries a one-pixel empty margin so every boundary edge is interior to it.
Polygon trace_grid(const LocalGrid& g) {
  const int vw = g.w + 1;
  const int vh = g.h + 1;
  std::vector<std::uint8_t> out_dirs(static_cast<std::size_t>(vw) * vh, 0);
  auto vidx = [vw](int x, int y) { return static_cast<std::size_t>(y) * vw + x; };
  auto filled = [&g](int x, int y) { return g.in(x, y) && g.at(x, y); };

  int sx = -1, sy = -1;
  for (int y = 0; y < g.h && sx < 0; ++y) {
    for (int x = 0; x < g.w; ++x) {
      if (g.at(x, y)) {
        sx = x;
        sy = y;
        break;
      }
    }
  }
  if (sx < 0) throw GeometryError("cannot trace an empty mask");

  // Pixel sides traversed clockwise on screen: interior on the right.
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      if (!g.at(x, y)) continue;
      if (!filled(x, y - 1)) out_dirs[vidx(x, y)] |= 1u << 0;
      if (!filled(x + 1, y)) out_dirs[vidx(x + 1, y)] |= 1u << 1;
      if (!filled(x, y + 1)) out_dirs[vidx(x + 1, y + 1)] |= 1u << 2;
      if (!filled(x - 1, y)) out_dirs[vidx(x, y + 1)] |= 1u << 3;
    }
  }

  const std::vector<std::uint8_t> initial = out_dirs;
  constexpr double kCut = 0.25;
  // The top-left corner of the first pixel is always a plain corner (left side in, top side out).
  std::vector<Point> ring{{static_cast<double>(g.x0 + sx), static_cast<double>(g.y0 + sy)}};
  int vx = sx, vy = sy, dir = 0;
  const std::size_t limit = 4 * g.bits.size() + 8;
  for (std::size_t step = 0; step < limit; ++step) {
    const int nx = vx + kDx[dir], ny = vy + kDy[dir];
    out_dirs[vidx(vx, vy)] &= static_cast<std::uint8_t>(~(1u << dir));
    const std::uint8_t avail = out_dirs[vidx(nx, ny)];
    const bool saddle = std::popcount(static_cast<unsigned>(initial[vidx(nx, ny)])) >= 2;
    int next = -1;
    for (int turn : {1, 0, 3}) {
      const int cand = (dir + turn) % 4;
      if (avail & (1u << cand)) {
        next = cand;
        break;
      }
    }
    if (next < 0) break;  // back at the start vertex
    const double ox = g.x0 + nx, oy = g.y0 + ny;
    if (saddle) {
      ring.push_back({ox - kCut * kDx[dir], oy - kCut * kDy[dir]});
      ring.push_back({ox + kCut * kDx[next], oy + kCut * kDy[next]});
    } else if (next != dir) {
      ring.push_back({ox, oy});
    }
    vx = nx;
    vy = ny;
    dir = next;
  }
  return Polygon(std::move(ring));
}

// Grid over `box` grown by one pixel on every side; margin pixels are never set.
LocalGrid grid_for(const PixelBox& box) {
  return LocalGrid(box.x0 - 1, box.y0 - 1, box.x1 - box.x0 + 3, box.y1 - box.y0 + 3);
}

}  // namespace

Mask fill_holes(const Mask& mask) {
  const PixelBox b = mask.bounds();
  Mask out = mask;
  if (b.empty()) return out;
  LocalGrid g = grid_for(b);
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int x = b.x0; x <= b.x1; ++x) g.at(x - g.x0, y - g.y0) = mask.get(x, y) ? 1 : 0;
  }
  fill_local_holes(g);
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int x = b.x0; x <= b.x1; ++x) {
      if (g.at(x - g.x0, y - g.y0)) out.set(x, y);
    }
  }
  return out;
}

LabelMap label_components(const Mask& mask) {
  LabelMap out(mask.width(), mask.height());
  int next = 0;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(x, y) || out.at(x, y) != 0) continue;
      ++next;
      out.at(x, y) = next;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        auto [cx, cy] = queue.front();
        queue.pop_front();
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + kDx[k], ny = cy + kDy[k];
          if (nx < 0 || ny < 0 || nx >= mask.width() || ny >= mask.height()) continue;
          if (mask.get(nx, ny) && out.at(nx, ny) == 0) {
            out.at(nx, ny) = next;
            queue.emplace_back(nx, ny);
          }
        }
      }
    }
  }
  return out;
}

Polygon trace_outline(const Mask& mask) {
  const PixelBox b = mask.bounds();
  if (b.empty()) throw GeometryError("cannot trace an empty mask");
  LocalGrid g = grid_for(b);
  int sx = -1, sy = -1;
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int x = b.x0; x <= b.x1; ++x) {
      if (mask.get(x, y)) {
        g.at(x - g.x0, y - g.y0) = 1;
        if (sx < 0) {
          sx = x - g.x0;
          sy = y - g.y0;
        }
      }
    }
  }
  LocalGrid piece = isolate_piece(g, sx, sy);
  fill_local_holes(piece);
  return trace_grid(piece);
}

std::vector<std::optional<Polygon>> trace_labels(const LabelMap& labels) {
  const int k = labels.max_label();
  std::vector<PixelBox> boxes(static_cast<std::size_t>(k) + 1,
                              PixelBox{labels.width, labels.height, -1, -1});
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      const int l = labels.at(x, y);
      if (l <= 0) continue;
      PixelBox& b = boxes[static_cast<std::size_t>(l)];
      b.x0 = std::min(b.x0, x);
      b.x1 = std::max(b.x1, x);
      b.y0 = std::min(b.y0, y);
      b.y1 = std::max(b.y1, y);
    }
  }

  std::vector<std::optional<Polygon>> out(static_cast<std::size_t>(k));
#pragma omp parallel for schedule(dynamic)
  for (int l = 1; l <= k; ++l) {
    const PixelBox& b = boxes[static_cast<std::size_t>(l)];
    if (b.x1 < 0) continue;
    LocalGrid g = grid_for(b);
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        if (labels.at(x, y) == l) g.at(x - g.x0, y - g.y0) = 1;
      }
    }
    // Largest 4-connected piece, first in raster order on ties.
    LocalGrid seen(g.x0, g.y0, g.w, g.h);
    std::size_t best_size = 0;
    int best_x = -1, best_y = -1;
    for (int y = 0; y < g.h; ++y) {
      for (int x = 0; x < g.w; ++x) {
        if (!g.at(x, y) || seen.at(x, y)) continue;
        LocalGrid piece = isolate_piece(g, x, y);
        std::size_t size = 0;
        for (std::size_t i = 0; i < piece.bits.size(); ++i) {
          if (piece.bits[i]) {
            seen.bits[i] = 1;
            ++size;
          }
        }
        if (size > best_size) {
          best_size = size;
          best_x = x;
          best_y = y;
        }
      }
    }
    LocalGrid piece = isolate_piece(g, best_x, best_y);
    fill_local_holes(piece);
    out[static_cast<std::size_t>(l - 1)] = trace_grid(piece);
  }
  return out;
}

Polygon smooth_outline(const Polygon& traced) {
  const auto ring = traced.vertices();
  const std::size_t n = ring.size();
  std::vector<Point> mids;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = ring[i];
    const Point b = ring[(i + 1) % n];
    // Breakpoints at the integer coordinates crossed by an axis-parallel edge.
    std::vector<Point> cuts{a};
    if (a.y == b.y && a.x != b.x) {
      const double step = b.x > a.x ? 1.0 : -1.0;
      for (double x = step > 0 ? std::floor(a.x) + 1 : std::ceil(a.x) - 1; (b.x - x) * step > 0; x += step) {
        cuts.push_back({x, a.y});
      }
    } else if (a.x == b.x && a.y != b.y) {
      const double step = b.y > a.y ? 1.0 : -1.0;
      for (double y = step > 0 ? std::floor(a.y) + 1 : std::ceil(a.y) - 1; (b.y - y) * step > 0; y += step) {
        cuts.push_back({a.x, y});
      }
    }
    cuts.push_back(b);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      mids.push_back({0.5 * (cuts[k].x + cuts[k + 1].x), 0.5 * (cuts[k].y + cuts[k + 1].y)});
    }
  }
  // Drop collinear midpoints of straight runs.
  std::vector<Point> kept;
  const std::size_t m = mids.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point p = mids[(i + m - 1) % m];
    const Point q = mids[i];
    const Point r = mids[(i + 1) % m];
    if ((q.x - p.x) * (r.y - q.y) - (q.y - p.y) * (r.x - q.x) != 0.0) kept.push_back(q);
  }
  try {
    Polygon smooth(std::move(kept));
    // Compare coverage on a local frame; integer shifts keep the test exact.
    const Box b = traced.bounds();
    const double ox = std::floor(b.x) - 1.0;
    const double oy = std::floor(b.y) - 1.0;
    const int w = static_cast<int>(std::ceil(b.right()) - ox) + 2;
    const int h = static_cast<int>(std::ceil(b.bottom()) - oy) + 2;
    auto shifted = [&](const Polygon& poly) {
      std::vector<Point> v(poly.vertices().begin(), poly.vertices().end());
      for (Point& p : v) p = {p.x - ox, p.y - oy};
      return Polygon(std::move(v));
    };
    if (!(rasterize(shifted(smooth), w, h) == rasterize(shifted(traced), w, h))) return traced;
    return smooth;
  } catch (const GeometryError&) {
    return traced;
  }
}

}  // namespace cytobench
