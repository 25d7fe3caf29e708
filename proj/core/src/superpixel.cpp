#include "histolime/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "histolime/errors.hpp"

namespace histolime {
namespace {

struct Center {
  double r, g, b, x, y;
};

struct Components {
  std::vector<std::int32_t> id;        // per pixel
  std::vector<std::int32_t> label;     // per component: cluster label
  std::vector<std::size_t> size;       // per component
  std::vector<std::size_t> first;      // per component: first pixel in scan order
};

// 4-connected components of equal cluster labels, numbered in scan order.
Components label_components(const std::vector<std::int32_t>& labels, int w, int h) {
  Components c;
  c.id.assign(labels.size(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (c.id[start] >= 0) continue;
    const auto comp = static_cast<std::int32_t>(c.size.size());
    const auto lab = labels[start];
    c.label.push_back(lab);
    c.first.push_back(start);
    std::size_t count = 0;
    c.id[start] = comp;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++count;
      const int x = static_cast<int>(p % static_cast<std::size_t>(w));
      const int y = static_cast<int>(p / static_cast<std::size_t>(w));
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        if (c.id[q] < 0 && labels[q] == lab) {
          c.id[q] = comp;
          stack.push_back(q);
        }
      };
      visit(x - 1, y);
      visit(x + 1, y);
      visit(x, y - 1);
      visit(x, y + 1);
    }
    c.size.push_back(count);
  }
  return c;
}

struct UnionFind {
  std::vector<std::int32_t> parent;
  std::vector<std::size_t> size;

  explicit UnionFind(const std::vector<std::size_t>& sizes)
      : parent(sizes.size()), size(sizes) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::int32_t find(std::int32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void absorb(std::int32_t into, std::int32_t from) {
    into = find(into);
    from = find(from);
    if (into == from) return;
    parent[from] = into;
    size[into] += size[from];
  }
};

std::vector<std::int32_t> enforce_connectivity(const std::vector<std::int32_t>& labels, int w,
                                               int h, int& k_out) {
  const Components comps = label_components(labels, w, h);
  const std::size_t n_comp = comps.size.size();

  // Largest component per cluster label; the earliest wins ties.
  std::int32_t max_label = 0;
  for (auto l : comps.label) max_label = std::max(max_label, l);
  std::vector<std::int32_t> main_of(static_cast<std::size_t>(max_label) + 1, -1);
  for (std::size_t c = 0; c < n_comp; ++c) {
    auto& m = main_of[static_cast<std::size_t>(comps.label[c])];
    if (m < 0 || comps.size[c] > comps.size[static_cast<std::size_t>(m)]) {
      m = static_cast<std::int32_t>(c);
    }
  }

  std::vector<std::vector<std::size_t>> pixels(n_comp);
  for (std::size_t p = 0; p < comps.id.size(); ++p) {
    pixels[static_cast<std::size_t>(comps.id[p])].push_back(p);
  }

  UnionFind uf(comps.size);
  for (std::size_t c = 0; c < n_comp; ++c) {
    if (main_of[static_cast<std::size_t>(comps.label[c])] == static_cast<std::int32_t>(c)) continue;
    const std::int32_t self = uf.find(static_cast<std::int32_t>(c));
    std::int32_t best = -1;
    for (std::size_t p : pixels[c]) {
      const int x = static_cast<int>(p % static_cast<std::size_t>(w));
      const int y = static_cast<int>(p / static_cast<std::size_t>(w));
      const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const std::int32_t r =
            uf.find(comps.id[static_cast<std::size_t>(q[1]) * w + q[0]]);
        if (r == self) continue;
        if (best < 0 || uf.size[r] > uf.size[best] || (uf.size[r] == uf.size[best] && r < best)) {
          best = r;
        }
      }
    }
    if (best >= 0) uf.absorb(best, self);
  }

  std::vector<std::int32_t> remap(n_comp, -1);
  std::vector<std::int32_t> out(labels.size());
  std::int32_t next = 0;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const auto root = static_cast<std::size_t>(uf.find(comps.id[p]));
    if (remap[root] < 0) remap[root] = next++;
    out[p] = remap[root];
  }
  k_out = next;
  return out;
}

}  // namespace

std::vector<std::size_t> SuperpixelMap::sizes() const {
  std::vector<std::size_t> s(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (auto l : labels) ++s[static_cast<std::size_t>(l)];
  return s;
}

SuperpixelMap segment(const Raster& img, int target_k, double compactness) {
  if (img.empty()) throw SegmentationError("empty image");
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = img.pixel_count();
  if (target_k < 1 || static_cast<std::size_t>(target_k) > n) {
    throw SegmentationError("target_k must lie in [1, " + std::to_string(n) + "], got " +
                            std::to_string(target_k));
  }
  if (!(compactness >= 0.0) || !std::isfinite(compactness)) {
    throw SegmentationError("compactness must be finite and non-negative");
  }

  const int nx = std::clamp(
      static_cast<int>(std::ceil(std::sqrt(static_cast<double>(target_k) * w / h) - 1e-9)), 1, std::min(w, target_k));
  const int ny = std::clamp(target_k / nx, 1, h);
  const double step_x = static_cast<double>(w) / nx;
  const double step_y = static_cast<double>(h) / ny;
  const double S = std::max(step_x, step_y);
  const double spatial = (compactness / S) * (compactness / S);
  const int radius = static_cast<int>(std::ceil(S));

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double cx = (i + 0.5) * step_x;
      const double cy = (j + 0.5) * step_y;
      const auto* p = img.pixel(std::min(w - 1, static_cast<int>(cx)),
                                std::min(h - 1, static_cast<int>(cy)));
      centers.push_back({double(p[0]), double(p[1]), double(p[2]), cx, cy});
    }
  }

  std::vector<std::int32_t> labels(n);
  for (int y = 0; y < h; ++y) {
    const int j = std::min(ny - 1, static_cast<int>(y / step_y));
    for (int x = 0; x < w; ++x) {
      const int i = std::min(nx - 1, static_cast<int>(x / step_x));
      labels[static_cast<std::size_t>(y) * w + x] = j * nx + i;
    }
  }

  std::vector<double> dist(n);
  std::vector<double> acc;
  std::vector<std::size_t> count;
  for (int iter = 0; iter < kSlicIterations; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const Center& ctr = centers[c];
      const int x0 = std::max(0, static_cast<int>(std::floor(ctr.x)) - radius);
      const int x1 = std::min(w - 1, static_cast<int>(std::floor(ctr.x)) + radius);
      const int y0 = std::max(0, static_cast<int>(std::floor(ctr.y)) - radius);
      const int y1 = std::min(h - 1, static_cast<int>(std::floor(ctr.y)) + radius);
      for (int y = y0; y <= y1; ++y) {
        const double dy = y - ctr.y;
        for (int x = x0; x <= x1; ++x) {
          const auto* p = img.pixel(x, y);
          const double dr = p[0] - ctr.r;
          const double dg = p[1] - ctr.g;
          const double db = p[2] - ctr.b;
          const double dx = x - ctr.x;
          const double d = dr * dr + dg * dg + db * db + (dx * dx + dy * dy) * spatial;
          const std::size_t idx = static_cast<std::size_t>(y) * w + x;
          if (d < dist[idx]) {
            dist[idx] = d;
            labels[idx] = static_cast<std::int32_t>(c);
          }
        }
      }
    }

    acc.assign(centers.size() * 5, 0.0);
    count.assign(centers.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(y) * w + x]);
        const auto* p = img.pixel(x, y);
        acc[c * 5 + 0] += p[0];
        acc[c * 5 + 1] += p[1];
        acc[c * 5 + 2] += p[2];
        acc[c * 5 + 3] += x;
        acc[c * 5 + 4] += y;
        ++count[c];
      }
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (count[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(count[c]);
      centers[c] = {acc[c * 5] * inv, acc[c * 5 + 1] * inv, acc[c * 5 + 2] * inv,
                    acc[c * 5 + 3] * inv, acc[c * 5 + 4] * inv};
    }
  }

  SuperpixelMap sp;
  sp.width = w;
  sp.height = h;
  sp.labels = enforce_connectivity(labels, w, h, sp.k);
  if (sp.k < 1) throw SegmentationError("connectivity enforcement produced no segments");
  return sp;
}

Raster superpixel_id_map(const SuperpixelMap& sp) {
  Raster out(sp.width, sp.height);
  const int denom = std::max(1, sp.k - 1);
  auto data = out.data();
  for (std::size_t p = 0; p < sp.labels.size(); ++p) {
    const auto g = static_cast<std::uint8_t>((sp.labels[p] * 255 + denom / 2) / denom);
    data[p * 3] = data[p * 3 + 1] = data[p * 3 + 2] = g;
  }
  return out;
}

}  // namespace histolime
