#pragma once
// Independent reference computations for the tests. Nothing here calls into
// the library's metric, mask or rotation code; inputs are plain arrays.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 apply(const Mat3& r, const Vec3& t, const Vec3& x) {
  Vec3 out{};
  for (int i = 0; i < 3; ++i) out[i] = r[i][0] * x[0] + r[i][1] * x[1] + r[i][2] * x[2] + t[i];
  return out;
}

inline double dist(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

// Index-matched mean distance, summed in point order.
inline double add(const Mat3& r, const Vec3& t, const Mat3& re, const Vec3& te, const std::vector<Vec3>& pts) {
  double s = 0.0;
  for (const auto& p : pts) s += dist(apply(r, t, p), apply(re, te, p));
  return s / static_cast<double>(pts.size());
}

// Closest-point mean distance by the double loop.
inline double adds(const Mat3& r, const Vec3& t, const Mat3& re, const Vec3& te, const std::vector<Vec3>& pts) {
  double s = 0.0;
  for (const auto& p : pts) {
    const Vec3 a = apply(r, t, p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : pts) best = std::min(best, dist(a, apply(re, te, q)));
    s += best;
  }
  return s / static_cast<double>(pts.size());
}

// Trapezoid rule over `steps` intervals of acc(tau) = #{v <= tau} / n on
// [0, max_t], normalized by max_t.
inline double auc_trapezoid(std::vector<double> values, double max_t, std::size_t steps) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto acc = [&](double tau) {
    return static_cast<double>(std::upper_bound(values.begin(), values.end(), tau) - values.begin()) / n;
  };
  const double h = max_t / static_cast<double>(steps);
  double area = 0.0;
  double prev = acc(0.0);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double cur = acc(h * static_cast<double>(i));
    area += 0.5 * (prev + cur) * h;
    prev = cur;
  }
  return area / max_t;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Naive 3x3 majority with replicated borders.
inline std::vector<std::uint8_t> median3(const std::vector<std::uint8_t>& m, int rows, int cols) {
  std::vector<std::uint8_t> out(m.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      std::vector<int> window;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          window.push_back(m[clampi(r + dr, 0, rows - 1) * cols + clampi(c + dc, 0, cols - 1)]);
        }
      }
      std::sort(window.begin(), window.end());
      out[r * cols + c] = static_cast<std::uint8_t>(window[4]);
    }
  }
  return out;
}

// Naive 5x5 dilation with replicated borders.
inline std::vector<std::uint8_t> dilate5(const std::vector<std::uint8_t>& m, int rows, int cols) {
  std::vector<std::uint8_t> out(m.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      std::uint8_t v = 0;
      for (int dr = -2; dr <= 2; ++dr) {
        for (int dc = -2; dc <= 2; ++dc) {
          v = std::max(v, m[clampi(r + dr, 0, rows - 1) * cols + clampi(c + dc, 0, cols - 1)]);
        }
      }
      out[r * cols + c] = v;
    }
  }
  return out;
}

// Rodrigues' formula for a unit axis.
inline Mat3 rodrigues(const Vec3& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), k = 1.0 - c;
  const double x = axis[0], y = axis[1], z = axis[2];
  return {{{c + x * x * k, x * y * k - z * s, x * z * k + y * s},
           {y * x * k + z * s, c + y * y * k, y * z * k - x * s},
           {z * x * k - y * s, z * y * k + x * s, c + z * z * k}}};
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 a{g(rng), g(rng), g(rng)};
  const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  for (auto& v : a) v /= n;
  std::uniform_real_distribution<double> ang(0.0, 3.141592653589793);
  return rodrigues(a, ang(rng));
}

// Central difference of f along each coordinate of x.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(|a|_inf, |b|_inf, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

}  // namespace oracle
