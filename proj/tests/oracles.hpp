#pragma once

// Slow, obviously-correct reference implementations used to check the library.

#include "alpr/box.hpp"
#include "alpr/rng.hpp"
#include "alpr/seqdecode.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace oracle {

/// IoU by counting cell centers of a grid laid over the union hull.
inline double pixel_iou(const alpr::BoundingBox& a, const alpr::BoundingBox& b, int grid = 512) {
  const double x0 = std::min(a.x_min, b.x_min);
  const double y0 = std::min(a.y_min, b.y_min);
  const double dx = (std::max(a.x_max, b.x_max) - x0) / grid;
  const double dy = (std::max(a.y_max, b.y_max) - y0) / grid;
  long inter = 0;
  long uni = 0;
  for (int i = 0; i < grid; ++i) {
    const double y = y0 + (i + 0.5) * dy;
    for (int j = 0; j < grid; ++j) {
      const double x = x0 + (j + 0.5) * dx;
      const bool in_a = a.contains(x, y);
      const bool in_b = b.contains(x, y);
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

/// Plain exponential recursion, no memo.
template <typename T>
std::size_t levenshtein_rec(std::span<const T> a, std::span<const T> b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const auto ta = a.first(a.size() - 1);
  const auto tb = b.first(b.size() - 1);
  const std::size_t sub = levenshtein_rec(ta, tb) + (a.back() == b.back() ? 0 : 1);
  return std::min({levenshtein_rec(ta, b) + 1, levenshtein_rec(a, tb) + 1, sub});
}

struct Decoded {
  std::vector<alpr::TokenId> tokens;
  double log_score = -std::numeric_limits<double>::infinity();
  double rank = -std::numeric_limits<double>::infinity();
};

inline bool banned(const std::vector<alpr::TokenId>& prefix, alpr::TokenId next, int n) {
  if (n <= 0 || static_cast<int>(prefix.size()) < n - 1) return false;
  std::vector<alpr::TokenId> tail(prefix.end() - (n - 1), prefix.end());
  tail.push_back(next);
  for (std::size_t s = 0; s + n <= prefix.size(); ++s)
    if (std::equal(tail.begin(), tail.end(), prefix.begin() + static_cast<std::ptrdiff_t>(s))) return true;
  return false;
}

/// Enumerates every sequence ending at EOS or at max_length and returns the
/// best by length-normalized score; ties go to the smaller token sequence.
inline Decoded exhaustive_decode(const alpr::LogProbProvider& provider, alpr::SpecialTokens special,
                                 const alpr::GenerationConfig& config) {
  Decoded best;
  std::vector<alpr::TokenId> seq{special.bos};
  const auto visit = [&](auto&& self, double score) -> void {
    const auto logp = provider(seq);
    for (Eigen::Index v = 0; v < logp.size(); ++v) {
      const auto id = static_cast<alpr::TokenId>(v);
      if (std::isinf(logp[v]) || banned(seq, id, config.no_repeat_ngram_size)) continue;
      const double s = score + logp[v];
      seq.push_back(id);
      const int generated = static_cast<int>(seq.size()) - 1;
      if (id == special.eos || generated == config.max_length) {
        const double rank = s / std::pow(static_cast<double>(generated), config.length_penalty);
        if (rank > best.rank || (rank == best.rank && seq < best.tokens)) best = {seq, s, rank};
      } else {
        self(self, s);
      }
      seq.pop_back();
    }
  };
  visit(visit, 0.0);
  return best;
}

/// Argmax per step, ties to the lowest id, until EOS or max_length.
inline std::vector<alpr::TokenId> greedy_decode(const alpr::LogProbProvider& provider, alpr::SpecialTokens special,
                                                int max_length) {
  std::vector<alpr::TokenId> seq{special.bos};
  while (static_cast<int>(seq.size()) - 1 < max_length) {
    const auto logp = provider(seq);
    Eigen::Index arg = 0;
    for (Eigen::Index v = 1; v < logp.size(); ++v)
      if (logp[v] > logp[arg]) arg = v;
    seq.push_back(static_cast<alpr::TokenId>(arg));
    if (arg == special.eos) break;
  }
  return seq;
}

/// Deterministic random provider: the distribution is a pure function of
/// (seed, prefix). Roughly one entry in ten is -inf, never all of them.
inline alpr::LogProbProvider random_provider(std::uint64_t seed, int vocab) {
  return [seed, vocab](std::span<const alpr::TokenId> prefix) {
    std::uint64_t h = seed;
    for (auto t : prefix) h = alpr::splitmix64(h ^ static_cast<std::uint64_t>(t + 7));
    alpr::Rng rng(h);
    Eigen::VectorXd logits(vocab);
    for (int v = 0; v < vocab; ++v) logits[v] = 3.0 * rng.normal();
    for (int v = 0; v < vocab; ++v)
      if (v != 1 && rng.bernoulli(0.1)) logits[v] = -std::numeric_limits<double>::infinity();
    const double mx = logits.maxCoeff();
    double z = 0;
    for (int v = 0; v < vocab; ++v) z += std::isinf(logits[v]) ? 0.0 : std::exp(logits[v] - mx);
    Eigen::VectorXd out(vocab);
    for (int v = 0; v < vocab; ++v) out[v] = logits[v] - mx - std::log(z);
    return out;
  };
}

/// Affine box mapping by dense boundary sampling and explicit trig, then clip
/// and the 1 px² / 10% survival rule.
inline std::optional<alpr::BoundingBox> affine_box(const alpr::BoundingBox& b, double rot_deg, double tx, double ty,
                                                   double scale, double shear_deg, int w, int h) {
  const double a = rot_deg * std::numbers::pi / 180.0;
  const double k = std::tan(shear_deg * std::numbers::pi / 180.0);
  const double cx = w / 2.0;
  const double cy = h / 2.0;
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  constexpr int n = 64;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double px[4] = {b.x_min + t * b.width(), b.x_max, b.x_max - t * b.width(), b.x_min};
    const double py[4] = {b.y_min, b.y_min + t * b.height(), b.y_max, b.y_max - t * b.height()};
    for (int e = 0; e < 4; ++e) {
      const double u = (px[e] - cx) * scale;
      const double v = (py[e] - cy) * scale;
      const double ru = std::cos(a) * u + std::sin(a) * v;
      const double rv = -std::sin(a) * u + std::cos(a) * v;
      const double X = ru + k * rv + cx + tx * w;
      const double Y = rv + cy + ty * h;
      x0 = std::min(x0, X);
      x1 = std::max(x1, X);
      y0 = std::min(y0, Y);
      y1 = std::max(y1, Y);
    }
  }
  const double full = (x1 - x0) * (y1 - y0);
  alpr::BoundingBox c{std::clamp(x0, 0.0, double(w)), std::clamp(y0, 0.0, double(h)), std::clamp(x1, 0.0, double(w)),
                      std::clamp(y1, 0.0, double(h))};
  if (!(c.x_min < c.x_max && c.y_min < c.y_max)) return std::nullopt;
  if (c.area() < 1.0 || c.area() < 0.1 * full) return std::nullopt;
  return c;
}

/// Hexcone HSV round trip on one 8-bit pixel, written out case by case.
inline std::array<int, 3> hsv_pixel(int r8, int g8, int b8, double hue_shift, double sat_gain, double val_gain) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  double hue = 0;
  if (mx != mn) {
    if (mx == r)
      hue = 60.0 * std::fmod((g - b) / (mx - mn) + 6.0, 6.0);
    else if (mx == g)
      hue = 60.0 * ((b - r) / (mx - mn) + 2.0);
    else
      hue = 60.0 * ((r - g) / (mx - mn) + 4.0);
  }
  double s = mx == 0 ? 0 : (mx - mn) / mx;
  double v = mx;
  hue = std::fmod(hue + hue_shift * 360.0 + 360.0, 360.0);
  s = std::clamp(s * sat_gain, 0.0, 1.0);
  v = std::clamp(v * val_gain, 0.0, 1.0);
  const double c = v * s;
  const double hp = hue / 60.0;
  const double x = c * (1 - std::fabs(std::fmod(hp, 2.0) - 1));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c, g1 = x; break;
    case 1: r1 = x, g1 = c; break;
    case 2: g1 = c, b1 = x; break;
    case 3: g1 = x, b1 = c; break;
    case 4: r1 = x, b1 = c; break;
    default: r1 = c, b1 = x; break;
  }
  const double m = v - c;
  const auto q = [](double u) { return static_cast<int>(std::clamp(std::round(u * 255.0), 0.0, 255.0)); };
  return {q(r1 + m), q(g1 + m), q(b1 + m)};
}

}  // namespace oracle
