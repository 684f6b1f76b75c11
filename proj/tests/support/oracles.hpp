#pragma once

// Slow, independent reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <vector>

#include "maga/sampler.hpp"

namespace maga::oracle {

/// Full decoding pipeline evaluated per token: rank by pairwise comparison,
/// membership from the mass ranked strictly ahead, long-double softmax.
inline std::vector<double> decode(const std::vector<double>& logits,
                                  const std::vector<TokenId>& history,
                                  const SamplerConfig& c) {
  const std::size_t v = logits.size();
  std::vector<long double> x(v);
  for (std::size_t i = 0; i < v; ++i) {
    long double f = 0;
    for (TokenId t : history) f += (t == i);
    long double xi = logits[i];
    if (f > 0) xi = xi / c.repetition_penalty;
    xi = xi / c.temperature;
    if (f > 0) xi = xi - c.presence_penalty - c.frequency_penalty * f;
    x[i] = xi;
  }
  long double z = 0;
  for (auto xi : x) z += std::exp(xi);
  std::vector<long double> p(v);
  for (std::size_t i = 0; i < v; ++i) p[i] = std::exp(x[i]) / z;

  auto ahead = [&](std::size_t j, std::size_t i) {
    return p[j] > p[i] || (p[j] == p[i] && j < i);
  };
  std::vector<bool> in_k(v, true);
  if (c.top_k != -1) {
    for (std::size_t i = 0; i < v; ++i) {
      std::size_t rank = 0;
      for (std::size_t j = 0; j < v; ++j) rank += ahead(j, i);
      in_k[i] = rank < static_cast<std::size_t>(c.top_k);
    }
  }
  long double k_mass = 0;
  for (std::size_t i = 0; i < v; ++i) {
    if (in_k[i]) k_mass += p[i];
  }
  std::vector<bool> keep = in_k;
  if (c.top_p < 1.0) {
    for (std::size_t i = 0; i < v; ++i) {
      if (!in_k[i]) continue;
      long double before = 0;
      for (std::size_t j = 0; j < v; ++j) {
        if (in_k[j] && ahead(j, i)) before += p[j];
      }
      keep[i] = before / k_mass < c.top_p;
    }
  }
  long double mass = 0;
  for (std::size_t i = 0; i < v; ++i) {
    if (keep[i]) mass += p[i];
  }
  std::vector<double> out(v, 0.0);
  for (std::size_t i = 0; i < v; ++i) {
    if (keep[i]) out[i] = static_cast<double>(p[i] / mass);
  }
  return out;
}

/// O(n*m) Mann-Whitney count with half credit for ties.
inline double pairwise_auc(const std::vector<double>& machine,
                           const std::vector<double>& human) {
  long long twice = 0;
  for (double m : machine) {
    for (double h : human) twice += m > h ? 2 : (m == h ? 1 : 0);
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(machine.size()) *
          static_cast<double>(human.size()));
}

/// Fraction of human scores at or above t.
inline double realized_fpr(const std::vector<double>& human, double t) {
  std::size_t n = 0;
  for (double h : human) n += h >= t;
  return static_cast<double>(n) / static_cast<double>(human.size());
}

/// Smallest admissible threshold found by scanning every candidate cut.
inline double brute_threshold(const std::vector<double>& human, double target) {
  std::vector<double> cands = human;
  cands.push_back(std::nextafter(*std::max_element(human.begin(), human.end()),
                                 INFINITY));
  std::sort(cands.begin(), cands.end());
  for (double t : cands) {
    if (realized_fpr(human, t) <= target + 1e-12) return t;
  }
  return cands.back();
}

/// Central differences of f at x, one coordinate at a time.
inline std::vector<double> finite_difference(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double eps) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

/// max |a - b| / max(1, |b|) style relative error over a vector.
inline double relative_error(const std::vector<double>& a,
                             const std::vector<double>& b, double floor = 1e-6) {
  double num = 0;
  double den = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::fabs(a[i] - b[i]));
    den = std::max(den, std::fabs(b[i]));
  }
  return num / den;
}

}  // namespace maga::oracle
