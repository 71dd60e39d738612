#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hamd/instance.hpp"
#include "hamd/rng.hpp"

namespace testing {

// One-sector instance from explicit data; triples are taken as given.
inline hamd::PortfolioInstance make_instance(std::size_t n, std::size_t k, std::vector<double> cov,
                                             std::vector<double> mu, std::vector<hamd::Triple> triples) {
  hamd::PortfolioInstance inst;
  inst.n = n;
  inst.k = k;
  inst.n_sectors = 1;
  inst.covariance = std::move(cov);
  inst.expected_return = std::move(mu);
  inst.triples = std::move(triples);
  inst.sector_of.assign(n, 0);
  inst.quad_scale = 1.0;
  inst.index_triples();
  inst.validate();
  return inst;
}

inline std::vector<double> identity(std::size_t n) {
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 1.0;
  return m;
}

// Dense random instance: Σ = A Aᵀ/n + diag, μ ~ U[0,1], `n_triples`
// distinct triples with c ~ U[0, 2]. Not sector-structured.
inline hamd::PortfolioInstance random_instance(std::size_t n, std::size_t k, std::uint64_t seed,
                                               std::size_t n_triples) {
  hamd::Rng rng(seed, "test-instance");
  std::vector<double> a(n * n);
  for (auto& v : a) v = rng.uniform(-1.0, 1.0);
  std::vector<double> cov(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c <= r; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += a[r * n + t] * a[c * n + t];
      s /= static_cast<double>(n);
      if (r == c) s += 0.1;
      cov[r * n + c] = cov[c * n + r] = s;
    }
  }
  std::vector<double> mu(n);
  for (auto& v : mu) v = rng.uniform();
  std::vector<hamd::Triple> triples;
  std::size_t attempts = 0;
  while (triples.size() < n_triples && attempts++ < 1000 * (n_triples + 1)) {
    std::size_t i = rng.below(n), j = rng.below(n), kk = rng.below(n);
    if (i == j || i == kk || j == kk) continue;
    if (i > j) std::swap(i, j);
    bool dup = false;
    for (const auto& t : triples) dup = dup || (t.i == i && t.j == j && t.k == kk);
    if (dup) continue;
    triples.push_back({i, j, kk, rng.uniform(0.0, 2.0)});
  }
  return make_instance(n, k, std::move(cov), std::move(mu), std::move(triples));
}

// Term-by-term f(x), written independently of the library kernels.
inline double term_sum_native(const hamd::PortfolioInstance& inst, const std::vector<double>& x) {
  double f = 0.0;
  for (std::size_t i = 0; i < inst.n; ++i) {
    for (std::size_t j = 0; j < inst.n; ++j) f += x[i] * inst.covariance[i * inst.n + j] * x[j];
  }
  for (std::size_t i = 0; i < inst.n; ++i) f -= inst.expected_return[i] * x[i];
  for (const auto& t : inst.triples) f += t.coeff * x[t.i] * x[t.j] * x[t.k];
  return f;
}

// Cyclic Jacobi eigenvalues of a symmetric matrix.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> m, std::size_t n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += m[p * n + q] * m[p * n + q];
    }
    if (off < 1e-22) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          const double rp = m[r * n + p], rq = m[r * n + q];
          m[r * n + p] = c * rp - s * rq;
          m[r * n + q] = s * rp + c * rq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double pr = m[p * n + r], qr = m[q * n + r];
          m[p * n + r] = c * pr - s * qr;
          m[q * n + r] = s * pr + c * qr;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = m[i * n + i];
  return ev;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace testing
