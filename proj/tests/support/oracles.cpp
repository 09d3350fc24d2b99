#include "oracles.hpp"

#include <algorithm>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <numeric>

namespace recprompt::testing {

double logistic_oracle(double s_yes, double s_no) {
  using big = boost::multiprecision::cpp_bin_float_50;
  const big a = s_yes;
  const big b = s_no;
  const big ea = boost::multiprecision::exp(a);
  const big eb = boost::multiprecision::exp(b);
  return static_cast<double>(ea / (ea + eb));
}

EigenPairs jacobi_eigen(std::vector<double> a, std::size_t n, double tol) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) off += at(i, j) * at(i, j);
        scale += at(i, j) * at(i, j);
      }
    }
    if (off <= tol * tol * std::max(scale, 1e-300)) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (at(p, q) == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return at(x, x) > at(y, y); });
  EigenPairs out;
  for (const auto col : order) {
    out.values.push_back(at(col, col));
    for (std::size_t k = 0; k < n; ++k) out.vectors.push_back(v[k * n + col]);
  }
  return out;
}

double auc_by_pairs(std::span<const Labeled> data) {
  long long num2 = 0;
  long long pos = 0;
  long long neg = 0;
  for (const auto& d : data) (d.label ? pos : neg) += 1;
  for (const auto& p : data) {
    if (!p.label) continue;
    for (const auto& q : data) {
      if (q.label) continue;
      num2 += p.score > q.score ? 2 : (p.score == q.score ? 1 : 0);
    }
  }
  return static_cast<double>(num2) / static_cast<double>(2 * pos * neg);
}

}  // namespace recprompt::testing
