#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "ehmm/errors.hpp"
#include "ehmm/rng.hpp"

namespace ehmm {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Diagonal-covariance Gaussian mixture. means/vars are components x dim,
// row-major.
struct gmm {
  int dim = 0;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> vars;

  int components() const { return static_cast<int>(weights.size()); }
  double* mean(int m) { return means.data() + std::size_t(m) * dim; }
  const double* mean(int m) const { return means.data() + std::size_t(m) * dim; }
  double* var(int m) { return vars.data() + std::size_t(m) * dim; }
  const double* var(int m) const { return vars.data() + std::size_t(m) * dim; }
};

inline void check_gmm(const gmm& g) {
  double wsum = 0.0;
  for (double w : g.weights) wsum += w;
  if (std::abs(wsum - 1.0) > 1e-9)
    throw numeric_error("mixture weights sum to " + std::to_string(wsum));
  for (double v : g.vars)
    if (!(v > 0.0)) throw numeric_error("non-positive mixture variance");
}

// Precomputed per-component log weight + normalizer and inverse variances;
// emission scoring is the inner loop of everything downstream.
class gmm_scorer {
 public:
  explicit gmm_scorer(const gmm& g) : dim_(g.dim), m_(g.components()) {
    log_w_const_.resize(m_);
    inv_var_.resize(std::size_t(m_) * dim_);
    means_ = g.means;
    for (int m = 0; m < m_; ++m) {
      double c = g.weights[m] > 0.0 ? std::log(g.weights[m]) : kNegInf;
      const double* v = g.var(m);
      for (int d = 0; d < dim_; ++d) {
        c -= 0.5 * (kLogTwoPi + std::log(v[d]));
        inv_var_[std::size_t(m) * dim_ + d] = 1.0 / v[d];
      }
      log_w_const_[m] = c;
    }
  }

  template <typename Scalar>
  double operator()(const Scalar* x) const {
    double best = kNegInf;
    double terms[2];  // top term kept separately for a stable log-sum-exp
    double acc = 0.0;
    (void)terms;
    // First pass: per-component log densities, tracking the max.
    small_.resize(m_);
    for (int m = 0; m < m_; ++m) {
      double q = 0.0;
      const double* mu = means_.data() + std::size_t(m) * dim_;
      const double* iv = inv_var_.data() + std::size_t(m) * dim_;
      for (int d = 0; d < dim_; ++d) {
        const double diff = double(x[d]) - mu[d];
        q += diff * diff * iv[d];
      }
      const double lp = log_w_const_[m] - 0.5 * q;
      small_[m] = lp;
      if (lp > best) best = lp;
    }
    if (best == kNegInf) return kNegInf;
    for (int m = 0; m < m_; ++m) acc += std::exp(small_[m] - best);
    return best + std::log(acc);
  }

 private:
  int dim_;
  int m_;
  std::vector<double> log_w_const_;
  std::vector<double> means_;
  std::vector<double> inv_var_;
  mutable std::vector<double> small_;
};

// log sum_m w_m N(x; mu_m, diag sigma2_m), evaluated in the log domain.
inline double gmm_logpdf(const gmm& g, std::span<const double> x) {
  if (static_cast<int>(x.size()) != g.dim)
    throw data_error("gmm_logpdf: vector has dim " + std::to_string(x.size()) +
                     ", mixture has dim " + std::to_string(g.dim));
  return gmm_scorer(g)(x.data());
}

// --------------------------------------------------------------------------
// Seeded k-means (Lloyd with k-means++ init) used by flat start.
// frames: n x dim row-major. Returns k x dim centers.
// --------------------------------------------------------------------------
inline std::vector<double> kmeans(std::span<const double> frames, int n,
                                  int dim, int k, rng& rand,
                                  int max_iters = 50) {
  if (n < k) throw numeric_error("kmeans: fewer points than centers");
  const auto point = [&](int i) { return frames.data() + std::size_t(i) * dim; };
  const auto dist2 = [&](const double* a, const double* b) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
  };

  std::vector<double> centers(std::size_t(k) * dim);
  std::vector<double> min_d(n, std::numeric_limits<double>::max());
  // k-means++ seeding
  int first = static_cast<int>(rand.uniform_int(n));
  std::copy_n(point(first), dim, centers.begin());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d2 = dist2(point(i), centers.data() + std::size_t(c - 1) * dim);
      if (d2 < min_d[i]) min_d[i] = d2;
      total += min_d[i];
    }
    int chosen = 0;
    if (total > 0.0) {
      double target = rand.uniform() * total, run = 0.0;
      for (int i = 0; i < n; ++i) {
        run += min_d[i];
        if (run >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<int>(rand.uniform_int(n));
    }
    std::copy_n(point(chosen), dim, centers.begin() + std::size_t(c) * dim);
  }

  std::vector<int> assign(n, -1);
  std::vector<double> sums(std::size_t(k) * dim);
  std::vector<int> counts(k);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        const double d2 = dist2(point(i), centers.data() + std::size_t(c) * dim);
        if (d2 < best_d) {
          best_d = d2;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      counts[assign[i]]++;
      const double* p = point(i);
      double* s = sums.data() + std::size_t(assign[i]) * dim;
      for (int d = 0; d < dim; ++d) s[d] += p[d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster on the point farthest from its center.
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d2 =
              dist2(point(i), centers.data() + std::size_t(assign[i]) * dim);
          if (d2 > far_d) {
            far_d = d2;
            far_i = i;
          }
        }
        std::copy_n(point(far_i), dim, centers.begin() + std::size_t(c) * dim);
        assign[far_i] = c;
        continue;
      }
      for (int d = 0; d < dim; ++d)
        centers[std::size_t(c) * dim + d] = sums[std::size_t(c) * dim + d] / counts[c];
    }
  }
  return centers;
}

}  // namespace ehmm
