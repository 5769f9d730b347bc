#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dewp/tensor.hpp"

namespace dewp::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (double& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

/// Independent dense least-squares solver (column-pivoted Householder QR,
/// rank-revealing). Solves min ||A c - b|| with free variables set to zero.
/// Deliberately shares no code with the library under test.
inline std::vector<double> least_squares(std::vector<std::vector<double>> a,
                                         std::vector<double> b) {
  const std::size_t m = a.size();
  const std::size_t n = m == 0 ? 0 : a.front().size();
  std::vector<std::size_t> piv(n);
  for (std::size_t j = 0; j < n; ++j) piv[j] = j;

  auto col_norm = [&](std::size_t col, std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < m; ++i) s += a[i][col] * a[i][col];
    return std::sqrt(s);
  };

  std::size_t rank = n;
  for (std::size_t k = 0; k < n && k < m; ++k) {
    std::size_t best = k;
    double best_norm = col_norm(k, k);
    for (std::size_t j = k + 1; j < n; ++j) {
      const double cn = col_norm(j, k);
      if (cn > best_norm) {
        best = j;
        best_norm = cn;
      }
    }
    if (best_norm < 1e-12) {
      rank = k;
      break;
    }
    if (best != k) {
      for (std::size_t i = 0; i < m; ++i) std::swap(a[i][k], a[i][best]);
      std::swap(piv[k], piv[best]);
    }
    // Householder reflector for column k.
    std::vector<double> v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = a[i][k];
    const double alpha = (v[0] >= 0.0 ? -1.0 : 1.0) * best_norm;
    v[0] -= alpha;
    double vnorm = 0.0;
    for (double x : v) vnorm += x * x;
    vnorm = std::sqrt(vnorm);
    if (vnorm > 0.0) {
      for (double& x : v) x /= vnorm;
      for (std::size_t j = k; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t i = k; i < m; ++i) dot += v[i - k] * a[i][j];
        for (std::size_t i = k; i < m; ++i) a[i][j] -= 2.0 * v[i - k] * dot;
      }
      double dotb = 0.0;
      for (std::size_t i = k; i < m; ++i) dotb += v[i - k] * b[i];
      for (std::size_t i = k; i < m; ++i) b[i] -= 2.0 * v[i - k] * dotb;
    }
  }

  std::vector<double> y(rank, 0.0);
  for (std::size_t ii = rank; ii-- > 0;) {
    double acc = b[ii];
    for (std::size_t j = ii + 1; j < rank; ++j) acc -= a[ii][j] * y[j];
    y[ii] = acc / a[ii][ii];
  }
  std::vector<double> c(n, 0.0);
  for (std::size_t K = 0; K < rank; ++K) c[piv[K]] = y[K];
  return c;
}

/// Matrix rank by Gaussian elimination with partial pivoting.
inline int matrix_rank(std::vector<std::vector<double>> a, double tol = 1e-9) {
  const std::size_t m = a.size();
  const std::size_t n = m == 0 ? 0 : a.front().size();
  int rank = 0;
  std::size_t row = 0;
  for (std::size_t col = 0; col < n && row < m; ++col) {
    std::size_t best = row;
    for (std::size_t i = row + 1; i < m; ++i) {
      if (std::abs(a[i][col]) > std::abs(a[best][col])) best = i;
    }
    if (std::abs(a[best][col]) < tol) continue;
    std::swap(a[row], a[best]);
    for (std::size_t i = row + 1; i < m; ++i) {
      const double f = a[i][col] / a[row][col];
      for (std::size_t j = col; j < n; ++j) a[i][j] -= f * a[row][j];
    }
    ++rank;
    ++row;
  }
  return rank;
}

inline std::vector<std::vector<double>> to_matrix(const Tensor& t) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(t.dim(0)),
                                       std::vector<double>(static_cast<std::size_t>(t.dim(1))));
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = t.at(i, j);
  return out;
}

/// Central-difference check of analytic parameter gradients for an arbitrary
/// scalar loss closure. Passes when every coordinate satisfies
/// |analytic - numeric| <= max(abs_tol, rel_tol * |analytic|).
struct ParamGradCheck {
  bool ok = true;
  double worst_abs = 0.0;
  std::string worst_param;
};

inline ParamGradCheck check_param_gradients(
    const std::vector<std::pair<std::string, Tensor>>& params,
    const std::function<Tensor()>& loss_fn, double step, double abs_tol, double rel_tol) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
    for (const auto& [name, p] : params) {
      auto g = p.grad();
      analytic.emplace_back(g.begin(), g.end());
    }
  }
  ParamGradCheck result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor param = params[pi].second;
    auto values = param.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      auto central = [&](double h) {
        values[i] = saved + h;
        const double up = loss_fn().value();
        values[i] = saved - h;
        const double down = loss_fn().value();
        values[i] = saved;
        return (up - down) / (2.0 * h);
      };
      const double a = analytic[pi][i];
      const double tol = std::max(abs_tol, rel_tol * std::abs(a));
      double err = std::abs(a - central(step));
      // A coordinate sitting within `step` of a ReLU kink makes the stencil
      // straddle two linear pieces; refine until the stencil is one-sided.
      for (double h = step / 10.0; err > tol && h >= step / 1000.0; h /= 10.0) {
        err = std::min(err, std::abs(a - central(h)));
      }
      if (err > result.worst_abs) {
        result.worst_abs = err;
        result.worst_param = params[pi].first;
      }
      if (err > tol) result.ok = false;
    }
  }
  return result;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dewp_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dewp::testing
