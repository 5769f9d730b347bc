#include "dewp/basis.hpp"

#include <cmath>
#include <numbers>

#include "dewp/errors.hpp"

namespace dewp {

namespace {

// grid holds the n time points; returns the (n, n) evaluation matrix.
Tensor harmonic_matrix(const std::vector<double>& grid) {
  const int n = static_cast<int>(grid.size());
  const int pairs = n / 2;
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  for (int r = 0; r < n; ++r) {
    const double t = grid[static_cast<std::size_t>(r)];
    for (int i = 0; i < pairs; ++i) {
      out[static_cast<std::size_t>(r) * n + i] = std::cos(2.0 * std::numbers::pi * i * t);
      out[static_cast<std::size_t>(r) * n + pairs + i] = std::sin(2.0 * std::numbers::pi * i * t);
    }
    if (n % 2 == 1) {
      out[static_cast<std::size_t>(r) * n + (n - 1)] =
          std::cos(2.0 * std::numbers::pi * pairs * t);
    }
  }
  return Tensor::from({n, n}, std::move(out));
}

}  // namespace

BasisMatrices build_basis(int lookback, int horizon) {
  if (lookback < 1 || horizon < 1) {
    throw ConfigError("build_basis requires lookback >= 1 and horizon >= 1");
  }
  const double denom = static_cast<double>(lookback + horizon);
  std::vector<double> t_b(static_cast<std::size_t>(lookback));
  for (int r = 0; r < lookback; ++r) t_b[static_cast<std::size_t>(r)] = (r - lookback) / denom;
  std::vector<double> t_f(static_cast<std::size_t>(horizon));
  for (int r = 0; r < horizon; ++r) t_f[static_cast<std::size_t>(r)] = r / denom;
  return BasisMatrices{harmonic_matrix(t_b), harmonic_matrix(t_f)};
}

}  // namespace dewp
