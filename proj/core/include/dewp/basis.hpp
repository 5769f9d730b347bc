#pragma once

#include "dewp/tensor.hpp"

namespace dewp {

/// Fixed (non-learnable) Fourier evaluation matrices shared by every stack.
/// Rows index time points, columns index basis functions: the first
/// floor(n/2) columns are cos(2*pi*i*t) for harmonic i = 0, 1, ..., the next
/// floor(n/2) are sin(2*pi*i*t) for the same harmonics, and an odd n is
/// padded with one extra cosine column at harmonic floor(n/2) so the matrix
/// is square.
struct BasisMatrices {
  Tensor backcast;  // (L, L) over the grid t_b = [-L, ..., -1] / (L+H)
  Tensor forecast;  // (H, H) over the grid t_f = [0, ..., H-1] / (L+H)
};

BasisMatrices build_basis(int lookback, int horizon);

}  // namespace dewp
