/* Copyright 2026 The TSCFormer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "tscformer/temporal_shift.hpp"

#include <algorithm>

#include "tscformer/error.hpp"

namespace tsc {

void ShiftConfig::validate(std::size_t channels) const {
  if (divisions < 2) throw ValidationError("temporal shift: divisions must be >= 2");
  if (channels < divisions) {
    throw ValidationError("temporal shift: " + std::to_string(channels) + " channels fewer than " +
                          std::to_string(divisions) + " divisions");
  }
}

namespace {

// direction +1: out[t] = in[t + 1] on fold 0, in[t - 1] on fold 1.
// direction -1 applies the transpose (used for the gradient).
void shift_copy(const Tensor& in, Tensor& out, std::size_t fold, int direction) {
  const auto& s = in.shape();
  const std::size_t B = s[0], T = s[1], C = s[2], S = s[3] * s[4];
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t c = 0; c < C; ++c) {
        double* dst = out.data() + ((b * T + t) * C + c) * S;
        long src_t = static_cast<long>(t);
        if (c < fold) {
          src_t += direction;
        } else if (c < 2 * fold) {
          src_t -= direction;
        }
        if (src_t < 0 || src_t >= static_cast<long>(T)) {
          std::fill_n(dst, S, 0.0);
          continue;
        }
        const double* src = in.data() + ((b * T + static_cast<std::size_t>(src_t)) * C + c) * S;
        std::copy_n(src, S, dst);
      }
    }
  }
}

}  // namespace

Var temporal_shift(const Var& x, const ShiftConfig& cfg) {
  if (x.rank() != 5) throw DimensionError("temporal_shift: expected [B, T, C, H, W], got " + to_string(x.shape()));
  cfg.validate(x.dim(2));
  const std::size_t fold = x.dim(2) / cfg.divisions;
  Tensor out(x.shape());
  shift_copy(x.value(), out, fold, +1);
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx, fold](const Tensor& g, const Tensor&) {
    Tensor gx(nx->value.shape());
    shift_copy(g, gx, fold, -1);
    nx->accumulate(std::move(gx));
  });
}

}  // namespace tsc
