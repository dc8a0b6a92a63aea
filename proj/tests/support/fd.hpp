// SPDX-License-Identifier: Apache-2.0
// Central finite-difference gradient oracle. Perturbations whose +h / -h
// evaluations see a different rectifier sign pattern than the base point are
// skipped: the loss is not differentiable across such a kink. A coordinate
// that misses `tol` while its analytic and numeric values differ by less than
// the quotient's own rounding bound (16 eps |L| / h) is counted separately
// and left out of max_rel_err; raw_max_rel_err keeps it.
#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>

#include "pebble/nn.hpp"
#include "support/oracles.hpp"

namespace pebble::testing {

struct FdResult {
  double max_rel_err = 0.0;
  double raw_max_rel_err = 0.0;  // before the rounding allowance
  std::size_t checked = 0;
  std::size_t rounding_limited = 0;
  std::size_t skipped = 0;
};

inline FdResult fd_check(std::span<double> params, const std::function<double()>& loss,
                         std::span<const double> analytic, double h = 1e-5,
                         double tol = 1e-4) {
  FdResult res;
  nn::KinkProbe probe;
  probe.reset();
  const double base_loss = loss();
  const std::uint64_t base = probe.signature();
  const double noise =
      16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(base_loss)) / h;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    probe.reset();
    const double up = loss();
    const std::uint64_t sig_up = probe.signature();
    params[i] = saved - h;
    probe.reset();
    const double down = loss();
    const std::uint64_t sig_down = probe.signature();
    params[i] = saved;
    if (sig_up != base || sig_down != base) {
      ++res.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double raw = grad_rel_err(analytic[i], numeric);
    res.raw_max_rel_err = std::max(res.raw_max_rel_err, raw);
    if (raw > tol && std::abs(analytic[i] - numeric) <= noise) {
      ++res.rounding_limited;
    } else {
      res.max_rel_err = std::max(res.max_rel_err, raw);
    }
    ++res.checked;
  }
  return res;
}

}  // namespace pebble::testing
