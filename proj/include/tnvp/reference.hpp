#pragma once

#include "tnvp/temporal_model.hpp"

namespace tnvp::reference {

/// Independent extended-precision (long double) evaluation of the mean
/// conditional NLL, driven only by the model's masks, net shapes and the
/// gathered parameter values. Shares no arithmetic with the production path.
long double conditional_nll(const TNVPModel& model, const Matrix& x_t, const Matrix& x_prev);

/// Central-difference gradient of `conditional_nll` w.r.t. every gathered
/// parameter, in gather order. Perturbation and differencing both happen in
/// long double, so the round-off floor is about 2^-64 |f| / step.
Vector conditional_nll_gradient(const TNVPModel& model, const Matrix& x_t, const Matrix& x_prev, double step);

}  // namespace tnvp::reference
