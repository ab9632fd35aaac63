#pragma once

#include <functional>
#include <vector>

#include "tripletnet/tensor.hpp"

namespace tripletnet {

/// Compares reverse-mode gradients against central finite differences.
///
/// `make_loss` rebuilds the scalar loss from the current parameter
/// values on every call (it is re-run with perturbed parameters), so it
/// must be deterministic at fixed inputs. Returns the max over all
/// parameter elements of |autodiff - fd| / max(|autodiff|, |fd|, 1e-8).
template <typename T>
double grad_check(std::vector<Tensor<T>> params,
                  const std::function<Tensor<T>(Tape<T>&)>& make_loss, T fd_step = T(1e-4));

}  // namespace tripletnet
