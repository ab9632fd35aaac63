#include "tripletnet/grad_check.hpp"

#include <cmath>

namespace tripletnet {

template <typename T>
double grad_check(std::vector<Tensor<T>> params,
                  const std::function<Tensor<T>(Tape<T>&)>& make_loss, T fd_step) {
  for (auto& p : params) p.zero_grad();

  Tape<T> tape;
  Tensor<T> loss = make_loss(tape);
  if (!std::isfinite(double(loss.scalar()))) throw NumericError("grad_check: non-finite loss");
  tape.backward(loss);

  std::vector<std::vector<T>> autodiff;
  autodiff.reserve(params.size());
  for (auto& p : params) {
    const T* g = p.grad_data();
    autodiff.emplace_back(g ? std::vector<T>(g, g + p.numel()) : std::vector<T>(size_t(p.numel()), T(0)));
  }

  auto eval = [&]() -> double {
    Tape<T> t;
    Tensor<T> l = make_loss(t);
    const double v = double(l.scalar());
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss");
    return v;
  };

  double max_rel = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = params[pi];
    for (int64_t i = 0; i < p.numel(); ++i) {
      const T saved = p.data()[i];
      p.data()[i] = saved + fd_step;
      const double up = eval();
      p.data()[i] = saved - fd_step;
      const double down = eval();
      p.data()[i] = saved;
      const double fd = (up - down) / (2.0 * double(fd_step));
      const double ad = double(autodiff[pi][size_t(i)]);
      const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-8});
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

template double grad_check<float>(std::vector<Tensor<float>>,
                                  const std::function<Tensor<float>(Tape<float>&)>&, float);
template double grad_check<double>(std::vector<Tensor<double>>,
                                   const std::function<Tensor<double>(Tape<double>&)>&, double);

}  // namespace tripletnet
