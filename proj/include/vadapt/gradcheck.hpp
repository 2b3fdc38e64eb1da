#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vadapt/model.hpp"

namespace vadapt {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  std::int64_t coords_checked = 0;
  bool ok = false;
};

// Central finite differences against the tape's analytic gradients, f64.
// `builder` maps watched leaves to a scalar loss; it runs once with a tape
// and repeatedly without one on perturbed leaves. Relative error per
// coordinate is |a - n| / max(|a|, |n|, floor); the floor turns the check
// into an absolute bound where the gradient is too small for a difference
// quotient to resolve its relative error.
inline GradCheckReport check_gradients(
    const std::string& name, std::vector<Tensor<double>> leaves,
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&,
                                       Tape<double>*)>& builder,
    double tol, std::uint64_t seed, double h = 1e-5,
    std::int64_t max_coords_per_leaf = 6, double floor = 1e-3) {
  GradCheckReport rep;
  rep.name = name;
  rep.tolerance = tol;

  Tape<double> tape;
  std::vector<Tensor<double>> watched;
  watched.reserve(leaves.size());
  for (auto& l : leaves) watched.push_back(tape.watch(l));
  Tensor<double> loss = builder(watched, &tape);
  if (loss.numel() != 1) throw UsageError("gradcheck: loss must be scalar");
  tape.backward(loss);
  std::vector<Tensor<double>> grads;
  grads.reserve(watched.size());
  for (auto& wt : watched) grads.push_back(tape.grad(wt));

  Rng rng(seed);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const auto n = leaves[li].numel();
    std::vector<std::int64_t> coords;
    if (n <= max_coords_per_leaf) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::int64_t i = 0; i < max_coords_per_leaf; ++i)
        coords.push_back(rng.uniform_int(0, n - 1));
    }
    for (auto ci : coords) {
      auto probe = [&](double delta) {
        std::vector<double> buf(leaves[li].data().begin(), leaves[li].data().end());
        buf[static_cast<std::size_t>(ci)] += delta;
        std::vector<Tensor<double>> pert = leaves;
        pert[li] = Tensor<double>::from_data(leaves[li].dims(), std::move(buf));
        return builder(pert, nullptr).scalar();
      };
      const double numeric = (probe(h) - probe(-h)) / (2.0 * h);
      const double analytic = grads[li].data()[static_cast<std::size_t>(ci)];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      rep.max_rel_err = std::max(rep.max_rel_err, std::abs(analytic - numeric) / denom);
      rep.coords_checked += 1;
    }
  }
  rep.ok = rep.max_rel_err < tol;
  return rep;
}

// Nudges every parameter off its initialization (zero gates, ring offsets,
// zeroed projections) so finite differences probe a generic smooth point.
inline void jitter_params(ParamRefs<double>& refs, Rng& rng, double scale = 0.05) {
  for (auto* p : refs) {
    std::vector<double> v(p->value.data().begin(), p->value.data().end());
    for (auto& x : v) x += rng.normal(0.0, scale);
    p->value = Tensor<double>::from_data(p->value.dims(), std::move(v));
  }
}

// The full verification suite: one finite-difference check per
// differentiable operation, the composite modules, and the whole micro
// model. Per-op tolerance 1e-5; full model 1e-4.
std::vector<GradCheckReport> gradcheck_suite(bool include_full_model = true);

}  // namespace vadapt
