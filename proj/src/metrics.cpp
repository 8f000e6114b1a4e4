#include "prbench/metrics.hpp"

#include <algorithm>

#include <boost/math/distributions/beta.hpp>

#include "prbench/error.hpp"
#include "prbench/ops.hpp"

namespace prb {

PrEstimate clopper_pearson(long successes, long n, double confidence) {
  if (n < 1) throw ValueError("clopper_pearson: n must be >= 1");
  if (successes < 0 || successes > n) throw ValueError("clopper_pearson: successes outside [0, n]");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ValueError("clopper_pearson: confidence outside (0, 1)");
  const double tail = (1.0 - confidence) / 2.0;
  const auto k = static_cast<double>(successes);
  const auto m = static_cast<double>(n);
  PrEstimate e;
  e.successes = successes;
  e.n = n;
  e.p_hat = k / m;
  e.lower = successes == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<double>(k, m - k + 1.0), tail);
  e.upper = successes == n ? 1.0
                           : boost::math::quantile(boost::math::beta_distribution<double>(k + 1.0, m - k), 1.0 - tail);
  return e;
}

namespace {

// Stacks `count` clipped perturbations of one input.
Tensor perturbed_batch(const Tensor& x, const PerturbationSpec& pert, Index count, RngStream& rng) {
  const Index size = x.size();
  Shape shape{count};
  shape.insert(shape.end(), x.shape().begin(), x.shape().end());
  Vector v(count * size);
  for (Index j = 0; j < count; ++j) {
    v.segment(j * size, size) =
        (x.values() + sample_delta(pert, x.shape(), rng).values()).cwiseMax(pert.bounds.lo).cwiseMin(pert.bounds.hi);
  }
  return Tensor(std::move(shape), std::move(v));
}

Tensor row_of(const Dataset& data, Index i) {
  const Tensor row = slice_rows(data.inputs, i, 1);
  return row.reshaped(data.input_shape());
}

}  // namespace

PrEstimate estimate_pr(const ModelParams& params, const ModelSpec& spec, const Tensor& x, int y,
                       const PerturbationSpec& pert, long n, RngStream& rng, Index chunk) {
  if (n < 1) throw ValueError("estimate_pr: N must be >= 1");
  pert.validate();
  const ModelParams frozen = params.detached();
  long hits = 0;
  for (long done = 0; done < n;) {
    const Index count = std::min<Index>(chunk, n - done);
    const auto pred = argmax_rows(forward(frozen, spec, perturbed_batch(x.detached(), pert, count, rng)));
    hits += std::count(pred.begin(), pred.end(), y);
    done += count;
  }
  return clopper_pearson(hits, n);
}

PrProfile pr_profile(const ModelParams& params, const ModelSpec& spec, const Dataset& data,
                     const PerturbationSpec& pert, long n, const RngStream& rng) {
  if (data.size() == 0) throw ValueError("pr_dataset: empty test set");
  PrProfile profile;
  profile.total = data.size();
  const auto pred = predict(params, spec, data.inputs);
  for (Index i = 0; i < data.size(); ++i) {
    if (pred[static_cast<std::size_t>(i)] != data.labels[static_cast<std::size_t>(i)]) continue;
    RngStream r = rng.child("point", static_cast<std::uint64_t>(i));
    profile.correct_rows.push_back(i);
    profile.estimates.push_back(
        estimate_pr(params, spec, row_of(data, i), data.labels[static_cast<std::size_t>(i)], pert, n, r));
  }
  return profile;
}

std::optional<double> pr_rate(const PrProfile& profile) {
  if (profile.estimates.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& e : profile.estimates) s += e.p_hat;
  return s / static_cast<double>(profile.estimates.size());
}

std::optional<double> prob_acc_rate(const PrProfile& profile, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw ValueError("prob_acc: rho must lie in (0, 1)");
  if (profile.estimates.empty()) return std::nullopt;
  const auto kept = std::count_if(profile.estimates.begin(), profile.estimates.end(),
                                  [rho](const PrEstimate& e) { return e.p_hat >= 1.0 - rho; });
  return static_cast<double>(kept) / static_cast<double>(profile.estimates.size());
}

std::optional<double> pr_dataset(const ModelParams& params, const ModelSpec& spec, const Dataset& data,
                                 const PerturbationSpec& pert, long n, const RngStream& rng) {
  return pr_rate(pr_profile(params, spec, data, pert, n, rng));
}

std::optional<double> prob_acc(const ModelParams& params, const ModelSpec& spec, const Dataset& data, double rho,
                               const PerturbationSpec& pert, long n, const RngStream& rng) {
  if (!(rho > 0.0 && rho < 1.0)) throw ValueError("prob_acc: rho must lie in (0, 1)");
  return prob_acc_rate(pr_profile(params, spec, data, pert, n, rng), rho);
}

double clean_accuracy(const ModelParams& params, const ModelSpec& spec, const Dataset& data) {
  if (data.size() == 0) throw ValueError("clean_accuracy: empty data set");
  const auto pred = predict(params, spec, data.inputs);
  Index correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

template <typename Attack>
double attacked_accuracy(const ModelParams& params, const ModelSpec& spec, const Dataset& data, Bounds bounds,
                         Index chunk, Attack&& attack) {
  if (data.size() == 0) throw ValueError("adversarial_accuracy: empty test set");
  const ModelParams frozen = params.detached();
  Index correct = 0;
  for (Index begin = 0; begin < data.size(); begin += chunk) {
    const Index count = std::min(chunk, data.size() - begin);
    const Tensor x = slice_rows(data.inputs, begin, count);
    const std::span<const int> y(data.labels.data() + begin, static_cast<std::size_t>(count));
    const Tensor delta = attack(frozen, x, y, begin);
    const auto pred = argmax_rows(forward(frozen, spec, apply_and_clip(x, delta, bounds)));
    for (Index i = 0; i < count; ++i) correct += pred[static_cast<std::size_t>(i)] == y[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

double adversarial_accuracy(const ModelParams& params, const ModelSpec& spec, const Dataset& data,
                            const AttackSpec& atk, const RngStream& rng, Index chunk) {
  return attacked_accuracy(params, spec, data, atk.bounds, chunk,
                           [&](const ModelParams& p, const Tensor& x, std::span<const int> y, Index offset) {
                             return pgd_attack(p, spec, x, y, atk, rng, offset);
                           });
}

double proxy_accuracy(const ModelParams& params, const ModelSpec& spec, const Dataset& data, const AttackSpec& base,
                      const RngStream& rng, Index chunk) {
  return attacked_accuracy(params, spec, data, base.bounds, chunk,
                           [&](const ModelParams& p, const Tensor& x, std::span<const int> y, Index offset) {
                             return auto_proxy(p, spec, x, y, base, rng, offset).delta;
                           });
}

double generalization_error(double train_metric, double test_metric) {
  if (!(train_metric >= 0.0 && train_metric <= 1.0) || !(test_metric >= 0.0 && test_metric <= 1.0)) {
    throw ValueError("generalization_error: rates must lie in [0, 1]");
  }
  return train_metric - test_metric;
}

double estimate_nu(const ModelParams& params, const ModelSpec& spec, const Tensor& x, const PerturbationSpec& pert,
                   long samples, RngStream& rng, Index chunk) {
  if (samples < 1) throw ValueError("estimate_nu: samples must be >= 1");
  PerturbationSpec uniform = pert;
  uniform.family = NoiseFamily::uniform;
  uniform.validate();
  const ModelParams frozen = params.detached();
  Shape one{1};
  one.insert(one.end(), x.shape().begin(), x.shape().end());
  const Vector p0 = softmax(forward(frozen, spec, x.detached().reshaped(one))).values();
  double nu = 0.0;
  for (long done = 0; done < samples;) {
    const Index count = std::min<Index>(chunk, samples - done);
    const Tensor p = softmax(forward(frozen, spec, perturbed_batch(x.detached(), uniform, count, rng)));
    const auto pm = p.matrix();
    for (Index j = 0; j < count; ++j) nu = std::max(nu, (pm.row(j).transpose() - p0).norm());
    done += count;
  }
  return nu;
}

}  // namespace prb
