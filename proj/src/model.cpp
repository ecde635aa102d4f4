#include "sphmix/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "sphmix/rng.hpp"

namespace sphmix {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

}  // namespace

Mixture::Mixture(std::vector<double> weights, std::vector<double> means,
                 std::vector<double> variances, std::size_t d)
    : k_(weights.size()),
      d_(d),
      weights_(std::move(weights)),
      means_(std::move(means)),
      variances_(std::move(variances)) {
  if (k_ == 0) throw std::invalid_argument("mixture: needs at least one component");
  if (d_ == 0) throw std::invalid_argument("mixture: dimension must be positive");
  if (means_.size() != k_ * d_)
    throw std::invalid_argument("mixture: means must hold k vectors of length d");
  if (variances_.size() != k_)
    throw std::invalid_argument("mixture: one variance per component required");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("mixture: weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("mixture: weights must sum to 1 within 1e-12");
  for (double v : variances_) {
    if (!(v > 0.0)) throw std::invalid_argument("mixture: variances must be positive");
  }

  eval_order_.resize(k_);
  std::iota(eval_order_.begin(), eval_order_.end(), std::size_t{0});
  std::sort(eval_order_.begin(), eval_order_.end(),
            [this](std::size_t a, std::size_t b) {
              const double* ma = mean(a);
              const double* mb = mean(b);
              for (std::size_t j = 0; j < d_; ++j) {
                if (ma[j] != mb[j]) return ma[j] < mb[j];
              }
              if (variances_[a] != variances_[b]) return variances_[a] < variances_[b];
              return weights_[a] < weights_[b];
            });

  log_weights_.resize(k_);
  inv_two_var_.resize(k_);
  log_norm_.resize(k_);
  for (std::size_t c = 0; c < k_; ++c) {
    log_weights_[c] = weights_[c] > 0.0 ? std::log(weights_[c]) : 0.0;
    inv_two_var_[c] = 0.5 / variances_[c];
    log_norm_[c] = -0.5 * static_cast<double>(d_) * (kLogTwoPi + std::log(variances_[c]));
  }
}

double Mixture::log_pdf(const double* x) const {
  // First pass: per-component log terms in canonical order.
  double terms[8];
  std::vector<double> heap_terms;
  double* t = terms;
  if (k_ > 8) {
    heap_terms.resize(k_);
    t = heap_terms.data();
  }
  std::size_t live = 0;
  double max_term = -std::numeric_limits<double>::infinity();
  for (std::size_t rank = 0; rank < k_; ++rank) {
    const std::size_t c = eval_order_[rank];
    if (weights_[c] == 0.0) continue;
    const double* mu = mean(c);
    double sq = 0.0;
    for (std::size_t j = 0; j < d_; ++j) {
      const double diff = x[j] - mu[j];
      sq += diff * diff;
    }
    const double term = log_weights_[c] + log_norm_[c] - sq * inv_two_var_[c];
    t[live++] = term;
    if (term > max_term) max_term = term;
  }
  if (live == 0 || !std::isfinite(max_term)) {
    // All contributing terms underflowed to -inf (x astronomically far out).
    return -std::numeric_limits<double>::infinity();
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < live; ++i) acc += std::exp(t[i] - max_term);
  return max_term + std::log(acc);
}

double Mixture::log_pdf(const std::vector<double>& x) const {
  if (x.size() != d_) throw std::invalid_argument("log_pdf: point has wrong dimension");
  return log_pdf(x.data());
}

Dataset Mixture::sample(std::size_t n, std::uint64_t seed) const {
  std::vector<double> cum(k_);
  double acc = 0.0;
  for (std::size_t c = 0; c < k_; ++c) {
    acc += weights_[c];
    cum[c] = acc;
  }
  cum[k_ - 1] = 1.0;

  Dataset out;
  out.n = n;
  out.d = d_;
  out.seed = seed;
  out.samples.resize(n * d_);
  out.labels.resize(n);
  RngStream rng(derive_stream(seed, "mixture-sample"));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t c = 0;
    while (c + 1 < k_ && u >= cum[c]) ++c;
    const double sd = std::sqrt(variances_[c]);
    const double* mu = mean(c);
    double* row = out.row(i);
    for (std::size_t j = 0; j < d_; ++j) row[j] = mu[j] + sd * rng.normal();
    out.labels[i] = static_cast<int>(c);
  }
  return out;
}

Mixture Mixture::canonical() const {
  std::vector<double> w(k_), v(k_), m(k_ * d_);
  for (std::size_t rank = 0; rank < k_; ++rank) {
    const std::size_t c = eval_order_[rank];
    w[rank] = weights_[c];
    v[rank] = variances_[c];
    std::copy(mean(c), mean(c) + d_, m.begin() + rank * d_);
  }
  return Mixture(std::move(w), std::move(m), std::move(v), d_);
}

std::string mixture_to_json(const Mixture& m) {
  nlohmann::json j;
  j["weights"] = m.weights();
  nlohmann::json means = nlohmann::json::array();
  for (std::size_t c = 0; c < m.k(); ++c) {
    means.push_back(std::vector<double>(m.mean(c), m.mean(c) + m.dim()));
  }
  j["means"] = means;
  j["variances"] = m.variances();
  return j.dump(2);
}

Mixture mixture_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.contains("weights") || !j.contains("means") || !j.contains("variances"))
    throw std::invalid_argument("mixture json: weights, means, variances required");
  std::vector<double> weights = j["weights"].get<std::vector<double>>();
  std::vector<double> variances = j["variances"].get<std::vector<double>>();
  const auto& jm = j["means"];
  if (!jm.is_array() || jm.empty())
    throw std::invalid_argument("mixture json: means must be a nonempty array");
  const std::size_t d = jm[0].size();
  std::vector<double> means;
  means.reserve(jm.size() * d);
  for (const auto& row : jm) {
    if (row.size() != d)
      throw std::invalid_argument("mixture json: mean rows must share one length");
    for (const auto& v : row) means.push_back(v.get<double>());
  }
  return Mixture(std::move(weights), std::move(means), std::move(variances), d);
}

}  // namespace sphmix
