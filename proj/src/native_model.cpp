#include "hamd/native_model.hpp"

#include <stdexcept>

namespace hamd {

namespace {

void check_length(const PortfolioInstance& instance, std::size_t len, const char* what) {
  if (len != instance.n) {
    throw std::invalid_argument(std::string(what) + ": vector length does not match n");
  }
}

double well(double x) { return x * x * (x - 1.0) * (x - 1.0); }
double well_d1(double x) { return 4.0 * x * x * x - 6.0 * x * x + 2.0 * x; }
double well_d2(double x) { return 12.0 * x * x - 12.0 * x + 2.0; }

// Σx, row by row.
void sigma_times(const PortfolioInstance& instance, std::span<const double> x, std::span<double> out) {
  const std::size_t n = instance.n;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = &instance.covariance[r * n];
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

}  // namespace

double eval_native(const PortfolioInstance& instance, std::span<const double> x) {
  check_length(instance, x.size(), "eval_native");
  const std::size_t n = instance.n;
  double quad = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (x[r] == 0.0) continue;
    const double* row = &instance.covariance[r * n];
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
    quad += x[r] * acc;
  }
  double lin = 0.0;
  for (std::size_t i = 0; i < n; ++i) lin += instance.expected_return[i] * x[i];
  double cubic = 0.0;
  for (const auto& t : instance.triples) cubic += t.coeff * x[t.i] * x[t.j] * x[t.k];
  return quad - lin + cubic;
}

double eval_native(const PortfolioInstance& instance, const Portfolio& portfolio) {
  const auto x = portfolio.as_real();
  return eval_native(instance, x);
}

double eval_effective_energy(const PortfolioInstance& instance, std::span<const double> x,
                             const EnergyParams& params) {
  double value = eval_native(instance, x);
  if (params.beta != 0.0) {
    double w = 0.0;
    for (double xi : x) w += well(xi);
    value += params.beta * w;
  }
  return value;
}

double energy_and_gradient(const PortfolioInstance& instance, std::span<const double> x,
                           const EnergyParams& params, std::span<double> grad) {
  check_length(instance, x.size(), "gradient");
  check_length(instance, grad.size(), "gradient");
  const std::size_t n = instance.n;
  sigma_times(instance, x, grad);
  double quad = 0.0;
  double lin = 0.0;
  double wells = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    quad += x[i] * grad[i];
    lin += instance.expected_return[i] * x[i];
    wells += well(x[i]);
    grad[i] = 2.0 * grad[i] - instance.expected_return[i] + params.beta * well_d1(x[i]);
  }
  double cubic = 0.0;
  for (const auto& t : instance.triples) {
    const double xi = x[t.i], xj = x[t.j], xk = x[t.k];
    cubic += t.coeff * xi * xj * xk;
    grad[t.i] += t.coeff * xj * xk;
    grad[t.j] += t.coeff * xi * xk;
    grad[t.k] += t.coeff * xi * xj;
  }
  return quad - lin + cubic + params.beta * wells;
}

std::vector<double> gradient(const PortfolioInstance& instance, std::span<const double> x,
                             const EnergyParams& params) {
  std::vector<double> g(instance.n);
  check_length(instance, x.size(), "gradient");
  energy_and_gradient(instance, x, params, g);
  return g;
}

void hvp_into(const PortfolioInstance& instance, std::span<const double> x,
              std::span<const double> v, const EnergyParams& params, std::span<double> out) {
  check_length(instance, x.size(), "hvp");
  check_length(instance, v.size(), "hvp");
  check_length(instance, out.size(), "hvp");
  sigma_times(instance, v, out);
  for (std::size_t i = 0; i < instance.n; ++i) {
    out[i] = 2.0 * out[i] + params.beta * well_d2(x[i]) * v[i];
  }
  for (const auto& t : instance.triples) {
    const double xi = x[t.i], xj = x[t.j], xk = x[t.k];
    const double vi = v[t.i], vj = v[t.j], vk = v[t.k];
    out[t.i] += t.coeff * (xk * vj + xj * vk);
    out[t.j] += t.coeff * (xk * vi + xi * vk);
    out[t.k] += t.coeff * (xj * vi + xi * vj);
  }
}

std::vector<double> hvp(const PortfolioInstance& instance, std::span<const double> x,
                        std::span<const double> v, const EnergyParams& params) {
  std::vector<double> out(instance.n);
  check_length(instance, x.size(), "hvp");
  hvp_into(instance, x, v, params, out);
  return out;
}

SwapCache::SwapCache(const PortfolioInstance& instance, const Portfolio& portfolio)
    : instance_(&instance), portfolio_(portfolio) {
  if (portfolio.size() != instance.n) {
    throw std::invalid_argument("SwapCache: portfolio length does not match n");
  }
  position_.resize(instance.n);
  for (std::size_t i = 0; i < instance.n; ++i) {
    auto& list = portfolio_.selected(i) ? selected_ : unselected_;
    position_[i] = list.size();
    list.push_back(i);
  }
  resync();
}

void SwapCache::resync() {
  const auto& inst = *instance_;
  const std::size_t n = inst.n;
  sigma_x_.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = &inst.covariance[r * n];
    double acc = 0.0;
    for (std::size_t c : selected_) acc += row[c];
    sigma_x_[r] = acc;
  }
  triple_count_.assign(inst.triples.size(), 0);
  for (std::size_t t = 0; t < inst.triples.size(); ++t) {
    const auto& tr = inst.triples[t];
    triple_count_[t] = static_cast<unsigned char>(portfolio_.selected(tr.i) + portfolio_.selected(tr.j) +
                                                  portfolio_.selected(tr.k));
  }
  value_ = eval_native(inst, portfolio_);
}

double SwapCache::delta(std::size_t out_idx, std::size_t in_idx) const {
  const auto& inst = *instance_;
  double d = 2.0 * (sigma_x_[in_idx] - sigma_x_[out_idx]) + inst.cov(in_idx, in_idx) +
             inst.cov(out_idx, out_idx) - 2.0 * inst.cov(in_idx, out_idx) +
             inst.expected_return[out_idx] - inst.expected_return[in_idx];
  for (std::size_t t : inst.triples_of[out_idx]) {
    if (triple_count_[t] == 3) d -= inst.triples[t].coeff;
  }
  for (std::size_t t : inst.triples_of[in_idx]) {
    const auto& tr = inst.triples[t];
    if (tr.i == out_idx || tr.j == out_idx || tr.k == out_idx) continue;
    if (triple_count_[t] == 2) d += tr.coeff;
  }
  return d;
}

void SwapCache::delta_matrix(std::vector<double>& out) const {
  const auto& inst = *instance_;
  const std::size_t rows = selected_.size();
  const std::size_t cols = unselected_.size();
  out.resize(rows * cols);

  std::vector<double> out_part(rows);
  for (std::size_t a = 0; a < rows; ++a) {
    const std::size_t o = selected_[a];
    double loss = 0.0;
    for (std::size_t t : inst.triples_of[o]) {
      if (triple_count_[t] == 3) loss += inst.triples[t].coeff;
    }
    out_part[a] = -2.0 * sigma_x_[o] + inst.cov(o, o) + inst.expected_return[o] - loss;
  }
  std::vector<double> in_part(cols);
  for (std::size_t b = 0; b < cols; ++b) {
    const std::size_t i = unselected_[b];
    double gain = 0.0;
    for (std::size_t t : inst.triples_of[i]) {
      if (triple_count_[t] == 2) gain += inst.triples[t].coeff;
    }
    in_part[b] = 2.0 * sigma_x_[i] + inst.cov(i, i) - inst.expected_return[i] + gain;
  }
  for (std::size_t a = 0; a < rows; ++a) {
    const double* cov_row = &inst.covariance[selected_[a] * inst.n];
    double* dst = &out[a * cols];
    for (std::size_t b = 0; b < cols; ++b) {
      dst[b] = out_part[a] + in_part[b] - 2.0 * cov_row[unselected_[b]];
    }
  }
  // A triple {in, out, z} with out and z selected is counted in gain(in) but
  // does not complete once out leaves.
  for (std::size_t b = 0; b < cols; ++b) {
    const std::size_t i = unselected_[b];
    for (std::size_t t : inst.triples_of[i]) {
      if (triple_count_[t] != 2) continue;
      const auto& tr = inst.triples[t];
      for (std::size_t member : {tr.i, tr.j, tr.k}) {
        if (member == i) continue;
        out[position_[member] * cols + b] -= tr.coeff;
      }
    }
  }
}

void SwapCache::apply(std::size_t out_idx, std::size_t in_idx) {
  const auto& inst = *instance_;
  value_ += delta(out_idx, in_idx);
  const std::size_t n = inst.n;
  for (std::size_t r = 0; r < n; ++r) {
    sigma_x_[r] += inst.covariance[r * n + in_idx] - inst.covariance[r * n + out_idx];
  }
  for (std::size_t t : inst.triples_of[out_idx]) --triple_count_[t];
  for (std::size_t t : inst.triples_of[in_idx]) ++triple_count_[t];
  portfolio_.set(out_idx, false);
  portfolio_.set(in_idx, true);

  const std::size_t ps = position_[out_idx];
  const std::size_t pu = position_[in_idx];
  selected_[ps] = in_idx;
  unselected_[pu] = out_idx;
  position_[in_idx] = ps;
  position_[out_idx] = pu;
}

double swap_delta(const PortfolioInstance& instance, const Portfolio& portfolio,
                  std::size_t out_idx, std::size_t in_idx, const SwapCache& cache) {
  if (portfolio.size() != instance.n) throw std::invalid_argument("swap_delta: length mismatch");
  if (!portfolio.feasible(instance.k)) throw std::invalid_argument("swap_delta: portfolio is not exact-K");
  if (out_idx >= instance.n || in_idx >= instance.n) throw std::invalid_argument("swap_delta: index out of range");
  if (!portfolio.selected(out_idx)) throw std::invalid_argument("swap_delta: out_idx is not selected");
  if (portfolio.selected(in_idx)) throw std::invalid_argument("swap_delta: in_idx is already selected");
  if (!(cache.portfolio() == portfolio)) throw std::invalid_argument("swap_delta: cache describes another portfolio");
  return cache.delta(out_idx, in_idx);
}

}  // namespace hamd
