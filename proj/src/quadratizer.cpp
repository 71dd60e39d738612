#include "hamd/quadratizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "hamd/native_model.hpp"

namespace hamd {

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

double rosenberg_penalty(bool xi, bool xj, bool w, double lambda_r) {
  const int a = xi, b = xj, c = w;
  return lambda_r * static_cast<double>(3 * c + a * b - 2 * a * c - 2 * b * c);
}

QuboBuilder::QuboBuilder(std::size_t n, std::size_t n_aux) : used_(n_aux, false) {
  qubo_.n = n;
  qubo_.n_aug = n + n_aux;
  qubo_.linear.assign(qubo_.n_aug, 0.0);
  qubo_.native_pairs.assign(n * n, 0.0);
  qubo_.aux_couplings.resize(n_aux);
  qubo_.aux_map.resize(n_aux);
}

RosenbergUpdates QuboBuilder::quadratize_term(std::size_t i, std::size_t j, std::size_t k, double coeff,
                                              std::size_t aux_index, double lambda_r) {
  if (aux_index >= used_.size()) throw std::invalid_argument("quadratize_term: aux index out of range");
  if (used_[aux_index]) throw std::invalid_argument("quadratize_term: aux index already allocated");
  if (i == j || i == k || j == k) throw std::invalid_argument("quadratize_term: indices must be distinct");
  const std::size_t n = qubo_.n;
  if (i >= n || j >= n || k >= n) throw std::invalid_argument("quadratize_term: index out of range");
  used_[aux_index] = true;

  const std::size_t w = qubo_.aux_var(aux_index);
  qubo_.aux_map[aux_index] = {i, j, k, coeff};
  qubo_.aux_couplings[aux_index] = {QuboEntry{k, w, 0.0}, QuboEntry{i, w, 0.0}, QuboEntry{j, w, 0.0}};

  RosenbergUpdates u;
  u.objective.push_back({k, w, coeff});
  u.penalty_linear.push_back({w, 3.0 * lambda_r});
  u.penalty_quadratic.push_back({std::min(i, j), std::max(i, j), lambda_r});
  u.penalty_quadratic.push_back({i, w, -2.0 * lambda_r});
  u.penalty_quadratic.push_back({j, w, -2.0 * lambda_r});
  return u;
}

void QuboBuilder::add_linear(std::size_t var, double value) { qubo_.linear.at(var) += value; }

void QuboBuilder::add_pair(std::size_t a, std::size_t b, double value) {
  if (a == b) {
    add_linear(a, value);  // x² = x
    return;
  }
  const std::size_t r = std::min(a, b), c = std::max(a, b);
  const std::size_t n = qubo_.n;
  if (c < n) {
    qubo_.native_pairs[r * n + c] += value;
    return;
  }
  if (r >= n) throw std::invalid_argument("add_pair: auxiliaries do not couple to each other");
  auto& slots = qubo_.aux_couplings.at(c - n);
  for (auto& e : slots) {
    if (e.row == r && e.col == c) {
      e.value += value;
      return;
    }
  }
  throw std::invalid_argument("add_pair: auxiliary coupling outside its source monomial");
}

void QuboBuilder::apply(std::span<const LinearUpdate> linear) {
  for (const auto& u : linear) add_linear(u.var, u.value);
}

void QuboBuilder::apply(std::span<const QuboEntry> pairs) {
  for (const auto& e : pairs) add_pair(e.row, e.col, e.value);
}

double QuboBuilder::max_abs() const {
  double m = 0.0;
  for (double v : qubo_.linear) m = std::max(m, std::abs(v));
  const std::size_t n = qubo_.n;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) m = std::max(m, std::abs(qubo_.native_pairs[r * n + c]));
  }
  for (const auto& slots : qubo_.aux_couplings) {
    for (const auto& e : slots) m = std::max(m, std::abs(e.value));
  }
  return m;
}

AugmentedQubo QuboBuilder::finish() {
  for (std::size_t t = 0; t < used_.size(); ++t) {
    if (!used_[t]) throw std::logic_error("QuboBuilder: auxiliary " + std::to_string(t) + " never allocated");
  }
  qubo_.build_adjacency();
  return std::move(qubo_);
}

double AugmentedQubo::matrix_energy(std::span<const std::uint8_t> state) const {
  if (state.size() != n_aug) throw std::invalid_argument("matrix_energy: state length does not match n_aug");
  double e = 0.0;
  for (std::size_t v = 0; v < n_aug; ++v) {
    if (state[v]) e += linear[v];
  }
  std::vector<std::size_t> on;
  for (std::size_t i = 0; i < n; ++i) {
    if (state[i]) on.push_back(i);
  }
  for (std::size_t a = 0; a < on.size(); ++a) {
    for (std::size_t b = a + 1; b < on.size(); ++b) e += native_pairs[on[a] * n + on[b]];
  }
  for (std::size_t t = 0; t < aux_couplings.size(); ++t) {
    if (!state[n + t]) continue;
    for (const auto& c : aux_couplings[t]) {
      if (state[c.row]) e += c.value;
    }
  }
  return e;
}

std::vector<QuboEntry> AugmentedQubo::entries() const {
  std::vector<QuboEntry> out;
  for (std::size_t v = 0; v < n_aug; ++v) {
    if (linear[v] != 0.0) out.push_back({v, v, linear[v]});
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) {
      const double q = native_pairs[r * n + c];
      if (q != 0.0) out.push_back({r, c, q});
    }
  }
  for (const auto& slots : aux_couplings) {
    for (const auto& e : slots) {
      if (e.value != 0.0) out.push_back(e);
    }
  }
  std::sort(out.begin(), out.end(), [](const QuboEntry& a, const QuboEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  return out;
}

void AugmentedQubo::build_adjacency() {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> nbrs(n_aug);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) {
      const double q = native_pairs[r * n + c];
      if (q == 0.0) continue;
      nbrs[r].emplace_back(static_cast<std::uint32_t>(c), q);
      nbrs[c].emplace_back(static_cast<std::uint32_t>(r), q);
    }
  }
  for (const auto& slots : aux_couplings) {
    for (const auto& e : slots) {
      if (e.value == 0.0) continue;
      nbrs[e.row].emplace_back(static_cast<std::uint32_t>(e.col), e.value);
      nbrs[e.col].emplace_back(static_cast<std::uint32_t>(e.row), e.value);
    }
  }
  adj_start.assign(n_aug + 1, 0);
  for (std::size_t v = 0; v < n_aug; ++v) adj_start[v + 1] = adj_start[v] + nbrs[v].size();
  adj_index.resize(adj_start.back());
  adj_weight.resize(adj_start.back());
  for (std::size_t v = 0; v < n_aug; ++v) {
    std::sort(nbrs[v].begin(), nbrs[v].end());
    for (std::size_t e = 0; e < nbrs[v].size(); ++e) {
      adj_index[adj_start[v] + e] = nbrs[v][e].first;
      adj_weight[adj_start[v] + e] = nbrs[v][e].second;
    }
  }
}

AugmentedQubo build_augmented(const PortfolioInstance& instance, double lambda_multiplier) {
  if (!(lambda_multiplier > 0.0)) throw std::invalid_argument("build_augmented: multiplier must be positive");
  const std::size_t n = instance.n;
  const std::size_t m = instance.triples.size();
  QuboBuilder b(n, m);

  for (std::size_t i = 0; i < n; ++i) {
    b.add_linear(i, instance.cov(i, i) - instance.expected_return[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double q = instance.cov(i, j) + instance.cov(j, i);
      if (q != 0.0) b.add_pair(i, j, q);
    }
  }
  std::vector<RosenbergUpdates> reductions;
  reductions.reserve(m);
  for (std::size_t t = 0; t < m; ++t) {
    const auto& tr = instance.triples[t];
    reductions.push_back(b.quadratize_term(tr.i, tr.j, tr.k, tr.coeff, t));
    b.apply(reductions.back().objective);
  }

  auto& q = b.qubo();
  q.k = instance.k;
  q.lambda_multiplier = lambda_multiplier;
  q.max_abs_q = b.max_abs();
  q.lambda_k = lambda_multiplier * 4.0 * static_cast<double>(n) * q.max_abs_q;

  // λ_K(Σx − K)² = λ_K[Σx_i + 2Σ_{i<j} x_i x_j − 2KΣx_i + K²]
  const double lk = q.lambda_k;
  const double kk = static_cast<double>(instance.k);
  for (std::size_t i = 0; i < n; ++i) {
    b.add_linear(i, lk * (1.0 - 2.0 * kk));
    for (std::size_t j = i + 1; j < n; ++j) b.add_pair(i, j, 2.0 * lk);
  }
  q.constant = lk * kk * kk;

  for (const auto& r : reductions) {
    b.apply(r.penalty_linear);
    b.apply(r.penalty_quadratic);
  }
  return b.finish();
}

EnergyDecomposition augmented_energy(const AugmentedQubo& qubo, const PortfolioInstance& instance,
                                     std::span<const std::uint8_t> state) {
  if (state.size() != qubo.n_aug) throw std::invalid_argument("augmented_energy: state length does not match n_aug");
  if (instance.n != qubo.n) throw std::invalid_argument("augmented_energy: instance does not match qubo");
  EnergyDecomposition d;
  d.matrix_energy = qubo.matrix_energy(state);

  const std::size_t n = qubo.n;
  std::vector<double> x(n);
  std::size_t card = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = state[i] ? 1.0 : 0.0;
    card += state[i] ? 1 : 0;
  }
  d.native = eval_native(instance, x);

  double cubic_native = 0.0;
  for (const auto& t : instance.triples) cubic_native += t.coeff * x[t.i] * x[t.j] * x[t.k];
  double cubic_surrogate = 0.0;
  double ros = 0.0;
  for (std::size_t t = 0; t < qubo.aux_map.size(); ++t) {
    const auto& a = qubo.aux_map[t];
    const bool w = state[n + t] != 0;
    if (w && state[a.k]) cubic_surrogate += a.coeff;
    ros += rosenberg_penalty(state[a.i] != 0, state[a.j] != 0, w, qubo.lambda_r);
  }
  d.surrogate_native = d.native - cubic_native + cubic_surrogate;
  const double viol = static_cast<double>(card) - static_cast<double>(qubo.k);
  d.card_penalty = qubo.lambda_k * viol * viol;
  d.rosenberg_penalty = ros;
  return d;
}

DecodedState decode(const AugmentedQubo& qubo, std::span<const std::uint8_t> state) {
  if (state.size() != qubo.n_aug) throw std::invalid_argument("decode: state length does not match n_aug");
  DecodedState out;
  out.x.assign(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(qubo.n));
  out.w.assign(state.begin() + static_cast<std::ptrdiff_t>(qubo.n), state.end());
  for (auto b : out.x) out.cardinality += b ? 1 : 0;
  return out;
}

std::vector<std::uint8_t> embed(const AugmentedQubo& qubo, std::span<const std::uint8_t> x) {
  if (x.size() != qubo.n) throw std::invalid_argument("embed: length does not match n");
  std::vector<std::uint8_t> s(qubo.n_aug, 0);
  std::copy(x.begin(), x.end(), s.begin());
  for (std::size_t t = 0; t < qubo.aux_map.size(); ++t) {
    s[qubo.n + t] = (x[qubo.aux_map[t].i] && x[qubo.aux_map[t].j]) ? 1 : 0;
  }
  return s;
}

std::string export_qubo_coo(const AugmentedQubo& qubo) {
  std::ostringstream os;
  for (const auto& e : qubo.entries()) os << e.row << ' ' << e.col << ' ' << hex(e.value) << '\n';
  return os.str();
}

std::string export_qubo_header(const AugmentedQubo& qubo) {
  std::ostringstream os;
  os << "hamd-qubo 1\n";
  os << "n " << qubo.n << '\n';
  os << "n_aug " << qubo.n_aug << '\n';
  os << "k " << qubo.k << '\n';
  os << "lambda_r " << hex(qubo.lambda_r) << '\n';
  os << "lambda_k " << hex(qubo.lambda_k) << '\n';
  os << "lambda_multiplier " << hex(qubo.lambda_multiplier) << '\n';
  os << "max_abs_q " << hex(qubo.max_abs_q) << '\n';
  os << "constant " << hex(qubo.constant) << '\n';
  os << "aux " << qubo.aux_map.size() << '\n';
  for (std::size_t t = 0; t < qubo.aux_map.size(); ++t) {
    const auto& a = qubo.aux_map[t];
    os << qubo.aux_var(t) << ' ' << a.i << ' ' << a.j << ' ' << a.k << '\n';
  }
  return os.str();
}

}  // namespace hamd
