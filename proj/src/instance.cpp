#include "hamd/instance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "hamd/rng.hpp"

namespace hamd {

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw std::invalid_argument("instance: bad number '" + token + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& token) {
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("instance: bad integer '" + token + "'");
  }
  return std::stoull(token);
}

// Pairs of non-anchor members per sector, interleaved round-robin across
// sectors so any prefix is sector-balanced.
std::vector<std::pair<std::size_t, std::size_t>> intra_sector_pairs(
    const std::vector<std::vector<std::size_t>>& members,
    const std::vector<std::size_t>& anchors) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> per_sector(members.size());
  for (std::size_t s = 0; s < members.size(); ++s) {
    const auto& m = members[s];
    for (std::size_t a = 0; a < m.size(); ++a) {
      if (m[a] == anchors[s]) continue;
      for (std::size_t b = a + 1; b < m.size(); ++b) {
        if (m[b] == anchors[s]) continue;
        per_sector[s].emplace_back(m[a], m[b]);
      }
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (const auto& ps : per_sector) {
      if (round < ps.size()) {
        out.push_back(ps[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

}  // namespace

void PortfolioInstance::index_triples() {
  triples_of.assign(n, {});
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const auto& tr = triples[t];
    if (tr.i >= n || tr.j >= n || tr.k >= n) continue;  // validate() reports it
    triples_of[tr.i].push_back(t);
    triples_of[tr.j].push_back(t);
    triples_of[tr.k].push_back(t);
  }
}

void PortfolioInstance::validate() const {
  if (n == 0 || k == 0) throw std::invalid_argument("instance: n and K must be positive");
  if (k >= n) throw std::invalid_argument("instance: K must be smaller than n");
  if (covariance.size() != n * n) throw std::invalid_argument("instance: covariance size mismatch");
  if (expected_return.size() != n) throw std::invalid_argument("instance: return vector size mismatch");
  if (sector_of.size() != n) throw std::invalid_argument("instance: sector vector size mismatch");
  if (!loading.empty() && loading.size() != n) {
    throw std::invalid_argument("instance: loading vector size mismatch");
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) {
      if (cov(r, c) != cov(c, r)) throw std::invalid_argument("instance: covariance not symmetric");
    }
  }
  for (double v : covariance) {
    if (!std::isfinite(v)) throw std::invalid_argument("instance: non-finite covariance entry");
  }
  for (std::size_t s : sector_of) {
    if (s >= n_sectors) throw std::invalid_argument("instance: sector index out of range");
  }
  const auto anchors = loading.empty() ? std::vector<std::size_t>{} : sector_anchors(*this);
  std::set<std::pair<std::pair<std::size_t, std::size_t>, std::size_t>> seen;
  for (const auto& t : triples) {
    if (t.i >= n || t.j >= n || t.k >= n) throw std::invalid_argument("instance: triple index out of range");
    if (t.i == t.j || t.i == t.k || t.j == t.k) {
      throw std::invalid_argument("instance: triple indices must be distinct");
    }
    if (!(t.coeff >= 0.0) || !std::isfinite(t.coeff)) {
      throw std::invalid_argument("instance: cubic coefficient must be finite and nonnegative");
    }
    if (sector_of[t.i] != sector_of[t.k] || sector_of[t.j] != sector_of[t.k]) {
      throw std::invalid_argument("instance: triple spans several sectors");
    }
    if (!anchors.empty() && anchors[sector_of[t.k]] != t.k) {
      throw std::invalid_argument("instance: third triple index is not the sector anchor");
    }
    if (!seen.insert({std::minmax(t.i, t.j), t.k}).second) {
      throw std::invalid_argument("instance: duplicate triple");
    }
  }
}

bool operator==(const PortfolioInstance& a, const PortfolioInstance& b) {
  return a.n == b.n && a.k == b.k && a.seed == b.seed && a.n_sectors == b.n_sectors &&
         a.alpha_cubic == b.alpha_cubic && a.quad_scale == b.quad_scale &&
         a.covariance == b.covariance && a.expected_return == b.expected_return &&
         a.triples == b.triples && a.sector_of == b.sector_of && a.loading == b.loading;
}

Portfolio Portfolio::from_indices(std::size_t n, std::span<const std::size_t> chosen) {
  Portfolio p(n);
  for (std::size_t i : chosen) {
    if (i >= n) throw std::invalid_argument("portfolio: index out of range");
    p.set(i, true);
  }
  return p;
}

Portfolio Portfolio::from_bits(std::span<const std::uint8_t> bits) {
  Portfolio p(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) p.set(i, bits[i] != 0);
  return p;
}

void Portfolio::set(std::size_t i, bool on) {
  const bool was = selection_[i] != 0;
  if (was == on) return;
  selection_[i] = on ? 1 : 0;
  if (on) {
    ++cardinality_;
  } else {
    --cardinality_;
  }
}

std::vector<double> Portfolio::as_real() const {
  return {selection_.begin(), selection_.end()};
}

std::vector<std::size_t> Portfolio::chosen() const {
  std::vector<std::size_t> out;
  out.reserve(cardinality_);
  for (std::size_t i = 0; i < selection_.size(); ++i) {
    if (selection_[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Portfolio::unchosen() const {
  std::vector<std::size_t> out;
  out.reserve(selection_.size() - cardinality_);
  for (std::size_t i = 0; i < selection_.size(); ++i) {
    if (!selection_[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> sector_anchors(const PortfolioInstance& instance) {
  std::vector<std::size_t> anchor(instance.n_sectors, instance.n);
  for (std::size_t i = 0; i < instance.n; ++i) {
    const std::size_t s = instance.sector_of[i];
    if (anchor[s] == instance.n || instance.loading[i] > instance.loading[anchor[s]]) {
      anchor[s] = i;
    }
  }
  return anchor;
}

PortfolioInstance generate_instance(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (n == 0 || k == 0) throw std::invalid_argument("generate_instance: n and K must be positive");
  if (k >= n) throw std::invalid_argument("generate_instance: K must be smaller than n");
  if (n < kNumSectors) throw std::invalid_argument("generate_instance: n must be at least n_sectors");

  PortfolioInstance inst;
  inst.n = n;
  inst.k = k;
  inst.seed = seed;

  inst.sector_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) inst.sector_of[i] = i % kNumSectors;

  // One sector factor per asset, unit factor variance.
  Rng loadings_rng(seed, "loadings");
  inst.loading.resize(n);
  for (auto& l : inst.loading) l = loadings_rng.uniform(0.5, 1.5);
  std::vector<double> idio(n);
  for (auto& d : idio) d = loadings_rng.uniform(0.05, 0.25);

  inst.covariance.assign(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (inst.sector_of[r] == inst.sector_of[c]) {
        inst.covariance[r * n + c] = inst.loading[r] * inst.loading[c];
      }
    }
    inst.covariance[r * n + r] += idio[r];
  }

  Rng returns_rng(seed, "returns");
  std::vector<double> sector_base(kNumSectors);
  for (auto& b : sector_base) b = returns_rng.uniform(0.05, 0.15);
  inst.expected_return.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    inst.expected_return[i] = sector_base[inst.sector_of[i]] + returns_rng.normal(0.0, 0.02);
  }

  double off_sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (r != c) off_sum += std::abs(inst.covariance[r * n + c]);
    }
  }
  inst.quad_scale = off_sum / static_cast<double>(n * (n - 1));

  std::vector<std::vector<std::size_t>> members(kNumSectors);
  for (std::size_t i = 0; i < n; ++i) members[inst.sector_of[i]].push_back(i);
  const auto anchors = sector_anchors(inst);
  auto pairs = intra_sector_pairs(members, anchors);

  // At n >= 200 the triple count is exactly 4n. Round-robin sectors are
  // large enough there that the pair pool always covers 4n, so only the
  // subsampling branch is reachable.
  const std::size_t target = 4 * n;
  if (n >= 200 && pairs.size() > target) {
    Rng pick_rng(seed, "triples");
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
    for (std::size_t t = 0; t < target; ++t) {
      const std::size_t r = t + pick_rng.below(order.size() - t);
      std::swap(order[t], order[r]);
    }
    order.resize(target);
    std::sort(order.begin(), order.end());
    std::vector<std::pair<std::size_t, std::size_t>> kept;
    kept.reserve(target);
    for (std::size_t t : order) kept.push_back(pairs[t]);
    pairs = std::move(kept);
  }

  Rng coeff_rng(seed, "coefficients");
  const double scale = inst.quad_scale * inst.alpha_cubic;
  inst.triples.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    inst.triples.push_back({a, b, anchors[inst.sector_of[a]], scale * coeff_rng.exponential(1.0)});
  }

  inst.index_triples();
  return inst;
}

std::string serialize_instance(const PortfolioInstance& inst) {
  std::ostringstream os;
  os << "hamd-instance " << kInstanceFormatVersion << '\n';
  os << "n " << inst.n << '\n';
  os << "k " << inst.k << '\n';
  os << "seed " << inst.seed << '\n';
  os << "n_sectors " << inst.n_sectors << '\n';
  os << "alpha_cubic " << hex(inst.alpha_cubic) << '\n';
  os << "quad_scale " << hex(inst.quad_scale) << '\n';
  os << "triples " << inst.triples.size() << '\n';
  os << "has_loadings " << (inst.loading.empty() ? 0 : 1) << '\n';
  os << "covariance\n";
  for (std::size_t r = 0; r < inst.n; ++r) {
    for (std::size_t c = 0; c < inst.n; ++c) os << (c ? " " : "") << hex(inst.cov(r, c));
    os << '\n';
  }
  os << "returns\n";
  for (std::size_t i = 0; i < inst.n; ++i) os << (i ? " " : "") << hex(inst.expected_return[i]);
  os << "\nsectors\n";
  for (std::size_t i = 0; i < inst.n; ++i) os << (i ? " " : "") << inst.sector_of[i];
  os << '\n';
  if (!inst.loading.empty()) {
    os << "loadings\n";
    for (std::size_t i = 0; i < inst.n; ++i) os << (i ? " " : "") << hex(inst.loading[i]);
    os << '\n';
  }
  os << "cubic\n";
  for (const auto& t : inst.triples) {
    os << t.i << ' ' << t.j << ' ' << t.k << ' ' << hex(t.coeff) << '\n';
  }
  os << "end\n";
  return os.str();
}

PortfolioInstance parse_instance(const std::string& text) {
  std::istringstream is(text);
  auto next = [&is]() {
    std::string tok;
    if (!(is >> tok)) throw std::invalid_argument("instance: unexpected end of file");
    return tok;
  };
  auto expect = [&next](const std::string& word) {
    const auto tok = next();
    if (tok != word) throw std::invalid_argument("instance: expected '" + word + "', got '" + tok + "'");
  };

  expect("hamd-instance");
  if (parse_uint(next()) != static_cast<std::uint64_t>(kInstanceFormatVersion)) {
    throw std::invalid_argument("instance: unsupported format version");
  }
  PortfolioInstance inst;
  expect("n");
  inst.n = parse_uint(next());
  expect("k");
  inst.k = parse_uint(next());
  expect("seed");
  inst.seed = parse_uint(next());
  expect("n_sectors");
  inst.n_sectors = parse_uint(next());
  expect("alpha_cubic");
  inst.alpha_cubic = parse_double(next());
  expect("quad_scale");
  inst.quad_scale = parse_double(next());
  expect("triples");
  const auto n_triples = parse_uint(next());
  expect("has_loadings");
  const bool has_loadings = parse_uint(next()) != 0;

  if (inst.n == 0 || inst.n > 100000) throw std::invalid_argument("instance: implausible n");
  expect("covariance");
  inst.covariance.resize(inst.n * inst.n);
  for (auto& v : inst.covariance) v = parse_double(next());
  expect("returns");
  inst.expected_return.resize(inst.n);
  for (auto& v : inst.expected_return) v = parse_double(next());
  expect("sectors");
  inst.sector_of.resize(inst.n);
  for (auto& s : inst.sector_of) s = parse_uint(next());
  if (has_loadings) {
    expect("loadings");
    inst.loading.resize(inst.n);
    for (auto& v : inst.loading) v = parse_double(next());
  }
  expect("cubic");
  for (std::uint64_t t = 0; t < n_triples; ++t) {
    Triple tr;
    auto tok = next();
    if (tok == "end") throw std::invalid_argument("instance: fewer triples than declared");
    tr.i = parse_uint(tok);
    tr.j = parse_uint(next());
    tr.k = parse_uint(next());
    tr.coeff = parse_double(next());
    inst.triples.push_back(tr);
  }
  const auto tail = next();
  if (tail != "end") throw std::invalid_argument("instance: more payload than declared in header");

  inst.validate();
  inst.index_triples();
  return inst;
}

void save_instance(const PortfolioInstance& instance, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << serialize_instance(instance);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PortfolioInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_instance(buf.str());
}

}  // namespace hamd
