// SPDX-License-Identifier: Apache-2.0
//
// Input generators for the benchmark instances and output verification.
//
// Most skewed instances follow the definitions of Helman, Bader and JaJa
// ("A Randomized Parallel Sorting Algorithm with an Experimental Study",
// JPDC 1998). Keys live in the 32-bit range unless noted.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rsort/netsim.hpp"

namespace rsort {

enum class Instance {
  Uniform,
  Gaussian,
  BucketSorted,
  Staggered,
  DeterDupl,
  RandDupl,
  Zero,
  gGroup,
  Reverse,
  Mirrored,
  AllToOne,
};

inline constexpr std::array<std::pair<Instance, std::string_view>, 11> instance_names{{
    {Instance::Uniform, "Uniform"},
    {Instance::Gaussian, "Gaussian"},
    {Instance::BucketSorted, "BucketSorted"},
    {Instance::Staggered, "Staggered"},
    {Instance::DeterDupl, "DeterDupl"},
    {Instance::RandDupl, "RandDupl"},
    {Instance::Zero, "Zero"},
    {Instance::gGroup, "gGroup"},
    {Instance::Reverse, "Reverse"},
    {Instance::Mirrored, "Mirrored"},
    {Instance::AllToOne, "AllToOne"},
}};

inline std::string_view to_string(Instance i) {
  for (auto [v, name] : instance_names)
    if (v == i) return name;
  return "?";
}

inline Instance parse_instance(std::string_view name) {
  for (auto [v, n] : instance_names)
    if (n == name) return v;
  std::string valid;
  for (auto [v, n] : instance_names) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("unknown instance '" + std::string(name) + "' (valid: " + valid + ")");
}

/// Elements per PE as an exact fraction; 1/27 means one element on every
/// 27th PE.
struct Rational {
  std::uint64_t num = 1;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;

  std::string str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }
};

/// Parses "a", "a/b" or "2^k".
inline Rational parse_rational(std::string_view s) {
  auto num = [&](std::string_view t) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
      throw ConfigError("cannot parse '" + std::string(s) + "' as elements per PE");
    return v;
  };
  Rational r;
  if (auto caret = s.find('^'); caret != std::string_view::npos) {
    const auto base = num(s.substr(0, caret)), e = num(s.substr(caret + 1));
    if (base != 2 || e > 40) throw ConfigError("only powers 2^0..2^40 are supported: " + std::string(s));
    r = {std::uint64_t{1} << e, 1};
  } else if (auto slash = s.find('/'); slash != std::string_view::npos) {
    r = {num(s.substr(0, slash)), num(s.substr(slash + 1))};
  } else {
    r = {num(s), 1};
  }
  if (r.num == 0 || r.den == 0) throw ConfigError("elements per PE must be positive: " + std::string(s));
  const auto g = std::gcd(r.num, r.den);
  return {r.num / g, r.den / g};
}

struct InstanceSpec {
  Instance name = Instance::Uniform;
  Rational n_per_pe{1, 1};
  std::uint64_t seed = 1;
};

/// Total element count ceil(p * n_per_pe).
inline std::uint64_t total_elements(const Rational& r, int p) {
  return (static_cast<std::uint64_t>(p) * r.num + r.den - 1) / r.den;
}

/// Number of elements PE `pe` starts with. For n/p = 1/s exactly the PEs
/// with pe mod s == 0 hold one element; all other layouts spread the total
/// as evenly as possible.
inline std::uint64_t local_count(const Rational& r, PeId pe, int p) {
  if (r.num == 1 && r.den > 1) return pe % static_cast<std::int64_t>(r.den) == 0 ? 1 : 0;
  const std::uint64_t n = total_elements(r, p);
  const auto up = static_cast<std::uint64_t>(p);
  return (static_cast<std::uint64_t>(pe) + 1) * n / up - static_cast<std::uint64_t>(pe) * n / up;
}

inline std::uint64_t global_offset(const Rational& r, PeId pe, int p) {
  std::uint64_t off = 0;
  if (r.num == 1 && r.den > 1) return (static_cast<std::uint64_t>(pe) + r.den - 1) / r.den;
  const std::uint64_t n = total_elements(r, p);
  off = static_cast<std::uint64_t>(pe) * n / static_cast<std::uint64_t>(p);
  return off;
}

namespace detail {

inline std::uint64_t reverse_bits(std::uint64_t x, int bits) {
  std::uint64_t r = 0;
  for (int i = 0; i < bits; ++i, x >>= 1) r = (r << 1) | (x & 1);
  return r;
}

inline std::uint64_t uniform_in(Rng& rng, std::uint64_t lo, std::uint64_t hi_excl) {
  if (hi_excl <= lo) return lo;
  return std::uniform_int_distribution<std::uint64_t>(lo, hi_excl - 1)(rng);
}

/// Splits m into `parts` chunks whose sizes differ by at most one.
inline std::uint64_t chunk(std::uint64_t m, std::uint64_t parts, std::uint64_t c) {
  return (c + 1) * m / parts - c * m / parts;
}

}  // namespace detail

/// Local input of PE `pe` on a machine of p PEs. Pure in (spec, pe, p).
inline std::vector<std::uint64_t> generate(const InstanceSpec& spec, PeId pe, int p) {
  if (p < 1 || !std::has_single_bit(static_cast<unsigned>(p))) throw ConfigError("p must be a power of two");
  if (pe < 0 || pe >= p) throw ConfigError("PE id out of range");
  const std::uint64_t m = local_count(spec.n_per_pe, pe, p);
  const std::uint64_t P = static_cast<std::uint64_t>(p), i = static_cast<std::uint64_t>(pe);
  const int d = std::countr_zero(static_cast<unsigned>(p));
  Rng rng(derive_seed(spec.seed, i + 1, 0x1000 + static_cast<std::uint64_t>(spec.name)));
  constexpr std::uint64_t R31 = std::uint64_t{1} << 31, R32 = std::uint64_t{1} << 32;
  const std::uint64_t slice = R31 / P;

  std::vector<std::uint64_t> out;
  out.reserve(m);
  switch (spec.name) {
    case Instance::Uniform:
      for (std::uint64_t e = 0; e < m; ++e) out.push_back(detail::uniform_in(rng, 0, R32));
      break;
    case Instance::Gaussian:
      // sum of four uniforms from [0, 2^30)
      for (std::uint64_t e = 0; e < m; ++e) {
        std::uint64_t s = 0;
        for (int t = 0; t < 4; ++t) s += detail::uniform_in(rng, 0, R32 / 4);
        out.push_back(s);
      }
      break;
    case Instance::BucketSorted:
      // PE i draws unsorted keys from the i-th slice of [0, 2^31), so the
      // concatenation of the PE ranges is globally sorted.
      for (std::uint64_t e = 0; e < m; ++e) out.push_back(detail::uniform_in(rng, i * slice, (i + 1) * slice));
      break;
    case Instance::Staggered: {
      std::uint64_t lo = 0, hi = R31;
      if (p > 1) {
        const std::uint64_t s = i < P / 2 ? 2 * i + 1 : 2 * i - P;
        lo = s * slice;
        hi = (s + 1) * slice;
      }
      for (std::uint64_t e = 0; e < m; ++e) out.push_back(detail::uniform_in(rng, lo, hi));
      break;
    }
    case Instance::gGroup: {
      const std::uint64_t g = std::uint64_t{1} << (d / 2);
      const std::uint64_t j = i / g;
      for (std::uint64_t c = 0; c < g; ++c) {
        const std::uint64_t s = (j * g + P / 2 + c) % P;
        for (std::uint64_t e = detail::chunk(m, g, c); e > 0; --e)
          out.push_back(detail::uniform_in(rng, s * slice, (s + 1) * slice));
      }
      break;
    }
    case Instance::DeterDupl: {
      // PEs [0, p/2) hold log n, the next p/4 log(n/2), and so on; the last
      // PE continues the halving over its own elements.
      const std::uint64_t n = total_elements(spec.n_per_pe, p);
      const auto logn = static_cast<std::int64_t>(std::bit_width(std::max<std::uint64_t>(n, 1)) - 1);
      auto key = [&](std::int64_t j) { return static_cast<std::uint64_t>(std::max<std::int64_t>(logn - j, 0)); };
      if (i + 1 < P) {
        const std::int64_t j = std::countl_one(static_cast<std::uint32_t>(i << (32 - d)));
        out.assign(m, key(j));
      } else {
        std::uint64_t left = m;
        for (std::int64_t t = 0; left > 0; ++t) {
          const std::uint64_t c = std::max<std::uint64_t>(left / 2, 1);
          out.insert(out.end(), c, key(d + t));
          left -= c;
        }
      }
      break;
    }
    case Instance::RandDupl: {
      std::array<std::uint64_t, 32> table{};
      for (auto& v : table) v = detail::uniform_in(rng, 0, 32);
      for (std::uint64_t e = 0; e < m; ++e) out.push_back(table[detail::uniform_in(rng, 0, 32)]);
      break;
    }
    case Instance::Zero:
      out.assign(m, 0);
      break;
    case Instance::Reverse: {
      const std::uint64_t n = total_elements(spec.n_per_pe, p);
      const std::uint64_t off = global_offset(spec.n_per_pe, pe, p);
      for (std::uint64_t e = 0; e < m; ++e) out.push_back(n - 1 - (off + e));
      break;
    }
    case Instance::Mirrored: {
      const std::uint64_t mi = detail::reverse_bits(i, d);
      for (std::uint64_t e = 0; e < m; ++e) out.push_back(detail::uniform_in(rng, R31 * mi / P, R31 * (mi + 1) / P));
      break;
    }
    case Instance::AllToOne: {
      if (m == 0) break;
      const std::uint64_t lo = P + (P - i) * (R32 - P) / P;
      const std::uint64_t hi = P + (P - i + 1) * (R32 - P) / P;
      for (std::uint64_t e = 0; e + 1 < m; ++e) out.push_back(detail::uniform_in(rng, lo, hi + 1));
      out.push_back(P - i);
      break;
    }
  }
  return out;
}

/// Generates all p local inputs, converted to key type T.
template <class T = std::uint64_t>
std::vector<std::vector<T>> generate_all(const InstanceSpec& spec, int p) {
  std::vector<std::vector<T>> all(p);
  for (int pe = 0; pe < p; ++pe) {
    auto keys = generate(spec, pe, p);
    all[pe].assign(keys.begin(), keys.end());
  }
  return all;
}

// ---------------------------------------------------------------------------

struct SortReport {
  bool sorted_ok = false;
  bool permutation_ok = false;
  double imbalance = 1.0;
  std::uint64_t startups_max = 0;
  std::uint64_t words_max = 0;
  double modeled_time = 0.0;

  void attach(const CostLedger& ledger, double alpha, double beta) {
    startups_max = ledger.startups_max();
    words_max = ledger.words_max();
    modeled_time = ledger.modeled_time(alpha, beta);
  }
};

namespace detail {

template <class T>
bool same_multiset(const std::vector<std::vector<T>>& a, const std::vector<std::vector<T>>& b) {
  std::vector<T> x, y;
  for (const auto& v : a) x.insert(x.end(), v.begin(), v.end());
  for (const auto& v : b) y.insert(y.end(), v.begin(), v.end());
  if (x.size() != y.size()) return false;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

}  // namespace detail

/// Checks a distributed result: every PE sorted, PE boundaries ordered,
/// multiset preserved. Imbalance is max load over n/p.
template <class T>
SortReport verify(const std::vector<std::vector<T>>& inputs, const std::vector<std::vector<T>>& outputs) {
  SortReport r;
  r.sorted_ok = true;
  const T* prev_max = nullptr;
  std::size_t n = 0, max_load = 0;
  for (const auto& out : outputs) {
    n += out.size();
    max_load = std::max(max_load, out.size());
    if (out.empty()) continue;
    if (!std::is_sorted(out.begin(), out.end())) r.sorted_ok = false;
    if (prev_max && out.front() < *prev_max) r.sorted_ok = false;
    prev_max = &out.back();
  }
  r.permutation_ok = detail::same_multiset(inputs, outputs);
  const double p = static_cast<double>(outputs.size());
  r.imbalance = n == 0 ? 1.0 : static_cast<double>(max_load) * p / static_cast<double>(n);
  return r;
}

/// Checks a replicated result: every PE holds the complete sorted sequence.
/// Imbalance is reported as p (every PE holds all n elements).
template <class T>
SortReport verify_replicated(const std::vector<std::vector<T>>& inputs, const std::vector<std::vector<T>>& outputs) {
  SortReport r;
  std::vector<T> all;
  for (const auto& v : inputs) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  r.sorted_ok = true;
  r.permutation_ok = true;
  for (const auto& out : outputs) {
    if (!std::is_sorted(out.begin(), out.end())) r.sorted_ok = false;
    std::vector<T> copy = out;
    std::sort(copy.begin(), copy.end());
    if (copy != all) r.permutation_ok = false;
  }
  r.imbalance = all.empty() ? 1.0 : static_cast<double>(outputs.size());
  return r;
}

}  // namespace rsort
