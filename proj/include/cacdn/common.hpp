#pragma once

#include <cstdint>
#include <cstdlib>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace cacdn {

// Structured error with a machine-parsable class tag. The CLI maps the
// class to an exit code and a one-line JSON error record.
class Error : public std::runtime_error {
 public:
  Error(std::string cls, const std::string& msg)
      : std::runtime_error(cls + ": " + msg), cls_(std::move(cls)) {}
  const std::string& error_class() const noexcept { return cls_; }

 private:
  std::string cls_;
};

[[noreturn]] inline void fail(std::string cls, const std::string& msg) {
  throw Error(std::move(cls), msg);
}

inline void require(bool cond, const std::string& cls, const std::string& msg) {
  if (!cond) fail(cls, msg);
}

// --- deterministic hashing -------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
  return splitmix64(mix_seed(a, b) ^ splitmix64(c));
}

// --- deterministic RNG -----------------------------------------------------
//
// All stochastic behaviour in the project flows through this class so that a
// (seed, stream) pair fully determines the output, independent of the C++
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(eng_()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  // standard normal via Box-Muller (no state carried between calls)
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // mean-one multiplicative speckle: Gamma(looks, 1/looks) as a sum of
  // exponentials (integer looks)
  double speckle(int looks) {
    double acc = 0.0;
    for (int i = 0; i < looks; ++i) {
      double u = uniform();
      if (u < 1e-300) u = 1e-300;
      acc += -std::log(u);
    }
    return acc / looks;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)],
                v[static_cast<size_t>(uniform_int(i + 1))]);
    }
  }

  std::string serialize() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    if (!is) fail("checkpoint_corrupt", "bad rng state");
  }

 private:
  std::mt19937_64 eng_;
};

// --- worker control ----------------------------------------------------------

// Worker cap for data-parallel loops; CACDN_NUM_WORKERS overrides hardware
// concurrency. Results are bitwise independent of the worker count (all
// reductions happen in a fixed order), so this only affects speed.
inline int worker_count() {
  if (const char* env = std::getenv("CACDN_NUM_WORKERS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static partition of [0, n) over at most worker_count() threads. fn must
// only write to disjoint, index-owned storage.
template <class F>
void parallel_for(int n, F&& fn) {
  int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([=]() {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace cacdn
