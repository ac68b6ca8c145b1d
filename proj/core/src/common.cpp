#include "bvflow/parallel.hpp"
#include "bvflow/sampling.hpp"
#include "bvflow/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

namespace bvflow {

Box::Box(Vec lower, Vec upper) : lo(std::move(lower)), hi(std::move(upper)) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw InvalidInput("box bounds must be nonempty and of equal dimension");
  }
  if ((hi.array() <= lo.array()).any()) {
    throw InvalidInput("box upper bounds must exceed lower bounds");
  }
}

Box Box::centered(int dim, double half_width) {
  return Box(Vec::Constant(dim, -half_width), Vec::Constant(dim, half_width));
}

bool Box::contains(const Vec& u, double slack) const {
  if (u.size() != lo.size()) {
    return false;
  }
  return ((u.array() >= lo.array() - slack) && (u.array() <= hi.array() + slack)).all();
}

Vec Box::from_unit(const Vec& unit) const {
  return lo + (hi - lo).cwiseProduct(unit);
}

namespace {

std::vector<unsigned> first_primes(int n) {
  std::vector<unsigned> primes;
  for (unsigned candidate = 2; static_cast<int>(primes.size()) < n; ++candidate) {
    bool prime = true;
    for (unsigned p : primes) {
      if (p * p > candidate) break;
      if (candidate % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(candidate);
  }
  return primes;
}

}  // namespace

HaltonSequence::HaltonSequence(int dim, std::uint64_t skip)
    : dim_(dim), index_(skip), bases_(first_primes(dim)) {
  if (dim < 1) throw InvalidInput("Halton dimension must be positive");
}

double HaltonSequence::radical_inverse(std::uint64_t index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

Vec HaltonSequence::next() {
  Vec x(dim_);
  for (int i = 0; i < dim_; ++i) {
    x[i] = radical_inverse(index_, bases_[i]);
  }
  ++index_;
  return x;
}

std::vector<Vec> probe_directions(int dim, int count) {
  std::vector<Vec> dirs;
  if (count < 1) return dirs;
  if (dim == 1) {
    dirs.push_back(Vec::Constant(1, 1.0));
    if (count > 1) dirs.push_back(Vec::Constant(1, -1.0));
    return dirs;
  }
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      const double angle = 2.0 * std::numbers::pi * (k + 0.5) / count;
      Vec v(2);
      v << std::cos(angle), std::sin(angle);
      dirs.push_back(v);
    }
    return dirs;
  }
  HaltonSequence seq(dim);
  while (static_cast<int>(dirs.size()) < count) {
    Vec v = 2.0 * seq.next().array() - 1.0;
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) dirs.push_back(v / n);
  }
  return dirs;
}

std::size_t thread_count() {
  if (const char* env = std::getenv("BVFLOW_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n >= 1) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      // Static striding keeps the index-to-worker assignment fixed.
      for (std::size_t i = w; i < n; i += workers) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace bvflow
