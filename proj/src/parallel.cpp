#include "msdem/parallel.hpp"

#include <omp.h>

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace msdem {

int worker_count() { return omp_get_max_threads(); }

void set_worker_count(int n) { omp_set_num_threads(n < 1 ? 1 : n); }

int workers_from_env() {
  const char* s = std::getenv("MSDEM_WORKERS");
  if (s == nullptr) return 0;
  int n = 0;
  auto [ptr, ec] = std::from_chars(s, s + std::strlen(s), n);
  if (ec != std::errc{} || n < 1) return 0;
  return n;
}

ScopedWorkers::ScopedWorkers(int n) : saved_(worker_count()) { set_worker_count(n); }
ScopedWorkers::~ScopedWorkers() { set_worker_count(saved_); }

} // namespace msdem
