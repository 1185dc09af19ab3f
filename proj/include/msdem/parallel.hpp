#pragma once

namespace msdem {

/// Number of OpenMP workers used by the parallel kernels.
int worker_count();

/// Sets the worker count for subsequent parallel regions (n >= 1).
void set_worker_count(int n);

/// Worker count from the MSDEM_WORKERS environment variable, or 0 if unset
/// or unparsable.
int workers_from_env();

/// Restores the previous worker count on scope exit.
class ScopedWorkers {
public:
  explicit ScopedWorkers(int n);
  ~ScopedWorkers();
  ScopedWorkers(const ScopedWorkers&) = delete;
  ScopedWorkers& operator=(const ScopedWorkers&) = delete;

private:
  int saved_;
};

} // namespace msdem
