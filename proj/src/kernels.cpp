#include "polyfuzz/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <atomic>
#include <exception>

namespace polyfuzz::kernels {

namespace {
int g_threads = 0;

int effective_threads() {
#ifdef _OPENMP
  return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
  return 1;
#endif
}
}  // namespace

void set_threads(int n) { g_threads = n < 0 ? 0 : n; }
int threads() { return effective_threads(); }

void matvec_serial(const float* w, int rows, int cols, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) {
    const float* row = w + static_cast<size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += static_cast<double>(row[c]) * x[c];
    y[r] = acc;
  }
}

void matvec_parallel(const float* w, int rows, int cols, const double* x, double* y) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(effective_threads())
#endif
  for (int r = 0; r < rows; ++r) {
    const float* row = w + static_cast<size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += static_cast<double>(row[c]) * x[c];
    y[r] = acc;
  }
}

void matvec(const float* w, int rows, int cols, const double* x, double* y) {
  if (effective_threads() > 1 && rows >= 64) {
    matvec_parallel(w, rows, cols, x, y);
  } else {
    matvec_serial(w, rows, cols, x, y);
  }
}

void matvec_t_serial(const float* w, int rows, int cols, const double* x, double* y) {
  for (int c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (int r = 0; r < rows; ++r) acc += static_cast<double>(w[static_cast<size_t>(r) * cols + c]) * x[r];
    y[c] = acc;
  }
}

void matvec_t_parallel(const float* w, int rows, int cols, const double* x, double* y) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(effective_threads())
#endif
  for (int c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (int r = 0; r < rows; ++r) acc += static_cast<double>(w[static_cast<size_t>(r) * cols + c]) * x[r];
    y[c] = acc;
  }
}

void matvec_t(const float* w, int rows, int cols, const double* x, double* y) {
  if (effective_threads() > 1 && cols >= 64) {
    matvec_t_parallel(w, rows, cols, x, y);
  } else {
    matvec_t_serial(w, rows, cols, x, y);
  }
}

void ger_serial(double* g, int rows, int cols, const double* a, const double* b) {
  for (int r = 0; r < rows; ++r) {
    double* row = g + static_cast<size_t>(r) * cols;
    const double ar = a[r];
    for (int c = 0; c < cols; ++c) row[c] += ar * b[c];
  }
}

void ger_parallel(double* g, int rows, int cols, const double* a, const double* b) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(effective_threads())
#endif
  for (int r = 0; r < rows; ++r) {
    double* row = g + static_cast<size_t>(r) * cols;
    const double ar = a[r];
    for (int c = 0; c < cols; ++c) row[c] += ar * b[c];
  }
}

void ger(double* g, int rows, int cols, const double* a, const double* b) {
  if (effective_threads() > 1 && rows >= 64) {
    ger_parallel(g, rows, cols, a, b);
  } else {
    ger_serial(g, rows, cols, a, b);
  }
}

double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void parallel_for(size_t n, const std::function<void(size_t)>& f) {
  int nt = effective_threads();
  if (nt <= 1 || n < 2) {
    for (size_t i = 0; i < n; ++i) f(i);
    return;
  }
  // First exception wins; the rest of the iterations still run to completion.
  std::exception_ptr err = nullptr;
  std::atomic_flag err_set = ATOMIC_FLAG_INIT;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
#endif
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    try {
      f(static_cast<size_t>(i));
    } catch (...) {
      if (!err_set.test_and_set()) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace polyfuzz::kernels
