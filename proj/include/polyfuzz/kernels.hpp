#pragma once

#include <cstddef>
#include <functional>

namespace polyfuzz::kernels {

// Worker-thread cap for the OpenMP kernels and parallel_for. 0 = hardware
// default. The parallel kernels split work only across independent output
// rows, so results are bit-identical to the serial reference at any setting.
void set_threads(int n);
int threads();

// y = W x, W row-major rows x cols float32 parameters, double accumulation.
void matvec_serial(const float* w, int rows, int cols, const double* x, double* y);
void matvec_parallel(const float* w, int rows, int cols, const double* x, double* y);
void matvec(const float* w, int rows, int cols, const double* x, double* y);

// y = W^T x (length cols), double accumulation down each column.
void matvec_t_serial(const float* w, int rows, int cols, const double* x, double* y);
void matvec_t_parallel(const float* w, int rows, int cols, const double* x, double* y);
void matvec_t(const float* w, int rows, int cols, const double* x, double* y);

// G += a b^T, G row-major rows x cols double gradient accumulator.
void ger_serial(double* g, int rows, int cols, const double* a, const double* b);
void ger_parallel(double* g, int rows, int cols, const double* a, const double* b);
void ger(double* g, int rows, int cols, const double* a, const double* b);

double dot(const double* a, const double* b, int n);
void axpy(double alpha, const double* x, double* y, int n);

// Runs f(i) for i in [0, n); parallel when the thread cap allows. Bodies must
// write disjoint state per index.
void parallel_for(size_t n, const std::function<void(size_t)>& f);

}  // namespace polyfuzz::kernels
