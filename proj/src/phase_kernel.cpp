#include "phase_kernel.hpp"

#include <cmath>

namespace dslit::detail {

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
__attribute__((target_clones("avx512f", "avx2", "default")))
#endif
void unit_phases(const double* arg, std::size_t n, double* c, double* s) {
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = std::cos(arg[i]);
    s[i] = std::sin(arg[i]);
  }
}

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
__attribute__((target_clones("avx512f", "avx2", "default")))
#endif
void pair_sums(const double* c, const double* s, std::size_t half, const double* coef, std::size_t quantities,
               double* sums) {
  for (std::size_t q = 0; q < quantities; ++q) {
    const double* p_re = coef + 4 * q * half;
    const double* p_im = p_re + half;
    const double* m_re = p_im + half;
    const double* m_im = m_re + half;
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      re += p_re[i] * c[i] - m_im[i] * s[i];
      im += p_im[i] * c[i] + m_re[i] * s[i];
    }
    sums[2 * q] = re;
    sums[2 * q + 1] = im;
  }
}

}  // namespace dslit::detail
