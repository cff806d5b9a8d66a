#pragma once

#include <cstddef>

namespace dslit::detail {

// Kernels compiled separately with relaxed floating-point flags so that they
// vectorize, including calls into the vector math library. Results are
// accurate to a few ulp and deterministic for a given build and CPU.

// c[i] = cos(arg[i]), s[i] = sin(arg[i]).
void unit_phases(const double* arg, std::size_t n, double* c, double* s);

// For each quantity q, coef holds four arrays of length `half`
// (p_re, p_im, m_re, m_im) starting at coef + 4 q half, and
//   sums[2q] + i sums[2q+1] = sum_i [(p_re c_i - m_im s_i) + i (p_im c_i + m_re s_i)].
// With p = u + v and m = u - v this is sum_i u_i e_i + v_i conj(e_i), e_i = c_i + i s_i.
void pair_sums(const double* c, const double* s, std::size_t half, const double* coef, std::size_t quantities,
               double* sums);

}  // namespace dslit::detail
