#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dra2rm {

// Dense row-major n*n matrix helpers. Systems in this library are tiny
// (induced chains, gain/bias systems), so direct elimination is the right
// tool: it is exact up to rounding and needs no tuning.

// Solves A x = b by Gaussian elimination with partial pivoting.
// A and b are overwritten; the solution lands in b.
// Returns false if a pivot falls below tol (singular system).
inline bool lu_solve_inplace(std::vector<double>& a, std::vector<double>& b, int n,
                             double tol = 1e-12) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::fabs(a[static_cast<std::size_t>(col) * n + col]);
        for (int r = col + 1; r < n; ++r) {
            const double v = std::fabs(a[static_cast<std::size_t>(r) * n + col]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best < tol) return false;
        if (piv != col) {
            for (int c = col; c < n; ++c)
                std::swap(a[static_cast<std::size_t>(piv) * n + c],
                          a[static_cast<std::size_t>(col) * n + c]);
            std::swap(b[piv], b[col]);
        }
        const double d = a[static_cast<std::size_t>(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double f = a[static_cast<std::size_t>(r) * n + col] / d;
            if (f == 0.0) continue;
            a[static_cast<std::size_t>(r) * n + col] = 0.0;
            for (int c = col + 1; c < n; ++c)
                a[static_cast<std::size_t>(r) * n + c] -= f * a[static_cast<std::size_t>(col) * n + c];
            b[r] -= f * b[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[static_cast<std::size_t>(r) * n + c] * b[c];
        b[r] = s / a[static_cast<std::size_t>(r) * n + r];
    }
    return true;
}

inline std::vector<double> lu_solve(std::vector<double> a, std::vector<double> b, int n,
                                    double tol = 1e-12) {
    if (!lu_solve_inplace(a, b, n, tol))
        throw std::runtime_error("linear system is singular beyond tolerance");
    return b;
}

// x := x * M for a row vector x and row-major square M.
inline void vec_mat_mul(std::vector<double>& x, const std::vector<double>& m, int n) {
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (int j = 0; j < n; ++j) out[j] += xi * m[static_cast<std::size_t>(i) * n + j];
    }
    x = std::move(out);
}

inline std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b,
                                   int n) {
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const double v = a[static_cast<std::size_t>(i) * n + k];
            if (v == 0.0) continue;
            for (int j = 0; j < n; ++j)
                out[static_cast<std::size_t>(i) * n + j] += v * b[static_cast<std::size_t>(k) * n + j];
        }
    return out;
}

} // namespace dra2rm
