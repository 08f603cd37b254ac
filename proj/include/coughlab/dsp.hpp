#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "coughlab/common.hpp"

// Scalar-generic signal kernels shared by the audio and feature stages.

namespace coughlab::dsp {

template <typename S>
using DenseVector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
using DenseMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

constexpr bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

inline Index next_pow2(Index n) {
    Index p = 1;
    while (p < n) p *= 2;
    return p;
}

// w[n] = 0.54 - 0.46 cos(2 pi n / (N - 1)), symmetric; w[0] == w[N-1] == 0.08.
template <typename S = Scalar>
DenseVector<S> hamming_window(Index n) {
    DenseVector<S> w(n);
    if (n == 1) {
        w[0] = S(1);
        return w;
    }
    const S two_pi = S(2) * std::numbers::pi_v<S>;
    for (Index i = 0; i < n; ++i)
        w[i] = S(0.54) - S(0.46) * std::cos(two_pi * S(i) / S(n - 1));
    return w;
}

// In-place iterative radix-2 Cooley-Tukey, unscaled forward transform.
template <typename S = Scalar>
void fft_inplace(std::vector<std::complex<S>>& x) {
    const Index n = static_cast<Index>(x.size());
    if (!is_pow2(n)) throw ConfigError("fft length must be a power of two, got " + std::to_string(n));
    for (Index i = 1, j = 0; i < n; ++i) {
        Index bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (Index len = 2; len <= n; len <<= 1) {
        const S ang = S(-2) * std::numbers::pi_v<S> / S(len);
        for (Index i = 0; i < n; i += len) {
            for (Index k = 0; k < len / 2; ++k) {
                const std::complex<S> w(std::cos(ang * S(k)), std::sin(ang * S(k)));
                const std::complex<S> u = x[i + k];
                const std::complex<S> v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
            }
        }
    }
}

template <typename S = Scalar>
std::vector<std::complex<S>> fft(const DenseVector<S>& frame, Index fft_size) {
    if (frame.size() > fft_size)
        throw ShapeError("frame longer than fft size (" + std::to_string(frame.size()) + " > " +
                         std::to_string(fft_size) + ")");
    std::vector<std::complex<S>> x(static_cast<std::size_t>(fft_size));
    for (Index i = 0; i < frame.size(); ++i) x[static_cast<std::size_t>(i)] = frame[i];
    fft_inplace(x);
    return x;
}

// Zeroth-order modified Bessel function of the first kind (power series).
template <typename S = Scalar>
S bessel_i0(S x) {
    const S half = x / S(2);
    S term = S(1), sum = S(1);
    for (int k = 1; k < 200; ++k) {
        term *= (half / S(k)) * (half / S(k));
        sum += term;
        if (term < sum * S(1e-21)) break;
    }
    return sum;
}

template <typename S = Scalar>
DenseVector<S> kaiser_window(Index taps, S beta) {
    DenseVector<S> w(taps);
    const S denom = bessel_i0(beta);
    const S mid = S(taps - 1) / S(2);
    for (Index i = 0; i < taps; ++i) {
        const S r = (S(i) - mid) / mid;
        w[i] = bessel_i0(beta * std::sqrt(std::max(S(0), S(1) - r * r))) / denom;
    }
    return w;
}

// Linear-phase Kaiser-windowed sinc low-pass. cutoff/transition are in
// cycles per sample at the rate the filter runs at; DC gain is exactly 1.
template <typename S = Scalar>
DenseVector<S> design_kaiser_lowpass(S cutoff, S transition, S atten_db) {
    if (!(cutoff > S(0)) || !(cutoff < S(0.5))) throw ConfigError("low-pass cutoff must lie in (0, 0.5)");
    if (!(transition > S(0))) throw ConfigError("low-pass transition width must be positive");
    const S beta = atten_db > S(50)   ? S(0.1102) * (atten_db - S(8.7))
                   : atten_db > S(21) ? S(0.5842) * std::pow(atten_db - S(21), S(0.4)) +
                                            S(0.07886) * (atten_db - S(21))
                                      : S(0);
    const S two_pi = S(2) * std::numbers::pi_v<S>;
    Index taps = static_cast<Index>(std::ceil((atten_db - S(7.95)) / (S(2.285) * two_pi * transition))) + 1;
    if (taps % 2 == 0) ++taps;
    if (taps < 3) taps = 3;

    const DenseVector<S> kw = kaiser_window<S>(taps, beta);
    DenseVector<S> h(taps);
    const Index mid = (taps - 1) / 2;
    for (Index i = 0; i < taps; ++i) {
        const S t = S(i - mid);
        const S x = S(2) * cutoff * t;
        const S sinc = (t == S(0)) ? S(1) : std::sin(std::numbers::pi_v<S> * x) / (std::numbers::pi_v<S> * x);
        h[i] = S(2) * cutoff * sinc * kw[i];
    }
    h /= h.sum();
    return h;
}

// Orthonormal DCT-II basis: row k maps an n-vector to coefficient k, and
// the matrix times its transpose is the identity.
template <typename S = Scalar>
DenseMatrix<S> dct_ii_orthonormal(Index n) {
    DenseMatrix<S> basis(n, n);
    const S pi = std::numbers::pi_v<S>;
    for (Index k = 0; k < n; ++k) {
        const S scale = std::sqrt((k == 0 ? S(1) : S(2)) / S(n));
        for (Index j = 0; j < n; ++j)
            basis(k, j) = scale * std::cos(pi * (S(j) + S(0.5)) * S(k) / S(n));
    }
    return basis;
}

// mel(f) = 2595 log10(1 + f / 700)
template <typename S = Scalar>
S hz_to_mel(S hz) {
    return S(2595) * std::log10(S(1) + hz / S(700));
}

template <typename S = Scalar>
S mel_to_hz(S mel) {
    return S(700) * (std::pow(S(10), mel / S(2595)) - S(1));
}

}  // namespace coughlab::dsp
