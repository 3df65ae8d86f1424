#pragma once

// Thin RAII layer over FFTW. Planning is serialized (the FFTW planner is not
// re-entrant); execution runs on private fftw_malloc'd buffers so alignment,
// and therefore the selected codelets, is the same for every call.

#include <complex>
#include <span>
#include <vector>

namespace mxbolo::detail {

/// Forward real-to-complex DFT; returns n/2 + 1 bins, unnormalized.
std::vector<std::complex<double>> rfft(std::span<const double> x);

/// Inverse of rfft for a length-n real signal, normalized by 1/n.
std::vector<double> irfft(std::span<const std::complex<double>> bins, std::size_t n);

/// Complex DFT; inverse is normalized by 1/n.
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x, bool inverse);

}  // namespace mxbolo::detail
