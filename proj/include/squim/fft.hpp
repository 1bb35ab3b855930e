#pragma once

#include <complex>
#include <vector>

namespace squim {

// In-place iterative radix-2 FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& x, bool inverse = false);

// Forward FFT of a real signal zero-padded to n_fft; returns bins 0..n_fft/2.
std::vector<std::complex<double>> real_fft(const std::vector<double>& x,
                                           std::size_t n_fft);

}  // namespace squim
