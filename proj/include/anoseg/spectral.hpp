/**
 * @file spectral.hpp
 * @brief Centred 2-D Fourier transform and frequency-domain stylisation.
 *
 * Forward transform (1/MN normalised, spectrum centred so DC sits at
 * (floor(M/2), floor(N/2))):
 *
 *   X[u,v] = 1/(MN) * sum_{s,t} m[s,t] x[s,t] exp(-j2pi(us/M + vt/N))
 *
 * with m[s,t] = (-1)^(s+t) for even dimensions. The inverse is unnormalised
 * and undoes the modulation on the spatial side, so inverse(forward(x)) == x.
 */
#pragma once

#include "anoseg/image.hpp"

#include <complex>
#include <span>
#include <vector>

namespace anoseg::spectral {

using Complex = std::complex<double>;

struct Spectrum {
    int height = 0;
    int width = 0;
    std::vector<Complex> data;  ///< row-major, centre-aligned

    Complex& at(int u, int v) { return data[static_cast<std::size_t>(u) * width + v]; }
    Complex at(int u, int v) const { return data[static_cast<std::size_t>(u) * width + v]; }
    int centre_row() const { return height / 2; }
    int centre_col() const { return width / 2; }
};

/// Unnormalised in-place 1-D DFT of any length (radix-2 or Bluestein).
void dft_inplace(std::span<Complex> data, bool inverse);

Spectrum fft2_centered(std::span<const double> channel, int height, int width);
Spectrum fft2_centered(std::span<const Complex> channel, int height, int width);

/// Inverse transform without discarding the imaginary part.
std::vector<Complex> ifft2_centered_complex(const Spectrum& spectrum);

/// Inverse transform of a conjugate-symmetric spectrum. Throws NumericError
/// when the imaginary residue exceeds 1e-6.
std::vector<double> ifft2_centered(const Spectrum& spectrum);

/// Normalised Gaussian 1/(2 pi sigma^2) exp(-(du^2+dv^2)/(2 sigma^2)) in
/// offsets from the centre bin.
std::vector<double> gaussian_window(int height, int width, double sigma);

/// 1 inside the centred square |du| <= beta, |dv| <= beta, else 0.
std::vector<double> rectangular_window(int height, int width, double beta);

/// Per-channel magnitude spectra |Y| of one or more reference scans, resampled
/// to a target size. Several references are averaged.
struct ReferenceMagnitude {
    int height = 0;
    int width = 0;
    std::vector<std::vector<double>> channels;
};

ReferenceMagnitude reference_magnitude(const Image& reference, int height, int width);
ReferenceMagnitude reference_magnitude(std::span<const Image> references, int height, int width);

/// S = |Y| * G per channel.
struct StylizationMask {
    int height = 0;
    int width = 0;
    std::vector<std::vector<double>> channels;
};

StylizationMask stylization_mask(const ReferenceMagnitude& reference, double sigma);
StylizationMask stylization_mask(const Image& reference, double sigma);

struct StylizeOptions {
    bool clamp = true;
};

/// Gaussian-weighted Fourier stylisation: |X'| = |X| + S with the phase of X kept.
Image stylize_gwfs(const Image& input, const ReferenceMagnitude& reference, double sigma, StylizeOptions opts = {});
Image stylize_gwfs(const Image& input, const Image& reference, double sigma, StylizeOptions opts = {});

/// Rectangular-window baseline: magnitudes inside the window are replaced by |Y|.
Image stylize_fda(const Image& input, const ReferenceMagnitude& reference, double beta, StylizeOptions opts = {});
Image stylize_fda(const Image& input, const Image& reference, double beta, StylizeOptions opts = {});

/// Mean absolute difference between horizontally and vertically adjacent values.
double total_variation(const Image& image);

} // namespace anoseg::spectral
