#include "anoseg/spectral.hpp"

#include "anoseg/error.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <unordered_map>

namespace anoseg::spectral {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

Complex unit(double turns) {
    // exp(i 2 pi turns)
    const double angle = 2.0 * std::numbers::pi * turns;
    return {std::cos(angle), std::sin(angle)};
}

class Radix2 {
public:
    explicit Radix2(std::size_t n) : n_(n), twiddles_(n / 2), bitrev_(n) {
        for (std::size_t k = 0; k < n / 2; ++k) twiddles_[k] = unit(-static_cast<double>(k) / static_cast<double>(n));
        int bits = 0;
        while ((std::size_t{1} << bits) < n) ++bits;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
            bitrev_[i] = r;
        }
    }

    void run(std::span<Complex> a, bool inverse) const {
        for (std::size_t i = 0; i < n_; ++i) {
            if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
        }
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t stride = n_ / len;
            for (std::size_t start = 0; start < n_; start += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    Complex w = twiddles_[k * stride];
                    if (inverse) w = std::conj(w);
                    const Complex t = w * a[start + k + half];
                    a[start + k + half] = a[start + k] - t;
                    a[start + k] += t;
                }
            }
        }
    }

private:
    std::size_t n_;
    std::vector<Complex> twiddles_;
    std::vector<std::size_t> bitrev_;
};

// Chirp-z evaluation of an arbitrary-length DFT through a power-of-two convolution.
class Bluestein {
public:
    explicit Bluestein(std::size_t n) : n_(n), chirp_(n) {
        m_ = 1;
        while (m_ < 2 * n - 1) m_ <<= 1;
        fft_ = std::make_unique<Radix2>(m_);
        for (std::size_t k = 0; k < n; ++k) {
            // k^2 mod 2n keeps the angle argument small and exact.
            const auto k2 = static_cast<double>((static_cast<unsigned long long>(k) * k) % (2 * n));
            chirp_[k] = unit(-k2 / (2.0 * static_cast<double>(n)));
        }
        kernel_.assign(m_, Complex{});
        kernel_[0] = std::conj(chirp_[0]);
        for (std::size_t k = 1; k < n; ++k) {
            kernel_[k] = std::conj(chirp_[k]);
            kernel_[m_ - k] = std::conj(chirp_[k]);
        }
        fft_->run(kernel_, false);
    }

    void run(std::span<Complex> a, bool inverse) const {
        std::vector<Complex> buf(m_, Complex{});
        for (std::size_t k = 0; k < n_; ++k) {
            const Complex v = inverse ? std::conj(a[k]) : a[k];
            buf[k] = v * chirp_[k];
        }
        fft_->run(buf, false);
        for (std::size_t k = 0; k < m_; ++k) buf[k] *= kernel_[k];
        fft_->run(buf, true);
        const double scale = 1.0 / static_cast<double>(m_);
        for (std::size_t k = 0; k < n_; ++k) {
            const Complex v = buf[k] * scale * chirp_[k];
            a[k] = inverse ? std::conj(v) : v;
        }
    }

private:
    std::size_t n_;
    std::size_t m_ = 0;
    std::vector<Complex> chirp_;
    std::vector<Complex> kernel_;
    std::unique_ptr<Radix2> fft_;
};

struct Plan {
    std::unique_ptr<Radix2> radix2;
    std::unique_ptr<Bluestein> bluestein;
};

const Plan& plan_for(std::size_t n) {
    thread_local std::unordered_map<std::size_t, Plan> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        Plan p;
        if (is_power_of_two(n)) p.radix2 = std::make_unique<Radix2>(n);
        else p.bluestein = std::make_unique<Bluestein>(n);
        it = cache.emplace(n, std::move(p)).first;
    }
    return it->second;
}

// Centring modulation exp(+i 2 pi s floor(n/2) / n); exactly (-1)^s for even n.
std::vector<Complex> centring(int n) {
    std::vector<Complex> m(n);
    const int shift = n / 2;
    for (int s = 0; s < n; ++s) {
        if (n % 2 == 0) {
            m[s] = (s % 2 == 0) ? 1.0 : -1.0;
        } else {
            const auto turns = static_cast<double>((static_cast<long long>(s) * shift) % n) / n;
            m[s] = unit(turns);
        }
    }
    return m;
}

void dft2_inplace(std::vector<Complex>& grid, int height, int width, bool inverse) {
    for (int r = 0; r < height; ++r) {
        dft_inplace(std::span<Complex>(grid.data() + static_cast<std::size_t>(r) * width, width), inverse);
    }
    std::vector<Complex> column(height);
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < height; ++r) column[r] = grid[static_cast<std::size_t>(r) * width + c];
        dft_inplace(column, inverse);
        for (int r = 0; r < height; ++r) grid[static_cast<std::size_t>(r) * width + c] = column[r];
    }
}

void check_dims(int height, int width, std::size_t size) {
    if (height < 1 || width < 1) throw ShapeError("transform dimensions must be positive");
    if (size != static_cast<std::size_t>(height) * width) throw ShapeError("transform input length mismatch");
}

std::vector<double> magnitude(const Spectrum& s) {
    std::vector<double> out(s.data.size());
    std::ranges::transform(s.data, out.begin(), [](Complex z) { return std::abs(z); });
    return out;
}

// Unit phasor of z; bins whose magnitude is numerically zero take phase 0 so that
// a conjugate-symmetric magnitude yields a conjugate-symmetric result.
std::vector<Complex> phases(const Spectrum& s) {
    double peak = 0;
    for (Complex z : s.data) peak = std::max(peak, std::abs(z));
    const double tiny = 1e-12 * peak;
    std::vector<Complex> out(s.data.size());
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const double mag = std::abs(s.data[i]);
        out[i] = (mag > tiny && mag > 0.0) ? s.data[i] / mag : Complex{1.0, 0.0};
    }
    return out;
}

Image recombine(const Image& input, const std::vector<std::vector<double>>& magnitudes,
                const std::vector<std::vector<Complex>>& phase, StylizeOptions opts) {
    Image out(input.height(), input.width(), input.channels());
    for (int c = 0; c < input.channels(); ++c) {
        Spectrum spec{input.height(), input.width(), std::vector<Complex>(input.plane_size())};
        for (std::size_t i = 0; i < spec.data.size(); ++i) spec.data[i] = magnitudes[c][i] * phase[c][i];
        const auto values = ifft2_centered(spec);
        std::ranges::copy(values, out.plane(c).begin());
    }
    return opts.clamp ? clamp01(std::move(out)) : out;
}

const ReferenceMagnitude& checked_reference(const Image& input, const ReferenceMagnitude& ref) {
    if (ref.height != input.height() || ref.width != input.width()) {
        throw ShapeError("reference spectrum size does not match the input");
    }
    if (static_cast<int>(ref.channels.size()) != input.channels()) {
        throw ShapeError("reference and input channel counts differ");
    }
    return ref;
}

} // namespace

void dft_inplace(std::span<Complex> data, bool inverse) {
    if (data.size() <= 1) return;
    const Plan& plan = plan_for(data.size());
    if (plan.radix2) plan.radix2->run(data, inverse);
    else plan.bluestein->run(data, inverse);
}

Spectrum fft2_centered(std::span<const Complex> channel, int height, int width) {
    check_dims(height, width, channel.size());
    const auto mr = centring(height);
    const auto mc = centring(width);
    Spectrum out{height, width, std::vector<Complex>(channel.size())};
    for (int s = 0; s < height; ++s) {
        for (int t = 0; t < width; ++t) {
            const std::size_t i = static_cast<std::size_t>(s) * width + t;
            out.data[i] = channel[i] * mr[s] * mc[t];
        }
    }
    dft2_inplace(out.data, height, width, false);
    const double scale = 1.0 / (static_cast<double>(height) * width);
    for (Complex& z : out.data) z *= scale;
    return out;
}

Spectrum fft2_centered(std::span<const double> channel, int height, int width) {
    std::vector<Complex> tmp(channel.begin(), channel.end());
    return fft2_centered(std::span<const Complex>(tmp), height, width);
}

std::vector<Complex> ifft2_centered_complex(const Spectrum& spectrum) {
    check_dims(spectrum.height, spectrum.width, spectrum.data.size());
    std::vector<Complex> grid = spectrum.data;
    dft2_inplace(grid, spectrum.height, spectrum.width, true);
    const auto mr = centring(spectrum.height);
    const auto mc = centring(spectrum.width);
    for (int s = 0; s < spectrum.height; ++s) {
        for (int t = 0; t < spectrum.width; ++t) {
            grid[static_cast<std::size_t>(s) * spectrum.width + t] *= std::conj(mr[s] * mc[t]);
        }
    }
    return grid;
}

std::vector<double> ifft2_centered(const Spectrum& spectrum) {
    const auto grid = ifft2_centered_complex(spectrum);
    std::vector<double> out(grid.size());
    double residue = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out[i] = grid[i].real();
        residue = std::max(residue, std::abs(grid[i].imag()));
    }
    if (residue >= 1e-6) {
        throw NumericError("inverse transform has imaginary residue " + std::to_string(residue) +
                           "; spectrum is not conjugate-symmetric");
    }
    return out;
}

std::vector<double> gaussian_window(int height, int width, double sigma) {
    if (!(sigma > 0)) throw ConfigError("Gaussian window sigma must be > 0");
    if (height < 1 || width < 1) throw ShapeError("window dimensions must be positive");
    std::vector<double> g(static_cast<std::size_t>(height) * width);
    const double norm = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int u = 0; u < height; ++u) {
        const double du = u - height / 2;
        for (int v = 0; v < width; ++v) {
            const double dv = v - width / 2;
            g[static_cast<std::size_t>(u) * width + v] = norm * std::exp(-(du * du + dv * dv) * inv);
        }
    }
    return g;
}

std::vector<double> rectangular_window(int height, int width, double beta) {
    if (!(beta > 0)) throw ConfigError("rectangular window beta must be > 0");
    std::vector<double> r(static_cast<std::size_t>(height) * width, 0.0);
    for (int u = 0; u < height; ++u) {
        for (int v = 0; v < width; ++v) {
            if (std::abs(u - height / 2) <= beta && std::abs(v - width / 2) <= beta) {
                r[static_cast<std::size_t>(u) * width + v] = 1.0;
            }
        }
    }
    return r;
}

ReferenceMagnitude reference_magnitude(std::span<const Image> references, int height, int width) {
    if (references.empty()) throw ConfigError("at least one reference image is required");
    ReferenceMagnitude out{height, width, {}};
    for (const Image& raw : references) {
        const Image ref = resize_bilinear(raw, height, width);
        if (out.channels.empty()) {
            out.channels.assign(ref.channels(), std::vector<double>(ref.plane_size(), 0.0));
        } else if (static_cast<int>(out.channels.size()) != ref.channels()) {
            throw ShapeError("reference images have differing channel counts");
        }
        for (int c = 0; c < ref.channels(); ++c) {
            const auto mag = magnitude(fft2_centered(ref.plane(c), height, width));
            for (std::size_t i = 0; i < mag.size(); ++i) out.channels[c][i] += mag[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(references.size());
    for (auto& ch : out.channels) {
        for (double& v : ch) v *= inv;
    }
    return out;
}

ReferenceMagnitude reference_magnitude(const Image& reference, int height, int width) {
    return reference_magnitude(std::span<const Image>(&reference, 1), height, width);
}

StylizationMask stylization_mask(const ReferenceMagnitude& reference, double sigma) {
    const auto g = gaussian_window(reference.height, reference.width, sigma);
    StylizationMask mask{reference.height, reference.width, reference.channels};
    for (auto& ch : mask.channels) {
        if (ch.size() != g.size()) throw ShapeError("reference magnitude size mismatch");
        for (std::size_t i = 0; i < ch.size(); ++i) ch[i] *= g[i];
    }
    return mask;
}

StylizationMask stylization_mask(const Image& reference, double sigma) {
    return stylization_mask(reference_magnitude(reference, reference.height(), reference.width()), sigma);
}

Image stylize_gwfs(const Image& input, const ReferenceMagnitude& reference, double sigma, StylizeOptions opts) {
    if (!(sigma > 0)) throw ConfigError("GW-FS sigma must be > 0");
    const auto& ref = checked_reference(input, reference);
    const auto mask = stylization_mask(ref, sigma);

    std::vector<std::vector<double>> mags;
    std::vector<std::vector<Complex>> phase;
    for (int c = 0; c < input.channels(); ++c) {
        const Spectrum x = fft2_centered(input.plane(c), input.height(), input.width());
        auto mag = magnitude(x);
        for (std::size_t i = 0; i < mag.size(); ++i) mag[i] += mask.channels[c][i];
        mags.push_back(std::move(mag));
        phase.push_back(phases(x));
    }
    return recombine(input, mags, phase, opts);
}

Image stylize_gwfs(const Image& input, const Image& reference, double sigma, StylizeOptions opts) {
    const Image ref = input.channels() == 3 ? to_rgb(reference) : reference;
    return stylize_gwfs(input, reference_magnitude(ref, input.height(), input.width()), sigma, opts);
}

Image stylize_fda(const Image& input, const ReferenceMagnitude& reference, double beta, StylizeOptions opts) {
    if (!(beta > 0)) throw ConfigError("FDA beta must be > 0");
    if (beta >= std::min(input.height(), input.width()) / 2.0) {
        throw ConfigError("FDA beta covers the whole spectrum");
    }
    const auto& ref = checked_reference(input, reference);
    const auto window = rectangular_window(input.height(), input.width(), beta);

    std::vector<std::vector<double>> mags;
    std::vector<std::vector<Complex>> phase;
    for (int c = 0; c < input.channels(); ++c) {
        const Spectrum x = fft2_centered(input.plane(c), input.height(), input.width());
        auto mag = magnitude(x);
        for (std::size_t i = 0; i < mag.size(); ++i) {
            if (window[i] > 0) mag[i] = ref.channels[c][i];
        }
        mags.push_back(std::move(mag));
        phase.push_back(phases(x));
    }
    return recombine(input, mags, phase, opts);
}

Image stylize_fda(const Image& input, const Image& reference, double beta, StylizeOptions opts) {
    const Image ref = input.channels() == 3 ? to_rgb(reference) : reference;
    return stylize_fda(input, reference_magnitude(ref, input.height(), input.width()), beta, opts);
}

double total_variation(const Image& image) {
    double sum = 0;
    std::size_t n = 0;
    for (int c = 0; c < image.channels(); ++c) {
        for (int y = 0; y < image.height(); ++y) {
            for (int x = 0; x < image.width(); ++x) {
                if (x + 1 < image.width()) {
                    sum += std::abs(image.at(c, y, x + 1) - image.at(c, y, x));
                    ++n;
                }
                if (y + 1 < image.height()) {
                    sum += std::abs(image.at(c, y + 1, x) - image.at(c, y, x));
                    ++n;
                }
            }
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

} // namespace anoseg::spectral
