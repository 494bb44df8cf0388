#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "freak/error.hpp"
#include "freak/tensor.hpp"

namespace freak::spectral {

// Complex 2-D frequency representation of a [C,H,W] feature map.
// Convention: forward transform unnormalized, inverse scaled by 1/(H*W).
template <typename T>
struct Spectrum {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<std::complex<T>> data;  // row-major [c][h][w]

    Spectrum() = default;
    Spectrum(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, std::complex<T>{}) {}

    std::complex<T>& at(int c, int h, int w) {
        return data[(static_cast<size_t>(c) * height + h) * width + w];
    }
    const std::complex<T>& at(int c, int h, int w) const {
        return data[(static_cast<size_t>(c) * height + h) * width + w];
    }
    int64_t numel() const { return static_cast<int64_t>(data.size()); }
};

namespace detail {

constexpr double kPi = 3.14159265358979323846;

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey. tw[j] = exp(-2*pi*i*j/n), j < n/2.
template <typename T>
void fft_radix2(std::complex<T>* x, int n, bool inverse, const std::complex<T>* tw) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len >> 1;
        const int step = n / len;
        for (int i = 0; i < n; i += len) {
            for (int k = 0; k < half; ++k) {
                std::complex<T> w = tw[k * step];
                if (inverse) w = std::conj(w);
                const std::complex<T> u = x[i + k];
                const std::complex<T> v = x[i + k + half] * w;
                x[i + k] = u + v;
                x[i + k + half] = u - v;
            }
        }
    }
}

template <typename T>
std::vector<std::complex<T>> make_twiddles(int n) {
    std::vector<std::complex<T>> tw(static_cast<size_t>(n) / 2 + 1);
    for (int j = 0; j <= n / 2; ++j) {
        const double a = -2.0 * kPi * j / n;
        tw[static_cast<size_t>(j)] = {static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a))};
    }
    return tw;
}

// One-dimensional transform of fixed length; radix-2 when possible,
// Bluestein chirp-z otherwise so arbitrary frame sizes stay O(n log n).
template <typename T>
class FftPlan {
public:
    explicit FftPlan(int n) : n_(n) {
        if (n < 1) throw ContractViolation("fft length must be >= 1");
        if (is_pow2(n_)) {
            tw_ = make_twiddles<T>(n_);
            return;
        }
        m_ = 1;
        while (m_ < 2 * n_ - 1) m_ <<= 1;
        tw_ = make_twiddles<T>(m_);
        chirp_.resize(static_cast<size_t>(n_));
        bfft_.assign(static_cast<size_t>(m_), std::complex<T>{});
        for (int k = 0; k < n_; ++k) {
            // angle has period 2n in k^2
            const int64_t q = (static_cast<int64_t>(k) * k) % (2 * n_);
            const double a = -kPi * static_cast<double>(q) / n_;
            chirp_[static_cast<size_t>(k)] = {static_cast<T>(std::cos(a)),
                                              static_cast<T>(std::sin(a))};
        }
        bfft_[0] = std::conj(chirp_[0]);
        for (int k = 1; k < n_; ++k) {
            bfft_[static_cast<size_t>(k)] = std::conj(chirp_[static_cast<size_t>(k)]);
            bfft_[static_cast<size_t>(m_ - k)] = std::conj(chirp_[static_cast<size_t>(k)]);
        }
        fft_radix2(bfft_.data(), m_, false, tw_.data());
    }

    int length() const { return n_; }

    // Unnormalized forward DFT in place.
    void forward(std::complex<T>* x) const { run(x, false); }

    // Unnormalized inverse (conjugate) DFT in place; caller applies 1/n.
    void inverse(std::complex<T>* x) const { run(x, true); }

private:
    void run(std::complex<T>* x, bool inverse) const {
        if (n_ == 1) return;
        if (m_ == 0) {
            fft_radix2(x, n_, inverse, tw_.data());
            return;
        }
        // inverse via conjugation around the forward chirp transform
        if (inverse)
            for (int k = 0; k < n_; ++k) x[k] = std::conj(x[k]);
        std::vector<std::complex<T>> a(static_cast<size_t>(m_), std::complex<T>{});
        for (int k = 0; k < n_; ++k) a[static_cast<size_t>(k)] = x[k] * chirp_[static_cast<size_t>(k)];
        fft_radix2(a.data(), m_, false, tw_.data());
        for (int k = 0; k < m_; ++k) a[static_cast<size_t>(k)] *= bfft_[static_cast<size_t>(k)];
        fft_radix2(a.data(), m_, true, tw_.data());
        const T scale = T(1) / static_cast<T>(m_);
        for (int k = 0; k < n_; ++k) x[k] = a[static_cast<size_t>(k)] * scale * chirp_[static_cast<size_t>(k)];
        if (inverse)
            for (int k = 0; k < n_; ++k) x[k] = std::conj(x[k]);
    }

    int n_ = 0;
    int m_ = 0;  // 0 when radix-2 path applies
    std::vector<std::complex<T>> tw_;
    std::vector<std::complex<T>> chirp_;
    std::vector<std::complex<T>> bfft_;
};

// Row-column 2-D transform over `planes` contiguous [h,w] planes.
template <typename T>
void fft2_planes(const T* in, std::complex<T>* out, int64_t planes, int h, int w) {
    const FftPlan<T> row_plan(w);
    const FftPlan<T> col_plan(h);
    std::vector<std::complex<T>> col(static_cast<size_t>(h));
    const int64_t plane_size = static_cast<int64_t>(h) * w;
    for (int64_t p = 0; p < planes; ++p) {
        std::complex<T>* plane = out + p * plane_size;
        const T* src = in + p * plane_size;
        for (int64_t i = 0; i < plane_size; ++i) plane[i] = std::complex<T>(src[i], T(0));
        for (int y = 0; y < h; ++y) row_plan.forward(plane + static_cast<int64_t>(y) * w);
        for (int x = 0; x < w; ++x) {
            for (int y = 0; y < h; ++y) col[static_cast<size_t>(y)] = plane[static_cast<int64_t>(y) * w + x];
            col_plan.forward(col.data());
            for (int y = 0; y < h; ++y) plane[static_cast<int64_t>(y) * w + x] = col[static_cast<size_t>(y)];
        }
    }
}

// Inverse transform with 1/(h*w) scaling; emits the real part only.
template <typename T>
void ifft2_real_planes(const std::complex<T>* in, T* out, int64_t planes, int h, int w) {
    const FftPlan<T> row_plan(w);
    const FftPlan<T> col_plan(h);
    const int64_t plane_size = static_cast<int64_t>(h) * w;
    std::vector<std::complex<T>> plane(static_cast<size_t>(plane_size));
    std::vector<std::complex<T>> col(static_cast<size_t>(h));
    const T scale = T(1) / static_cast<T>(plane_size);
    for (int64_t p = 0; p < planes; ++p) {
        const std::complex<T>* src = in + p * plane_size;
        std::copy(src, src + plane_size, plane.begin());
        for (int y = 0; y < h; ++y) row_plan.inverse(plane.data() + static_cast<int64_t>(y) * w);
        for (int x = 0; x < w; ++x) {
            for (int y = 0; y < h; ++y) col[static_cast<size_t>(y)] = plane[static_cast<int64_t>(y) * w + x];
            col_plan.inverse(col.data());
            for (int y = 0; y < h; ++y) plane[static_cast<int64_t>(y) * w + x] = col[static_cast<size_t>(y)];
        }
        T* dst = out + p * plane_size;
        for (int64_t i = 0; i < plane_size; ++i) dst[i] = plane[static_cast<size_t>(i)].real() * scale;
    }
}

}  // namespace detail

// Unnormalized forward 2-D DFT of a real [C,H,W] array.
template <typename T>
Spectrum<T> fft2(const Tensor<T>& x) {
    if (x.rank() != 3) throw ContractViolation("fft2 expects a [C,H,W] tensor");
    if (x.dim(1) < 1 || x.dim(2) < 1) throw ContractViolation("fft2 needs H,W >= 1");
    if (!x.all_finite()) throw ContractViolation("fft2: non-finite input");
    Spectrum<T> s(x.dim(0), x.dim(1), x.dim(2));
    detail::fft2_planes(x.data(), s.data.data(), x.dim(0), x.dim(1), x.dim(2));
    return s;
}

// Inverse of fft2 (1/(H*W) scaling); returns the real part.
template <typename T>
Tensor<T> ifft2(const Spectrum<T>& s) {
    if (s.channels < 1 || s.height < 1 || s.width < 1)
        throw ContractViolation("ifft2: empty spectrum");
    Tensor<T> out({s.channels, s.height, s.width});
    detail::ifft2_real_planes(s.data.data(), out.data(), s.channels, s.height, s.width);
    return out;
}

// Mean over all bins of the complex magnitude of the spectral difference.
template <typename T>
T frequency_loss(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw ContractViolation("frequency_loss: shape mismatch");
    const Spectrum<T> sa = fft2(a);
    const Spectrum<T> sb = fft2(b);
    double acc = 0.0;
    for (int64_t i = 0; i < sa.numel(); ++i) {
        const std::complex<T> d = sa.data[static_cast<size_t>(i)] - sb.data[static_cast<size_t>(i)];
        acc += std::hypot(static_cast<double>(d.real()), static_cast<double>(d.imag()));
    }
    return static_cast<T>(acc / static_cast<double>(sa.numel()));
}

// Total |data|^2 binned by normalized radial distance from the (centered) DC
// bin, summed over channels. Bins partition the energy exactly.
template <typename T>
std::vector<T> radial_energy_profile(const Spectrum<T>& s, int n_bins) {
    if (n_bins < 1) throw ContractViolation("radial_energy_profile: n_bins >= 1");
    std::vector<double> acc(static_cast<size_t>(n_bins), 0.0);
    const int h = s.height, w = s.width;
    const double dmax = std::hypot(static_cast<double>(h / 2), static_cast<double>(w / 2));
    for (int c = 0; c < s.channels; ++c) {
        for (int y = 0; y < h; ++y) {
            const int fy = (y > h / 2) ? y - h : y;
            for (int x = 0; x < w; ++x) {
                const int fx = (x > w / 2) ? x - w : x;
                const double r = dmax > 0.0 ? std::hypot(double(fy), double(fx)) / dmax : 0.0;
                int bin = static_cast<int>(r * n_bins);
                if (bin >= n_bins) bin = n_bins - 1;
                acc[static_cast<size_t>(bin)] += std::norm(
                    std::complex<double>(s.at(c, y, x).real(), s.at(c, y, x).imag()));
            }
        }
    }
    std::vector<T> out(static_cast<size_t>(n_bins));
    for (int i = 0; i < n_bins; ++i) out[static_cast<size_t>(i)] = static_cast<T>(acc[static_cast<size_t>(i)]);
    return out;
}

}  // namespace freak::spectral
