#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace krv {

/// Truncated power series F(w) = sum_n a_n w^n mapping the closed unit disk onto
/// the closure of a domain. Injectivity on the closed disk is verified at
/// construction from the sampled boundary image (a map that is one-to-one on the
/// circle is one-to-one inside).
class PowerSeriesMap {
  public:
    static constexpr int boundary_samples = 1024;

    PowerSeriesMap() : PowerSeriesMap(std::vector<Complex>{Complex{0.0}, Complex{1.0}}) {}

    explicit PowerSeriesMap(std::vector<Complex> coefficients) : a_(std::move(coefficients)) {
        while (a_.size() > 2 && a_.back() == Complex{0.0}) a_.pop_back();
        if (a_.size() < 2 || std::abs(a_[1]) == 0.0)
            throw InvalidDomain("conformal map needs a nonzero linear coefficient");
        for (const auto &c : a_)
            if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                throw InvalidDomain("conformal map coefficients must be finite");
        sample_boundary();
        check_injective();
        build_seed_table();
    }

    const std::vector<Complex> &coefficients() const { return a_; }
    const std::vector<Point2> &boundary() const { return boundary_; }

    Complex value(Complex w) const {
        Complex s{0.0};
        for (auto it = a_.rbegin(); it != a_.rend(); ++it) s = s * w + *it;
        return s;
    }

    Complex derivative(Complex w) const {
        Complex s{0.0};
        for (std::size_t n = a_.size() - 1; n >= 1; --n) s = s * w + static_cast<double>(n) * a_[n];
        return s;
    }

    Complex second_derivative(Complex w) const {
        Complex s{0.0};
        for (std::size_t n = a_.size() - 1; n >= 2; --n)
            s = s * w + static_cast<double>(n * (n - 1)) * a_[n];
        return s;
    }

    /// (F(w1) - F(w2)) / (w1 - w2), equal to F'(w1) when w1 == w2.
    Complex divided_difference(Complex w1, Complex w2) const {
        // S_1 = 1, S_{n+1} = w1^n + w2 S_n
        Complex s{1.0}, p{1.0}, out{0.0};
        for (std::size_t n = 1; n < a_.size(); ++n) {
            out += a_[n] * s;
            p *= w1;
            s = p + w2 * s;
        }
        return out;
    }

    /// Preimage w with F(w) = z and |w| <= 1 + slack, if one is found.
    std::optional<Complex> inverse(Complex z) const {
        const double scale = std::abs(a_[1]);
        auto newton = [&](Complex w) -> std::optional<Complex> {
            for (int it = 0; it < 60; ++it) {
                const Complex r = value(w) - z;
                if (std::abs(r) <= 1e-15 * (scale + std::abs(z))) return w;
                const Complex dp = derivative(w);
                if (std::abs(dp) == 0.0) return std::nullopt;
                Complex step = r / dp;
                const double len = std::abs(step);
                if (len > 0.25) step *= 0.25 / len;
                w -= step;
                if (std::abs(w) > 2.0) return std::nullopt;
            }
            const Complex r = value(w) - z;
            if (std::abs(r) <= 1e-12 * (scale + std::abs(z))) return w;
            return std::nullopt;
        };
        auto accept = [](const std::optional<Complex> &w) { return w && std::abs(*w) <= 1.0 + 1e-9; };

        auto w = newton((z - a_[0]) / a_[1]);
        if (accept(w)) return w;
        // nearest tabulated image as a second seed
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < seeds_.size(); ++i) {
            const double d = std::abs(seed_images_[i] - z);
            if (d < best_d) { best_d = d; best = i; }
        }
        w = newton(seeds_[best]);
        if (accept(w)) return w;
        return std::nullopt;
    }

  private:
    void sample_boundary() {
        boundary_.resize(boundary_samples);
        for (int j = 0; j < boundary_samples; ++j) {
            const double t = 2.0 * pi * j / boundary_samples;
            boundary_[j] = to_point(value(std::polar(1.0, t)));
        }
    }

    void check_injective() const {
        const auto &b = boundary_;
        const std::size_t m = b.size();
        double area2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const auto &p = b[i], &q = b[(i + 1) % m];
            area2 += p.x1 * q.x2 - q.x1 * p.x2;
        }
        if (!(area2 > 0.0)) throw InvalidDomain("conformal map reverses orientation or is degenerate");
        for (int j = 0; j < boundary_samples; ++j)
            if (std::abs(derivative(std::polar(1.0, 2.0 * pi * j / boundary_samples))) <= 1e-12 * std::abs(a_[1]))
                throw InvalidDomain("conformal map has a critical point on the unit circle");
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 2; j < m; ++j) {
                if (i == 0 && j == m - 1) continue;
                if (segments_intersect(b[i], b[i + 1], b[j], b[(j + 1) % m]))
                    throw InvalidDomain("conformal map is not injective on the unit circle");
            }
    }

    void build_seed_table() {
        for (int ir = 0; ir < 16; ++ir) {
            const double r = (ir + 0.5) / 16.0;
            for (int it = 0; it < 64; ++it) {
                const Complex w = std::polar(r, 2.0 * pi * it / 64.0);
                seeds_.push_back(w);
                seed_images_.push_back(value(w));
            }
        }
    }

    std::vector<Complex> a_;
    std::vector<Point2> boundary_;
    std::vector<Complex> seeds_;
    std::vector<Complex> seed_images_;
};

} // namespace krv
