#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace hamlab::quad {

// 16-point Gauss-Legendre nodes/weights on [-1,1].
inline constexpr std::array<double, 8> kGlNodes = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
inline constexpr std::array<double, 8> kGlWeights = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

template <class F>
double gauss16(F f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double x = h * kGlNodes[i];
        s += kGlWeights[i] * (f(c + x) + f(c - x));
    }
    return s * h;
}

template <class F>
double gauss16_panels(F f, double a, double b, int panels) {
    if (panels < 1) panels = 1;
    const double h = (b - a) / panels;
    double s = 0.0;
    for (int i = 0; i < panels; ++i) s += gauss16(f, a + i * h, a + (i + 1) * h);
    return s;
}

// Integrates f over [a,b] with 0 < a < b after the substitution t = e^u.
// Suited to integrands that vary on a logarithmic scale near 0.
template <class F>
double gauss16_log(F f, double a, double b, int panels_per_octave = 1) {
    if (!(a > 0.0) || !(b > a)) throw std::invalid_argument("gauss16_log: need 0 < a < b");
    const double la = std::log(a), lb = std::log(b);
    const int octaves = static_cast<int>(std::ceil((lb - la) / std::log(2.0)));
    const int panels = std::max(1, octaves * panels_per_octave);
    auto g = [&](double u) {
        const double t = std::exp(u);
        return f(t) * t;
    };
    return gauss16_panels(g, la, lb, panels);
}

}  // namespace hamlab::quad
