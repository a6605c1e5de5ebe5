#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace mblingam {

// Truncated Taylor series (jet) arithmetic around a point: coeff[k] holds
// f^(k)/k!. Propagating jets through a formula yields exact derivatives of
// the formula, up to the truncation order.
template <int Order>
struct Jet {
    std::array<double, Order + 1> coeff{};

    static Jet constant(double v) {
        Jet j;
        j.coeff[0] = v;
        return j;
    }

    // The expansion variable itself: value v, slope 1.
    static Jet variable(double v) {
        Jet j;
        j.coeff[0] = v;
        if constexpr (Order >= 1) j.coeff[1] = 1.0;
        return j;
    }

    double derivative(int k) const {
        double factorial = 1.0;
        for (int i = 2; i <= k; ++i) factorial *= i;
        return coeff[static_cast<std::size_t>(k)] * factorial;
    }

    friend Jet operator+(const Jet& a, const Jet& b) {
        Jet r;
        for (int k = 0; k <= Order; ++k) r.coeff[k] = a.coeff[k] + b.coeff[k];
        return r;
    }

    friend Jet operator-(const Jet& a, const Jet& b) {
        Jet r;
        for (int k = 0; k <= Order; ++k) r.coeff[k] = a.coeff[k] - b.coeff[k];
        return r;
    }

    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet r;
        for (int k = 0; k <= Order; ++k) {
            double s = 0.0;
            for (int i = 0; i <= k; ++i) s += a.coeff[i] * b.coeff[k - i];
            r.coeff[k] = s;
        }
        return r;
    }

    friend Jet operator*(double s, const Jet& a) {
        Jet r;
        for (int k = 0; k <= Order; ++k) r.coeff[k] = s * a.coeff[k];
        return r;
    }

    friend Jet operator/(const Jet& a, const Jet& b) {
        if (b.coeff[0] == 0.0) throw std::domain_error("Jet: division by zero value");
        Jet r;
        for (int k = 0; k <= Order; ++k) {
            double s = a.coeff[k];
            for (int i = 0; i < k; ++i) s -= r.coeff[i] * b.coeff[k - i];
            r.coeff[k] = s / b.coeff[0];
        }
        return r;
    }
};

template <int Order>
Jet<Order> sqrt(const Jet<Order>& a) {
    if (!(a.coeff[0] > 0.0)) throw std::domain_error("Jet: sqrt needs positive value");
    Jet<Order> r;
    r.coeff[0] = std::sqrt(a.coeff[0]);
    for (int k = 1; k <= Order; ++k) {
        double s = a.coeff[k];
        for (int i = 1; i < k; ++i) s -= r.coeff[i] * r.coeff[k - i];
        r.coeff[k] = s / (2.0 * r.coeff[0]);
    }
    return r;
}

template <int Order>
Jet<Order> pow_int(const Jet<Order>& a, int e) {
    Jet<Order> r = Jet<Order>::constant(1.0);
    for (int i = 0; i < e; ++i) r = r * a;
    return r;
}

}  // namespace mblingam
