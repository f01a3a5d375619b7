#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tracksplit/core.hpp"

namespace tracksplit {

/**
 * @brief Separable convex function with a closed-form proximal map.
 *
 * Quadratic kind: ½γ‖x−a‖², optionally restricted to the box [lo, hi].
 * SoftThreshold kind: weight·‖x‖₁. Box kind: indicator of [lo, hi]. Zero kind: 0.
 * Empty `center`, `lo`, `hi` mean 0, −∞, +∞ respectively.
 */
struct ProxFunction {
    enum class Kind { Zero, Quadratic, SoftThreshold, Box };

    Kind kind = Kind::Zero;
    double weight = 0.0;
    Vector center;
    Vector lo;
    Vector hi;

    static ProxFunction zero() { return {}; }

    static ProxFunction quadratic(double gamma, Vector a = {})
    {
        if (!(gamma >= 0.0)) throw std::invalid_argument("quadratic prox: gamma must be >= 0");
        ProxFunction f;
        f.kind = Kind::Quadratic;
        f.weight = gamma;
        f.center = std::move(a);
        return f;
    }

    static ProxFunction quadratic_on_box(double gamma, Vector a, Vector lo, Vector hi)
    {
        ProxFunction f = quadratic(gamma, std::move(a));
        f.lo = std::move(lo);
        f.hi = std::move(hi);
        f.validate_box();
        return f;
    }

    static ProxFunction soft_threshold(double w)
    {
        if (!(w >= 0.0)) throw std::invalid_argument("soft-threshold prox: weight must be >= 0");
        ProxFunction f;
        f.kind = Kind::SoftThreshold;
        f.weight = w;
        return f;
    }

    static ProxFunction box(Vector lo, Vector hi)
    {
        ProxFunction f;
        f.kind = Kind::Box;
        f.lo = std::move(lo);
        f.hi = std::move(hi);
        f.validate_box();
        return f;
    }

    double strong_convexity() const { return kind == Kind::Quadratic ? weight : 0.0; }

    bool has_box() const { return lo.size() > 0 || hi.size() > 0; }

    double lower(Index i) const { return lo.size() ? lo(i) : -kInf; }
    double upper(Index i) const { return hi.size() ? hi(i) : kInf; }
    double centre(Index i) const { return center.size() ? center(i) : 0.0; }

    void check_dim(Index n) const
    {
        if (center.size()) require_dim(center.size(), n, "ProxFunction center");
        if (lo.size()) require_dim(lo.size(), n, "ProxFunction lower bound");
        if (hi.size()) require_dim(hi.size(), n, "ProxFunction upper bound");
    }

    double value(const Vector& x) const
    {
        check_dim(x.size());
        double v = 0.0;
        for (Index i = 0; i < x.size(); ++i) {
            if (x(i) < lower(i) || x(i) > upper(i)) return kInf;
            switch (kind) {
            case Kind::Quadratic: v += 0.5 * weight * (x(i) - centre(i)) * (x(i) - centre(i)); break;
            case Kind::SoftThreshold: v += weight * std::abs(x(i)); break;
            default: break;
            }
        }
        return v;
    }

    Vector prox(double tau, const Vector& v) const
    {
        if (!(tau > 0.0)) throw std::invalid_argument("prox: tau must be positive");
        check_dim(v.size());
        Vector x(v.size());
        for (Index i = 0; i < v.size(); ++i) {
            double xi = v(i);
            switch (kind) {
            case Kind::Quadratic: xi = (v(i) + tau * weight * centre(i)) / (1.0 + tau * weight); break;
            case Kind::SoftThreshold:
                xi = std::copysign(std::max(std::abs(v(i)) - tau * weight, 0.0), v(i));
                break;
            default: break;
            }
            x(i) = std::clamp(xi, lower(i), upper(i));
        }
        return x;
    }

    /// Checks s ∈ ∂g(x) coordinatewise through the optimality conditions of the closed forms.
    bool is_subgradient(const Vector& x, const Vector& s, double tol = 1e-9) const
    {
        check_dim(x.size());
        require_dim(s.size(), x.size(), "is_subgradient");
        for (Index i = 0; i < x.size(); ++i) {
            if (x(i) < lower(i) || x(i) > upper(i)) return false;
            double r = s(i);
            double scale = 1.0 + std::abs(s(i));
            if (kind == Kind::Quadratic) {
                r -= weight * (x(i) - centre(i));
                scale += std::abs(weight * (x(i) - centre(i)));
            }
            double t = tol * scale;
            bool at_lo = x(i) <= lower(i), at_hi = x(i) >= upper(i);
            if (kind == Kind::SoftThreshold) {
                if (x(i) != 0.0) r -= weight * (x(i) > 0 ? 1.0 : -1.0);
                else if (std::abs(r) <= weight + t) r = 0.0;
                else if (r > 0) r -= weight;
                else r += weight;
            }
            if (at_lo && at_hi) continue;
            if (at_hi) {
                if (r < -t) return false;
            } else if (at_lo) {
                if (r > t) return false;
            } else if (std::abs(r) > t) {
                return false;
            }
        }
        return true;
    }

    /// Convex conjugate sup_y ⟨v, y⟩ − g(y), evaluated coordinatewise.
    double conjugate(const Vector& v) const
    {
        check_dim(v.size());
        double total = 0.0;
        for (Index i = 0; i < v.size(); ++i) {
            double lo_i = lower(i), hi_i = upper(i), vi = v(i);
            if (kind == Kind::Quadratic && weight > 0.0) {
                double y = std::clamp(centre(i) + vi / weight, lo_i, hi_i);
                total += vi * y - 0.5 * weight * (y - centre(i)) * (y - centre(i));
                continue;
            }
            double lin = kind == Kind::SoftThreshold ? weight : 0.0;
            // Piecewise linear: sup over [lo, hi] of vi·y − lin·|y|.
            double best = (lo_i <= 0.0 && hi_i >= 0.0) ? 0.0 : -kInf;
            for (double y : {lo_i, hi_i}) {
                if (std::isinf(y)) {
                    double slope = (y > 0 ? vi : -vi) - lin;
                    if (slope > 0.0) return kInf;
                    continue;
                }
                best = std::max(best, vi * y - lin * std::abs(y));
            }
            total += best;
        }
        return total;
    }

    bool bounded_domain(Index n) const
    {
        for (Index i = 0; i < n; ++i)
            if (std::isinf(lower(i)) || std::isinf(upper(i))) return false;
        return true;
    }

    double domain_diameter(Index n) const
    {
        if (!bounded_domain(n)) return kInf;
        double s = 0.0;
        for (Index i = 0; i < n; ++i) s += (upper(i) - lower(i)) * (upper(i) - lower(i));
        return std::sqrt(s);
    }

    std::vector<Vector> domain_vertices(Index n) const
    {
        if (!bounded_domain(n)) throw std::domain_error("domain_vertices: unbounded domain");
        if (n > 20) throw std::invalid_argument("domain_vertices: too many coordinates");
        std::vector<Vector> out;
        for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
            Vector v(n);
            for (Index i = 0; i < n; ++i) v(i) = (mask >> i) & 1UL ? upper(i) : lower(i);
            out.push_back(v);
        }
        return out;
    }

private:
    void validate_box() const
    {
        if (lo.size() != hi.size()) throw DimensionError("ProxFunction: box bounds differ in size");
        for (Index i = 0; i < lo.size(); ++i)
            if (!(lo(i) <= hi(i))) throw std::invalid_argument("ProxFunction: empty box");
    }
};

inline Vector prox(const ProxFunction& g, double tau, const Vector& v) { return g.prox(tau, v); }

} // namespace tracksplit
