#pragma once

#include <utility>

#include "chantwin/geometry.hpp"

namespace chantwin {

/// Fresnel integrals C(x), S(x) with the pi/2 convention.
std::pair<double, double> fresnel_integrals(double x);

/// Kouyoumjian-Pathak transition function F(X) = 2j sqrt(X) e^{jX} int_{sqrt(X)}^inf e^{-j t^2} dt.
Complex transition_function(double x);

struct UtdCoefficients {
    Complex soft;  // Ds, E parallel to the edge
    Complex hard;  // Dh
};

/// Wedge diffraction coefficients for exterior wedge parameter `n` (2 = half plane), angles
/// `phi` and `phi_prime` from face 0 in radians, oblique angle `beta0` and distance parameter L.
UtdCoefficients utd_coefficients(double n, double phi, double phi_prime, double beta0, double distance_l,
                                 double wavenumber);

}  // namespace chantwin
