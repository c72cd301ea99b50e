import numpy as np
import pytest

from tubespectra import (
    CrossSection,
    CurvatureProfile,
    constant_function,
    cross_section_spectrum,
    gaussian_bump,
    metric_from_profile,
)

NU1 = np.pi**2 / 4.0


@pytest.fixture(scope="session")
def bump_profile():
    """The reference bent strip: kappa(s) = 0.5 exp(-s^2), d = 2."""
    return CurvatureProfile([gaussian_bump(0.5, 1.0)], (-1e4, 1e4))


@pytest.fixture(scope="session")
def bump_metric(bump_profile):
    return metric_from_profile(bump_profile, 1.0)


@pytest.fixture(scope="session")
def straight_profile():
    return CurvatureProfile([constant_function(0.0)], (-1e4, 1e4))


@pytest.fixture(scope="session")
def interval_omega():
    return CrossSection.interval(1.0)


@pytest.fixture(scope="session")
def interval_thresholds(interval_omega):
    return cross_section_spectrum(interval_omega, 30)


def random_smooth_profile(rng, dimension=2, max_kappa=0.6):
    """Random bounded smooth curvature profile: a few gaussian bumps."""
    from tubespectra.profiles import ScalarFunction

    def bump_mixture():
        n = rng.integers(1, 4)
        cs = rng.uniform(-max_kappa, max_kappa, size=n) / n
        mus = rng.uniform(-3.0, 3.0, size=n)
        sigmas = rng.uniform(0.6, 2.0, size=n)

        def deriv(order):
            def f(s):
                s = np.asarray(s, dtype=float)
                total = np.zeros_like(s)
                for c, mu, sig in zip(cs, mus, sigmas):
                    t = (s - mu) / sig
                    e = np.exp(-(t**2))
                    if order == 0:
                        total += c * e
                    elif order == 1:
                        total += c * e * (-2 * t) / sig
                    elif order == 2:
                        total += c * e * (4 * t**2 - 2) / sig**2
                    elif order == 3:
                        total += c * e * (-8 * t**3 + 12 * t) / sig**3
                return total

            return f

        return ScalarFunction([deriv(k) for k in range(4)], label="bump-mix")

    kappas = [bump_mixture() for _ in range(dimension - 1)]
    return CurvatureProfile(kappas, (-50.0, 50.0))
