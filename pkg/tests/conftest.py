import hypothesis
import pytest

from chancesos import (BoxDomain, ChanceProblem, MeasureSpec, SemiAlgebraicSet,
                       parse_polynomial)

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture(scope="session")
def ellipse_problem():
    """1D decision, 1D disturbance, single ellipse constraint.

    Closed-form section probability: min(1, 1.2*sqrt(1 - x^2/0.81)).
    """
    g = parse_polynomial("1 - x1^2/0.81 - w1^2/1.44", ["x1", "w1"])
    return ChanceProblem(
        n=1, p=1,
        x_box=BoxDomain((-1.0,), (1.0,)),
        omega_box=BoxDomain((0.0,), (1.0,)),
        constraints=SemiAlgebraicSet(2, (g,)),
        lam=MeasureSpec.lebesgue(BoxDomain((-1.0,), (1.0,))),
        mu=MeasureSpec.uniform(BoxDomain((0.0,), (1.0,))),
        epsilons=(0.75, 0.5, 0.25),
        complement=(SemiAlgebraicSet(2, (-g,)),),
    )


@pytest.fixture(scope="session")
def two_ellipse_problem():
    """1D instance whose feasible set splits into two intervals at small eps."""
    names = ["x1", "w1"]
    g1 = parse_polynomial("1 - x1^2 - w1^2/2", names)
    g2 = parse_polynomial("x1^2/2 + w1^2 - 1/4", names)
    return ChanceProblem(
        n=1, p=1,
        x_box=BoxDomain((-1.0,), (1.0,)),
        omega_box=BoxDomain((0.0,), (1.0,)),
        constraints=SemiAlgebraicSet(2, (g1, g2)),
        lam=MeasureSpec.lebesgue(BoxDomain((-1.0,), (1.0,))),
        mu=MeasureSpec.uniform(BoxDomain((0.0,), (1.0,))),
        epsilons=(0.7, 0.4, 0.1),
    )


@pytest.fixture(scope="session")
def ball_2d_problem():
    """2D decision, 1D disturbance: unit ball section constraint."""
    g = parse_polynomial("1 - x1^2 - x2^2 - w1^2", ["x1", "x2", "w1"])
    return ChanceProblem(
        n=2, p=1,
        x_box=BoxDomain((-1.0, -1.0), (1.0, 1.0)),
        omega_box=BoxDomain((0.0,), (1.0,)),
        constraints=SemiAlgebraicSet(3, (g,)),
        lam=MeasureSpec.lebesgue(BoxDomain((-1.0, -1.0), (1.0, 1.0))),
        mu=MeasureSpec.uniform(BoxDomain((0.0,), (1.0,))),
        epsilons=(0.05, 0.01),
    )


@pytest.fixture(scope="session")
def disk_volume():
    """Unit disk inside a square box, for volume bounds."""
    def make(a: float):
        g = parse_polynomial("1 - x1^2 - x2^2", ["x1", "x2"])
        K = SemiAlgebraicSet(2, (g,))
        lam = MeasureSpec.lebesgue(BoxDomain((-a, -a), (a, a)))
        return K, lam
    return make


def ellipse_mu_oracle(x: float) -> float:
    """Closed form for the ellipse fixture's section probability."""
    t = 1.0 - x * x / 0.81
    if t <= 0.0:
        return 0.0
    return min(1.0, 1.2 * t ** 0.5)


def ellipse_true_halfwidth(eps: float) -> float:
    """Closed-form half-width of the ellipse fixture's feasible set."""
    return 0.9 * (1.0 - (1.0 - eps) ** 2 / 1.44) ** 0.5
