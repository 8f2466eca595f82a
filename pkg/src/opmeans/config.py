"""Solver configuration shared by the scalar and matrix fixed-point solvers."""

from dataclasses import dataclass


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and caps for fixed-point solves.

    dt_tol        Thompson-metric step threshold for matrix iterations.
    max_iters     cap for matrix fixed-point iterations.
    karcher_alpha exponent of the power-mean pair used to certify a Karcher
                  solve by enclosure.
    delta_floor   lower clamp for the initialization box parameter delta.
    tol           residual threshold for the scalar deformed-mean solve.
    scalar_max_iters  cap for the scalar solve before bisection fallback.
    certify       when False, karcher_mean skips the power-mean enclosure
                  (used by bulk campaigns after the solver has been
                  validated; single calls default to certified).
    """

    dt_tol: float = 1e-11
    max_iters: int = 20_000
    karcher_alpha: float = 1.0 / 64.0
    delta_floor: float = 1e-8
    tol: float = 1e-12
    scalar_max_iters: int = 10_000
    certify: bool = True

    def __post_init__(self):
        if self.dt_tol <= 0 or self.max_iters < 1:
            raise ValueError("dt_tol must be > 0 and max_iters >= 1")
        if not 0 < self.karcher_alpha <= 1:
            raise ValueError("karcher_alpha must lie in (0, 1]")
        if self.delta_floor <= 0 or self.tol <= 0:
            raise ValueError("delta_floor and tol must be > 0")


DEFAULT_CONFIG = SolverConfig()
