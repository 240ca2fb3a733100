"""Semi-implicit IMEX-BDF2 integration of the nudged scheme.

Each step solves a linear saddle-point system: the convection form is
linearized at the extrapolated velocity 2*u^{n-1} - u^{n-2} (at the previous
velocity in the bootstrap implicit-Euler step), while diffusion, grad-div and
the nudging form are treated implicitly.  The observed datum enters through
the right-hand side, evaluated from the closed-form reference solution.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import assembly, fem, manufactured, metrics, observe, solver
from .errors import DivergedError, InvalidConfigError
from .mesh import build_coarse_grid, build_fine_mesh


@dataclass(frozen=True)
class SimulationConfig:
    nu: float
    beta: float = 1.0
    mu: float = 0.0
    N: int = 12
    k: int = 3
    T: float = 4.0
    dt: float | None = None
    interpolant: str = "pc"
    initial: str = "zero"          # "zero" or "exact"
    quad_assembly: int = 5
    quad_error: int = 8

    def __post_init__(self):
        if self.nu <= 0 or self.beta < 0 or self.mu < 0:
            raise InvalidConfigError(
                f"need nu>0, beta>=0, mu>=0; got nu={self.nu}, beta={self.beta}, mu={self.mu}")
        if self.N < 2 or self.k < 1 or self.N % self.k != 0:
            raise InvalidConfigError(f"k={self.k} must divide N={self.N} (N>=2)")
        if self.dt is not None and self.dt <= 0:
            raise InvalidConfigError(f"dt must be positive, got {self.dt}")
        if self.T < self.timestep:
            raise InvalidConfigError(f"T={self.T} smaller than dt={self.timestep}")
        if self.interpolant not in ("pc", "lagrange"):
            raise InvalidConfigError(f"unknown interpolant {self.interpolant!r}")
        if self.initial not in ("zero", "exact"):
            raise InvalidConfigError(f"unknown initial condition {self.initial!r}")

    @property
    def timestep(self) -> float:
        if self.dt is not None:
            return self.dt
        return min(0.1 / self.N, 0.01 * self.T)

    def with_halved_dt(self) -> "SimulationConfig":
        return replace(self, dt=self.timestep / 2.0)


@dataclass
class TimeState:
    u_prev: np.ndarray
    u_prev2: np.ndarray | None
    p_prev: np.ndarray
    t: float
    step: int


@dataclass(frozen=True)
class StepRecord:
    t: float
    l2_error: float
    obs_ratio: float
    div_residual: float


class Simulation:
    """Assembled operators and stepping logic for one configuration."""

    def __init__(self, config: SimulationConfig):
        self.config = config
        self.mesh = build_fine_mesh(config.N)
        self.grid = build_coarse_grid(self.mesh, config.k)
        self.dofmap = fem.build_dofmap(self.mesh)
        self.rule = fem.quadrature_rule(config.quad_assembly)
        self.ops = assembly.build_operator_set(
            self.dofmap, self.grid, config.interpolant, self.rule)

        dm = self.dofmap
        bd = dm.boundary_velocity
        self._bd = bd
        self._interior_mask = np.ones(dm.n_velocity)
        self._interior_mask[bd] = 0.0
        self._is_bd_p2 = np.zeros(dm.n_p2, dtype=bool)
        self._is_bd_p2[dm.boundary_p2] = True

        ops = self.ops
        cfg = config
        steady = cfg.nu * ops.K + cfg.mu * ops.G + cfg.beta * ops.B_nudge
        self._M_el = assembly.apply_dirichlet(ops.M, bd, unit_diagonal=False)
        self._steady_el = assembly.apply_dirichlet(steady, bd, unit_diagonal=False)
        diag_bd = np.zeros(dm.n_velocity)
        diag_bd[bd] = 1.0
        self._eye_bd = sp.diags(diag_bd).tocsr()
        self._D_el = assembly.zero_columns(ops.D, bd)
        self._m = ops.pressure_mean
        self._saddle = solver.FrozenPinnedSolver(self._D_el, self._m)
        self._base_blocks: dict[float, sp.csr_matrix] = {}

    # -- right-hand side pieces ------------------------------------------------

    def load_vector(self, t: float) -> np.ndarray:
        cfg = self.config
        return assembly.assemble_load(
            self.dofmap, self.rule,
            lambda x, y, tt: manufactured.eval_f(x, y, tt, cfg.nu), t)

    def observation_rhs(self, t: float) -> np.ndarray:
        """beta * E^T W I_H(u(., t)) from the closed-form datum."""
        cfg = self.config
        if cfg.beta == 0.0:
            return np.zeros(self.dofmap.n_velocity)
        coarse = observe.observe_exact(cfg.interpolant, self.grid,
                                       manufactured.eval_u, t,
                                       degree=cfg.quad_error)
        dw = self.ops.nudging.data_weight
        return cfg.beta * np.concatenate([dw @ coarse[:, 0], dw @ coarse[:, 1]])

    # -- stepping --------------------------------------------------------------

    def _velocity_block(self, alpha: float, w: np.ndarray) -> sp.csr_matrix:
        """alpha*M + nu*K + mu*G + beta*B + C(w), Dirichlet-eliminated."""
        cs = assembly.convection_block(self.dofmap, self.rule, w).tocoo()
        keep = ~(self._is_bd_p2[cs.row] | self._is_bd_p2[cs.col])
        n = self.dofmap.n_p2
        rows = np.concatenate([cs.row[keep], cs.row[keep] + n])
        cols = np.concatenate([cs.col[keep], cs.col[keep] + n])
        data = np.concatenate([cs.data[keep], cs.data[keep]])
        C_el = sp.coo_matrix((data, (rows, cols)),
                             shape=(2 * n, 2 * n)).tocsr()
        base = self._base_blocks.get(alpha)
        if base is None:
            base = (alpha * self._M_el + self._steady_el + self._eye_bd).tocsr()
            self._base_blocks[alpha] = base
        return (base + C_el).tocsr()

    def _solve_step(self, alpha: float, w: np.ndarray, rhs_v: np.ndarray):
        A = self._velocity_block(alpha, w)
        rhs_v = rhs_v * self._interior_mask
        rhs = np.concatenate([rhs_v, np.zeros(self.dofmap.n_pressure)])
        return self._saddle.solve(A, rhs)

    def initial_state(self) -> TimeState:
        if self.config.initial == "exact":
            u0 = observe.interpolate_p2_velocity(self.dofmap,
                                                 manufactured.eval_u, 0.0)
            u0[self._bd] = 0.0
        else:
            u0 = np.zeros(self.dofmap.n_velocity)
        return TimeState(u_prev=u0, u_prev2=None,
                         p_prev=np.zeros(self.dofmap.n_pressure), t=0.0, step=0)

    def first_step(self, state: TimeState) -> TimeState:
        """Implicit Euler bootstrap with convection linearized at u^0."""
        dt = self.config.timestep
        t1 = state.t + dt
        alpha = 1.0 / dt
        rhs_v = (self.ops.M @ state.u_prev) / dt \
            + self.load_vector(t1) + self.observation_rhs(t1)
        u1, p1 = self._solve_step(alpha, state.u_prev, rhs_v)
        self._check_finite(u1, state.step + 1, t1)
        return TimeState(u_prev=u1, u_prev2=state.u_prev, p_prev=p1,
                         t=t1, step=state.step + 1)

    def bdf2_step(self, state: TimeState) -> TimeState:
        if state.u_prev2 is None:
            raise InvalidConfigError("BDF2 step requires two history levels")
        dt = self.config.timestep
        tn = state.t + dt
        alpha = 1.5 / dt
        w = 2.0 * state.u_prev - state.u_prev2
        rhs_v = (self.ops.M @ (4.0 * state.u_prev - state.u_prev2)) / (2.0 * dt) \
            + self.load_vector(tn) + self.observation_rhs(tn)
        un, pn = self._solve_step(alpha, w, rhs_v)
        self._check_finite(un, state.step + 1, tn)
        return TimeState(u_prev=un, u_prev2=state.u_prev, p_prev=pn,
                         t=tn, step=state.step + 1)

    def _check_finite(self, u: np.ndarray, step: int, t: float):
        if not np.all(np.isfinite(u)):
            raise DivergedError(step, t)

    def diagnostics(self, state: TimeState) -> StepRecord:
        cfg = self.config
        err = metrics.l2_velocity_error(self.dofmap, state.u_prev,
                                        manufactured.eval_u, state.t,
                                        degree=cfg.quad_error)
        ratio = metrics.observation_error_ratio(
            cfg.interpolant, self.grid, self.dofmap, state.u_prev,
            manufactured.eval_u, state.t, l2_err=err)
        div = float(np.abs(self._D_el @ state.u_prev).max())
        return StepRecord(t=state.t, l2_error=err, obs_ratio=ratio,
                          div_residual=div)

    def run(self, collect_states: bool = False):
        """Advance to T, yielding a StepRecord per step (including t=0)."""
        state = self.initial_state()
        yield (self.diagnostics(state), state if collect_states else None)
        n_steps = int(round(self.config.T / self.config.timestep))
        for _ in range(n_steps):
            if state.u_prev2 is None:
                state = self.first_step(state)
            else:
                state = self.bdf2_step(state)
            yield (self.diagnostics(state), state if collect_states else None)


def run(config: SimulationConfig):
    """Stream of StepRecord diagnostics for a full run."""
    sim = Simulation(config)
    for rec, _ in sim.run():
        yield rec


def run_to_end(config: SimulationConfig):
    """Run a simulation and return (records, final_state)."""
    sim = Simulation(config)
    records = []
    state = None
    for rec, st in sim.run(collect_states=True):
        records.append(rec)
        state = st
    return records, state
