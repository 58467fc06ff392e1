"""Normalized descent flow for the sigma_2 energy on radial backgrounds.

The evolving metric is ``g(t) = e^{-2u(t)} g0``.  The conformal factor moves
by

    2 du/dt = h(a) - h(b) - s_eps,
    a = sigma_2(W)^{1/2},          b = r_eps^{1/2} e^{(eps-2)u},

where ``W`` is the transformed Schouten tensor of u, the normalizer
``r_eps = F2 / V_eps`` pins the equilibrium scale, and ``s_eps`` is the
V_eps-weighted mean of h(a) - h(b), chosen so the regularized volume V_eps
is conserved exactly by the semi-discrete system.  Stationary points solve
``sigma_2(W) = r_eps e^{(2 eps - 4) u}``.

The gauge function

    h(s) = 2 log s            (s <= 1)
           s - 1 + log s      (s > 1)

is C^1, strictly increasing with h' >= 1, and concave; the logarithmic inner
branch steepens the response where sigma_2 collapses, the linear outer branch
keeps the time-step restriction benign where sigma_2 is large.

Energy dissipation: with r_eps = F2/V_eps the volume projection drops out of
the energy slope exactly, leaving

    dF2/dt = -(n-4)/2 int (h(a) - h(b)) (sigma_2(g) - r_eps e^{2 eps u}) dvol(g)

whose integrand is a product of two same-signed factors, so F2 is
non-increasing for n > 4.  The monitor records both this formula and the
finite-difference slope of F2 so the two can be cross-checked.

Time stepping is explicit midpoint (RK2) under the parabolic restriction
``dt = safety * dx^2 / max_i lambda_i`` with the per-node linearization scale
``lambda_i = h'(a) (n-1) sigma_1(W) / (2 a)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from ._accel import USE_NUMBA, jit
from .discretize import RadialGrid, stencil_tables
from .geometry import ConeViolation, ConformalField, functional_V, schouten_fields

__all__ = [
    "gauge_h",
    "gauge_h_prime",
    "h_eval",
    "h_prime",
    "FlowConfig",
    "MonitorRecord",
    "MONITOR_COLUMNS",
    "FlowResult",
    "FlowState",
    "flow_state",
    "normalizers",
    "velocity",
    "step",
    "flow_run",
    "run",
    "eigen_solve",
    "EigenResult",
    "continuation",
    "ContinuationRung",
    "local_estimate_monitor",
    "initial_field",
    "INITIAL_FIELDS",
    "write_monitor_csv",
]


# ---------------------------------------------------------------------------
# gauge

def gauge_h(s):
    """Flow gauge: 2 log s below 1, s - 1 + log s above; C^1 at the seam."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise ValueError("gauge argument must be positive")
    return np.where(s <= 1.0, 2.0 * np.log(s), s - 1.0 + np.log(s))


def gauge_h_prime(s):
    """Derivative of the gauge; always >= 1."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise ValueError("gauge argument must be positive")
    return np.where(s <= 1.0, 2.0 / s, 1.0 + 1.0 / s)


h_eval = gauge_h
h_prime = gauge_h_prime


# ---------------------------------------------------------------------------
# configuration / results

@dataclass
class FlowConfig:
    eps: float
    t_max: float = 10.0
    dt_safety: float = 0.8
    tol_converge: float = 1e-8
    record_dt: float = 0.01
    max_steps: int = 50_000_000
    blowup_floor: float = -10.0
    timeout: float | None = None


MONITOR_COLUMNS = (
    "t",
    "F2",
    "V_eps",
    "r_eps",
    "s_eps",
    "min_sigma2",
    "sup_grad",
    "dF2dt_measured",
    "dF2dt_formula",
)


@dataclass
class MonitorRecord:
    t: float
    F2: float
    V_eps: float
    r_eps: float
    s_eps: float
    min_sigma2: float
    sup_grad: float
    dF2dt_measured: float
    dF2dt_formula: float

    def astuple(self):
        return (
            self.t,
            self.F2,
            self.V_eps,
            self.r_eps,
            self.s_eps,
            self.min_sigma2,
            self.sup_grad,
            self.dF2dt_measured,
            self.dF2dt_formula,
        )


@dataclass
class FlowResult:
    status: str
    t: float
    steps: int
    u: np.ndarray
    grid: RadialGrid
    background: object
    config: FlowConfig
    records: list[MonitorRecord]
    # (t, min_u, sup_grad) per record, for the local-estimate monitor
    aux_track: np.ndarray
    F2: float
    V_eps: float
    r_eps: float
    s_eps: float
    equilibrium_residual: float
    max_step_F2_increase: float
    max_V_drift: float
    wall_time: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"


# scalar slot layout shared by both velocity kernels
_S_F2 = 0
_S_VEPS = 1
_S_REPS = 2
_S_SEPS = 3
_S_MIN_S2G = 4
_S_SUPGRAD = 5
_S_LAMMAX = 6
_S_MINU = 7
_S_SUPV = 8
_S_DF2 = 9
_NS = 10


def _velocity_numpy(u, out_v, out_s, idx, cd1, cd2, lat, pole, s_r0, s_t0,
                    an_r2, wdens, n, eps, full):
    gathered = u[idx]
    up = np.einsum("ij,ij->i", cd1, gathered)
    upp = np.einsum("ij,ij->i", cd2, gathered)
    g2h = 0.5 * up * up
    tang = np.where(pole, upp, up * lat)
    w_r = upp + g2h + s_r0
    w_t = tang - g2h + s_t0
    var = up * up * an_r2
    s1 = w_r + (n - 1.0) * w_t
    s2 = (n - 1.0) * w_t * (w_r + 0.5 * (n - 2.0) * w_t) - 0.5 * var
    if s1.min() <= 0.0 or s2.min() <= 0.0:
        return 0
    a = np.sqrt(s2)
    eb = np.exp((eps - 2.0) * u)
    e4 = np.exp((4.0 - n) * u)
    ev = e4 * eb * eb
    f2i = e4 * s2
    f2 = float(np.sum(wdens * f2i))
    veps = float(np.sum(wdens * ev))
    reps = f2 / veps
    b = math.sqrt(reps) * eb
    hd = np.where(a <= 1.0, 2.0 * np.log(a), a - 1.0 + np.log(a)) \
        - np.where(b <= 1.0, 2.0 * np.log(b), b - 1.0 + np.log(b))
    seps = float(np.sum(wdens * ev * hd)) / veps
    np.multiply(hd - seps, 0.5, out=out_v)
    hp = np.where(a <= 1.0, 2.0 / a, 1.0 + 1.0 / a)
    out_s[_S_F2] = f2
    out_s[_S_VEPS] = veps
    out_s[_S_REPS] = reps
    out_s[_S_SEPS] = seps
    out_s[_S_MIN_S2G] = float(np.min(np.exp(4.0 * u) * s2)) if full else 0.0
    out_s[_S_SUPGRAD] = float(np.max(up * up + np.maximum(np.abs(upp), np.abs(tang))))
    out_s[_S_LAMMAX] = float(np.max(hp * (n - 1.0) * s1 / (2.0 * a)))
    out_s[_S_MINU] = float(u.min())
    out_s[_S_SUPV] = float(np.max(np.abs(out_v)))
    out_s[_S_DF2] = -0.5 * (n - 4.0) * float(np.sum(wdens * hd * (f2i - reps * ev)))
    return 1


def _velocity_serial(u, out_v, out_s, idx, cd1, cd2, lat, pole, s_r0, s_t0,
                     an_r2, wdens, n, eps, full):
    # Same computation as _velocity_numpy, written as explicit loops with
    # Neumaier-compensated accumulators; this is the version numba compiles.
    N = u.shape[0]
    nm1 = n - 1.0
    a = np.empty(N)
    s1 = np.empty(N)
    s2 = np.empty(N)
    eb = np.empty(N)
    ev = np.empty(N)
    f2i = np.empty(N)
    hd = np.empty(N)

    f2_s = 0.0
    f2_c = 0.0
    ve_s = 0.0
    ve_c = 0.0
    supgrad = 0.0
    min_u = np.inf
    for i in range(N):
        upi = 0.0
        uppi = 0.0
        for k in range(6):
            uk = u[idx[i, k]]
            upi += cd1[i, k] * uk
            uppi += cd2[i, k] * uk
        g2h = 0.5 * upi * upi
        tang = uppi if pole[i] else upi * lat[i]
        w_r = uppi + g2h + s_r0[i]
        w_t = tang - g2h + s_t0[i]
        var = upi * upi * an_r2[i]
        s1i = w_r + nm1 * w_t
        s2i = nm1 * w_t * (w_r + 0.5 * (n - 2.0) * w_t) - 0.5 * var
        if s1i <= 0.0 or s2i <= 0.0:
            return 0
        s1[i] = s1i
        s2[i] = s2i
        a[i] = math.sqrt(s2i)
        ui = u[i]
        ebi = math.exp((eps - 2.0) * ui)
        e4i = math.exp((4.0 - n) * ui)
        evi = e4i * ebi * ebi
        eb[i] = ebi
        ev[i] = evi
        f2ii = e4i * s2i
        f2i[i] = f2ii

        x = wdens[i] * f2ii
        t = f2_s + x
        if abs(f2_s) >= abs(x):
            f2_c += (f2_s - t) + x
        else:
            f2_c += (x - t) + f2_s
        f2_s = t

        x = wdens[i] * evi
        t = ve_s + x
        if abs(ve_s) >= abs(x):
            ve_c += (ve_s - t) + x
        else:
            ve_c += (x - t) + ve_s
        ve_s = t

        gb = upi * upi + max(abs(uppi), abs(tang))
        if gb > supgrad:
            supgrad = gb
        if ui < min_u:
            min_u = ui

    f2 = f2_s + f2_c
    veps = ve_s + ve_c
    reps = f2 / veps
    rt_reps = math.sqrt(reps)

    sn_s = 0.0
    sn_c = 0.0
    df_s = 0.0
    df_c = 0.0
    lam_max = 0.0
    for i in range(N):
        ai = a[i]
        bi = rt_reps * eb[i]
        ha = 2.0 * math.log(ai) if ai <= 1.0 else ai - 1.0 + math.log(ai)
        hb = 2.0 * math.log(bi) if bi <= 1.0 else bi - 1.0 + math.log(bi)
        hdi = ha - hb
        hd[i] = hdi

        x = wdens[i] * ev[i] * hdi
        t = sn_s + x
        if abs(sn_s) >= abs(x):
            sn_c += (sn_s - t) + x
        else:
            sn_c += (x - t) + sn_s
        sn_s = t

        x = wdens[i] * hdi * (f2i[i] - reps * ev[i])
        t = df_s + x
        if abs(df_s) >= abs(x):
            df_c += (df_s - t) + x
        else:
            df_c += (x - t) + df_s
        df_s = t

        hpa = 2.0 / ai if ai <= 1.0 else 1.0 + 1.0 / ai
        lam = hpa * nm1 * s1[i] / (2.0 * ai)
        if lam > lam_max:
            lam_max = lam

    seps = (sn_s + sn_c) / veps
    sup_v = 0.0
    for i in range(N):
        vi = 0.5 * (hd[i] - seps)
        out_v[i] = vi
        if abs(vi) > sup_v:
            sup_v = abs(vi)

    min_s2g = 0.0
    if full:
        min_s2g = np.inf
        for i in range(N):
            s2g = math.exp(4.0 * u[i]) * s2[i]
            if s2g < min_s2g:
                min_s2g = s2g

    out_s[_S_F2] = f2
    out_s[_S_VEPS] = veps
    out_s[_S_REPS] = reps
    out_s[_S_SEPS] = seps
    out_s[_S_MIN_S2G] = min_s2g
    out_s[_S_SUPGRAD] = supgrad
    out_s[_S_LAMMAX] = lam_max
    out_s[_S_MINU] = min_u
    out_s[_S_SUPV] = sup_v
    out_s[_S_DF2] = -0.5 * (n - 4.0) * (df_s + df_c)
    return 1


_velocity = jit(_velocity_serial) if USE_NUMBA else _velocity_numpy


# ---------------------------------------------------------------------------
# initial fields

def _init_constant(x, amplitude):
    return np.full(x.size, float(amplitude))


def _init_cosine(x, amplitude):
    span = x[-1] - x[0]
    return amplitude * np.cos(math.pi * (x - x[0]) / span)


def _init_bump(x, amplitude):
    span = x[-1] - x[0]
    c = x[0] + 0.5 * span
    w = span / 8.0
    return amplitude * np.exp(-(((x - c) / w) ** 2))


INITIAL_FIELDS = {
    "constant": _init_constant,
    "cosine": _init_cosine,
    "bump": _init_bump,
}


def initial_field(name: str, grid: RadialGrid, amplitude: float = 0.1) -> np.ndarray:
    try:
        maker = INITIAL_FIELDS[name]
    except KeyError:
        raise KeyError(
            f"unknown initial field {name!r}; choose from {sorted(INITIAL_FIELDS)}"
        ) from None
    return maker(grid.x, amplitude)


# ---------------------------------------------------------------------------
# driver

def _kernel_inputs(grid: RadialGrid, background):
    idx, cd1 = stencil_tables(grid, 1)
    _, cd2 = stencil_tables(grid, 2)
    x = grid.x
    s_r0, s_t0 = background.base_schouten(x)
    return (
        np.ascontiguousarray(idx),
        np.ascontiguousarray(cd1),
        np.ascontiguousarray(cd2),
        np.ascontiguousarray(background.lateral(x)),
        np.ascontiguousarray(background.pole_mask(x)),
        np.ascontiguousarray(s_r0),
        np.ascontiguousarray(s_t0),
        np.ascontiguousarray(background.aniso_over_r2(x)),
        np.ascontiguousarray(grid.weights),
    )


def flow_run(background, u0, config: FlowConfig, grid: RadialGrid | None = None) -> FlowResult:
    """Integrate the normalized flow from ``u0`` until convergence or t_max.

    Terminal status is one of ``converged`` (velocity sup-norm under
    ``tol_converge``), ``t_max``, ``max_steps``, ``timeout``,
    ``blow_up_suspected`` (min u fell through ``blowup_floor``) or
    ``cone_exit`` (the field left Gamma_2^+, at which point the velocity is
    undefined and integration must stop).
    """
    u = np.array(u0, dtype=float)
    if grid is None:
        grid = background.make_grid(u.size)
    if u.shape != (grid.num_points,):
        raise ValueError("u0 does not match the grid")
    n = background.n
    if n <= 4:
        raise ValueError("the flow needs dimension n >= 5")
    if config.record_dt <= 0.0:
        raise ValueError("record_dt must be positive")
    eps = float(config.eps)
    args = _kernel_inputs(grid, background)
    h2 = grid.h * grid.h

    v1 = np.empty(u.size)
    v2 = np.empty(u.size)
    s = np.empty(_NS)
    s_mid = np.empty(_NS)

    records: list[MonitorRecord] = []
    aux: list[tuple[float, float, float]] = []
    t = 0.0
    steps = 0
    status = "max_steps"
    next_rec = 0.0
    prev_rec_t = 0.0
    prev_rec_f2 = 0.0
    prev_f2 = math.nan
    v0_ref = math.nan
    max_f2_inc = -np.inf
    max_drift = 0.0
    t_start = time.monotonic()

    def push_record():
        nonlocal prev_rec_t, prev_rec_f2, next_rec
        meas = 0.0 if not records else (s[_S_F2] - prev_rec_f2) / (t - prev_rec_t)
        records.append(
            MonitorRecord(t, s[_S_F2], s[_S_VEPS], s[_S_REPS], s[_S_SEPS],
                          s[_S_MIN_S2G], s[_S_SUPGRAD], meas, s[_S_DF2])
        )
        aux.append((t, s[_S_MINU], s[_S_SUPGRAD]))
        prev_rec_t = t
        prev_rec_f2 = s[_S_F2]
        next_rec += config.record_dt

    while True:
        want_rec = t >= next_rec - 1e-13
        ok = _velocity(u, v1, s, *args, n, eps, 1 if want_rec else 0)
        if ok == 0:
            status = "cone_exit"
            break
        if steps == 0:
            v0_ref = s[_S_VEPS]
        else:
            drift = abs(s[_S_VEPS] - v0_ref) / v0_ref
            if drift > max_drift:
                max_drift = drift
            inc = s[_S_F2] - prev_f2
            if inc > max_f2_inc:
                max_f2_inc = inc
        prev_f2 = s[_S_F2]

        if want_rec:
            push_record()
        if s[_S_SUPV] <= config.tol_converge:
            status = "converged"
            break
        if s[_S_MINU] < config.blowup_floor:
            status = "blow_up_suspected"
            break
        if t >= config.t_max:
            status = "t_max"
            break
        if steps >= config.max_steps:
            status = "max_steps"
            break
        if config.timeout is not None and steps % 256 == 0:
            if time.monotonic() - t_start > config.timeout:
                status = "timeout"
                break

        dt = config.dt_safety * h2 / s[_S_LAMMAX]
        if t + dt > config.t_max:
            dt = config.t_max - t
        u_mid = u + (0.5 * dt) * v1
        ok = _velocity(u_mid, v2, s_mid, *args, n, eps, 0)
        if ok == 0:
            status = "cone_exit"
            break
        u = u + dt * v2
        t += dt
        steps += 1

    if status != "cone_exit" and (not records or records[-1].t < t):
        _velocity(u, v1, s, *args, n, eps, 1)
        push_record()

    # equilibrium residual against sigma_2(W)^{1/2} = r_eps^{1/2} e^{(eps-2)u}
    residual = math.nan
    if status != "cone_exit":
        f = schouten_fields(grid, background, u)
        target = math.sqrt(s[_S_REPS]) * np.exp((eps - 2.0) * u)
        residual = float(np.max(np.abs(np.sqrt(np.maximum(f.sigma2, 0.0)) - target)))

    return FlowResult(
        status=status,
        t=t,
        steps=steps,
        u=u,
        grid=grid,
        background=background,
        config=config,
        records=records,
        aux_track=np.array(aux) if aux else np.zeros((0, 3)),
        F2=s[_S_F2],
        V_eps=s[_S_VEPS],
        r_eps=s[_S_REPS],
        s_eps=s[_S_SEPS],
        equilibrium_residual=residual,
        max_step_F2_increase=(0.0 if max_f2_inc == -np.inf else max_f2_inc),
        max_V_drift=max_drift,
        wall_time=time.monotonic() - t_start,
    )


# ---------------------------------------------------------------------------
# single-step driver

def _cached_kernel_inputs(grid: RadialGrid, background):
    key = ("kernel", background)
    args = grid._ops.get(key)
    if args is None:
        args = _kernel_inputs(grid, background)
        grid._ops[key] = args
    return args


def _probe(background, field: ConformalField, eps: float, full: int = 1):
    """One velocity evaluation; returns (v, scalar slots)."""
    args = _cached_kernel_inputs(field.grid, background)
    v = np.empty(field.u.size)
    s = np.empty(_NS)
    ok = _velocity(field.u, v, s, *args, background.n, float(eps), full)
    if ok == 0:
        raise ConeViolation("field leaves Gamma_2^+; the flow velocity is undefined")
    return v, s


def normalizers(background, field: ConformalField, eps: float) -> tuple[float, float]:
    """The self-consistent pair (r_eps, s_eps) at this field.

    ``r_eps = F2 / V_eps`` feeds the target branch of the gauge, and
    ``s_eps`` is the mean that keeps V_eps exactly stationary for the
    semi-discrete flow.  Both come from the same kernel evaluation the
    integrator uses.
    """
    _, s = _probe(background, field, eps)
    return float(s[_S_REPS]), float(s[_S_SEPS])


def velocity(background, field: ConformalField, eps: float) -> np.ndarray:
    """du/dt of the normalized flow at this field (raises on cone exit)."""
    v, _ = _probe(background, field, eps)
    return v


@dataclass
class FlowState:
    """One integrator state: the field plus its step bookkeeping."""

    field: ConformalField
    t: float
    eps: float
    dt: float
    monitors: MonitorRecord
    background: object
    dt_safety: float = 0.8


def flow_state(background, field: ConformalField, eps: float,
               dt_safety: float = 0.8, t: float = 0.0) -> FlowState:
    """Package a field as a steppable state, with monitors evaluated."""
    _, s = _probe(background, field, eps)
    dt = dt_safety * field.grid.h * field.grid.h / s[_S_LAMMAX]
    rec = MonitorRecord(t, s[_S_F2], s[_S_VEPS], s[_S_REPS], s[_S_SEPS],
                        s[_S_MIN_S2G], s[_S_SUPGRAD], math.nan, s[_S_DF2])
    return FlowState(field, t, eps, float(dt), rec, background, dt_safety)


def step(state: FlowState) -> FlowState:
    """Advance one midpoint step, keeping the stability-bounded dt rule."""
    grid = state.field.grid
    background = state.background
    args = _cached_kernel_inputs(grid, background)
    n, eps = background.n, state.eps
    u = state.field.u
    v = np.empty(u.size)
    s = np.empty(_NS)
    if _velocity(u, v, s, *args, n, eps, 0) == 0:
        raise ConeViolation("field leaves Gamma_2^+; the flow velocity is undefined")
    dt = state.dt
    u_mid = u + (0.5 * dt) * v
    if _velocity(u_mid, v, s, *args, n, eps, 0) == 0:
        raise ConeViolation("midpoint field leaves Gamma_2^+")
    new_field = ConformalField(grid, u + dt * v)
    t_new = state.t + dt
    _, s_new = _probe(background, new_field, eps)
    dt_next = state.dt_safety * grid.h * grid.h / s_new[_S_LAMMAX]
    rec = MonitorRecord(t_new, s_new[_S_F2], s_new[_S_VEPS], s_new[_S_REPS],
                        s_new[_S_SEPS], s_new[_S_MIN_S2G], s_new[_S_SUPGRAD],
                        (s_new[_S_F2] - state.monitors.F2) / dt, s_new[_S_DF2])
    return FlowState(new_field, t_new, eps, float(dt_next), rec, background,
                     state.dt_safety)


def run(background, init, eps: float, config: FlowConfig | None = None) -> FlowResult:
    """Integrate the flow from an initial field at the given eps.

    ``init`` may be a ConformalField (its grid is used) or a plain sample
    array (the background's natural grid of matching size is built).
    """
    if config is None:
        config = FlowConfig(eps=float(eps))
    elif config.eps != float(eps):
        config = replace(config, eps=float(eps))
    if isinstance(init, ConformalField):
        return flow_run(background, init.u, config, grid=init.grid)
    return flow_run(background, np.asarray(init, dtype=float), config)


# ---------------------------------------------------------------------------
# eigenvalue mode

@dataclass
class EigenResult:
    lambda1: float
    u: np.ndarray
    flow: FlowResult


def eigen_solve(background, u0, config: FlowConfig | None = None, **overrides) -> EigenResult:
    """First nonlinear eigenvalue of the sigma_2 operator via the eps=2 flow.

    At eps = 2 the equilibrium equation is sigma_2(W) = lambda with the
    regularized volume V_2 held fixed, and the converged normalizer r_2 is
    the eigenvalue.  Different admissible starts converge to conformal
    factors agreeing up to an additive constant.
    """
    if config is None:
        kw = {"eps": 2.0, "t_max": 200.0}
        kw.update(overrides)
        config = FlowConfig(**kw)
    if config.eps != 2.0:
        raise ValueError("the eigenvalue mode runs the eps = 2 flow")
    res = flow_run(background, u0, config)
    return EigenResult(lambda1=res.r_eps, u=res.u, flow=res)


# ---------------------------------------------------------------------------
# continuation in eps

@dataclass
class ContinuationRung:
    eps: float
    status: str
    Y_eps: float
    Y2_estimate: float
    F2: float
    V_eps: float
    r_eps: float
    u: np.ndarray


def continuation(background, u0, eps_ladder, base_config: FlowConfig | None = None,
                 **overrides) -> list[ContinuationRung]:
    """Descend the eps-ladder, warm-starting each rung from the previous one.

    Per rung two scale-invariant energies are reported: ``Y_eps`` uses the
    V_eps normalization the rung actually ran with, ``Y2_estimate`` the plain
    volume normalization (the quantity the ladder estimates).  The ladder
    stops early if a rung fails to converge or leaves the cone.
    """
    if base_config is None:
        kw = {"eps": 0.0, "t_max": 200.0}
        kw.update(overrides)
        base_config = FlowConfig(**kw)
    n = background.n
    rungs: list[ContinuationRung] = []
    u = np.array(u0, dtype=float)
    for eps in eps_ladder:
        eps = float(eps)
        res = flow_run(background, u, replace(base_config, eps=eps))
        if res.status == "cone_exit":
            rungs.append(ContinuationRung(eps, res.status, math.nan, math.nan,
                                          math.nan, math.nan, math.nan, res.u))
            break
        vol = functional_V(res.grid, background, res.u, 0.0)
        y_eps = res.V_eps ** (-(n - 4.0) / (n - 2.0 * eps)) * res.F2
        y2 = vol ** (-(n - 4.0) / n) * res.F2
        rungs.append(
            ContinuationRung(eps, res.status, float(y_eps), float(y2),
                             res.F2, res.V_eps, res.r_eps, res.u)
        )
        if res.status not in ("converged", "t_max"):
            break
        u = res.u
    return rungs


# ---------------------------------------------------------------------------
# local-estimate monitor

def local_estimate_monitor(result: FlowResult, eps: float | None = None) -> np.ndarray:
    """Gradient bound against the blow-up envelope, per record.

    Returns rows ``(t, sup_grad, envelope, ratio)`` where
    ``envelope = 1 + e^{(2-eps)(-min u)}``.  A ratio staying O(1) along the
    run is the numerical shadow of the interior estimates; nothing is
    asserted here, the data is for inspection.
    """
    if eps is None:
        eps = result.config.eps
    track = result.aux_track
    if track.size == 0:
        return np.zeros((0, 4))
    env = 1.0 + np.exp((2.0 - eps) * (-track[:, 1]))
    ratio = track[:, 2] / env
    return np.column_stack([track[:, 0], track[:, 2], env, ratio])


# ---------------------------------------------------------------------------
# CSV output

def write_monitor_csv(records, path) -> None:
    """Write the monitor trace with 17 significant digits per field.

    The formatting (plus the deterministic accumulation in the kernels)
    makes repeated runs byte-identical.
    """
    lines = [",".join(MONITOR_COLUMNS)]
    for rec in records:
        lines.append(",".join(f"{v:.17g}" for v in rec.astuple()))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
