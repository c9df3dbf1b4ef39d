"""Two-fidelity analytic evaluator for the reference EESM.

The field solution is a lumped magnetic equivalent circuit (MEC) per pole.
Low fidelity uses one flux tube per region; high fidelity splits the stator
tooth into series segments along its depth and adds a slot-leakage path in
parallel with the air gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo

MU0 = 4e-7 * math.pi
LOW, HIGH = 1, 2


class NoConvergence(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"MEC fixed point did not converge in {iterations} iterations (residual {residual:.3e})")


@dataclass(frozen=True)
class MachineSpec:
    outer_stator_radius: float = 120.0
    inner_stator_radius: float = 83.0
    outer_rotor_radius: float = 81.5
    inner_rotor_radius: float = 40.0
    airgap: float = 1.5
    axial_length: float = 110.0
    slots_per_pole_per_phase: int = 2
    stack_factor: float = 0.95
    windings_per_slot: int = 7
    parallel_windings: int = 3
    max_inverter_current: float = 635.0
    dc_link_voltage: float = 400.0
    pole_count: int = 6
    phases: int = 3
    # rotor and winding details that Table-level data does not pin down
    field_turns_per_pole: int = 100
    field_wire_area: float = 3.0  # mm^2
    pole_body_ratio: float = 0.45  # pole body width / rotor pole pitch
    pole_height_ratio: float = 0.55  # pole body height / rotor radial depth
    q_axis_extra_gap: float = 6.0  # mm added to the air gap on the q axis
    end_turn_length: float = 60.0  # mm of end winding per bar end

    def __post_init__(self):
        radii = (self.inner_rotor_radius, self.outer_rotor_radius, self.inner_stator_radius, self.outer_stator_radius)
        if not all(a < b for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be strictly nested")
        if not math.isclose(self.airgap, self.inner_stator_radius - self.outer_rotor_radius, rel_tol=1e-9):
            raise ValueError("airgap must equal inner stator radius minus outer rotor radius")
        if not 0 < self.stack_factor <= 1:
            raise ValueError("stack_factor must lie in (0, 1]")
        if self.pole_count < 2 or self.pole_count % 2:
            raise ValueError("pole_count must be even and >= 2")

    @property
    def slot_count(self) -> int:
        return self.slots_per_pole_per_phase * self.pole_count * self.phases

    @property
    def series_turns(self) -> float:
        """Series turns per phase of one parallel path."""
        return self.slot_count * self.windings_per_slot / (2 * self.phases * self.parallel_windings)

    @property
    def winding_factor(self) -> float:
        q = self.slots_per_pole_per_phase
        alpha = math.pi * self.pole_count / self.slot_count
        return math.sin(q * alpha / 2) / (q * math.sin(alpha / 2))


@dataclass(frozen=True)
class MaterialModel:
    """M270-35A-like defaults; loss coefficients refer to (f0, B0)."""

    kh: float = 2.0
    ke: float = 0.7
    alpha_exp: float = 1.0
    beta_exp: float = 2.0
    gamma_exp: float = 2.0
    f0: float = 50.0
    b0: float = 1.5
    mass_density: float = 7650.0
    field_factor: float = 1.5
    copper_conductivity: float = 5.8e7
    saturation_b: float = 1.7
    bh_knee: float = 250.0
    linear: bool = False

    def __post_init__(self):
        for name in ("alpha_exp", "beta_exp", "gamma_exp"):
            if not 1 <= getattr(self, name) <= 2:
                raise ValueError(f"{name} must lie in [1, 2]")
        for name in ("kh", "ke", "f0", "b0", "mass_density", "field_factor", "copper_conductivity", "saturation_b", "bh_knee"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def initial_permeability(self) -> float:
        return MU0 + self.saturation_b / self.bh_knee

    def b_of_h(self, h):
        h = np.asarray(h, dtype=float)
        if self.linear:
            return self.initial_permeability * h
        return MU0 * h + (2 * self.saturation_b / math.pi) * np.arctan(math.pi * h / (2 * self.bh_knee))

    def h_of_b(self, b):
        """Inverse of the arctangent B-H curve."""
        b = np.asarray(b, dtype=float)
        if self.linear:
            return b / self.initial_permeability
        sign, target = np.sign(b), np.abs(b)
        # concave increasing curve: Newton from h = 0 approaches the root from below
        h = np.zeros_like(target)
        k = math.pi / (2 * self.bh_knee)
        for _ in range(100):
            f = MU0 * h + (2 * self.saturation_b / math.pi) * np.arctan(k * h) - target
            step = f / self.dbdh(h)
            h = h - step
            if np.all(np.abs(step) <= 1e-14 * np.maximum(h, 1.0)):
                break
        return sign * h

    def dbdh(self, h):
        h = np.abs(np.asarray(h, dtype=float))
        if self.linear:
            return np.full_like(h, self.initial_permeability)
        k = math.pi / (2 * self.bh_knee)
        return MU0 + (self.saturation_b / self.bh_knee) / (1 + (k * h) ** 2)


@dataclass(frozen=True)
class OperatingPoint:
    speed: float = 6000.0  # rpm
    current: float = 200.0  # stator current amplitude, A
    rotor_current: float = 20.0
    id: float = 0.0
    iq: float = 200.0
    cos_phi: float = 0.95
    phases: int = 3
    parallel_paths: int = 3
    terminal_voltage: float = 230.0
    efficiency_target: float = 0.95
    max_current_density: float = 10.0  # A/mm^2
    mechanical_power: float = 130e3  # W

    def frequency(self, pole_count: int) -> float:
        return self.speed * pole_count / 120.0

    def with_current(self, current: float) -> OperatingPoint:
        """Same point with the stator current on the q axis scaled to ``current``."""
        return replace(self, current=current, id=0.0, iq=current)


@dataclass(frozen=True)
class MagneticState:
    psi_d: float
    psi_q: float
    ld: float
    lq: float
    lr: float  # rotor-to-stator mutual inductance
    tooth_b: float  # peak tooth flux density magnitude, T
    tooth_h: float  # field intensity at that point, A/m
    tooth_b_d: float
    tooth_b_q: float
    slot_area: float  # mm^2
    tooth_area: float  # mm^2
    u_stator: float  # d-axis magnetic potential drops, A
    u_rotor: float
    u_gap: float
    flux_d: float  # main (gap) flux per pole, Wb
    flux_leak: float
    yoke_b: float
    rotor_b: float
    element_b: tuple = field(default=())  # for iron loss
    element_volume: tuple = field(default=())  # m^3
    iterations: int = 0

    # fields that are linear in the excitation when the iron is linear
    LINEAR_FIELDS = ("psi_d", "psi_q", "tooth_b_d", "tooth_b_q", "u_stator", "u_rotor", "u_gap", "flux_d", "flux_leak")


@dataclass(frozen=True)
class ConstraintBounds:
    g2_max: float = 1.35  # T
    g4_max: float = 1.5  # V
    g5_max: float = 1.2e-4
    t_max_6k: float = 120.0  # degC
    t_max_12k: float = 160.0


@dataclass(frozen=True)
class ThermalModel:
    ambient: float = 65.0
    r_air: float = 0.27  # K/W with an all-air slot
    r_copper: float = 0.054  # K/W with an all-copper slot
    ac_coefficient: float = 6.24e-8  # per (Hz mm)^2 of bar height
    current_6k: float = 200.0
    current_12k: float = 160.0
    copper_budget: float = 600.0  # W, continuous stator copper loss


@dataclass(frozen=True)
class EvaluationResult:
    sff: float
    g: tuple  # g1..g5 floats, g6 = (T at 6k rpm, T at 12k rpm)
    torque: float
    conduction_loss: float
    iron_loss: float
    winding_temperature: float
    feasible: bool
    fidelity: int
    eval_cost: float
    violation: float = 0.0
    copper_limit: float = math.inf  # available copper area per conductor (g1 bound), mm^2
    status: str = "ok"

    @property
    def reward(self) -> float:
        return self.sff if self.feasible else -math.inf


# closed-form physics ------------------------------------------------------------


def torque(psi_d: float, psi_q: float, current: float, cos_phi: float) -> float:
    return 1.5 * current * math.hypot(psi_d, psi_q) * cos_phi


def flux_linkage(ld, lq, lr, i_d, i_q, i_r):
    return ld * i_d + lr * i_r, lq * i_q


def conduction_loss(rs, current, rr, rotor_current):
    return 1.5 * rs * current**2 + rr * rotor_current**2


def iron_loss(f, b, material: MaterialModel, volumes) -> float:
    """Hysteresis plus eddy loss summed over core elements (volumes in m^3)."""
    b = np.broadcast_to(np.asarray(b, dtype=float), np.shape(volumes))
    m = material
    specific = m.kh * (f / m.f0) ** m.alpha_exp + m.ke * (f / m.f0) ** m.beta_exp
    return float(np.sum(specific * (np.abs(b) / m.b0) ** m.gamma_exp * m.mass_density * np.asarray(volumes)) * m.field_factor)


def litz_bar_current(f, h, nc, b, w, sigma_c):
    """Induced eddy current in one Litz bar; SI units (h, w in metres)."""
    return math.pi * f * (h / nc) ** 2 * b * w * sigma_c / 4


def carter_factor(slot_pitch: float, opening: float, gap: float) -> float:
    ratio = opening / (2 * gap)
    gamma = (4 / math.pi) * (ratio * math.atan(ratio) - math.log(math.sqrt(1 + ratio**2)))
    return slot_pitch / (slot_pitch - gamma * gap)


def saturation_factor(u_stator: float, u_rotor: float, u_gap: float) -> float:
    u = (u_stator + u_rotor) / u_gap if u_gap else 0.0
    return (1.24 * u + 1) / (1.42 * u + 1.6)


# magnetic equivalent circuit ---------------------------------------------------


@dataclass
class _Circuit:
    lengths: np.ndarray  # m, iron regions
    areas: np.ndarray  # m^2, effective flux areas
    stator: np.ndarray  # bool mask: stator iron (shared by d and q)
    tooth: np.ndarray  # bool mask
    volumes: np.ndarray  # m^3, for iron loss
    r_gap_d: float
    r_gap_q: float
    r_leak: float  # inf at low fidelity
    peak_tooth: int  # index of the narrowest tooth segment
    slot_area: float
    tooth_area: float
    ka: float  # stator MMF per ampere
    kpsi: float  # flux linkage per pole flux
    pole_surface_volume: float
    kc: float


def _tooth_width(x, spec: MachineSpec, depth):
    """Tooth width (mm) at ``depth`` mm from the bore."""
    b1, b2, h1, hc = x[0], x[1], x[2], x[3]
    pitch = 2 * math.pi * (spec.inner_stator_radius + depth) / spec.slot_count
    y = np.clip(depth - (h1 - hc), 0.0, hc)
    slot_w = b2 + (b1 - b2) * y / hc
    return pitch - slot_w


def _build_circuit(x, spec: MachineSpec, fidelity: int, segments: int) -> _Circuit:
    x = np.asarray(x, dtype=float)
    b1, b2, h1, hc, opening = x[0], x[1], x[2], x[3], x[9]
    lfe = spec.axial_length * 1e-3 * spec.stack_factor
    p, Q = spec.pole_count, spec.slot_count
    teeth_per_pole = Q / p
    rg = spec.inner_stator_radius - spec.airgap / 2

    n = 1 if fidelity == LOW else segments
    edges = np.linspace(0.0, h1, n + 1)
    mids = (edges[:-1] + edges[1:]) / 2
    if fidelity == LOW:
        # one tube at the depth-averaged width
        depth_grid = np.linspace(0.0, h1, 65)
        widths = np.array([np.trapezoid(_tooth_width(x, spec, depth_grid), depth_grid) / h1])
    else:
        widths = _tooth_width(x, spec, mids)
    if np.any(widths <= 0):
        raise geo.InfeasibleGeometry("slot leaves no tooth iron")
    seg_len = np.diff(edges) * 1e-3
    tooth_area = (2 / math.pi) * teeth_per_pole * widths * 1e-3 * lfe
    tooth_vol = Q * widths * 1e-3 * seg_len * lfe

    hy = spec.outer_stator_radius - spec.inner_stator_radius - h1
    if hy <= 0:
        raise geo.InfeasibleGeometry("slot leaves no stator yoke")
    ry = spec.outer_stator_radius - hy / 2
    yoke_len = math.pi * ry / p * 1e-3
    yoke_area = 2 * hy * 1e-3 * lfe
    yoke_vol = math.pi * (spec.outer_stator_radius**2 - (spec.inner_stator_radius + h1) ** 2) * 1e-6 * lfe

    depth_r = spec.outer_rotor_radius - spec.inner_rotor_radius
    hp = spec.pole_height_ratio * depth_r
    wp = spec.pole_body_ratio * 2 * math.pi * spec.outer_rotor_radius / p
    pole_area = wp * 1e-3 * lfe
    ryk = spec.inner_rotor_radius + (depth_r - hp) / 2
    ryoke_len = math.pi * ryk / p * 1e-3
    ryoke_area = 2 * (depth_r - hp) * 1e-3 * lfe

    lengths = np.concatenate([seg_len, [yoke_len, hp * 1e-3, ryoke_len]])
    areas = np.concatenate([tooth_area, [yoke_area, pole_area, ryoke_area]])
    stator = np.zeros(lengths.size, dtype=bool)
    stator[: n + 1] = True
    tooth = np.zeros(lengths.size, dtype=bool)
    tooth[:n] = True
    volumes = np.concatenate(
        [tooth_vol, [yoke_vol, p * wp * 1e-3 * hp * 1e-3 * lfe, math.pi * (ryk * 1e-3) * 2 * (depth_r - hp) * 1e-3 * lfe]]
    )

    slot_pitch = 2 * math.pi * spec.inner_stator_radius / Q
    kc = carter_factor(slot_pitch, opening, spec.airgap)
    gap_area = (2 / math.pi) * (2 * math.pi * rg / p) * 1e-3 * lfe
    r_gap_d = kc * spec.airgap * 1e-3 / (MU0 * gap_area)
    r_gap_q = (kc * spec.airgap + spec.q_axis_extra_gap) * 1e-3 / (MU0 * gap_area)

    if fidelity == LOW:
        r_leak = math.inf
    else:
        w_mean = (b1 + b2) / 2
        permeance_per_slot = MU0 * spec.axial_length * 1e-3 * (hc / (3 * w_mean) + (h1 - hc) / opening)
        r_leak = 1.0 / (teeth_per_pole * permeance_per_slot)

    kw, ns = spec.winding_factor, spec.series_turns
    slot_area = (b1 + b2) / 2 * hc + b2 * (h1 - hc)
    depth_grid = np.linspace(0.0, h1, 65)
    tooth_plane_area = float(np.trapezoid(_tooth_width(x, spec, depth_grid), depth_grid))
    pole_surface = p * (2 * math.pi * spec.outer_rotor_radius / p) * 0.7 * 2.0 * 1e-6 * lfe
    return _Circuit(
        lengths=lengths,
        areas=areas,
        stator=stator,
        tooth=tooth,
        volumes=volumes,
        r_gap_d=r_gap_d,
        r_gap_q=r_gap_q,
        r_leak=r_leak,
        peak_tooth=int(np.argmin(widths)),
        slot_area=slot_area,
        tooth_area=tooth_plane_area,
        ka=1.5 * (4 / math.pi) * kw * ns / p,
        kpsi=kw * ns,
        pole_surface_volume=pole_surface,
        kc=kc,
    )


def _solve_linear(c: _Circuit, mu_d: np.ndarray, mu_q: np.ndarray, f_rotor: float, f_sd: float, f_sq: float):
    """Mesh fluxes (main_d, leak_d, main_q, leak_q) for fixed permeabilities."""
    r_iron_d = c.lengths / (mu_d * c.areas)
    r_iron_q = c.lengths / (mu_q * c.areas)
    rs_d = r_iron_d[c.stator].sum()
    rr_d = r_iron_d[~c.stator].sum()
    rs_q = r_iron_q[c.stator].sum()
    out = []
    for r_gap, r_rotor, rs, f_main, f_leak in (
        (c.r_gap_d, rr_d, rs_d, f_rotor + f_sd, f_sd),
        (c.r_gap_q, 0.0, rs_q, f_sq, f_sq),
    ):
        if math.isinf(c.r_leak):
            out += [f_main / (r_gap + r_rotor + rs), 0.0]
        else:
            # main mesh:  (Rg + Rr) m + Rs (m + l) = F_main
            # leak mesh:  Rl l + Rs (m + l) = F_leak
            a = np.array([[r_gap + r_rotor + rs, rs], [rs, c.r_leak + rs]])
            m, l = np.linalg.solve(a, [f_main, f_leak])
            out += [m, l]
    return tuple(out)


def _field(material: MaterialModel, bd, bq):
    """Field intensity components and their 2x2 Jacobians dH/dB per region."""
    bmag = np.hypot(bd, bq)
    h = material.h_of_b(bmag)
    dh = 1.0 / material.dbdh(h)
    # secant h/|B|, finite as |B| -> 0
    sec = np.where(bmag > 0, h / np.where(bmag > 0, bmag, 1.0), 1.0 / material.initial_permeability)
    with np.errstate(invalid="ignore", divide="ignore"):
        ud = np.where(bmag > 0, bd / bmag, 0.0)
        uq = np.where(bmag > 0, bq / bmag, 0.0)
    diff = dh - sec
    jac = np.empty(bd.shape + (2, 2))
    jac[..., 0, 0] = sec + diff * ud * ud
    jac[..., 0, 1] = diff * ud * uq
    jac[..., 1, 0] = jac[..., 0, 1]
    jac[..., 1, 1] = sec + diff * uq * uq
    return sec * bd, sec * bq, jac, sec


def _solve_nonlinear(c: _Circuit, material: MaterialModel, f_rotor, f_sd, f_sq, max_iter, tol):
    """Damped Newton on the mesh fluxes; returns fluxes, secant permeabilities, iterations."""
    leak = not math.isinf(c.r_leak)
    mu_init = np.full(c.lengths.size, material.initial_permeability)
    u = np.array(_solve_linear(c, mu_init, mu_init, f_rotor, f_sd, f_sq))
    active = [0, 1, 2, 3] if leak else [0, 2]
    s, r = c.stator, ~c.stator
    ls, as_ = c.lengths[s], c.areas[s]
    lr, ar = c.lengths[r], c.areas[r]
    mmf = np.array([f_rotor + f_sd, f_sd, f_sq, f_sq])
    scale = max(abs(f_rotor) + abs(f_sd) + abs(f_sq), 1.0)

    def evaluate(u):
        md, ld, mq, lq = u
        hd, hq, jac, sec_s = _field(material, (md + ld) / as_, (mq + lq) / as_)
        hr = material.h_of_b(md / ar)
        drop_d = float(np.sum(hd * ls))
        drop_q = float(np.sum(hq * ls))
        res = np.array(
            [
                c.r_gap_d * md + float(np.sum(hr * lr)) + drop_d,
                (c.r_leak * ld if leak else 0.0) + drop_d,
                c.r_gap_q * mq + drop_q,
                (c.r_leak * lq if leak else 0.0) + drop_q,
            ]
        ) - mmf
        w = ls / as_
        s00, s01, s11 = (float(np.sum(jac[:, a, b] * w)) for a, b in ((0, 0), (0, 1), (1, 1)))
        rot = float(np.sum(lr / ar / material.dbdh(hr)))
        rl = c.r_leak if leak else 0.0
        jm = np.array(
            [
                [c.r_gap_d + rot + s00, s00, s01, s01],
                [s00, rl + s00, s01, s01],
                [s01, s01, c.r_gap_q + s11, s11],
                [s01, s01, s11, rl + s11],
            ]
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            sec_r = np.where(hr != 0, (md / ar) / np.where(hr != 0, hr, 1.0), material.initial_permeability)
        mu = np.empty(c.lengths.size)
        mu[s] = 1.0 / sec_s
        mu[r] = sec_r
        return res, jm, mu

    res, jm, mu = evaluate(u)
    norm = np.max(np.abs(res[active])) / scale
    it = 0
    while norm > tol:
        it += 1
        if it > max_iter:
            raise NoConvergence(norm, max_iter)
        step = np.zeros(4)
        step[active] = np.linalg.solve(jm[np.ix_(active, active)], res[active])
        t = 1.0
        while True:
            trial = u - t * step
            res_t, jm_t, mu_t = evaluate(trial)
            norm_t = np.max(np.abs(res_t[active])) / scale
            if norm_t < norm or t < 1e-6:
                break
            t /= 2
        u, res, jm, mu, norm = trial, res_t, jm_t, mu_t, norm_t
    return tuple(u), mu, it


def magnetic_state(
    x,
    op: OperatingPoint,
    spec: MachineSpec,
    material: MaterialModel,
    fidelity: int = LOW,
    segments: int = 8,
    max_iter: int = 100,
    tol: float = 1e-12,
) -> MagneticState:
    """Solve the per-pole MEC at the operating point."""
    if fidelity not in (LOW, HIGH):
        raise ValueError("fidelity must be 1 (low) or 2 (high)")
    if fidelity == HIGH and segments < 8:
        raise ValueError("high fidelity needs at least 8 tooth segments")
    c = _build_circuit(x, spec, fidelity, segments)
    f_rotor = spec.field_turns_per_pole * op.rotor_current
    f_sd, f_sq = c.ka * op.id, c.ka * op.iq

    if material.linear:
        mu = np.full(c.lengths.size, material.initial_permeability)
        fluxes, it = _solve_linear(c, mu, mu, f_rotor, f_sd, f_sq), 0
    else:
        fluxes, mu, it = _solve_nonlinear(c, material, f_rotor, f_sd, f_sq, max_iter, tol)
    md, ld_, mq, lq_ = fluxes
    bd = np.where(c.stator, md + ld_, md) / c.areas
    bq = np.where(c.stator, mq + lq_, 0.0) / c.areas
    hd, hq = bd / mu, bq / mu
    tooth_idx = int(np.flatnonzero(c.tooth)[c.peak_tooth])
    tb_d, tb_q = float(bd[tooth_idx]), float(bq[tooth_idx])

    # secant inductances of the frozen-permeability network
    def psi_of(fr, fsd, fsq):
        m1, l1, m2, l2 = _solve_linear(c, mu, mu, fr, fsd, fsq)
        return c.kpsi * (m1 + l1), c.kpsi * (m2 + l2)

    ld = psi_of(0.0, c.ka, 0.0)[0]
    lr = psi_of(spec.field_turns_per_pole, 0.0, 0.0)[0]
    lq = psi_of(0.0, 0.0, c.ka)[1]
    psi_d, psi_q = flux_linkage(ld, lq, lr, op.id, op.iq, op.rotor_current)

    h_d = c.lengths * hd
    u_gap = float(c.r_gap_d * md)
    b_mag = np.hypot(bd, bq)
    # rotor pole surface sees slot ripple only
    gap_peak = abs(u_gap) * MU0 / (c.kc * spec.airgap * 1e-3)
    ripple = gap_peak * (c.kc - 1) / c.kc
    return MagneticState(
        psi_d=float(psi_d),
        psi_q=float(psi_q),
        ld=float(ld),
        lq=float(lq),
        lr=float(lr),
        tooth_b=math.hypot(tb_d, tb_q),
        tooth_h=math.hypot(float(hd[tooth_idx]), float(hq[tooth_idx])),
        tooth_b_d=tb_d,
        tooth_b_q=tb_q,
        slot_area=c.slot_area,
        tooth_area=c.tooth_area,
        u_stator=float(h_d[c.stator].sum()),
        u_rotor=float(h_d[~c.stator].sum()),
        u_gap=u_gap,
        flux_d=float(md),
        flux_leak=float(ld_),
        yoke_b=float(b_mag[np.flatnonzero(c.stator)[-1]]),
        rotor_b=float(b_mag[~c.stator][0]),
        element_b=tuple(b_mag[c.stator]) + (ripple,),
        element_volume=tuple(c.volumes[c.stator]) + (c.pole_surface_volume,),
        iterations=it,
    )


# windings and heat --------------------------------------------------------------


def stator_resistance(layout: geo.ConductorLayout, spec: MachineSpec, material: MaterialModel) -> float:
    """Phase resistance; copper per conductor scales with the layout's bar area."""
    if layout.copper_area <= 0:
        return math.inf
    bar_length = layout.bars[0].length
    a_cond = (math.pi / 4) * layout.copper_area / spec.windings_per_slot * 1e-6
    turn = 2 * (bar_length + spec.end_turn_length) * 1e-3
    path = spec.series_turns * turn / (material.copper_conductivity * a_cond)
    return path / spec.parallel_windings


def rotor_resistance(spec: MachineSpec, material: MaterialModel) -> float:
    wp = spec.pole_body_ratio * 2 * math.pi * spec.outer_rotor_radius / spec.pole_count
    turn = 2 * (spec.axial_length + wp) * 1e-3
    n = spec.field_turns_per_pole * spec.pole_count
    return n * turn / (material.copper_conductivity * spec.field_wire_area * 1e-6)


def ac_factor(f: float, bar_height: float, thermal: ThermalModel) -> float:
    """AC/DC resistance ratio; grows with frequency and bar height (mm)."""
    return 1.0 + thermal.ac_coefficient * (f * bar_height) ** 2


def thermal_resistance(sff: float, thermal: ThermalModel) -> float:
    """Slot-to-coolant resistance, affine in the copper share of the slot."""
    return thermal.r_air * (1.0 - sff) + thermal.r_copper * sff


def thermal_steady(
    layout: geo.ConductorLayout,
    slot: geo.SlotGeometry,
    current: float,
    speed: float,
    spec: MachineSpec | None = None,
    material: MaterialModel | None = None,
    thermal: ThermalModel | None = None,
) -> float:
    """Steady winding temperature (degC) of a lumped one-node model."""
    spec = spec or MachineSpec()
    material = material or MaterialModel()
    thermal = thermal or ThermalModel()
    if current <= 0 or not layout.bars:
        return thermal.ambient
    sff = layout.copper_area / geo.conductive_area(slot)
    f = speed * spec.pole_count / 120.0
    h_bar = max(b.height for b in layout.bars)
    p_cu = 1.5 * stator_resistance(layout, spec, material) * current**2 * ac_factor(f, h_bar, thermal)
    return thermal.ambient + p_cu * thermal_resistance(sff, thermal)


# constraints ---------------------------------------------------------------------


def copper_requirement(op: OperatingPoint) -> float:
    """g1: copper cross-section (mm^2) needed at the current-density limit."""
    return op.mechanical_power / (
        op.phases * op.terminal_voltage * op.efficiency_target * op.cos_phi * op.parallel_paths * op.max_current_density
    )


def constraints(
    x,
    op: OperatingPoint,
    state: MagneticState,
    layout: geo.ConductorLayout,
    spec: MachineSpec | None = None,
    material: MaterialModel | None = None,
    thermal: ThermalModel | None = None,
) -> tuple:
    """The six constraint values g1..g6; g6 is (T at 6k rpm, T at 12k rpm)."""
    spec = spec or MachineSpec()
    thermal = thermal or ThermalModel()
    x = np.asarray(x, dtype=float)
    f = op.frequency(spec.pole_count)
    b = state.tooth_b
    g1 = copper_requirement(op)
    g2 = b - (state.slot_area / state.tooth_area) * MU0 * state.tooth_h
    g3 = saturation_factor(state.u_stator, state.u_rotor, state.u_gap)
    bar_h = max((bar.height for bar in layout.bars), default=0.0) * 1e-3
    bar_w = max(((bar.width_top + bar.width_bottom) / 2 for bar in layout.bars), default=0.0) * 1e-3
    g4 = 2 * math.pi * f * b * (x[5] * 1e-3) * bar_h / 2
    g5 = math.pi * f * bar_h * b * bar_w * (x[8] * 1e-3) / 4
    slot = geo.SlotGeometry.from_design(x)
    t6 = thermal_steady(layout, slot, thermal.current_6k, 6000.0, spec, material, thermal)
    t12 = thermal_steady(layout, slot, thermal.current_12k, 12000.0, spec, material, thermal)
    return (g1, g2, g3, g4, g5, (t6, t12))


def copper_available(layout: geo.ConductorLayout, spec: MachineSpec, strand_diameter: float) -> float:
    """Strand copper per conductor (mm^2), the bound on g1."""
    strand = math.pi * strand_diameter**2 / 4
    return layout.strand_count * strand / spec.windings_per_slot


def violation(g: tuple, copper_limit: float, bounds: ConstraintBounds) -> float:
    """Total normalised excess over all bounds; 0 when feasible."""
    g1, g2, _, g4, g5, (t6, t12) = g
    ratios = (
        g1 / copper_limit if copper_limit > 0 else math.inf,
        g2 / bounds.g2_max,
        g4 / bounds.g4_max,
        g5 / bounds.g5_max,
        t6 / bounds.t_max_6k,
        t12 / bounds.t_max_12k,
    )
    return float(sum(max(0.0, r - 1.0) for r in ratios))


# evaluator -----------------------------------------------------------------------


@dataclass(frozen=True)
class SlotDesignEvaluator:
    """Slot-fill objective with MEC-based constraints at two fidelities."""

    spec: MachineSpec = MachineSpec()
    material: MaterialModel = MaterialModel()
    op: OperatingPoint = OperatingPoint()
    bounds: ConstraintBounds = ConstraintBounds()
    thermal: ThermalModel = ThermalModel()
    layers: int = 2
    clearance: float = 0.1
    strand_diameter: float = 0.8
    winding: str = "keystone"  # or "benchmark": four identical rectangular bars
    benchmark_clearance: float = 0.045
    costs: tuple = (1.0, 10.0)
    segments: int = 8
    name: str = "slot-design"
    f_op: float | None = None  # regret reference; None means best observed

    def __post_init__(self):
        if self.winding not in ("keystone", "benchmark"):
            raise ValueError("winding must be 'keystone' or 'benchmark'")
        if not all(b > a for a, b in zip(self.costs, self.costs[1:])):
            raise ValueError("fidelity costs must be strictly increasing")

    @property
    def n_fidelities(self) -> int:
        return 2

    @property
    def space(self):
        from .space import SearchSpace

        return SearchSpace.slot_design()

    def layout(self, x) -> geo.ConductorLayout:
        x = np.asarray(x, dtype=float)
        if self.winding == "benchmark":
            slot = geo.SlotGeometry.from_design(x)
            return geo.pack_rectangular(
                slot, self.layers, 2, self.benchmark_clearance, self.strand_diameter, bar_length=x[5]
            )
        return geo.layout_from_design(x, self.layers, self.clearance, self.strand_diameter)

    def magnetic_state(self, x, fidelity: int, op: OperatingPoint | None = None) -> MagneticState:
        return magnetic_state(x, op or self.op, self.spec, self.material, fidelity, self.segments)

    def evaluate(self, x, fidelity: int = HIGH) -> EvaluationResult:
        x = self.space.check(np.asarray(x, dtype=float))
        cost = self.costs[fidelity - 1]
        try:
            slot = geo.SlotGeometry.from_design(x)
            layout = self.layout(x)
            sff = geo.slot_fill_factor(layout, slot)
            state = self.magnetic_state(x, fidelity)
            g = constraints(x, self.op, state, layout, self.spec, self.material, self.thermal)
            rs = stator_resistance(layout, self.spec, self.material)
            rr = rotor_resistance(self.spec, self.material)
            i_peak = min(self.spec.max_inverter_current, math.sqrt(self.thermal.copper_budget / (1.5 * rs)))
            peak_op = self.op.with_current(i_peak)
            peak = self.magnetic_state(x, fidelity, peak_op)
            f = self.op.frequency(self.spec.pole_count)
        except (geo.InfeasibleGeometry, geo.LayoutViolation, NoConvergence) as err:
            return EvaluationResult(
                sff=0.0,
                g=(math.nan,) * 5 + ((math.nan, math.nan),),
                torque=0.0,
                conduction_loss=math.nan,
                iron_loss=math.nan,
                winding_temperature=math.nan,
                feasible=False,
                fidelity=fidelity,
                eval_cost=cost,
                violation=math.inf,
                status=f"{type(err).__name__}: {err}",
            )
        limit = copper_available(layout, self.spec, self.strand_diameter)
        v = violation(g, limit, self.bounds)
        return EvaluationResult(
            sff=float(sff),
            g=g,
            torque=torque(peak.psi_d, peak.psi_q, i_peak, self.op.cos_phi),
            conduction_loss=conduction_loss(rs, self.op.current, rr, self.op.rotor_current),
            iron_loss=iron_loss(f, state.element_b, self.material, state.element_volume),
            winding_temperature=g[5][0],
            feasible=v == 0.0,
            fidelity=fidelity,
            eval_cost=cost,
            violation=v,
            copper_limit=limit,
        )

    def cheap_feasible(self, x) -> bool:
        """Low-fidelity constraint screen used to filter acquisition candidates."""
        return self.evaluate(x, LOW).feasible


def efficiency_grid(evaluator: SlotDesignEvaluator, x, speeds, torques) -> np.ndarray:
    """Analytic efficiency over a speed x torque grid (rows: speeds)."""
    ev = evaluator
    x = np.asarray(x, dtype=float)
    layout = ev.layout(x)
    state = ev.magnetic_state(x, LOW)
    rs = stator_resistance(layout, ev.spec, ev.material)
    rr = rotor_resistance(ev.spec, ev.material)
    # torque per ampere with the flux linkage frozen at the rated state
    kt = 1.5 * math.hypot(state.psi_d, state.psi_q) * ev.op.cos_phi
    h_bar = max(b.height for b in layout.bars)
    out = np.zeros((len(speeds), len(torques)))
    for i, n in enumerate(speeds):
        f = n * ev.spec.pole_count / 120.0
        p_fe = iron_loss(f, state.element_b, ev.material, state.element_volume)
        for j, t in enumerate(torques):
            current = t / kt
            p_mech = t * n * 2 * math.pi / 60
            p_cu = 1.5 * rs * current**2 * ac_factor(f, h_bar, ev.thermal) + rr * ev.op.rotor_current**2
            out[i, j] = p_mech / (p_mech + p_cu + p_fe) if p_mech > 0 else 0.0
    return out
