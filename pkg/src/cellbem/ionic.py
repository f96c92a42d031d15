"""Membrane dynamics on the transmembrane boundary.

Models expose the (I_ion, g) split: I_ion(V, z) is the total ionic current
density in uA/cm^2 (outward positive, so a depolarizing current is negative)
and g(V, z) the state dynamics, both evaluated node-wise with no coupling
between nodes.  Two reduced two-variable models are provided behind the
interface; a biophysically detailed model can be dropped in by implementing
the same three methods.

Units: V in mV, t in ms, currents in uA/cm^2, capacitance in uF/cm^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Stimulus:
    """Square current pulse injected on a subset of membrane nodes.

    ``amplitude`` is the injected (depolarizing) current density; the pulse
    is active on the half-open window [start, start + duration).
    """

    amplitude: float
    start: float
    duration: float
    targets: np.ndarray

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("stimulus duration must be positive")
        object.__setattr__(self, "targets", np.asarray(self.targets, dtype=int))

    def current(self, t: float, n_nodes: int) -> np.ndarray:
        out = np.zeros(n_nodes)
        if self.start <= t < self.start + self.duration:
            if self.targets.size and self.targets.max() >= n_nodes:
                raise IndexError("stimulus target outside the membrane node range")
            out[self.targets] = self.amplitude
        return out


@dataclass
class MembraneState:
    """Transmembrane voltage and ionic state on the membrane nodes."""

    V: np.ndarray                 # (n_nodes,), mV
    z: np.ndarray                 # (n_state, n_nodes)
    t: float = 0.0

    def validate(self, model: "IonicModel"):
        if self.z.shape != (model.n_state, self.V.size):
            raise ValueError(f"state shape {self.z.shape} does not match "
                             f"({model.n_state}, {self.V.size})")
        if not (np.all(np.isfinite(self.V)) and np.all(np.isfinite(self.z))):
            raise ValueError("membrane state contains non-finite entries")
        for k, (lo, hi) in enumerate(model.z_bounds):
            if np.any(self.z[k] < lo) or np.any(self.z[k] > hi):
                raise ValueError(f"state component {k} violates its bounds "
                                 f"[{lo}, {hi}]")
        return self


class IonicModel:
    """Interface: n_state, rest state, currents and gate dynamics."""

    name = "base"
    n_state = 0
    z_bounds = ()                 # (lo, hi) per state component

    @property
    def rest(self):
        """(V_rest, z_rest) with z_rest of shape (n_state,)."""
        raise NotImplementedError

    def currents(self, V, z):
        raise NotImplementedError

    def gates(self, V, z):
        raise NotImplementedError

    def initial_state(self, n_nodes: int):
        V_rest, z_rest = self.rest
        return (np.full(n_nodes, V_rest),
                np.repeat(z_rest[:, None], n_nodes, axis=1))

    def rest_state(self, n_nodes: int) -> MembraneState:
        V, z = self.initial_state(n_nodes)
        return MembraneState(V=V, z=z).validate(self)


class MitchellSchaeffer(IonicModel):
    """Two-current model with a single inactivation gate h.

    The published dynamics act on a normalized voltage v in [0, 1]:
        dv/dt = h v^2 (1 - v)/tau_in - v/tau_out,
        dh/dt = (1 - h)/tau_open  if v < v_gate  else  -h/tau_close.
    The physical voltage is V = V_min + (V_max - V_min) v and the ionic
    current is I = -C_ref (V_max - V_min) dv/dt, so that a membrane with
    capacitance C_ref reproduces the published time courses exactly.
    """

    name = "mitchell_schaeffer"
    n_state = 1
    z_bounds = ((0.0, 1.0),)

    def __init__(self, tau_in=0.3, tau_out=6.0, tau_open=120.0, tau_close=150.0,
                 v_gate=0.13, V_min=-80.0, V_max=20.0, C_ref=1.0):
        self.tau_in = tau_in
        self.tau_out = tau_out
        self.tau_open = tau_open
        self.tau_close = tau_close
        self.v_gate = v_gate
        self.V_min = V_min
        self.V_max = V_max
        self.C_ref = C_ref
        self.V_range = (V_min - 10.0, V_max + 10.0)

    @property
    def rest(self):
        return self.V_min, np.array([1.0])

    def _v(self, V):
        return (np.asarray(V, float) - self.V_min) / (self.V_max - self.V_min)

    def currents(self, V, z):
        v = self._v(V)
        h = z[0]
        dv = h * v * v * (1.0 - v) / self.tau_in - v / self.tau_out
        return -self.C_ref * (self.V_max - self.V_min) * dv

    def gates(self, V, z):
        v = self._v(V)
        h = z[0]
        dh = np.where(v < self.v_gate, (1.0 - h) / self.tau_open, -h / self.tau_close)
        return dh[None, :] if dh.ndim == 1 else np.atleast_2d(dh)


class FitzHughNagumo(IonicModel):
    """Classic cubic excitable model with linear recovery.

    Dimensionless dynamics (one model time unit = ``time_unit_ms``):
        dv/dt = v - v^3/3 - w,    dw/dt = (v + a - b w)/tau_w.
    The rest state is the stable fixed point solved at construction; the
    physical map is V = V_rest_mV + scale_mV (v - v_rest).
    """

    name = "fitzhugh_nagumo"
    n_state = 1
    z_bounds = ((-np.inf, np.inf),)

    def __init__(self, a=0.7, b=0.8, tau_w=12.5, V_rest_mV=-85.0, scale_mV=35.0,
                 time_unit_ms=1.0, C_ref=1.0):
        self.a = a
        self.b = b
        self.tau_w = tau_w
        self.V_rest_mV = V_rest_mV
        self.scale_mV = scale_mV
        self.time_unit_ms = time_unit_ms
        self.C_ref = C_ref
        # rest: v - v^3/3 - (v + a)/b = 0, stable root has |v| largest
        roots = np.roots([-1.0 / 3.0, 0.0, 1.0 - 1.0 / b, -a / b])
        real = roots[np.abs(roots.imag) < 1e-12].real
        self.v_rest = float(real[np.argmax(np.abs(real))])
        self.w_rest = (self.v_rest + a) / b
        self.V_range = (V_rest_mV - 2 * scale_mV, V_rest_mV + 4 * scale_mV)

    @property
    def rest(self):
        return self.V_rest_mV, np.array([self.w_rest])

    def _v(self, V):
        return self.v_rest + (np.asarray(V, float) - self.V_rest_mV) / self.scale_mV

    def currents(self, V, z):
        v = self._v(V)
        w = z[0]
        dv = (v - v**3 / 3.0 - w) / self.time_unit_ms
        return -self.C_ref * self.scale_mV * dv

    def gates(self, V, z):
        v = self._v(V)
        w = z[0]
        dw = (v + self.a - self.b * w) / (self.tau_w * self.time_unit_ms)
        return np.atleast_2d(dw)


def builtin_models() -> dict:
    """Default-parameter instances of the bundled membrane models."""
    return {
        "mitchell_schaeffer": MitchellSchaeffer(),
        "fitzhugh_nagumo": FitzHughNagumo(),
    }


def eval_rhs(model: IonicModel, V, z, t: float, stim: Stimulus | None):
    """(I_ion, g, I_stim) evaluated node-wise at time t.

    Raises on non-finite output, naming the first offending node.
    """
    V = np.asarray(V, float)
    z = np.asarray(z, float)
    if z.shape != (model.n_state, V.size):
        raise ValueError(f"state shape {z.shape} does not match "
                         f"({model.n_state}, {V.size})")
    I_ion = model.currents(V, z)
    g = model.gates(V, z)
    I_stim = stim.current(t, V.size) if stim is not None else np.zeros(V.size)
    for label, arr in (("I_ion", I_ion), ("g", g)):
        bad = ~np.isfinite(arr)
        if bad.any():
            node = int(np.argwhere(bad)[0][-1])
            raise FloatingPointError(f"{label} is non-finite at node {node}, t={t}")
    return I_ion, g, I_stim
