"""TOML configuration ingestion for scenes, membranes and runs.

All dimensioned keys carry their unit in the name; values are converted to
the internal system (mV, ms, um; conductivities mS/cm, permeability
mS/cm^2, currents uA/cm^2) on load.
"""

from __future__ import annotations

import tomli

from .harness import CVConfig


def load_toml(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomli.load(fh)


def cv_config_from_dict(data: dict) -> CVConfig:
    geom = data.get("geometry", {})
    cond = data.get("conductivity", {})
    memb = data.get("membrane", {})
    stim = data.get("stimulus", {})
    tim = data.get("time", {})
    kind = geom.get("kind", "cell_array")
    if kind != "cell_array":
        raise ValueError(f"simulation configs describe cell arrays, got kind={kind!r}")
    cfg = CVConfig(
        rows=int(geom.get("rows", 2)),
        cols=int(geom.get("cols", 10)),
        c_w=float(geom.get("cell_width_um", 20.0)),
        c_l=float(geom.get("cell_length_um", 200.0)),
        bath_pad=float(geom.get("bath_pad_um", 30.0)),
        bath_margin=float(geom.get("bath_margin_um", 400.0)),
        dx=float(geom.get("dx_um", 10.0)),
        dx_outer=float(geom.get("dx_outer_um", 20.0)),
        junction_amplitude=float(geom.get("junction_amplitude_um", 0.0)),
        junction_frequency=int(geom.get("junction_frequency", 0)),
        kappa=float(cond.get("kappa_mS_per_cm2", 690.0)),
        sigma_i=float(cond.get("sigma_cell_mS_per_cm", 3.0)),
        sigma_0=float(cond.get("sigma_bath_mS_per_cm", 20.0)),
        amplitude=float(stim.get("amplitude_uA_per_cm2", 300.0)),
        duration=float(stim.get("duration_ms", 1.0)),
        dt=float(tim.get("dt_ms", 0.02)),
        t_end=float(tim.get("t_end_ms", 120.0)),
        model_name=str(memb.get("model", "mitchell_schaeffer")),
        model_params=dict(memb.get("params", {})),
    )
    return cfg


def load_cv_config(path: str) -> CVConfig:
    return cv_config_from_dict(load_toml(path))
