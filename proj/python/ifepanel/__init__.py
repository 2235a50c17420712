"""Panel estimators for interactive, grouped and non-separable fixed effects."""

import json

from ._core import (
    IfepanelError,
    Panel,
    alpha_observed,
    alpha_residual,
    bai_ng,
    blm,
    ccep,
    cd_star,
    cd_test,
    cdw_plus,
    cdw_test,
    diagnose,
    er_gr,
    fe,
    gf,
    gf_select_G,
    gos,
    hausman_ife,
    ils,
    ils_bc,
    load_panel,
    onatski_ed,
    pnnr,
    run_config,
    run_mc,
    tsgfm,
    tsiv,
)
from ._core import run_estimator as _run_estimator
from ._core import simulate_json as _simulate_json


def simulate(spec):
    """Draw a panel from a DGP spec given as a dict; returns (Panel, truth dict)."""
    panel, truth = _simulate_json(json.dumps(spec))
    return panel, json.loads(truth)


def estimate(panel, spec, seed=0):
    """Run one estimator described like a config entry, e.g. {"type": "ILS", "m": 2}."""
    return _run_estimator(panel, json.dumps(spec), seed)


__all__ = [name for name in dir() if not name.startswith("_")]
