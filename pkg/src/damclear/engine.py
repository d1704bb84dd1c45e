"""Clearing pipelines.

clear() is the single-shot path: build the primal-dual model for the
requested rules and objective, solve the MILP, then re-solve the LP with
the winning selection fixed to obtain clean prices and surpluses (duals
are never trusted from the integer search). The heuristic_* pipelines are
staged variants for hard instances; each stage warm-starts the next and a
stage can only improve on its predecessor.

Solutions come back canonicalized: coordinates the equilibrium leaves free
(an accepted block's split between surplus and compensation, a rejected
bid's slack levels) are set to their minimal witnesses, computed from the
solved prices. Pinned coordinates keep their solver values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import backend as be
from . import milp
from .model import ClearingSolution, Instance, InstanceIndex, validate_instance

RULESETS = ("pcr", "umfs")


class ClearingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClearingRequest:
    """What to optimize and under which market rules.

    rules='pcr' forbids paradoxically accepted blocks (no losses, no
    compensations); rules='umfs' allows them, compensated through d_accept.
    stage_time_budgets apply to the staged heuristics only, one entry per
    stage, in seconds.
    """

    objective: str = "welfare"
    rules: str = "pcr"
    stage_time_budgets: tuple = (900.0, 900.0, 1200.0)
    solve_options: be.SolveOptions = be.SolveOptions()

    def __post_init__(self):
        if self.objective not in milp.OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.rules not in RULESETS:
            raise ValueError(f"unknown rules {self.rules!r}")
        if len(self.stage_time_budgets) != 3 or any(b < 0 for b in self.stage_time_budgets):
            raise ValueError("stage_time_budgets must be three nonnegative durations")


def build_request_model(instance: Instance, request: ClearingRequest) -> milp.MilpModel:
    """The MILP for a request.

    The opportunity-cost objective needs the d_reject columns, so it stays
    on the unrestricted form; pcr rules are then imposed by pinning the
    d_accept columns to zero instead of eliminating them.
    """
    model = milp.build_umfs(instance)
    milp.add_mic_constraints(model)
    if request.objective == "min_opportunity_cost":
        if request.rules == "pcr":
            milp.forbid_paradoxical_acceptance(model)
    elif request.rules == "pcr":
        model = milp.restrict_to_pcr(model)
    milp.set_objective(model, request.objective)
    return model


def _mip_options(request: ClearingRequest, time_limit: Optional[float]) -> be.SolveOptions:
    if time_limit is None:
        return request.solve_options
    return replace(request.solve_options, time_limit=time_limit)


def _lp_options(request: ClearingRequest) -> be.SolveOptions:
    return replace(request.solve_options, time_limit=None, warm_start=None)


def _gap_of(outcome: be.SolveOutcome) -> float:
    if outcome.mip_gap is not None:
        return float(outcome.mip_gap)
    if outcome.best_bound is not None and outcome.objective is not None:
        return abs(outcome.best_bound - outcome.objective) / (1.0 + abs(outcome.objective))
    return float("inf")


def assemble_solution(
    instance: Instance,
    model: milp.MilpModel,
    columns: np.ndarray,
    solver_gap: float = 0.0,
    solver_status: str = "optimal",
) -> ClearingSolution:
    """Turn a feasible primal-dual column vector into a ClearingSolution.

    Free dual coordinates are canonicalized to their minimal witnesses
    against the solved prices; this preserves the objective-equality row
    exactly (an accepted block's s - d_accept difference is kept) and makes
    rejected-bid slacks equal their actual missed surplus.
    """
    idx = InstanceIndex(instance)
    r = model.roles
    cols = np.asarray(columns, dtype=float)

    def grab(role):
        return cols[r[role]].copy() if role in r else np.zeros(0)

    x = np.clip(grab("x"), 0.0, 1.0)
    xm = np.clip(grab("x_mic"), 0.0, 1.0)
    y = np.round(grab("y"))
    u = np.round(grab("u"))
    n = grab("n")
    piflat = grab("pi")
    v = np.clip(grab("v"), 0.0, None)
    si = np.clip(grab("s_hourly"), 0.0, None)
    prices = piflat.reshape(idx.L, idx.T)

    gain = idx.block_surplus(prices) if idx.n_block else np.zeros(0)
    acc = y > 0.5
    sj = np.where(acc, np.clip(gain, 0.0, None), 0.0)
    da = np.where(acc, np.clip(-gain, 0.0, None), 0.0)
    dr = np.where(acc, 0.0, np.clip(gain, 0.0, None))
    if "d_accept" not in r:
        da = np.zeros(idx.n_block)  # the restricted form has no compensation

    sub_gain = idx.sub_surplus(prices) if idx.n_sub else np.zeros(0)
    sh = np.zeros(idx.n_sub)
    scv = np.zeros(idx.n_mic)
    dur = np.zeros(idx.n_mic)
    for c in range(idx.n_mic):
        sl = idx.mic_slices[c]
        g = np.clip(sub_gain[sl.start: sl.stop], 0.0, None)
        if u[c] > 0.5:
            # pinned: full suborders carry their surplus, fractional ones none
            sh[sl.start: sl.stop] = np.where(xm[sl.start: sl.stop] > 0.5, g, 0.0)
            scv[c] = float(sh[sl.start: sl.stop].sum())
        else:
            sh[sl.start: sl.stop] = g
            dur[c] = float(g.sum())

    welfare = idx.welfare_value(x, xm, y)
    volume = idx.buy_volume(x, xm, y)
    total_oc = float(dr.sum())
    return ClearingSolution(
        x=x, x_mic=xm, y=y, u=u, net_positions=n, prices=prices, v=v,
        s_hourly=si, s_block=sj, s_mic=scv, s_mic_sub=sh,
        d_accept=da, d_reject=dr, du_reject=dur,
        welfare=welfare, traded_volume=volume, total_opportunity_cost=total_oc,
        solver_gap=float(solver_gap), solver_status=solver_status,
    )


def _finalize(
    instance: Instance,
    model: milp.MilpModel,
    outcome: be.SolveOutcome,
    request: ClearingRequest,
    backend,
) -> ClearingSolution:
    if not outcome.has_solution:
        raise ClearingError(f"no feasible solution within budget (solver: {outcome.status})")
    y = np.round(outcome.columns[model.roles["y"]])
    u = np.round(outcome.columns[model.roles["u"]])
    resolved = be.resolve_duals(model, y, u, _lp_options(request), backend=backend)
    if resolved.status != "optimal":
        raise ClearingError(
            f"dual resolve failed for the incumbent selection: {resolved.status}"
        )
    return assemble_solution(
        instance, model, resolved.columns,
        solver_gap=_gap_of(outcome), solver_status=outcome.status,
    )


def clear(instance: Instance, request: ClearingRequest = ClearingRequest(), backend=None) -> ClearingSolution:
    """Single-shot clearing under the requested objective and rules."""
    validate_instance(instance)
    model = build_request_model(instance, request)
    outcome = be.solve_mip(model, request.solve_options, backend=backend)
    return _finalize(instance, model, outcome, request, backend)


def heuristic_mic_block(
    instance: Instance, request: ClearingRequest = ClearingRequest(), backend=None,
    trace: Optional[dict] = None,
) -> ClearingSolution:
    """Three-stage search: MIC selection first, then blocks, then the full model.

    Stage 1 fixes every block to rejected and settles the MIC binaries,
    stage 2 freezes that MIC selection and frees the blocks, stage 3 warm-
    starts the unrestricted model with the stage-2 incumbent. Rationale:
    MIC bids dominate hardness, so eliminating them early prunes the tree.
    A trace dict, when given, receives the per-stage objective values.
    """
    validate_instance(instance)
    b1, b2, b3 = request.stage_time_budgets
    model = build_request_model(instance, request)

    m1 = model.copy()
    ys = m1.roles["y"]
    m1.lb[ys] = 0.0
    m1.ub[ys] = 0.0
    out1 = be.solve_mip(m1, _mip_options(request, b1), backend=backend)
    if not out1.has_solution:
        raise ClearingError(f"stage 1 found nothing within budget ({out1.status})")

    m2 = model.copy()
    us = m2.roles["u"]
    u1 = np.round(out1.columns[us])
    m2.lb[us] = u1
    m2.ub[us] = u1
    m2.warm_start = out1.columns.copy()
    out2 = be.solve_mip(m2, _mip_options(request, b2), backend=backend)
    if not out2.has_solution:
        out2 = out1

    m3 = model.copy()
    m3.warm_start = out2.columns.copy()
    out3 = be.solve_mip(m3, _mip_options(request, b3), backend=backend)
    if not out3.has_solution:
        out3 = out2
    if trace is not None:
        trace["stage_objectives"] = [out1.objective, out2.objective, out3.objective]
    return _finalize(instance, model, out3, request, backend)


def heuristic_volume(
    instance: Instance, request: ClearingRequest = ClearingRequest(), backend=None,
    trace: Optional[dict] = None,
) -> ClearingSolution:
    """Welfare first, then volume: the welfare optimum seeds the volume search.

    Stage a maximizes welfare, stage b re-optimizes volume over the fixed
    welfare-optimal selection (resolving volume indeterminacy at that
    selection), stage c warm-starts the full volume MILP from that point.
    A trace dict, when given, receives the per-stage objective values
    (stage a in welfare units, stages b and c in volume units).
    """
    validate_instance(instance)
    b1, b2, b3 = request.stage_time_budgets
    vol_request = replace(request, objective="volume")
    wel_request = replace(request, objective="welfare")
    vol_model = build_request_model(instance, vol_request)
    wel_model = build_request_model(instance, wel_request)

    out_a = be.solve_mip(wel_model, _mip_options(wel_request, b1), backend=backend)
    if not out_a.has_solution:
        raise ClearingError(f"welfare stage found nothing within budget ({out_a.status})")
    y_a = np.round(out_a.columns[wel_model.roles["y"]])
    u_a = np.round(out_a.columns[wel_model.roles["u"]])

    fixed = vol_model.copy()
    fixed.lb[fixed.roles["y"]] = y_a
    fixed.ub[fixed.roles["y"]] = y_a
    fixed.lb[fixed.roles["u"]] = u_a
    fixed.ub[fixed.roles["u"]] = u_a
    out_b = be.solve_lp(fixed, replace(_lp_options(vol_request), time_limit=b2 or None), backend=backend)
    if out_b.status != "optimal":
        raise ClearingError(f"volume stage-b LP failed: {out_b.status}")

    m3 = vol_model.copy()
    m3.warm_start = out_b.columns.copy()
    out_c = be.solve_mip(m3, _mip_options(vol_request, b3), backend=backend)
    if not out_c.has_solution:
        out_c = out_b
    if trace is not None:
        trace["stage_objectives"] = [out_a.objective, out_b.objective, out_c.objective]
    return _finalize(instance, vol_model, out_c, vol_request, backend)


def heuristic_min_oc(
    instance: Instance, request: ClearingRequest = ClearingRequest(), backend=None,
    trace: Optional[dict] = None,
) -> ClearingSolution:
    """Welfare first, then minimal compensation for rejected blocks.

    All stages run on the opportunity-cost form (d columns retained) so
    incumbents transfer directly: stage a maximizes welfare, stage b
    minimizes the rejected-block slack sum over the welfare selection
    (prices re-optimized), stage c warm-starts the full minimization.
    A trace dict, when given, receives the per-stage objective values
    (stage a in welfare units, stages b and c in compensation units).
    """
    validate_instance(instance)
    b1, b2, b3 = request.stage_time_budgets
    oc_request = replace(request, objective="min_opportunity_cost")
    oc_model = build_request_model(instance, oc_request)

    wel_model = oc_model.copy()
    milp.set_objective(wel_model, "welfare")
    out_a = be.solve_mip(wel_model, _mip_options(oc_request, b1), backend=backend)
    if not out_a.has_solution:
        raise ClearingError(f"welfare stage found nothing within budget ({out_a.status})")
    y_a = np.round(out_a.columns[wel_model.roles["y"]])
    u_a = np.round(out_a.columns[wel_model.roles["u"]])

    fixed = oc_model.copy()
    fixed.lb[fixed.roles["y"]] = y_a
    fixed.ub[fixed.roles["y"]] = y_a
    fixed.lb[fixed.roles["u"]] = u_a
    fixed.ub[fixed.roles["u"]] = u_a
    out_b = be.solve_lp(fixed, replace(_lp_options(oc_request), time_limit=b2 or None), backend=backend)
    if out_b.status != "optimal":
        raise ClearingError(f"opportunity-cost stage-b LP failed: {out_b.status}")

    m3 = oc_model.copy()
    m3.warm_start = out_b.columns.copy()
    out_c = be.solve_mip(m3, _mip_options(oc_request, b3), backend=backend)
    if not out_c.has_solution:
        out_c = out_b
    if trace is not None:
        trace["stage_objectives"] = [out_a.objective, out_b.objective, out_c.objective]
    return _finalize(instance, oc_model, out_c, oc_request, backend)


def compare_pab_models(
    instance: Instance, request: ClearingRequest = ClearingRequest(), backend=None
) -> dict:
    """Welfare clearing under both rule sets, with the decomposition check.

    The identity welfare = sum s_hourly + sum s_block + sum s_mic
    + capacities . v - sum d_accept must hold for each solution; the
    unrestricted welfare always dominates the restricted one.
    """
    out = {}
    residuals = {}
    for rules in RULESETS:
        req = replace(request, rules=rules, objective="welfare")
        sol = clear(instance, req, backend=backend)
        idx = InstanceIndex(instance)
        dual_value = float(
            sol.s_hourly.sum() + sol.s_block.sum() + sol.s_mic.sum() - sol.d_accept.sum()
        )
        if idx.n_net_rows:
            dual_value += float(instance.network.capacities @ sol.v)
        residuals[rules] = abs(sol.welfare - dual_value)
        out[rules] = sol
    out["decomposition_residuals"] = residuals
    return out
