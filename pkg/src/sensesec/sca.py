"""Secure-sensing beamformer design without artificial noise: penalty SCA
over semidefinite-relaxed per-user beamformers.

Each outer iteration solves one convex max-det subproblem in which the
eavesdropper MI is replaced by its affine global upper bound at the current
expansion point, the rank-one requirement is a Schur-complement LMI plus a
linearized trace tie, and both couplings carry penalty slacks whose weight
grows geometrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import hermitian_eig, sample_complex_gaussian
from .metrics import (
    BeamformerSolution,
    rank_one_certificate,
    sensing_mi,
    sensing_mi_gradient,
    sensing_mi_taylor_bound,
    sinr,
    transmit_covariance,
)
from .solver import ConicSubproblem, InfeasibleError, solve

RANK_ONE_THRESHOLD = 0.999
RANDOMIZATION_CANDIDATES = 100
EVE_RECHECK_SLACK = 1e-3


@dataclass
class SCAState:
    """Expansion points and penalty weight for one SCA iteration."""

    exp_weights: list            # per-user expansion vectors
    exp_weight_mats: list        # per-user expansion matrices
    penalty_weight: float
    eve_cap: float | None = None     # None disables the eavesdropper constraint

    @property
    def exp_cov(self):
        return sum(self.exp_weight_mats)


@dataclass
class SCAIteration:
    index: int
    mi_legit: float
    mi_eve: float
    mi_eve_surrogate: float
    kappa: float
    rho_max: float
    power: float
    sinr_margin: float           # min_k SINR_k / target_k
    penalty_weight: float
    solver_status: str
    solver_iterations: int


@dataclass
class SCATrace:
    rows: list = field(default_factory=list)
    converged_at: int | None = None

    def mi_legit_series(self):
        return np.array([r.mi_legit for r in self.rows])

    def max_penalty_series(self):
        return np.array([max(r.kappa, r.rho_max) for r in self.rows])


def build_subproblem_no_an(state, channels, stats_r, stats_e, cfg):
    """Convex subproblem of one SCA step.

    maximize   MI_legit(sum_k W_k) - p (kappa + sum_k rho_k)
    subject to affine eavesdropper-MI bound <= cap + kappa, power cap,
    tightened SINR, per-user Schur LMIs, linearized rank ties, and
    nonnegative slacks.
    """
    n_users = cfg.n_users
    if len(state.exp_weights) != n_users or len(state.exp_weight_mats) != n_users:
        raise ValueError("expansion point count does not match user count")
    for w in state.exp_weights:
        if np.asarray(w).shape != (cfg.n_tx,):
            raise ValueError("expansion vector dimension mismatch")
    vectors = [np.asarray(ch.vector) for ch in channels]

    prob = ConicSubproblem()
    w_names = [f"w{k}" for k in range(n_users)]
    mat_names = [f"W{k}" for k in range(n_users)]
    for name in mat_names:
        prob.add_hermitian(name, cfg.n_tx)
    for name in w_names:
        prob.add_cvec(name, cfg.n_tx)
    rho_names = [f"rho{k}" for k in range(n_users)]
    for name in rho_names:
        prob.add_scalar(name, lower=0.0)
    prob.add_scalar("kappa", lower=0.0)

    def tx_cov(vals):
        return sum(vals[name] for name in mat_names)

    # Objective: legitimate sensing MI (symmetrized log-det form) minus the
    # penalty terms.
    root = np.sqrt(np.clip(stats_r.eigvals, 0.0, None))
    scale_r = cfg.frame_len / stats_r.noise_power

    def legit_block(vals):
        acc = np.zeros((stats_r.dim, stats_r.dim), dtype=complex)
        rc = np.conj(tx_cov(vals))
        for blk in stats_r.blocks:
            acc += blk @ rc @ blk.conj().T
        return np.eye(stats_r.dim) + scale_r * (root[:, None] * acc * root[None, :])

    obj_map = prob.matrix_map(legit_block, mat_names)
    pbar = state.penalty_weight
    penalty = prob.scalar_map(
        lambda v: -pbar * (v["kappa"] + sum(v[name] for name in rho_names)),
        rho_names + ["kappa"])
    prob.set_objective(linear=penalty, logdet_terms=[(1.0, obj_map)])

    # Eavesdropper constraint: affine expansion of the Eve MI around the
    # current covariance, slacked by kappa.
    if state.eve_cap is not None and np.isfinite(state.eve_cap):
        exp_cov = state.exp_cov
        grad = sensing_mi_gradient(stats_e, exp_cov, cfg.frame_len)
        const = sensing_mi(stats_e, exp_cov, cfg.frame_len) \
            - float(np.real(np.trace(grad @ exp_cov)))
        eve_affine = prob.scalar_map(
            lambda v: float(np.real(np.trace(grad @ tx_cov(v)))) - v["kappa"],
            mat_names + ["kappa"])
        prob.add_ineq(eve_affine, state.eve_cap - const)

    # Power budget.
    power_map = prob.scalar_map(
        lambda v: float(np.real(np.trace(tx_cov(v)))), mat_names)
    prob.add_ineq(power_map, cfg.power_budget)

    # Tightened per-user SINR (margin keeps the rank-one extraction within
    # the reporting tolerance).
    for k in range(n_users):
        target = cfg.sinr_targets[k] * (1.0 + cfg.sinr_margin)
        h = vectors[k]

        def sinr_fn(vals, h=h, k=k, target=target):
            signal = float(np.real(h.conj() @ vals[mat_names[k]] @ h))
            interf = sum(float(np.real(h.conj() @ vals[name] @ h))
                         for j, name in enumerate(mat_names) if j != k)
            return -(signal - target * interf)

        smap = prob.scalar_map(sinr_fn, mat_names)
        prob.add_ineq(smap, -target * cfg.noise_comm)

    # Rank-one coupling: Schur LMI plus linearized trace tie.
    for k in range(n_users):
        wn, mn, rn = w_names[k], mat_names[k], rho_names[k]

        def schur_fn(vals, wn=wn, mn=mn):
            top = np.hstack([vals[mn], vals[wn][:, None]])
            bottom = np.concatenate([vals[wn].conj(), [1.0]])
            return np.vstack([top, bottom[None, :]])

        prob.add_lmi(prob.matrix_map(schur_fn, [mn, wn]))

        w_exp = np.asarray(state.exp_weights[k])

        def tie_fn(vals, wn=wn, mn=mn, rn=rn, w_exp=w_exp):
            return float(np.real(np.trace(vals[mn]))
                         - 2.0 * np.real(w_exp.conj() @ vals[wn]) - vals[rn])

        prob.add_ineq(prob.scalar_map(tie_fn, [mn, wn, rn]),
                      -float(np.real(w_exp.conj() @ w_exp)))
    return prob


def random_expansion(cfg, rng):
    """Random initial beams: CN(0, (P/(K n_tx)) I) projected to the power
    ball."""
    gen = rng.generator()
    scale = math.sqrt(cfg.power_budget / (cfg.n_users * cfg.n_tx))
    weights = [scale * (gen.standard_normal(cfg.n_tx)
                        + 1j * gen.standard_normal(cfg.n_tx)) * math.sqrt(0.5)
               for _ in range(cfg.n_users)]
    total = sum(float(np.real(w.conj() @ w)) for w in weights)
    if total > cfg.power_budget:
        factor = math.sqrt(cfg.power_budget / total)
        weights = [w * factor for w in weights]
    mats = [np.outer(w, w.conj()) for w in weights]
    return weights, mats


def zero_forcing_start(channels, cfg):
    """Strictly feasible beams: zero-forcing directions with per-user power
    meeting the (tightened) SINR target, or None when the budget is too
    small for this construction.  The SINR headroom shrinks when the budget
    is tight."""
    vectors = [np.asarray(ch.vector) for ch in channels]
    h = np.stack(vectors, axis=1)
    gram = h.conj().T @ h
    try:
        binv = np.linalg.solve(gram, np.eye(cfg.n_users))
    except np.linalg.LinAlgError:
        return None
    beams = h @ binv            # h_k^H beams[:, k] = 1, zero cross terms
    norms_sq = np.real(np.einsum("ik,ik->k", beams.conj(), beams))
    base_powers = np.array([
        cfg.sinr_targets[k] * (1.0 + cfg.sinr_margin) * cfg.noise_comm
        * norms_sq[k] for k in range(cfg.n_users)])
    total_base = float(np.sum(base_powers))
    if total_base >= 0.9 * cfg.power_budget / 1.02:
        return None
    # Boost well beyond the minimal SINR power (toward half the budget):
    # large slacks keep the barrier Hessian well conditioned at the start.
    boost = float(np.clip(0.5 * cfg.power_budget / total_base, 1.02,
                          0.9 * cfg.power_budget / total_base))
    powers = boost * base_powers
    return [math.sqrt(powers[k] / norms_sq[k]) * beams[:, k]
            for k in range(cfg.n_users)]


def _anchor_point(channels, cfg):
    """Interior anchor: boosted zero-forcing beams with a PSD bump sized to a
    tenth of the anchor's own SINR slack (the bump leaks into interference),
    or None when zero forcing does not fit the budget."""
    weights = zero_forcing_start(channels, cfg)
    if weights is None:
        return None
    vectors = [np.asarray(ch.vector) for ch in channels]
    slack = np.inf
    for k in range(cfg.n_users):
        target = cfg.sinr_targets[k] * (1.0 + cfg.sinr_margin)
        signal = abs(np.vdot(vectors[k], weights[k])) ** 2
        interf = sum(abs(np.vdot(vectors[k], weights[j])) ** 2
                     for j in range(cfg.n_users) if j != k)
        slack = min(slack, signal - target * (interf + cfg.noise_comm))
    leak_scale = max(
        cfg.n_users * max(cfg.sinr_targets)
        * max(float(np.real(v.conj() @ v)) for v in vectors), 1e-12)
    bump = 0.1 * max(slack, 0.0) / leak_scale
    bump = float(np.clip(bump, 1e-10, 1e-4 * cfg.power_budget / cfg.n_tx))
    mats = [np.outer(w, np.conj(w)) + bump * np.eye(cfg.n_tx) for w in weights]
    return weights, mats


def _start_values(problem, weights, mats, cfg, state, stats_e):
    """Solver warm start from explicit (w, W) pairs; slack variables sized to
    the actual violations plus a pad that keeps barrier arguments strict."""
    vals = problem.zero_values()
    pad = 1e-4 * max(1.0, cfg.power_budget)
    for k in range(cfg.n_users):
        w = np.asarray(weights[k], dtype=complex)
        vals[f"w{k}"] = w
        vals[f"W{k}"] = np.asarray(mats[k], dtype=complex)
        exp_w = np.asarray(state.exp_weights[k])
        tie = float(np.real(np.trace(vals[f"W{k}"]))
                    - 2.0 * np.real(exp_w.conj() @ w)
                    + np.real(exp_w.conj() @ exp_w))
        vals[f"rho{k}"] = max(tie, 0.0) + pad
    if state.eve_cap is not None and np.isfinite(state.eve_cap):
        cov = transmit_covariance([vals[f"W{k}"] for k in range(cfg.n_users)])
        bound = sensing_mi_taylor_bound(stats_e, cov, state.exp_cov, cfg.frame_len)
        vals["kappa"] = max(bound - state.eve_cap, 0.0) + pad
    else:
        vals["kappa"] = pad
    return vals


def _blend_with_anchor(prev_weights, prev_mats, anchor, alpha=0.01):
    """Convex blend toward the interior anchor; all subproblem constraints
    are jointly affine/concave in (w, W), so the blend inherits at least
    alpha times the anchor's margin."""
    aw, am = anchor
    weights = [(1.0 - alpha) * np.asarray(w) + alpha * aw[k]
               for k, w in enumerate(prev_weights)]
    mats = [(1.0 - alpha) * np.asarray(m) + alpha * am[k]
            for k, m in enumerate(prev_mats)]
    return weights, mats


def _extract_solution(values, channels, stats_r, stats_e, cfg, state, rng,
                      status):
    """Rank-one beams from the relaxed solution plus re-verified metrics."""
    n_users = cfg.n_users
    weight_mats = [values[f"W{k}"] for k in range(n_users)]
    certs = np.array([rank_one_certificate(w) for w in weight_mats])
    weights = []
    need_randomization = False
    for k, wmat in enumerate(weight_mats):
        eigvals, eigvecs = hermitian_eig(wmat)
        lead = eigvecs[:, 0]
        trace = max(float(np.real(np.trace(wmat))), 0.0)
        if certs[k] >= RANK_ONE_THRESHOLD:
            weights.append(math.sqrt(trace) * lead)
        else:
            need_randomization = True
            weights.append(math.sqrt(trace) * lead)

    if need_randomization:
        weights = _gaussian_randomization(weight_mats, weights, channels,
                                          stats_r, stats_e, cfg, state, rng)

    vectors = [ch.vector for ch in channels]
    r_x = transmit_covariance(weights)
    mi_r = sensing_mi(stats_r, r_x, cfg.frame_len)
    mi_e = sensing_mi(stats_e, r_x, cfg.frame_len)
    surrogate = sensing_mi_taylor_bound(stats_e, r_x, state.exp_cov,
                                        cfg.frame_len)
    return BeamformerSolution(
        weights=weights,
        weight_mats=weight_mats,
        an_cov=None,
        mi_legit=mi_r,
        mi_eve=mi_e,
        mi_eve_surrogate=surrogate,
        sinrs=sinr(vectors, weights, cfg.noise_comm),
        power=float(np.real(np.trace(r_x))),
        rank_certs=certs,
        status=status,
    )


def _gaussian_randomization(weight_mats, fallback, channels, stats_r, stats_e,
                            cfg, state, rng):
    """Draw candidate beam sets from CN(0, W_k) and keep the best feasible."""
    vectors = [ch.vector for ch in channels]
    best, best_mi = None, -np.inf
    gen_rng = rng.child("randomization")
    for m in range(RANDOMIZATION_CANDIDATES):
        cand = []
        for k, wmat in enumerate(weight_mats):
            draw = sample_complex_gaussian(
                gen_rng.child(f"{m}:{k}"), np.zeros(cfg.n_tx), wmat)
            norm = np.linalg.norm(draw)
            trace = math.sqrt(max(float(np.real(np.trace(wmat))), 0.0))
            cand.append(draw / norm * trace if norm > 0 else draw)
        r_x = transmit_covariance(cand)
        if float(np.real(np.trace(r_x))) > cfg.power_budget * (1 + 1e-9):
            continue
        rates = sinr(vectors, cand, cfg.noise_comm)
        if np.any(rates < np.asarray(cfg.sinr_targets) * (1.0 - 1e-6)):
            continue
        if state.eve_cap is not None and np.isfinite(state.eve_cap):
            if sensing_mi(stats_e, r_x, cfg.frame_len) > state.eve_cap + EVE_RECHECK_SLACK:
                continue
        cand_mi = sensing_mi(stats_r, r_x, cfg.frame_len)
        if cand_mi > best_mi:
            best, best_mi = cand, cand_mi
    return best if best is not None else fallback


def run_sca_no_an(channels, stats_r, stats_e, cfg, rng, eve_cap="config"):
    """Penalty-SCA outer loop; returns (BeamformerSolution, SCATrace).

    The trace records the true metrics of every accepted iterate, recomputed
    from the metrics module rather than trusted from the solver.
    """
    cap = cfg.eve_mi_cap if eve_cap == "config" else eve_cap
    trace = SCATrace()
    vectors = [ch.vector for ch in channels]
    targets = np.asarray(cfg.sinr_targets)

    exp_w, exp_mats = random_expansion(cfg, rng.child("init"))
    state = SCAState(exp_w, exp_mats, cfg.penalty_init, eve_cap=cap)
    anchor = _anchor_point(channels, cfg)

    prev_mi = None
    result_values = None
    for itn in range(1, cfg.max_outer_iters + 1):
        problem = build_subproblem_no_an(state, channels, stats_r, stats_e, cfg)
        if result_values is None:
            initial = None
            if anchor is not None:
                initial = _start_values(problem, anchor[0], anchor[1], cfg,
                                        state, stats_e)
        else:
            prev_w = [result_values[f"w{k}"] for k in range(cfg.n_users)]
            prev_m = [result_values[f"W{k}"] for k in range(cfg.n_users)]
            if anchor is not None:
                warm_w, warm_m = _blend_with_anchor(prev_w, prev_m, anchor)
            else:
                warm_w, warm_m = prev_w, prev_m
            initial = _start_values(problem, warm_w, warm_m, cfg, state,
                                    stats_e)
        try:
            res = solve(problem, initial=initial,
                        t0=1.0 if result_values is None else 1e3)
        except InfeasibleError:
            if itn == 1:
                exp_w, exp_mats = random_expansion(cfg, rng.child("reinit"))
                state = SCAState(exp_w, exp_mats, cfg.penalty_init, eve_cap=cap)
                problem = build_subproblem_no_an(state, channels, stats_r,
                                                 stats_e, cfg)
                try:
                    res = solve(problem, initial=None)
                except InfeasibleError as exc:
                    raise InfeasibleError(
                        "subproblem infeasible after re-randomization; the "
                        "SINR targets are unreachable within the power budget "
                        f"for this channel draw ({exc})") from exc
            else:
                raise
        result_values = res.values
        weight_mats = [result_values[f"W{k}"] for k in range(cfg.n_users)]
        weights = [result_values[f"w{k}"] for k in range(cfg.n_users)]
        kappa = float(result_values["kappa"])
        rho_max = max(float(result_values[f"rho{k}"])
                      for k in range(cfg.n_users))
        r_x = transmit_covariance(weight_mats)
        mi_r = sensing_mi(stats_r, r_x, cfg.frame_len)
        mi_e = sensing_mi(stats_e, r_x, cfg.frame_len)
        surrogate = sensing_mi_taylor_bound(stats_e, r_x, state.exp_cov,
                                            cfg.frame_len)
        rates = sinr(vectors, weight_mats, cfg.noise_comm)
        trace.rows.append(SCAIteration(
            index=itn,
            mi_legit=mi_r,
            mi_eve=mi_e,
            mi_eve_surrogate=surrogate,
            kappa=kappa,
            rho_max=rho_max,
            power=float(np.real(np.trace(r_x))),
            sinr_margin=float(np.min(rates / targets)),
            penalty_weight=state.penalty_weight,
            solver_status=res.status,
            solver_iterations=res.iterations,
        ))
        converged = (prev_mi is not None
                     and abs(mi_r - prev_mi) <= cfg.tol_obj_nats
                     and max(kappa, rho_max) <= cfg.tol_penalty)
        state = SCAState([w.copy() for w in weights],
                         [m.copy() for m in weight_mats],
                         state.penalty_weight * cfg.penalty_growth,
                         eve_cap=cap)
        if converged:
            trace.converged_at = itn
            break
        prev_mi = mi_r

    status = "optimal" if trace.converged_at is not None else "max-iter"
    solution = _extract_solution(result_values, channels, stats_r, stats_e,
                                 cfg, state, rng, status)

    # The surrogate guarantees the true constraint in exact arithmetic; the
    # re-check below guards numerical slack with one extra pass.
    if (cap is not None and np.isfinite(cap)
            and solution.mi_eve > cap + EVE_RECHECK_SLACK):
        problem = build_subproblem_no_an(state, channels, stats_r, stats_e, cfg)
        if anchor is not None:
            warm_w, warm_m = _blend_with_anchor(solution.weights,
                                                solution.weight_mats, anchor)
            initial = _start_values(problem, warm_w, warm_m, cfg, state, stats_e)
        else:
            initial = None
        res = solve(problem, initial=initial)
        solution = _extract_solution(res.values, channels, stats_r, stats_e,
                                     cfg, state, rng, status)
    return solution, trace
