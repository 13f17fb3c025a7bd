"""Desk-scale experiment matrix: instance generation, solver runs, CSV rows.

Per instance (a family/horizon/cost combination with a seeded true
parameter): solve the fixed-distribution problem under the truth with both
FD and the exact reference; then, per sample size N, estimate by maximum
likelihood, run FD on the MLE model, and, per grid density M, build the
confidence-set ambiguity set and run the cutting-surface and full-set
solvers. Three CSV files collect the rows; byte-identical reruns are
guaranteed for a fixed config and seed (wall-time columns excluded).
"""

import json
import os
import tempfile
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .ambiguity import AmbiguitySet, build_confidence_set, chi2_statistic, extreme_set, mle
from .cost import cost_raw
from .dro import CsConfig, cs_solve, full_minimax, worst_case
from .errors import MpnvError
from .fd import fd_solve
from .reports import SolveReport
from .simulate import sample_demand
from .specialfns import chi2_quantile
from .types import NORMAL, POISSON, DemandModel, Instance, save_problem

FD_VS_REF_COLUMNS = (
    "instance_id", "family", "T", "p", "h", "b", "W",
    "fd_objective", "ref_objective", "fd_gap_pct", "fd_spend", "fd_budget_ok",
    "fd_wall_s", "ref_wall_s", "error",
)
MLE_EVAL_COLUMNS = (
    "instance_id", "family", "T", "N",
    "mle_pred_cost", "true_cost_of_mle_plan", "true_opt_cost",
    "ape_pct", "opt_gap_pct", "underestimated", "profit_pred_loss_real",
    "theta0_stat", "theta0_in_region", "error",
)
DRO_EVAL_COLUMNS = (
    "instance_id", "family", "T", "N", "M", "alpha", "set_size", "ext_size",
    "mle_injected", "cs_objective", "full_objective", "omega_gap_pct", "q_gap_pct",
    "cs_found_worst", "cs_iters", "cs_timed_out", "full_timed_out",
    "theta0_in_set", "dro_ge_true_at_cs_plan", "mle_plan_dro_cost",
    "cs_wall_s", "full_wall_s", "error",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Desk-scale study design; the defaults mirror the full-scale grid shrunk."""

    families: tuple = (NORMAL, POISSON)
    T_list: tuple = (2, 3)
    M_list: tuple = (3, 5)
    N_list: tuple = (10, 25, 50)
    alpha: float = 0.05
    cost_combos: tuple = ((100.0, 100.0, 100.0), (200.0, 100.0, 200.0))  # (p, h, b)
    n_true_params: int = 3
    seed: int = 2024
    output_dir: str = "results"
    workers: int = 1
    timeout_s: float = 120.0
    cs_eps: float = 1e-6
    cs_k_max: int = 10
    max_set_size: int = 2000

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            doc = json.load(fh)
        kwargs = {}
        for key, value in doc.items():
            if key not in cls.__dataclass_fields__:
                raise MpnvError(f"unknown experiment config field {key!r}")
            if key == "cost_combos":
                value = tuple(tuple(float(v) for v in combo) for combo in value)
            elif isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        return cls(**kwargs)

    def to_json(self, path) -> None:
        doc = asdict(self)
        doc["cost_combos"] = [list(c) for c in self.cost_combos]
        for key in ("families", "T_list", "M_list", "N_list"):
            doc[key] = list(doc[key])
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _instance_seed(config: ExperimentConfig, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence([config.seed] + [k % (2**31) for k in keys])


def _wholesale(T: int) -> np.ndarray:
    return 100.0 * np.arange(T, 0, -1)


def _budget(T: int) -> float:
    return 8000.0 if T >= 4 else 4000.0


def generate_instances(config: ExperimentConfig) -> list[tuple[str, Instance, DemandModel]]:
    """Deterministic (id, instance, true model) triples for the design grid."""
    out = []
    for fi, family in enumerate(config.families):
        for T in config.T_list:
            for ci, (p, h, b) in enumerate(config.cost_combos):
                for j in range(config.n_true_params):
                    rng = np.random.default_rng(_instance_seed(config, fi, T, ci, j))
                    mu0 = rng.integers(3, 21, size=T).astype(float)
                    sig_hi = np.minimum(10, np.floor(mu0 / 3.0)).astype(int)
                    sig0 = np.array([rng.integers(1, hi + 1) for hi in sig_hi], dtype=float)
                    if family == NORMAL:
                        model = DemandModel(kind=NORMAL, mu=mu0, sigma=sig0)
                    else:
                        model = DemandModel(kind=POISSON, lam=mu0)
                    inst = Instance(T=T, p=p, h=h, b=b, w=_wholesale(T), W=_budget(T))
                    iid = f"{family}-T{T}-p{p:g}h{h:g}b{b:g}-r{j}"
                    out.append((iid, inst, model))
    return out


def _reference_solve(instance: Instance, model: DemandModel,
                     timeout_s: float) -> SolveReport:
    """Exact (Poisson) or subgradient (normal) optimum under a fixed model."""
    amb = AmbiguitySet(family=model.kind, T=model.T, members=model.params[None, :],
                       provenance="confidence_filtered")
    return full_minimax(instance, amb, CsConfig(timeout_s=timeout_s))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _run_instance(args):
    iid, instance, model, config = args
    fd_rows, mle_rows, dro_rows = [], [], []
    base = {"instance_id": iid, "family": model.kind, "T": instance.T,
            "p": instance.p, "h": instance.h, "b": instance.b, "W": instance.W}

    try:
        ref_true = _reference_solve(instance, model, config.timeout_s)
        fd_true = fd_solve(instance, model)
        gap = None
        if ref_true.objective != 0:
            gap = 100.0 * (fd_true.objective - ref_true.objective) / abs(ref_true.objective)
        fd_rows.append({**base, "fd_objective": fd_true.objective,
                        "ref_objective": ref_true.objective, "fd_gap_pct": gap,
                        "fd_spend": fd_true.plan.spend(instance),
                        "fd_budget_ok": fd_true.plan.spend(instance)
                        <= instance.W + instance.eps_W,
                        "fd_wall_s": fd_true.timing, "ref_wall_s": ref_true.timing,
                        "error": ""})
    except MpnvError as exc:
        fd_rows.append({**base, "error": f"{type(exc).__name__}: {exc}"})
        return iid, fd_rows, mle_rows, dro_rows

    crit = chi2_quantile(2 * instance.T if model.kind == NORMAL else instance.T,
                         1.0 - config.alpha)
    for ni, N in enumerate(config.N_list):
        row = {**base, "N": N}
        try:
            samples = sample_demand(model, N,
                                    seed=_instance_seed(config, zlib.crc32(iid.encode()), ni))
            est = mle(samples, model.kind)
            mle_model = est.model()
            fd_mle = fd_solve(instance, mle_model)
            q_hat = fd_mle.plan
            pred = cost_raw(instance, mle_model, q_hat.q)
            true_cost = cost_raw(instance, model, q_hat.q)
            stat0 = chi2_statistic(est, model.params)
            ape = None
            if true_cost != 0:
                ape = 100.0 * abs(true_cost - pred) / abs(true_cost)
            opt_gap = None
            if ref_true.objective != 0:
                opt_gap = 100.0 * abs((ref_true.objective - true_cost)
                                      / ref_true.objective)
            mle_rows.append({**row, "mle_pred_cost": pred,
                             "true_cost_of_mle_plan": true_cost,
                             "true_opt_cost": ref_true.objective,
                             "ape_pct": ape, "opt_gap_pct": opt_gap,
                             "underestimated": pred < true_cost,
                             "profit_pred_loss_real": pred < 0 < true_cost,
                             "theta0_stat": stat0, "theta0_in_region": stat0 <= crit,
                             "error": ""})
        except MpnvError as exc:
            mle_rows.append({**row, "error": f"{type(exc).__name__}: {exc}"})
            continue

        for M in config.M_list:
            drow = {**row, "M": M, "alpha": config.alpha}
            try:
                amb = build_confidence_set(est, config.alpha, M)
                if len(amb) > config.max_set_size:
                    raise MpnvError(f"ambiguity set has {len(amb)} members "
                                    f"(cap {config.max_set_size})")
                ext = extreme_set(amb)
                cs_cfg = CsConfig(eps=config.cs_eps, k_max=config.cs_k_max,
                                  timeout_s=config.timeout_s)
                cs = cs_solve(instance, amb, cs_cfg)
                full = full_minimax(instance, amb, cs_cfg)
                denom_ref = worst_case(instance, amb, full.plan)["cost"]
                denom_cs = cs.objective
                omega = q_gap = None
                if denom_cs != 0:
                    c_sel = cost_raw(instance,
                                     DemandModel.from_params(amb.family,
                                                             cs.selected_param),
                                     cs.plan.q)
                    omega = 100.0 * (denom_cs - c_sel) / denom_cs
                if denom_ref != 0:
                    q_gap = 100.0 * (denom_ref - denom_cs) / denom_ref
                true_at_cs = cost_raw(instance, model, cs.plan.q)
                theta0_in_set = amb.index_of(model.params, tol=1e-9) is not None
                dro_rows.append({**drow, "set_size": len(amb), "ext_size": len(ext),
                                 "mle_injected": amb.mle_injected,
                                 "cs_objective": cs.objective,
                                 "full_objective": full.objective,
                                 "omega_gap_pct": omega, "q_gap_pct": q_gap,
                                 "cs_found_worst":
                                     not cs.flags["worst_case_from_extreme_only"],
                                 "cs_iters": len(cs.iterations),
                                 "cs_timed_out": cs.flags["timed_out"],
                                 "full_timed_out": full.flags["timed_out"],
                                 "theta0_in_set": theta0_in_set,
                                 "dro_ge_true_at_cs_plan":
                                     cs.objective >= true_at_cs - 1e-9,
                                 "mle_plan_dro_cost":
                                     worst_case(instance, amb, q_hat)["cost"],
                                 "cs_wall_s": cs.timing, "full_wall_s": full.timing,
                                 "error": ""})
            except MpnvError as exc:
                dro_rows.append({**drow, "error": f"{type(exc).__name__}: {exc}"})
    return iid, fd_rows, mle_rows, dro_rows


def _write_csv(path: str, columns: tuple, rows: list[dict]) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(row.get(c)) for c in columns) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_matrix(config: ExperimentConfig) -> dict:
    """Run the whole matrix; returns the paths of the three CSV files."""
    out_dir = config.output_dir
    os.makedirs(os.path.join(out_dir, "instances"), exist_ok=True)
    triples = generate_instances(config)
    for iid, inst, model in triples:
        save_problem(os.path.join(out_dir, "instances", f"{iid}.json"), inst, model)
    config.to_json(os.path.join(out_dir, "config.json"))

    tasks = [(iid, inst, model, config) for iid, inst, model in triples]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_instance, tasks))
    else:
        results = [_run_instance(t) for t in tasks]

    order = {iid: i for i, (iid, _, _) in enumerate(triples)}
    results.sort(key=lambda r: order[r[0]])
    fd_rows = [row for _, rows, _, _ in results for row in rows]
    mle_rows = [row for _, _, rows, _ in results for row in rows]
    dro_rows = [row for _, _, _, rows in results for row in rows]

    paths = {
        "fd_vs_ref": os.path.join(out_dir, "fd_vs_ref.csv"),
        "mle_eval": os.path.join(out_dir, "mle_eval.csv"),
        "dro_eval": os.path.join(out_dir, "dro_eval.csv"),
    }
    _write_csv(paths["fd_vs_ref"], FD_VS_REF_COLUMNS, fd_rows)
    _write_csv(paths["mle_eval"], MLE_EVAL_COLUMNS, mle_rows)
    _write_csv(paths["dro_eval"], DRO_EVAL_COLUMNS, dro_rows)
    return paths
