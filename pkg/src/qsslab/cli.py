"""Batch front door: analyze / simulate / classical / sweep.

Exit codes: 0 success, 1 input error, 2 theory-consistency failure.
Reports are emitted as deterministic JSON (sorted keys, fixed float
formatting); sweeps are locale-independent CSV.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import classical as classical_mod
from . import modelio
from . import operators as op
from . import qss as qss_mod
from . import structure as structure_mod
from . import trajectory as traj_mod
from .model import FIXTURE_FAMILIES
from .modelio import ModelFileError


class InputError(RuntimeError):
    pass


class ConsistencyError(RuntimeError):
    pass


def _load(path) -> modelio.ModelFile:
    try:
        return modelio.load_model(path)
    except FileNotFoundError as exc:
        raise InputError(f"cannot read model file: {exc}") from exc
    except ModelFileError as exc:
        raise InputError(f"invalid model file: {exc}") from exc


def _analysis_bundle(spec, tol_eig, tol_psd, seed=None):
    """Run the full structural + spectral pipeline on one model."""
    sub = structure_mod.check_subharmonic(spec)
    if not sub.verdict:
        raise InputError(
            "p0 is not subharmonic for this model "
            f"(algebraic residual {sub.algebraic_residual:.3e})"
        )
    restr = structure_mod.restrict(spec)
    absorption = structure_mod.absorption_operator(spec)
    irred = structure_mod.check_irreducible(restr)
    cands = qss_mod.real_eigen_candidates(restr, real_tol=tol_eig)
    result = qss_mod.extract_qss(cands)
    try:
        result = qss_mod.perron_structure(
            restr, result, irreducible=irred.verdict if irred.verdict else None
        )
    except qss_mod.QssTheoryError as exc:
        raise ConsistencyError(str(exc)) from exc

    spectrum, _ = op.eig_general(restr.gen_schr.mat)
    families_json = []
    verifications = []
    for fam in result.families:
        report = qss_mod.verify_qss(spec, fam.anchor)
        verifications.append(report)
        fam_json = {
            "alpha": fam.alpha,
            "is_perron": fam.anchor.is_perron,
            "dimension": len(fam.herm_basis),
            "anchor": modelio.matrix_to_json(fam.anchor.nu),
            "residual_eigen": fam.anchor.residual_eigen,
            "residual_defn": fam.anchor.residual_defn,
            "verification": {
                "residual_defn": report.residual_defn,
                "residual_exp_survival": report.residual_exp_survival,
                "residual_mult": report.residual_mult,
                "residual_repeated": report.residual_repeated,
                "alpha_log_crosscheck": report.alpha_log_crosscheck,
                "ok": report.ok,
            },
            "notes": list(fam.notes),
        }
        if fam.param_interval is not None:
            fam_json["param_interval"] = list(fam.param_interval)
            fam_json["endpoints"] = [modelio.matrix_to_json(c.nu) for c in fam.endpoints]
        families_json.append(fam_json)
    bundle = {
        "label": spec.label,
        "structure": {
            "subharmonic": {
                "algebraic_residual": sub.algebraic_residual,
                "semigroup_residual": sub.semigroup_residual,
                "verdict": sub.verdict,
            },
            "absorption": {
                "is_absorbing": absorption.is_absorbing,
                "residual_harmonic": absorption.residual_harmonic,
                "convergence_gap": absorption.convergence_gap,
                "a_op": modelio.matrix_to_json(absorption.a_op),
            },
            "irreducible": {"verdict": irred.verdict, "note": irred.note},
        },
        "spectrum": [[float(z.real), float(z.imag)] for z in spectrum],
        "qss_families": families_json,
        "rejected_candidates": [
            {"alpha": r.alpha, "reason": r.reason} for r in result.rejected
        ],
        "provenance": {
            "artifact_version": __version__,
            "tol_eig": tol_eig,
            "tol_psd": tol_psd,
            "seed": seed,
        },
    }
    return bundle, result, restr, absorption


def _write_out(text: str, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    mf = _load(args.model)
    if mf.spec is None:
        raise InputError("model file has no quantum model block")
    bundle, _, _, _ = _analysis_bundle(mf.spec, args.tol_eig, args.tol_psd, seed=args.seed)
    _write_out(modelio.dumps(bundle) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    if args.samples <= 0:
        raise InputError("--samples must be positive")
    if args.horizon <= 0:
        raise InputError("--horizon must be positive")
    mf = _load(args.model)
    if mf.spec is None:
        raise InputError("model file has no quantum model block")
    spec = mf.spec
    if args.start == "qss":
        _, result, _, _ = _analysis_bundle(spec, args.tol_eig, args.tol_psd)
        perron = [f for f in result.families if f.anchor.is_perron]
        if not perron:
            raise ConsistencyError("no QSS available for --start qss")
        rho0 = perron[0].anchor.nu
        alpha = perron[0].alpha
    else:
        if not args.start_file:
            raise InputError("--start file requires --start-file PATH")
        try:
            with open(args.start_file, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise InputError(f"cannot read start file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid start file JSON: {exc}") from exc
        if not isinstance(doc, dict) or "density" not in doc:
            raise InputError("start file must be a JSON object with a 'density' matrix")
        try:
            rho0 = modelio._matrix(doc["density"], spec.dim, "density")
            op.validate_density(rho0)
        except (ModelFileError, ValueError) as exc:
            raise InputError(f"invalid start density: {exc}") from exc
        _, result, _, _ = _analysis_bundle(spec, args.tol_eig, args.tol_psd)
        perron = [f for f in result.families if f.anchor.is_perron]
        if not perron:
            raise ConsistencyError("no QSS available to calibrate jump statistics")
        alpha = perron[0].alpha
    kernel = traj_mod.build_kernel(spec)

    n_workers = max(1, int(os.environ.get("QSSLAB_THREADS", "1")))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            records = list(
                pool.map(
                    lambda i: traj_mod.sample_trajectory(
                        kernel, rho0, args.horizon, args.seed, stream=i
                    ),
                    range(args.samples),
                )
            )
    else:
        records = traj_mod.sample_trajectories(
            kernel, rho0, args.horizon, args.seed, args.samples
        )
    stats = traj_mod.jump_statistics(records, alpha, nu=rho0)

    lines = []
    for rec in records:
        lines.append(
            modelio.dumps(
                {
                    "seed": rec.seed,
                    "stream": rec.stream,
                    "horizon": rec.horizon,
                    "jump_times": list(rec.jump_times),
                    "post_jump_states": [
                        modelio.matrix_to_json(s) for s in rec.post_jump_states
                    ],
                    "final_state": modelio.matrix_to_json(rec.final_state),
                    "final_weight": rec.final_weight,
                    "censored": rec.censored,
                }
            )
        )
    if args.records:
        with open(args.records, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    summary = {
        "n_trajectories": stats.n_trajectories,
        "n_observed_jumps": stats.n_observed_jumps,
        "conditional_interjump_mean": stats.empirical_mean,
        "ks_statistic": stats.ks_statistic,
        "post_jump_max_deviation": stats.post_jump_max_deviation,
        "censoring_fraction": stats.censoring_fraction,
        "rate": stats.rate,
        "alpha": alpha,
        "provenance": {
            "artifact_version": __version__,
            "seed": args.seed,
            "samples": args.samples,
            "horizon": args.horizon,
        },
    }
    _write_out(modelio.dumps(summary) + "\n", args.out)
    return 0


def cmd_classical(args) -> int:
    mf = _load(args.model)
    if mf.classical is None:
        raise InputError("model file has no classical block")
    report = classical_mod.crosscheck(mf.classical)
    doc = {
        "qsd": {
            "density": list(map(float, report.qsd.density)),
            "alpha": report.qsd.alpha,
            "unique": report.qsd.unique,
        },
        "embedded_match": {
            "alpha": None if np.isnan(report.matched_alpha) else report.matched_alpha,
            "alpha_gap": None if np.isinf(report.alpha_gap) else report.alpha_gap,
            "residual": None if np.isinf(report.match_residual) else report.match_residual,
            "ok": report.ok,
        },
        "n_extra_families": len(report.extra_families),
    }
    _write_out(modelio.dumps(doc) + "\n", args.out)
    return 0 if report.ok else 2


def _parse_range(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"--range must be a:b:n, got {text!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InputError(f"--range must be a:b:n with numeric parts: {exc}") from exc
    if n <= 0:
        raise InputError("--range needs at least one point")
    return np.linspace(a, b, n)


def cmd_sweep(args) -> int:
    mf = _load(args.model)
    if mf.family is None:
        raise InputError("sweep requires a model file with a 'family' entry")
    if args.param != "omega" or "omega" not in (mf.params or {"omega": None}):
        if args.param != "omega":
            raise InputError(f"unknown parameter {args.param!r}; this family exposes 'omega'")
    factory = FIXTURE_FAMILIES[mf.family]
    values = _parse_range(args.range)
    rows = []
    for value in values:
        spec = factory(float(value))
        restr = structure_mod.restrict(spec)
        # loose realness tolerance: branches collide at the bifurcation and
        # a defective pair splits at the sqrt(eps) level
        cands = qss_mod.real_eigen_candidates(restr, real_tol=1e-6)
        result = qss_mod.extract_qss(cands)
        alphas = sorted(f.alpha for f in result.families)
        # merge branches closer than the defective-splitting resolution, so
        # the collision point reports a single (double-root) branch
        merged = []
        for a in alphas:
            if merged and a - merged[-1][-1] <= 1e-5:
                merged[-1].append(a)
            else:
                merged.append([a])
        alphas = [float(np.mean(group)) for group in merged]
        rows.append((float(value), alphas))
    width = max(len(alphas) for _, alphas in rows)
    header = [args.param] + [f"alpha_{k + 1}" for k in range(width)]
    lines = [",".join(header)]
    for value, alphas in rows:
        cells = [format(value, ".17g")]
        cells += [format(a, ".17g") for a in alphas]
        cells += [""] * (width - len(alphas))
        lines.append(",".join(cells))
    _write_out("\n".join(lines) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsslab",
        description="Quasi-stationary states of finite-dimensional quantum Markov semigroups",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="path to a model JSON file")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--tol-eig", type=float, default=op.TOL_EIG)
    common.add_argument("--tol-psd", type=float, default=op.TOL_PSD)
    common.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("analyze", parents=[common], help="structure + QSS report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", parents=[common], help="trajectory suite")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--horizon", type=float, default=6.0)
    p.add_argument("--start", choices=["qss", "file"], default="qss")
    p.add_argument("--start-file", default=None)
    p.add_argument("--records", default=None, help="JSON-lines dump of every record")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("classical", parents=[common], help="classical crosscheck")
    p.set_defaults(func=cmd_classical)

    p = sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV")
    p.add_argument("--param", default="omega")
    p.add_argument("--range", required=True, help="a:b:n inclusive linspace")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConsistencyError as exc:
        print(f"theory-consistency failure: {exc}", file=sys.stderr)
        return 2
    except (structure_mod.StructureError, traj_mod.TrajectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
