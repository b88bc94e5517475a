"""Command-line front end.

    focalforge verify-algebra [--pairs N]
    focalforge audit --family m,k[,variant] --side plus|minus [--samples N] [--out DIR]
    focalforge isofun [--variant indefinite|definite] [--levels 0,0.3,...]
    focalforge report --out DIR
    focalforge pipeline --out DIR

Exit codes: 0 all checks pass, 1 a verification failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import octonion as oc
from .loci import (
    DEFAULT_SEED,
    NOT_AUDITED,
    TABLE1_FAMILIES,
    TABLE2_FAMILIES,
    FamilySpec,
    UnknownFamilyError,
    sample_seed,
    sample_summary,
    table_audit,
)

logger = logging.getLogger("focalforge")

CSV_HEADER = ["family", "side", "locus", "claim", "verdict", "max_residual", "n_samples"]
DEFAULT_LEVELS = "0,0.3,-0.3,0.7,-0.7"


class UsageError(Exception):
    pass


# --- verify-algebra ------------------------------------------------------------


def _corrupted_mul(x, y):
    # sign error in the second Cayley-Dickson component
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = x[..., :4], x[..., 4:]
    c, d = y[..., :4], y[..., 4:]
    first = oc.qmul(a, c) - oc.qmul(oc.qconj(d), b)
    second = oc.qmul(d, a) - oc.qmul(b, oc.qconj(c))
    return np.concatenate(np.broadcast_arrays(first, second), axis=-1)


def algebra_checks(pairs: int, seed: int, mul=oc.cd_mul):
    """Yield (name, ok, detail) for each octonion identity."""
    rng = np.random.default_rng(sample_seed(seed, "algebra", 0))

    worst = 0.0
    bad = None
    for x in list(oc.BASIS) + list(rng.standard_normal((100, 8))):
        r = float(np.max(np.abs(oc.seven_fold_product(x, mul) + x)))
        if r > worst:
            worst = r
        if r > 1e-14 and bad is None:
            bad = x
    yield "seven-fold product equals -x", bad is None, f"max residual {worst:.3g}" + (
        "" if bad is None else f"; counterexample x = {np.round(bad, 6).tolist()}")

    mats = [oc.left_mult_matrix(oc.basis(i), mul) for i in range(1, 8)]
    rel, pair = _skew_relations(mats)
    detail = f"residual {rel:.3g}"
    if rel >= 1e-14:
        detail += f"; counterexample pair (e{pair[0]}, e{pair[1]})"
    yield "left multiplications satisfy Clifford relations", rel < 1e-14, detail

    sigmas = oc.random_unit(rng, pairs)
    taus = oc.random_unit(rng, pairs)
    signs = rng.choice([-1.0, 1.0], size=pairs)[:, None]
    same = oc.condition_x_batch(sigmas, signs * sigmas, mul) < 1e-8
    holds = oc.condition_x_batch(sigmas, taus, mul) < 1e-8
    close = np.minimum(np.linalg.norm(sigmas - taus, axis=1),
                       np.linalg.norm(sigmas + taus, axis=1)) < 1e-8
    bad = np.flatnonzero(~same | (holds != close))
    if bad.size:
        i = bad[0]
        detail = (f"counterexample sigma = {np.round(sigmas[i], 6).tolist()}, "
                  f"tau = {np.round(taus[i], 6).tolist()}")
    else:
        detail = f"{pairs} pairs"
    yield "condition X holds iff sigma = +-tau", not bad.size, detail

    # on the pairs where X holds (tau = +-sigma): Y for (conj sigma, tau) and equal half norms
    worst = 0.0
    for s, e in zip(sigmas[:50], signs[:50, 0]):
        worst = max(worst, oc.condition_y(oc.oconj(s), e * s, mul=mul)[1],
                    abs(np.linalg.norm(s[:4]) - np.linalg.norm((e * s)[:4])))
    yield "condition X implies condition Y and equal half norms", worst < 1e-10, f"residual {worst:.3g}"


def _skew_relations(mats):
    worst, pair = 0.0, None
    n = mats[0].shape[0]
    for i, a in enumerate(mats):
        for j, b in enumerate(mats):
            target = -2.0 * np.eye(n) if i == j else 0.0
            r = float(np.max(np.abs(a @ b + b @ a - target)))
            if r > worst:
                worst, pair = r, (i + 1, j + 1)
    return worst, pair


def cmd_verify_algebra(args) -> int:
    mul = _corrupted_mul if args.corrupt else oc.cd_mul
    code = 0
    for name, ok, detail in algebra_checks(args.pairs, args.seed, mul):
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        if not ok:
            code = 1
            break
    return code


# --- audit / report ----------------------------------------------------------------


def _config(args, **extra) -> dict:
    out = {k: v for k, v in vars(args).items() if k != "func"}
    out.update(extra)
    out["seed"] = int(out.get("seed", DEFAULT_SEED))
    if "out" in out and out["out"] is not None:
        out["out"] = str(out["out"])
    return out


def _audit_payload(report, config: dict, dump_matrices: bool = False) -> dict:
    payload = {
        "version": __version__,
        "config": config,
        "family": report.spec.family_id,
        "side": report.spec.side,
        "rows": [r.as_dict() for r in report.rows],
        "records": [sample_summary(s) for s in report.samples],
    }
    if dump_matrices:
        payload["matrices"] = report.spec.build().matrices.tolist()
    return payload


def _audit_filename(spec: FamilySpec) -> str:
    slug = spec.family_id.replace("(", "").replace(")", "").replace(",", "-")
    return f"audit_{slug}_{spec.side}.json"


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        resid = r["max_residual"]
        w.writerow([r["family"], r["side"], r["locus"], r["claim"], r["verdict"],
                    "" if resid is None else f"{resid:.3e}", r["samples"]])
    return buf.getvalue()


def run_audit(spec: FamilySpec, args, out: Path | None) -> tuple[dict, bool]:
    report = table_audit(spec, args.samples, args.seed, args.tol, args.threads)
    config = _config(args, family=spec.family_id, side=spec.side)
    payload = _audit_payload(report, config, getattr(args, "dump_matrices", False))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        path = out / _audit_filename(spec)
        _write_json(path, payload)
        path.with_suffix(".csv").write_text(_csv_text(payload["rows"]))
    return payload, report.passed


def _print_rows(rows):
    for r in rows:
        resid = "" if r["max_residual"] is None else f"{r['max_residual']:.3e}"
        print(f"{r['family']:9s} {r['side']:5s} {r['locus']}  claim={r['claim']:<22s} "
              f"{r['verdict']:<12s} max_residual={resid:<10s} n={r['samples']}")


def cmd_audit(args) -> int:
    try:
        spec = FamilySpec.parse(args.family, args.side)
        spec.build()
    except (UnknownFamilyError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    payload, ok = run_audit(spec, args, Path(args.out) if args.out else None)
    _print_rows(payload["rows"])
    return 0 if ok else 1


def _table_rows(audits: list[dict], side: str, order) -> list[dict]:
    rank = {f.family_id: i for i, f in enumerate(order)}
    chosen = sorted((a for a in audits if a["side"] == side),
                    key=lambda a: (rank.get(a["family"], len(rank)), a["family"]))
    rows = [r for a in chosen for r in a["rows"]]
    for fam, locus, claim in NOT_AUDITED[side]:
        rows.append({"family": fam, "side": side, "locus": locus, "claim": claim,
                     "verdict": "not audited", "max_residual": None, "samples": 0})
    return rows


def build_report(out: Path) -> tuple[dict, bool]:
    files = sorted(out.glob("audit_*.json")) if out.is_dir() else []
    if not files:
        raise UsageError(f"no audit reports found in {out}")
    audits = [json.loads(p.read_text()) for p in files]
    t1 = _table_rows(audits, "plus", TABLE1_FAMILIES)
    t2 = _table_rows(audits, "minus", TABLE2_FAMILIES)
    (out / "table1.csv").write_text(_csv_text(t1))
    (out / "table2.csv").write_text(_csv_text(t2))
    payload = {
        "version": __version__,
        "config": {"inputs": [p.name for p in files],
                   "audit_configs": [a["config"] for a in audits]},
        "rows": t1 + t2,
    }
    _write_json(out / "report.json", payload)
    ok = all(r["verdict"] in ("pass", "not audited") for r in t1 + t2)
    return payload, ok


def cmd_report(args) -> int:
    payload, ok = build_report(Path(args.out))
    _print_rows(payload["rows"])
    return 0 if ok else 1


def cmd_pipeline(args) -> int:
    out = Path(args.out)
    ok = True
    start = time.perf_counter()
    for spec in TABLE1_FAMILIES + TABLE2_FAMILIES:
        _, passed = run_audit(spec, args, out)
        ok &= passed
    payload, rep_ok = build_report(out)
    _print_rows(payload["rows"])
    logger.info("pipeline finished in %.1fs", time.perf_counter() - start)
    return 0 if ok and rep_ok else 1


# --- isofun ---------------------------------------------------------------------------


def run_isofun(variant: str, samples: int, levels: list[float], seed: int, per_level: int = 10) -> dict:
    from . import isofun as iso

    ctx = iso.build_context("I" if variant == "indefinite" else "D")
    rng = np.random.default_rng(sample_seed(seed, f"isofun-{ctx.side}", 0))
    grad = lap = 0.0
    for _ in range(samples):
        fp = iso.sample(ctx, rng)
        rec = iso.hess_spectrum(ctx, fp)
        grad = max(grad, abs(rec.grad_norm_sq - 4 * (1 - rec.h**2)))
        lap = max(lap, abs(rec.laplacian + 32 * rec.h))
    level_rows = []
    for c in levels:
        recs = [iso.hess_spectrum(ctx, iso.sample_level(ctx, c, rng)) for _ in range(per_level)]
        curv = np.array([r.level_curvatures for r in recs])
        row = {
            "level": c,
            "samples": per_level,
            "pattern_residual": max(r.pattern_residual for r in recs),
            "constancy": float(np.max(np.ptp(curv, axis=0))),
            "curvatures": np.round(curv.mean(axis=0), 9).tolist(),
        }
        if c == 0:
            row["austerity_residual"] = max(iso.austerity_residual(k) for k in curv)
            row["kernel_dim"] = int(np.sum(np.abs(curv[0]) < 1e-6))
        level_rows.append(row)
    inc = iso.cross_inclusion(ctx, rng, samples)
    return {
        "variant": variant,
        "gradient_residual": grad,
        "laplacian_residual": lap,
        "levels": level_rows,
        "inclusion": {
            "inclusion_residual": inc.inclusion_residual,
            "level_residual": inc.level_residual,
            "mirror_inclusion_residual": inc.mirror_inclusion_residual,
            "mirror_level_residual": inc.mirror_level_residual,
            "focal_condA": inc.focal_condA,
        },
    }


def isofun_passed(res: dict) -> bool:
    ok = res["gradient_residual"] < 1e-9 and res["laplacian_residual"] < 1e-9
    for row in res["levels"]:
        ok &= row["pattern_residual"] < 1e-6 and row["constancy"] < 1e-6
        if "austerity_residual" in row:
            ok &= row["austerity_residual"] < 1e-6 and row["kernel_dim"] == 8
    inc = res["inclusion"]
    ok &= max(v for k, v in inc.items() if k != "focal_condA") < 1e-10 and inc["focal_condA"]
    return bool(ok)


def _parse_levels(text: str) -> list[float]:
    try:
        levels = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --levels value {text!r}") from exc
    if any(abs(c) >= 1 for c in levels):
        raise UsageError("levels must lie strictly between -1 and 1")
    return levels


def cmd_isofun(args) -> int:
    levels = _parse_levels(args.levels)
    res = run_isofun(args.variant, args.samples, levels, args.seed, args.per_level)
    ok = isofun_passed(res)
    print(f"gradient |grad h|^2 - 4(1 - h^2): {res['gradient_residual']:.3e}")
    print(f"laplacian  Delta h + 32 h:        {res['laplacian_residual']:.3e}")
    for row in res["levels"]:
        extra = ""
        if "austerity_residual" in row:
            extra = f" austerity={row['austerity_residual']:.2e} kernel={row['kernel_dim']}"
        print(f"level {row['level']:+.2f}: pattern={row['pattern_residual']:.2e} "
              f"constancy={row['constancy']:.2e}{extra}")
        print("   curvatures " + " ".join(f"{k:+.4f}" for k in row["curvatures"]))
    inc = res["inclusion"]
    print("inclusion  " + " ".join(f"{k}={v:.2e}" if not isinstance(v, bool) else f"{k}={v}"
                                   for k, v in inc.items()))
    print("PASS" if ok else "FAIL")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / f"isofun_{args.variant}.json",
                    {"version": __version__, "config": _config(args), "result": res})
    return 0 if ok else 1


# --- entry point ------------------------------------------------------------------------


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from exc
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="focalforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, samples=10):
        p.add_argument("--samples", type=_positive, default=samples)
        p.add_argument("--seed", type=_seed, default=DEFAULT_SEED)

    p = sub.add_parser("verify-algebra", help="octonion identities")
    p.add_argument("--pairs", type=_positive, default=1000)
    p.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_algebra)

    p = sub.add_parser("audit", help="audit one family against the loci tables")
    p.add_argument("--family", required=True, help="m,k[,variant] with l = k * delta(m)")
    p.add_argument("--side", choices=("plus", "minus"), default="plus")
    common(p)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--threads", type=_positive, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--dump-matrices", action="store_true")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("isofun", help="isoparametric function checks for (8,7)")
    p.add_argument("--variant", choices=("indefinite", "definite"), default="indefinite")
    common(p, samples=50)
    p.add_argument("--levels", default=DEFAULT_LEVELS)
    p.add_argument("--per-level", type=_positive, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_isofun)

    p = sub.add_parser("report", help="merge audit reports into table CSVs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="audit the default families and write the tables")
    p.add_argument("--out", required=True)
    common(p)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--threads", type=_positive, default=None)
    p.set_defaults(func=cmd_pipeline, dump_matrices=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"focalforge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
