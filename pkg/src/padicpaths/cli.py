"""Command-line front end: associator, mzv, verify-integrality, transport, selftest.

Exit codes: 0 success, 1 invalid input, 2 precision exhausted, 3 audit failure.
Associator results are cached as JSON keyed by (p, N, prec, a, waypoint,
method); identical run configurations reproduce bit-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

from .connection import (
    DivisorConfig,
    FibreFunctorSpec,
    make_config,
    mzv_config,
    parse_point,
    tiny_transport,
)
from .errors import (
    GaugeResidualTooLarge,
    NonzeroResidue,
    PadicPathsError,
    PrecisionExhausted,
    ResidualTooLarge,
)
from .frobenius import (
    EngineParams,
    Associator,
    associator,
    integrality_report,
    mzv_report,
)
from .freealg import word_from_str
from .padic import Zp, dp_ideal_valuation

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PRECISION = 2
EXIT_AUDIT = 3


def _cache_dir(args) -> Path | None:
    d = os.environ.get("PADIC_PATHS_CACHE") or args.cache_dir
    return Path(d) if d else None


def _cache_key(args, method: str) -> str:
    return (
        f"assoc_p{args.prime}_N{args.weight}_prec{args.prec}"
        f"_a{args.log_p}_w{args.waypoint or 'auto'}_{method}.json"
    )


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-cache-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _compute_associator(args) -> tuple[Associator, str]:
    method = args.method or ("waypoint" if args.prime >= 3 else "direct")
    cache = _cache_dir(args)
    if cache is not None:
        path = cache / _cache_key(args, method)
        if path.exists():
            return None, path.read_text()
    assoc = associator(
        args.prime,
        args.weight,
        args.prec,
        waypoint=args.waypoint,
        branch=Fraction(args.log_p),
        method=method,
        stretch=args.stretch,
    )
    text = _dump(assoc.to_json_dict())
    if cache is not None:
        _atomic_write(cache / _cache_key(args, method), text)
    return assoc, text


def cmd_associator(args) -> int:
    assoc, text = _compute_associator(args)
    sys.stdout.write(text)
    if assoc is not None and not assoc.audits["integrality_ok"]:
        return EXIT_AUDIT
    return EXIT_OK


def cmd_mzv(args) -> int:
    ks = [int(k) for k in args.indices.split(",") if k.strip()]
    if not ks or any(k < 1 for k in ks):
        raise ValueError("indices must be positive integers, e.g. --indices 2,3")
    if sum(ks) > args.weight:
        from .errors import WeightExceedsTruncation

        raise WeightExceedsTruncation(
            f"sum of indices {sum(ks)} exceeds --weight {args.weight}"
        )
    assoc, text = _compute_associator(args)
    if assoc is None:
        payload = json.loads(text)
        assoc = _associator_from_json(payload)
    report = mzv_report(assoc, ks)
    sys.stdout.write(_dump(report))
    margin = report["margin"]
    if margin is None:
        return EXIT_PRECISION
    if margin != "inf" and isinstance(margin, int) and margin < 0:
        return EXIT_AUDIT
    return EXIT_OK


def _associator_from_json(payload: dict) -> Associator:
    from .freealg import NcSeries
    from .padic import PAdic

    coeffs = {
        word_from_str(w): PAdic.from_json_dict(d) for w, d in payload["coefficients"].items()
    }
    phi = NcSeries(int(payload["N"]), coeffs)
    return Associator(
        int(payload["p"]),
        int(payload["N"]),
        int(payload["prec"]),
        payload["a"],
        payload["waypoint"],
        payload["method"],
        phi,
        payload["audits"],
    )


def cmd_verify_integrality(args) -> int:
    assoc, text = _compute_associator(args)
    if assoc is None:
        assoc = _associator_from_json(json.loads(text))
    report = integrality_report(assoc.phi, assoc.p)
    rows = []
    from .freealg import word_str

    for w, row in report["rows"].items():
        rows.append(
            {
                "word": word_str(w),
                "weight": row["weight"],
                "dp_bound": row["bound"],
                "margin": row["margin"],
                "status": row["status"],
            }
        )
    if args.out == "csv":
        sys.stdout.write("word,weight,dp_bound,margin,status\n")
        for r in rows:
            sys.stdout.write(
                f"{r['word']},{r['weight']},{r['dp_bound']},{r['margin']},{r['status']}\n"
            )
    else:
        sys.stdout.write(_dump({"p": assoc.p, "ok": report["ok"], "rows": rows}))
    return EXIT_OK if report["ok"] else EXIT_AUDIT


def _parse_spec(text: str) -> FibreFunctorSpec:
    """tangential:<marked-index>:<xi> | point:<z> (good or bad resolved later)."""
    parts = text.split(":")
    if parts[0] == "tangential":
        return FibreFunctorSpec.tangential(int(parts[1]), Fraction(parts[2]))
    if parts[0] == "point":
        return FibreFunctorSpec("bad", point=Fraction(parts[1]))
    raise ValueError(f"cannot parse spec {text!r}")


def cmd_transport(args) -> int:
    config = _load_config(args)
    params = EngineParams(args.prime, args.weight, args.prec)
    ctx = Zp(args.prime, params.working_prec)
    frm = _resolve_spec(_parse_spec(getattr(args, "frm")), config)
    to = _resolve_spec(_parse_spec(args.to), config)
    T = args.t_terms or params.T_local
    out = tiny_transport(config, ctx, frm, to, T, config.N, branch=Fraction(args.log_p))
    sys.stdout.write(_dump({"from": getattr(args, "frm"), "to": args.to,
                            "coefficients": out.to_json_dict()}))
    return EXIT_OK


def _resolve_spec(spec: FibreFunctorSpec, config: DivisorConfig) -> FibreFunctorSpec:
    if spec.kind != "bad":
        return spec
    from .connection import reduction

    red = reduction(spec.point, config.p)
    hit = config.marked_index_of_reduction(red)
    if hit is None:
        return FibreFunctorSpec.good(spec.point)
    return spec


def _load_config(args) -> DivisorConfig:
    if args.config:
        payload = json.loads(Path(args.config).read_text())
        points = [parse_point(s) for s in payload["points"]]
        if len(points) > 8:
            raise ValueError("custom configs support at most 8 marked points")
        return make_config(points, args.prime, args.weight)
    return mzv_config(args.prime, args.weight)


def cmd_selftest(args) -> int:
    """Quick invariant suites at small parameters; prints one line per suite."""
    import random

    from .freealg import NcSeries, is_group_like, shuffle
    from .frobenius import chart_gauge, correction_identity_ok, standard_lift
    from .padic import PAdic

    p = args.prime or 5
    failures = 0

    def check(name, fn):
        nonlocal failures
        try:
            fn()
            print(f"PASS {name}")
        except Exception as exc:  # noqa: BLE001
            failures += 1
            print(f"FAIL {name}: {exc}")

    def ring_laws():
        ctx = Zp(p, 12)
        rng = random.Random(1)
        for _ in range(200):
            x = ctx.int_(rng.randrange(1, p**9))
            y = ctx.int_(rng.randrange(1, p**9))
            z = ctx.int_(rng.randrange(1, p**9))
            assert ((x + y) + z).agrees_with(x + (y + z))
            assert (x * (y + z)).agrees_with(x * y + x * z)

    def log_hom():
        ctx = Zp(p, 14)
        rng = random.Random(2)
        for _ in range(50):
            x = ctx.int_(rng.randrange(1, p**10) * p + 1)
            y = ctx.int_(rng.randrange(1, p**10) * p + 1)
            lhs = ctx.log(x * y)
            rhs = ctx.log(x) + ctx.log(y)
            assert (lhs - rhs).is_zero_to_precision()

    def shuffles():
        from math import comb

        u, v = (1, 2), (2,)
        out = shuffle(u, v)
        assert sum(out.values()) == comb(3, 1)

    def residue_tables():
        mzv_config(p, 3).validate_residues()

    def gauge_weight_one():
        config = mzv_config(p, 2)
        params = EngineParams(p, 2, 8)
        ctx = params.ctx()
        gauge = chart_gauge(ctx, config, 1, params)
        y = ctx.teichmuller(2) if p >= 3 else ctx.int_(1 - p).at_precision(8)
        if p >= 3:
            hb = gauge.M[(2,)].value_at(y)
            lhs = hb.div_int(1 - p)
            rhs = -ctx.log(ctx.one() - y)
            assert (lhs - rhs).is_zero_to_precision()

    def correction_symbolic():
        config = mzv_config(p, 2)
        lift = standard_lift(config, 1, 1)
        assert correction_identity_ok(config, lift, 1)
        assert correction_identity_ok(config, lift, 2)

    check("padic ring laws", ring_laws)
    check("log homomorphism", log_hom)
    check("shuffle counts", shuffles)
    check("residue tables", residue_tables)
    check("correction form symbolic identity", correction_symbolic)
    check("gauge weight-1 closed form", gauge_weight_one)
    return EXIT_OK if failures == 0 else EXIT_AUDIT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="padicpaths",
        description="Frobenius-invariant paths, the p-adic Drinfel'd associator, "
        "and p-adic multiple zeta values with integrality audits.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, need_prime=True):
        sp.add_argument("--prime", type=int, required=need_prime)
        sp.add_argument("--weight", type=int, default=5)
        sp.add_argument("--prec", type=int, default=12)
        sp.add_argument("--t-terms", dest="t_terms", type=int, default=None)
        sp.add_argument("--waypoint", type=int, default=None)
        sp.add_argument("--log-p", dest="log_p", default="0")
        sp.add_argument("--config", default=None)
        sp.add_argument("--out", choices=["json", "csv"], default="json")
        sp.add_argument("--cache-dir", dest="cache_dir", default=None)
        sp.add_argument("--method", choices=["waypoint", "direct"], default=None)
        sp.add_argument("--stretch", type=int, default=1, help=argparse.SUPPRESS)

    sp = sub.add_parser("associator", help="compute and emit the associator JSON")
    common(sp)
    sp.set_defaults(fn=cmd_associator)

    sp = sub.add_parser("mzv", help="one p-adic multiple zeta value")
    sp.add_argument("--indices", required=True)
    common(sp)
    sp.set_defaults(fn=cmd_mzv)

    sp = sub.add_parser("verify-integrality", help="full divided-power margin table")
    common(sp)
    sp.set_defaults(fn=cmd_verify_integrality)

    sp = sub.add_parser("transport", help="in-disc parallel transport")
    sp.add_argument("--from", dest="frm", required=True)
    sp.add_argument("--to", required=True)
    common(sp)
    sp.set_defaults(fn=cmd_transport)

    sp = sub.add_parser("selftest", help="run the invariant suites")
    common(sp, need_prime=False)
    sp.set_defaults(fn=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except PrecisionExhausted as exc:
        print(f"error: precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except (ResidualTooLarge, GaugeResidualTooLarge, NonzeroResidue) as exc:
        print(f"error: audit failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (PadicPathsError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
