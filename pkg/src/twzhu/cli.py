"""Command-line driver.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or configuration error.
Reports are line-oriented text with exact scalars, written to stdout and,
with --out, to <out>/<subcommand>.txt.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from .exact import format_scalar
from .linalg import SparseMatrix

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
INSTANCES = ("heisenberg", "twisted", "stable")


class UsageError(Exception):
    pass


class Report:
    def __init__(self, title: str):
        self.lines = [f"# {title}"]
        self.failures: list = []

    def add(self, *fields):
        self.lines.append("\t".join(str(f) for f in fields))

    def check(self, name: str, ok: bool, detail=""):
        self.add(name, "PASS" if ok else "FAIL", detail)
        if not ok:
            self.failures.append(f"{name}: {detail}" if detail else name)

    def text(self) -> str:
        out = list(self.lines)
        out.append(f"# status {'ok' if not self.failures else 'failed'}")
        for f in self.failures[:5]:
            out.append(f"# first failure: {f}")
        return "\n".join(out) + "\n"


# -- parsing -------------------------------------------------------------------------

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _positive_fraction(text):
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational number, got {text!r}")
    if v <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _sector(text):
    from .trace import parse_sector
    try:
        return parse_sector(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _gamma(text):
    from .qseries import ModularMatrix
    try:
        return ModularMatrix.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad --gamma {text!r}: {e}")


def _taus(text):
    out = []
    try:
        for item in text.split(";"):
            re_, im = item.split(",")
            out.append(complex(float(re_), float(im)))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --tau {text!r}; expected 're,im;re,im;...'")
    if any(t.imag <= 0 for t in out):
        raise argparse.ArgumentTypeError("tau samples must lie in the upper half plane")
    return out


def _twist(text):
    if text in ("1", "id", "none"):
        return None
    if text in ("theta", "θ"):
        return "theta"
    raise argparse.ArgumentTypeError(f"bad twist {text!r}; expected 1 or theta")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", default="heisenberg", choices=INSTANCES)
    common.add_argument("--file", help="VOA description file (replaces --instance)")
    common.add_argument("--cutoff", type=_positive_int, default=None)
    common.add_argument("--order", type=_positive_fraction, default=None)
    common.add_argument("--precision", type=_positive_int, default=53)
    common.add_argument("--out", help="directory for report files")

    p = argparse.ArgumentParser(prog="twzhu", description="Twisted Zhu algebra and trace function toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="validate an instance")

    z = sub.add_parser("zhu", parents=[common], help="Zhu algebra / bimodule quotient")
    z.add_argument("--twist", type=_twist, default=None)
    z.add_argument("--module", choices=("V", "stable"), default="V")
    z.add_argument("--lam", type=Fraction, default=Fraction(1, 3))
    z.add_argument("--level", type=Fraction, default=None)

    f = sub.add_parser("fusion", parents=[common], help="fusion dimension for the twisted sector")
    f.add_argument("--lam", type=Fraction, default=Fraction(1, 3))

    for name in ("character", "trace"):
        s = sub.add_parser(name, parents=[common], help=f"{name} q-expansion")
        s.add_argument("--sector", type=_sector, default=(None, None))
        if name == "trace":
            s.add_argument("--vector", default="1", help="basis vector name, e.g. a(-1)a(-1)1")
            s.add_argument("--check-o", action="store_true", help="also check vanishing on O(g,h)")

    i = sub.add_parser("identities", parents=[common], help="identity suites")
    i.add_argument("--suite", required=True, choices=("constant-terms", "commutator", "c4", "o-vanishing", "l2-relation"))
    i.add_argument("--sector", type=_sector, default=None)

    m = sub.add_parser("modular-check", parents=[common], help="numeric modular transformation check")
    m.add_argument("--sector", type=_sector, default=(None, "theta"))
    m.add_argument("--gamma", type=_gamma, default=None)
    m.add_argument("--tau", type=_taus, default=None)
    m.add_argument("--tolerance", type=float, default=1e-8)

    q = sub.add_parser("qseries", parents=[common], help="Eisenstein and Q_k expansions")
    q.add_argument("--kind", choices=("eisenstein", "Q"), default="eisenstein")
    q.add_argument("--k", type=int, default=2)
    q.add_argument("--mu", type=Fraction, default=Fraction(0), help="exponent x with mu = e^{2 pi i x}")
    q.add_argument("--lam", type=Fraction, default=Fraction(1, 2), help="exponent y with lambda = e^{2 pi i y}")
    return p


# -- instance loading --------------------------------------------------------------

def _load(args, cutoff: int):
    from .instances import build_heisenberg
    from .voa import ValidationError, load_voa
    if args.file:
        if not os.path.isfile(args.file):
            raise UsageError(f"file not found: {args.file}")
        with open(args.file) as fh:
            text = fh.read()
        try:
            return load_voa(text)
        except ValidationError as e:
            raise _CheckFailure(f"loaded file rejected: {e}")
    return build_heisenberg(cutoff)


class _CheckFailure(Exception):
    pass


def _mat(m: SparseMatrix) -> str:
    return "[" + "; ".join(" ".join(format_scalar(x) for x in row) for row in m.to_dense()) + "]"


# -- subcommands ----------------------------------------------------------------------

def cmd_validate(args, rep: Report):
    from .instances import build_stable_untwisted_module, build_twisted_fock
    from .voa import validate_module, validate_voa
    V = _load(args, args.cutoff or 6)
    rep.add("instance", V.name, "cutoff", V.cutoff, "dim", V.dim)
    for name, bad in validate_voa(V).items():
        rep.check(f"voa:{name}", not bad, bad[0] if bad else "")
    if args.file or args.instance == "heisenberg":
        return
    if args.instance == "twisted":
        W = build_twisted_fock(V, cutoff=V.cutoff - 1)
    else:
        W = build_stable_untwisted_module(V, Fraction(1, 3), V.cutoff - 1)
    rep.add("module", W.name, "dim", W.dim)
    for name, bad in validate_module(W).items():
        rep.check(f"module:{name}", not bad, bad[0] if bad else "")


def cmd_zhu(args, rep: Report):
    from .instances import build_stable_untwisted_module
    from .zhu import verify_bimodule_axioms, zhu_quotient
    V = _load(args, args.cutoff or 6)
    cutoff = args.cutoff or 6
    U = None
    if args.module == "stable":
        U = build_stable_untwisted_module(V, args.lam, cutoff)
    zq = zhu_quotient(V, U, args.twist, min(cutoff, V.cutoff), level=args.level)
    rep.add("twist", args.twist or "1", "module", zq.U.name, "cutoff", zq.cutoff, "level", zq.level)
    for N, d in zq.dims_by_cutoff:
        rep.add("dim_at_cutoff", N, d)
    rep.add("stabilized", zq.stabilized)
    for r in zq.representatives:
        rep.add("representative", zq.U.label_str(r), "degree", zq.U.degree(r))
    bad = verify_bimodule_axioms(zq)
    rep.check("bimodule_axioms", not bad, bad[0] if bad else "")


def cmd_fusion(args, rep: Report):
    from .fusion import algebra_from_zhu, bimodule_from_zhu, fusion_dimension, top_level_module, zero_mode
    from .instances import build_stable_untwisted_module, build_twisted_fock, solve_intertwiner
    from .zhu import zhu_quotient
    cutoff = args.cutoff or 4
    V = _load(args, cutoff + 2)
    U = build_stable_untwisted_module(V, args.lam, cutoff)
    W = build_twisted_fock(V, cutoff=cutoff)
    zq = zhu_quotient(V, U, "theta", cutoff)
    A, B = algebra_from_zhu(zq), bimodule_from_zhu(zq)
    T = top_level_module(W, zq)
    dim, maps = fusion_dimension(A, B, T, T)
    rep.add("U", U.name, "W1", W.name, "W2", W.name)
    rep.add("fusion_dimension", dim)
    for k, f in enumerate(maps):
        for b, m in sorted(f.items()):
            rep.add("map", k, zq.U.label_str(zq.representatives[b]), _mat(m))
        datum = {zq.representatives[b]: m.get(0, 0) for b, m in f.items()}
        I = solve_intertwiner(U, W, W, datum, name=f"I{k}")
        try:
            zero_mode(I, zq)
            rep.check(f"zero_mode_relations:{k}", True)
        except ValueError as e:
            rep.check(f"zero_mode_relations:{k}", False, str(e))


def _series_lines(rep: Report, S):
    for e in S.exponents():
        rep.add(f"{e.numerator}/{e.denominator}", format_scalar(S.coeffs[e]))


def cmd_character(args, rep: Report):
    from .instances import eta_quotient_oracle
    from .trace import heisenberg_sector_trace, sector_tag
    order = args.order or Fraction(10)
    g, h = args.sector
    V = _load(args, 2)
    S = heisenberg_sector_trace(V, g, h, order)
    series = S({V.vacuum: Fraction(1)})
    oracle, _ = eta_quotient_oracle((g, h), order)
    rep.add("sector", sector_tag(g, h), "order", order)
    _series_lines(rep, series)
    rep.check("eta_quotient_oracle", (series - oracle.truncate(series.prec)).is_zero())


def _vector_by_name(V, name):
    for i in range(V.dim):
        if V.label_str(i) == name:
            return {i: Fraction(1)}
    raise UsageError(f"unknown basis vector {name!r}")


def cmd_trace(args, rep: Report):
    from .trace import check_vanishing_on_O, heisenberg_sector_trace, sector_generators, sector_tag
    order = args.order or Fraction(10)
    g, h = args.sector
    V = _load(args, (args.cutoff or 5) + 2)
    u = _vector_by_name(V, args.vector)
    S = heisenberg_sector_trace(V, g, h, order)
    rep.add("sector", sector_tag(g, h), "vector", args.vector, "order", order)
    _series_lines(rep, S(u))
    if args.check_o:
        gens = sector_generators(V, V.adjoint, g, h, args.cutoff or 5, order)
        bad = check_vanishing_on_O(S, gens)
        rep.check("O(g,h) vanishing", not bad, f"{len(bad)} of {len(gens)} nonzero" if bad else f"{len(gens)} generators")


def cmd_identities(args, rep: Report):
    from .trace import (SECTORS, c4_residual, check_vanishing_on_O, constant_term_identities, find_l2_relation,
                        heisenberg_sector_trace, sector_generators, sector_tag)
    from .zhu import commutator_identity_check
    cutoff = args.cutoff or 5
    sectors = [args.sector] if args.sector else list(SECTORS)
    V = _load(args, cutoff + 2)
    if args.suite == "constant-terms":
        for g, h in sectors:
            rows = constant_term_identities(V, None, g, h, cutoff)
            for ai, ui, ident, ok in rows:
                rep.add(sector_tag(g, h), V.label_str(ai), V.label_str(ui), ident, "exact" if ok else "FAIL")
                if not ok:
                    rep.failures.append(f"{ident} at ({V.label_str(ai)}, {V.label_str(ui)})")
    elif args.suite == "commutator":
        for g in sorted({s[0] for s in sectors}, key=str):
            bad = commutator_identity_check(V, None, g, cutoff)
            rep.check(f"commutator twist={g or '1'}", not bad, bad[0] if bad else "")
    elif args.suite == "c4":
        order = args.order or Fraction(8)
        for g, h in sectors:
            S = heisenberg_sector_trace(V, g, h, order)
            for name, u in (("1", {V.vacuum: Fraction(1)}), ("omega~", V.omega_tilde)):
                res = c4_residual(S, V.adjoint, u)
                rep.check(f"C4 {sector_tag(g, h)} u={name}", res.is_zero())
    elif args.suite == "l2-relation":
        # reported, never a failure: the relation need not exist at bounded m
        order = args.order or Fraction(8)
        for g, h in sectors:
            S = heisenberg_sector_trace(V, g, h, order)
            found = None
            for m in range(1, cutoff // 2 + 1):
                found = find_l2_relation(S, V.adjoint, {V.vacuum: Fraction(1)}, m)
                if found is not None:
                    break
            if found is None:
                rep.add("relation", sector_tag(g, h), "none", f"m<={cutoff // 2}")
                continue
            terms = [f"r{i}:E4^{a}E6^{b}*{format_scalar(c)}" for i in sorted(found)
                     for (a, b), c in sorted(found[i].items())]
            rep.add("relation", sector_tag(g, h), "m", m, " ".join(terms) or "0")
    else:
        order = args.order or Fraction(10)
        for g, h in sectors:
            S = heisenberg_sector_trace(V, g, h, order)
            gens = sector_generators(V, V.adjoint, g, h, cutoff, order)
            bad = check_vanishing_on_O(S, gens)
            rep.check(f"O(g,h) {sector_tag(g, h)}", not bad, f"{len(gens)} generators")


def sector_function(sector, n_terms, precision=53):
    """tau -> value of the sector character with n_terms terms."""
    from .instances import signed_partition_character
    S = signed_partition_character(sector, n_terms)
    return lambda tau: S.evaluate(tau, precision)


def sector_weight(sector) -> Fraction:
    """Modular weight of the sector character: 1/eta has weight -1/2, the others 0."""
    return Fraction(-1, 2) if sector == (None, None) else Fraction(0)


def cmd_modular(args, rep: Report):
    from .instances import signed_partition_character
    from .qseries import T_MATRIX
    from .trace import modular_sector_check, sector_act, sector_tag, t_shifted
    gamma = args.gamma or T_MATRIX
    n_terms = int(args.order or 200)
    taus = args.tau or [complex(x, y) for x, y in ((0.1, 0.8), (-0.3, 0.9), (0.25, 1.0), (-0.1, 1.1),
                                                    (0.4, 1.2), (-0.45, 1.3), (0.05, 1.4), (0.3, 1.5))]
    src = args.sector
    tgt = sector_act(src, gamma)
    w = sector_weight(src)
    if sector_weight(tgt) != w:
        raise UsageError("source and target sectors have different weights")
    rep.add("gamma", f"{gamma.a},{gamma.b},{gamma.f},{gamma.d}", "source", sector_tag(*src),
            "target", sector_tag(*tgt), "weight", w, "terms", n_terms)
    if gamma == T_MATRIX:
        S, Tg = signed_partition_character(src, n_terms), signed_partition_character(tgt, n_terms)
        shifted = t_shifted(S)
        lead = min(Tg.exponents())
        ratio = shifted.coefficient(lead) / Tg.coefficient(lead)
        rep.check("T exact", (shifted - Tg.scale(ratio)).is_zero(), f"factor {format_scalar(ratio)}")
    res = modular_sector_check({"src": sector_function(src, n_terms, args.precision)},
                               {"tgt": sector_function(tgt, n_terms, args.precision)},
                               gamma, taus, weight=w, precision=args.precision)
    rep.check("numeric fit", res < args.tolerance, f"residual {res:.3e}")


def cmd_qseries(args, rep: Report):
    from .qseries import TwistPair, eisenstein, q_series_Q
    order = args.order or Fraction(6)
    if args.kind == "eisenstein":
        if args.k < 2 or args.k % 2:
            raise UsageError("eisenstein needs an even k >= 2")
        S = eisenstein(args.k, order)
        rep.add("E", args.k, "order", order)
    else:
        if args.k < 1:
            raise UsageError("Q_k needs k >= 1")
        tw = TwistPair.from_fractions(args.mu, args.lam)
        S = q_series_Q(args.k, tw, order)
        rep.add("Q", args.k, "mu", args.mu % 1, "lambda", args.lam % 1, "order", order)
    _series_lines(rep, S)


COMMANDS = {
    "validate": cmd_validate, "zhu": cmd_zhu, "fusion": cmd_fusion, "character": cmd_character,
    "trace": cmd_trace, "identities": cmd_identities, "modular-check": cmd_modular, "qseries": cmd_qseries,
}


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if args.out and os.path.exists(args.out) and not os.path.isdir(args.out):
        print(f"error: --out {args.out} is not a directory", file=sys.stderr)
        return EXIT_USAGE
    rep = Report(args.command)
    try:
        COMMANDS[args.command](args, rep)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (_CheckFailure, ValueError, ArithmeticError) as e:
        rep.failures.append(f"{type(e).__name__}: {e}")
    text = rep.text()
    stdout.write(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{args.command}.txt"), "w") as fh:
            fh.write(text)
    return EXIT_FAIL if rep.failures else EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
