"""Command-line front end: ``spinobs <command> [options]``.

Machine-readable results go to files (``--csv``, ``--plan-out``, ``-o``,
``--figure``); stdout carries ``key=value`` summary lines. Exit codes:
0 ok, 2 invalid input, 3 budget exceeded, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from fractions import Fraction

import mpmath

from . import exact as ex
from .config import GLOBAL_KEYS, check_value, read_config
from .graph import read_graph
from .models import MAGNETIZATION, PinSet, Potts, TwoSpin, VertexEdgeObservable
from .rational import ParseError, fmt_value, parse_rational

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4
DEFAULT_GRID_CAP = 10**7
DEFAULT_STEP_CAP = 10**9

_SCHEMAS: dict[tuple, dict] = {}
_GLOBAL_KINDS = {"seed": "int", "threads": "int", "budget": "int"}


# ------------------------------------------------------------------ option plumbing

def _kind_type(kind: str, name: str):
    def conv(raw: str) -> str:
        try:
            return check_value(kind, raw, None)  # argparse adds the option name
        except ParseError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    conv.__name__ = kind.split(":")[0]
    return conv


class _Cmd:
    """Registers options on a subparser together with their kinds for config validation."""

    def __init__(self, parser: argparse.ArgumentParser, words: tuple):
        self.p = parser
        self.kinds = dict(_GLOBAL_KINDS)
        _SCHEMAS[words] = self.kinds
        for g, kind in _GLOBAL_KINDS.items():
            parser.add_argument(f"--{g}", type=_kind_type(kind, g), default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    def opt(self, name: str, kind: str, short: str | None = None, **kw):
        self.kinds[name] = kind
        flags = [f"--{name}"] + ([short] if short else [])
        dest = name.replace("-", "_")
        if kind == "flag":
            self.p.add_argument(*flags, dest=dest, action="store_true", **kw)
        else:
            if kind.startswith("choice:"):
                kw.setdefault("choices", kind[len("choice:"):].split("|"))
                kw.setdefault("type", str)
            else:
                kw.setdefault("type", _kind_type(kind, name))
            self.p.add_argument(*flags, dest=dest, **kw)
        return self


def _model_opts(c: _Cmd):
    c.opt("model", "choice:potts|twospin|hardcore|ising", default="potts")
    c.opt("q", "int", help="number of Potts colours")
    c.opt("beta", "rational")
    c.opt("gamma", "rational")
    c.opt("lambda", "rational", help="2-spin vertex activity (default 1)")
    c.opt("obs", "str", help="2-spin observable coefficients a,b,c (default 1,0,0)")


def _frac(val, name: str, default=None) -> Fraction | None:
    if val is None:
        return default
    return parse_rational(val, f"--{name}")


def _need(val, name: str):
    if val is None:
        raise ValueError(f"--{name} is required here")
    return val


def _model(args, with_beta=True):
    kind = args.model
    lam = _frac(args.__dict__.get("lambda"), "lambda", Fraction(1))
    if kind == "potts":
        q = int(_need(args.q, "q"))
        beta = _frac(args.beta, "beta", Fraction(2) if not with_beta else None)
        return Potts(q, _need(beta, "beta"))
    if kind == "hardcore":
        return TwoSpin.hardcore(lam)
    if kind == "ising":
        return TwoSpin.ising(_need(_frac(args.beta, "beta"), "beta"), lam)
    return TwoSpin(_need(_frac(args.beta, "beta"), "beta"), _need(_frac(args.gamma, "gamma"), "gamma"), lam)


def _observable(args) -> VertexEdgeObservable:
    raw = getattr(args, "obs", None)
    if raw is None:
        return MAGNETIZATION
    parts = raw.split(",")
    if len(parts) != 3:
        raise ParseError(f"observable needs three coefficients a,b,c, got {raw!r}", "--obs")
    return VertexEdgeObservable(*(parse_rational(x, "--obs") for x in parts))


# ------------------------------------------------------------------ output

class Output:
    """Collects stdout lines and file artifacts; files are written atomically at the end."""

    def __init__(self):
        self.lines: list[str] = []
        self.files: list[tuple[str, bytes]] = []

    def kv(self, key: str, value) -> None:
        self.lines.append(f"{key}={fmt_value(value)}")

    def line(self, text: str) -> None:
        self.lines.append(text)

    def file(self, path: str | None, data) -> None:
        if path:
            self.files.append((path, data.encode() if isinstance(data, str) else data))

    def csv(self, path: str | None, header, rows) -> None:
        if not path:
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt_value(x) for x in r])
        self.file(path, buf.getvalue())

    def flush(self, stream) -> None:
        for path, data in self.files:
            tmp = f"{path}.part"
            with open(tmp, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        if self.lines:
            stream.write("\n".join(self.lines) + "\n")


# ------------------------------------------------------------------ commands

def cmd_exact(args, out: Output):
    g = read_graph(args.graph)
    model = _model(args)
    pins = PinSet()
    if args.pin:
        fixed = {}
        for part in args.pin.split(","):
            v, eq, s = part.partition("=")
            if not eq:
                raise ParseError(f"pin {part!r} is not vertex=spin", "--pin")
            fixed[int(v)] = int(s)
        pins = PinSet(fixed)
    what = args.observable
    if what == "partition":
        val = ex.partition_function(g, model, pins, args.method)
    elif what == "probability":
        val = ex.gibbs_probability(g, model, pins, args.method)
    elif isinstance(model, Potts):
        if what != "susceptibility":
            raise ValueError("the Potts observable is 'susceptibility'")
        val = ex.observable_expectation(g, model, "susceptibility", pins, method=args.method)
    else:
        if what == "susceptibility":
            raise ValueError("'susceptibility' is a Potts observable; use 'magnetization' or 'vertex-edge' with --obs")
        obs = MAGNETIZATION if what == "magnetization" else _observable(args)
        val = ex.observable_expectation(g, model, obs, pins, method=args.method)
    out.line(fmt_value(val))
    out.csv(args.csv, ["graph", "observable", "value", "value_real"], [[os.path.basename(args.graph), what, val, float(val)]])


def cmd_critical(args, out: Output):
    from . import criticality as cr

    if args.which == "potts":
        q, d = int(args.q), int(args.delta)
        bc = cr.potts_beta_c(q, d)
        out.kv("q", q)
        out.kv("delta", d)
        out.kv("beta_c", bc)
        rows = [["beta_c", fmt_value(bc)]]
        if args.beta is not None:
            beta = _frac(args.beta, "beta")
            pb = cr.potts_port_bias(q, d, beta)
            vals = [("beta", beta), ("x", pb.x), ("p", pb.p), ("residual", pb.residual),
                    ("x_exact", pb.exact_x if pb.exact_x is not None else "none"),
                    ("p_exact", pb.exact_p if pb.exact_p is not None else "none")]
            for k, v in vals:
                out.kv(k, v)
                rows.append([k, fmt_value(v)])
    elif args.which == "twospin":
        b, g = _frac(_need(args.beta, "beta"), "beta"), _frac(_need(args.gamma, "gamma"), "gamma")
        lam = _frac(args.__dict__.get("lambda"), "lambda", Fraction(1))
        rows = _twospin_report(out, b, g, lam, int(args.delta))
    else:
        d = int(args.delta)
        thr = cr.hardcore_threshold(d)
        crossing = cr.nonuniqueness_crossing(1, 0, d, Fraction(thr) / 4, Fraction(thr) * 4)
        out.kv("delta", d)
        out.kv("threshold", thr)
        out.kv("threshold_real", float(thr))
        out.kv("crossing", crossing)
        out.kv("crossing_error", abs(crossing - mpmath.mpf(thr.numerator) / thr.denominator))
        rows = [["threshold", fmt_value(thr)], ["crossing", fmt_value(crossing)]]
        if args.__dict__.get("lambda") is not None:
            rows += _twospin_report(out, Fraction(1), Fraction(0), _frac(args.__dict__["lambda"], "lambda"), d)
    out.csv(args.csv, ["key", "value"], rows)


def _twospin_report(out: Output, b, g, lam, d):
    from . import criticality as cr

    rep = cr.twospin_uniqueness(b, g, lam, d)
    vals = [("beta", b), ("gamma", g), ("lambda", lam), ("x_star", rep.x_star),
            ("derivative", rep.derivative_magnitude), ("status", rep.status), ("residual", rep.residual)]
    if rep.status == "nonuniqueness":
        bm = cr.twospin_branch_marginals(b, g, lam, d)
        vals += [("q_plus", bm.q_plus), ("q_minus", bm.q_minus), ("cycle_x", bm.x), ("cycle_y", bm.y),
                 ("cycle_residual", bm.residual)]
    for k, v in vals:
        out.kv(k, v)
    return [[k, fmt_value(v)] for k, v in vals]


def _library(args, model, obs, density=Fraction(1, 4)):
    from .gadgets.library import build_dense_library

    tau = _frac(args.tau, "tau")
    if tau is None:
        tau = Fraction(1, 10) if isinstance(model, Potts) else Fraction(1, 20)
    return build_dense_library(model, tau, _frac(args.density, "density", density), obs if isinstance(model, TwoSpin) else None)


def cmd_gadget(args, out: Output):
    from . import plots
    from .gadgets import core
    from .gadgets.library import Family, build_gadget, recursion_constants, search_gadget_pair, well_covered

    which = args.which
    if which == "build-path":
        model = Potts(int(_need(args.q, "q")), _frac(_need(args.beta, "beta"), "beta"))
        from .gadgets.recursion import PottsHats

        res = core.build_path(_frac(args.r, "r"), model)
        hats = PottsHats.of(model)
        for k, v in [("edges", res.edges), ("B", res.gadget.B), ("excess", res.excess), ("steps", res.steps),
                     ("kappa", hats.kappa), ("kappa_bound_steps", res.kappa_bound_steps)]:
            out.kv(k, v)
        rows = []
        for ell, B in enumerate(res.trace):
            ratio = (B - 1) / (res.trace[ell - 1] - 1) if ell else ""
            pred = hats.path_step_ratio(res.trace[ell - 1]) if ell else ""
            rows.append([ell, 2 * ell + 1, B, B - 1, hats.kappa**ell * (model.beta - 1), ratio, pred])
        out.csv(args.csv, ["ell", "edges", "B", "excess", "kappa_bound", "ratio", "predicted_ratio"], rows)
        if args.figure:
            out.file(args.figure, plots.path_decay_figure(res.trace, hats.kappa))
        return
    model = _model(args)
    obs = _observable(args)
    if which == "stats":
        if bool(args.recipe) == bool(args.expr):
            raise ValueError("give exactly one of --recipe and --expr")
        text = open(args.recipe, encoding="utf-8").read() if args.recipe else args.expr.replace(";", "\n")
        last, env = core.parse_recipes(text, model, obs if isinstance(model, TwoSpin) else None, verify=args.verify)
        named = list(env.items())
        if not any(g is last for _, g in named):
            named.append(("result", last))
        if isinstance(model, Potts):
            header = ["name", "recipe", "vertices", "B", "S", "A"]
            rows = [[n, g.recipe, g.size, g.B, g.S, g.A] for n, g in named]
        else:
            header = ["name", "recipe", "vertices", "R", "O", "A"]
            rows = [[n, g.recipe, g.size, g.R, g.O, g.A] for n, g in named]
        if args.format == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([fmt_value(x) for x in r])
            out.line(buf.getvalue().rstrip("\n"))
        else:
            for r in rows:
                for key, val in zip(header[1:], r[1:]):
                    out.kv(f"{r[0]}.{key}", val)
        out.csv(args.csv, header, rows)
        return
    if which == "library":
        lib = _library(args, model, obs)
        fam = lib.family()
        for k, v in [("kind", lib.kind), ("lo", lib.lo), ("hi", lib.hi), ("center", lib.center), ("members", len(lib.members)),
                     ("largest_gap", lib.largest_gap), ("rounds", lib.rounds)]:
            out.kv(k, v)
        rows = [[i, g.recipe, g.size, fam.value(g), fam.gap(g)] for i, g in enumerate(lib.members)]
        out.csv(args.csv, ["index", "recipe", "vertices", "value", "gap"], rows)
        if args.figure:
            out.file(args.figure, plots.library_figure([r[3] for r in rows], [r[4] for r in rows], (lib.lo, lib.hi)))
        return
    if which == "build":
        # the images of I must cover I, which needs a finer library than the default
        lib = _library(args, model, obs, Fraction(1, 8))
        consts = recursion_constants(lib)
        covered, hole = well_covered(lib, consts)
        out.kv("well_covered", covered)
        t_max = int(args.t)
        x = _frac(args.x, "x", consts.x_star)
        out.kv("x", x)
        out.kv("I_lo", consts.I.lo)
        out.kv("I_hi", consts.I.hi)
        out.kv("c_max", consts.c_max)
        out.kv("envelope_c", consts.envelope_c)
        rows = []
        for t in range(1, t_max + 1):
            res = build_gadget(x, t, lib, consts)
            rows.append([t, res.gadget.size, res.error, res.bound, res.error <= res.bound])
        out.kv("final_error", rows[-1][2])
        out.kv("within_envelope", all(r[4] for r in rows))
        out.csv(args.csv, ["t", "vertices", "error", "bound", "within"], rows)
        if args.figure:
            out.file(args.figure, plots.convergence_figure([(r[0], r[2], r[3]) for r in rows]))
        return
    # pair
    fam = Family(model, obs if isinstance(model, TwoSpin) else None)
    tau = _frac(args.tau, "tau")
    pair = search_gadget_pair(model, _frac(args.r, "r"), _frac(args.gap_min, "gap-min"),
                              obs if isinstance(model, TwoSpin) else None, tau=tau,
                              delta=_frac(args.density, "density", Fraction(1, 4)), max_depth=int(args.max_depth))
    v1, v2 = fam.value(pair.first), fam.value(pair.second)
    s1, s2 = fam.gap(pair.first), fam.gap(pair.second)
    vals = [("first", pair.first.recipe), ("second", pair.second.recipe), ("value_1", v1), ("value_2", v2),
            ("gap_1", s1), ("gap_2", s2), ("value_diff", pair.value_diff), ("gap_diff", pair.gap_diff),
            ("verified", pair.verified), ("explored", pair.explored)]
    for k, v in vals:
        out.kv(k, v)
    out.csv(args.csv, ["key", "value"], [[k, fmt_value(v)] for k, v in vals])
    if not pair.verified:
        raise RuntimeError("pair failed exact verification")


def cmd_phase(args, out: Output):
    from .graph import write_graph_text
    from .phase import assess_phase_gadget, read_phase_gadget, sample_phase_gadget

    if args.which == "sample":
        gad = sample_phase_gadget(int(args.n), int(args.t), int(args.delta), args.seed)
        for k, v in [("n", gad.n), ("t", gad.t), ("delta", gad.delta), ("vertices", gad.graph.n), ("edges", gad.graph.m)]:
            out.kv(k, v)
        if args.out:
            header = f"# phase-gadget n={gad.n} t={gad.t} delta={gad.delta}\n"
            out.file(args.out, header + write_graph_text(gad.graph))
        return
    opt = lambda name: None if getattr(args, name) is None else int(getattr(args, name))
    gad = read_phase_gadget(args.graph, opt("n"), opt("t"), opt("delta"))
    model = _model(args)
    res = assess_phase_gadget(gad, model, args.mode, int(args.samples), args.seed, int(args.burn_in),
                              opt("thinning"))
    vals = [("mode", res.mode), ("eps_balance", res.eps_balance), ("eps_port", res.eps_port)]
    vals += [(f"phase_{k}", v) for k, v in sorted(res.phase_probs.items(), key=lambda kv: str(kv[0]))]
    if res.mode == "mc":
        vals += [("se_balance", res.se_balance), ("se_port", res.se_port), ("samples", res.samples)]
    for k, v in vals:
        out.kv(k, v)
    out.csv(args.csv, ["key", "value"], [[k, fmt_value(v)] for k, v in vals])


def _base_model(args):
    """--base 'q=3,beta=4' style model spec, else the individual model options."""
    if not args.base:
        return _model(args)
    fields = {}
    for part in args.base.split(","):
        k, eq, v = part.partition("=")
        if not eq:
            raise ParseError(f"base spec part {part!r} is not key=value", "--base")
        fields[k.strip()] = v.strip()
    if args.which == "potts":
        unknown = set(fields) - {"q", "beta"}
        if unknown:
            raise ParseError(f"unknown base keys {sorted(unknown)}", "--base")
        return Potts(int(fields.get("q", 3)), parse_rational(_need(fields.get("beta"), "base beta"), "--base"))
    unknown = set(fields) - {"beta", "gamma", "lambda"}
    if unknown:
        raise ParseError(f"unknown base keys {sorted(unknown)}", "--base")
    get = lambda k, d=None: parse_rational(fields[k], "--base") if k in fields else d
    return TwoSpin(_need(get("beta"), "base beta"), _need(get("gamma"), "base gamma"), get("lambda", Fraction(1)))


def _exactish(x) -> Fraction:
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    with mpmath.workdps(50):
        return Fraction(mpmath.nstr(mpmath.mpf(x), 45))


def cmd_reduce(args, out: Output):
    from .reduction import plan_potts, plan_twospin

    H = read_graph(args.graph)
    model = _base_model(args)
    target = _frac(args.target, "target")
    delta = int(args.delta)
    eta = _frac(args.eta, "eta", Fraction(1, 10))
    kw = dict(pair_r=_frac(args.pair_r, "pair-r", Fraction(1, 100)), gap_min=_frac(args.gap_min, "gap-min", Fraction(1, 1000)))
    if args.which == "potts":
        if not isinstance(model, Potts):
            raise ValueError("reduce potts needs a Potts base model")
        plan = plan_potts(model, delta, H, target, eta, **kw)
    else:
        if not isinstance(model, TwoSpin):
            raise ValueError("reduce twospin needs a 2-spin base model")
        plan = plan_twospin(model, delta, H, target, _observable(args), eta, **kw)
    text = plan.to_text()
    out.line(text.rstrip("\n"))
    out.file(args.plan_out, text)
    rows = [[k, fmt_value(v)] for k, v in plan.items.items()]
    if args.verify:
        rows += _verify_plan(plan, model, H, out)
    out.csv(args.csv, ["key", "value"], rows)


def _verify_plan(plan, model, H, out: Output):
    """Synthetic zero-error readings through the subtraction formula, plus the phase-marginal check."""
    from .reduction import idealized_phase_marginal_check, potts_forward, subtraction_estimate, twospin_forward

    eff = plan.effective
    common = Fraction(17, 3)  # arbitrary shared bulk term; it must cancel
    if plan.kind == "potts":
        bh = eff.beta_hat
        rational = isinstance(bh, Fraction)
        S_H = ex.susceptibility(H, Potts(model.q, _exactish(bh)))
        e1, e2 = plan.pair
        readings = {
            "S1": potts_forward(S_H, eff, e1.A, e1.S, common, H.m),
            "S2": potts_forward(S_H, eff, e2.A, e2.S, common, H.m),
            "A_E1": e1.A, "A_E2": e2.A, "S_E1": e1.S, "S_E2": e2.S,
        }
        got = subtraction_estimate("potts", readings, eff, H.m)
        bias = eff.p
    else:
        a, lh = eff.alpha, eff.lam_hat
        rational = isinstance(a, Fraction) and isinstance(lh, Fraction)
        M_H = ex.magnetization(H, TwoSpin.ising(_exactish(a), _exactish(lh)))
        t1, t2 = plan.pair
        readings = {
            "M1": twospin_forward(M_H, eff, t1.A, t1.O, common, H.n),
            "M2": twospin_forward(M_H, eff, t2.A, t2.O, common, H.n),
            "calA1": t1.A, "calA2": t2.A, "O1": t1.O, "O2": t2.O,
        }
        got = subtraction_estimate("twospin", readings, eff, H.n)
        bias = (eff.q_plus, eff.q_minus)
    target_val = S_H if plan.kind == "potts" else M_H
    err = abs(_exactish(got) - target_val) if not isinstance(got, Fraction) else abs(got - target_val)
    if not rational:
        # values came from 45-digit approximations; exact rationals would mislead
        with mpmath.workdps(40):
            target_val, got, err = (mpmath.mpf(x.numerator) / x.denominator if isinstance(x, Fraction) else x
                                    for x in (target_val, got, err))
    vals = [("verify_exact_arithmetic", rational), ("verify_quantity", target_val), ("verify_recovered", got),
            ("verify_abs_error", err)]
    if H.n <= 8:
        chk = idealized_phase_marginal_check(model, H, plan.bundle, plan.ell, bias, swap=plan.swap)
        vals += [("verify_phase_deviation", chk.deviation), ("verify_phase_vectors", chk.phase_vectors)]
    else:
        vals.append(("verify_phase_deviation", "skipped (H has more than 8 vertices)"))
    for k, v in vals:
        out.kv(k, v)
    return [[k, fmt_value(v)] for k, v in vals]


def cmd_interpolate(args, out: Output, caps):
    from . import plots
    from .interpolation import exact_log_partition, grid_for_error, integrate_log_partition, make_oracle

    g = read_graph(args.graph)
    model = _model(args, with_beta=False)
    target = _frac(args.target, "target")
    if (args.grid is None) == (args.eps is None):
        raise ValueError("give exactly one of --grid and --eps")
    M = int(args.grid) if args.grid is not None else grid_for_error(model, g, target, _frac(args.eps, "eps"), args.mode)
    out.kv("M", M)
    if M > caps["grid"]:
        raise ex.BudgetExceeded(f"grid of {M} cells exceeds the budget of {caps['grid']}")
    oracle = make_oracle(args.oracle, model, g, args.seed)
    res = integrate_log_partition(model, g, oracle, target, M)
    vals = [("base", res.base), ("lower", res.bracket.lower), ("upper", res.bracket.upper),
            ("estimate", res.estimate), ("width", res.bracket.width), ("non_monotone", res.non_monotone),
            ("oracle_calls", res.calls)]
    if args.check_exact:
        ref = exact_log_partition(model, g, target)
        vals += [("exact", ref), ("contains_exact", res.bracket.contains(ref)), ("error", abs(res.estimate - ref))]
    for k, v in vals:
        out.kv(k, v)
    out.csv(args.csv, ["i", "activity", "reading", "lower_partial", "upper_partial"], list(res.rows()))
    if args.figure:
        out.file(args.figure, plots.interpolation_figure(res, "beta" if isinstance(model, Potts) else "lambda"))


def cmd_sample(args, out: Output, caps):
    from .samplers import mc_estimate_parallel, mc_samples, spawn_seeds

    g = read_graph(args.graph)
    model = _model(args)
    if isinstance(model, Potts):
        if args.observable not in ("susceptibility",):
            raise ValueError("the Potts observable is 'susceptibility'")
        obs = None
    else:
        obs = MAGNETIZATION if args.observable == "magnetization" else _observable(args)
    chains = int(args.chains)
    thinning = int(args.thinning) if args.thinning else max(1, g.n)
    steps = int(args.steps)
    samples = steps // thinning
    if samples < 1:
        raise ValueError("--steps must be at least one thinning interval")
    burn = int(args.burn_in)
    if (steps + burn) * chains > caps["steps"]:
        raise ex.BudgetExceeded(f"{(steps + burn) * chains} Glauber steps exceed the budget of {caps['steps']}")
    est = mc_estimate_parallel(model, g, obs, samples, chains, burn, thinning, args.seed, threads=args.threads)
    vals = [("mean", est.mean), ("std_error", est.std_error if est.std_error_defined else "undefined"),
            ("samples", est.samples), ("chains", chains), ("burn_in", burn), ("thinning", thinning)]
    if args.check_exact:
        ref = ex.observable_expectation(g, model, obs if obs is not None else "susceptibility")
        vals += [("exact", ref), ("z_score", (est.mean - float(ref)) / est.std_error if est.std_error_defined and est.std_error > 0 else "undefined")]
    for k, v in vals:
        out.kv(k, v)
    if args.csv:
        rows = []
        for c, ss in enumerate(spawn_seeds(args.seed, chains)):
            xs = mc_samples(model, g, obs, samples, burn, thinning, ss)
            rows += [[c, i, x] for i, x in enumerate(xs)]
        out.csv(args.csv, ["chain", "index", "value"], rows)


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    _SCHEMAS.clear()
    top = argparse.ArgumentParser(prog="spinobs", description="Exact gadget algebra and observable reductions for spin systems.")
    top.add_argument("--seed", type=_kind_type("int", "seed"), default="0")
    top.add_argument("--threads", type=_kind_type("int", "threads"), default="1")
    top.add_argument("--budget", type=_kind_type("int", "budget"), default=None,
                     help="cap on enumerated configurations, grid cells and Glauber steps")
    top.add_argument("--replay", default=None, help="write a replay config for this run")
    sub = top.add_subparsers(dest="command", required=True)

    c = _Cmd(sub.add_parser("exact", help="exact Gibbs quantities by enumeration/elimination"), ("exact",))
    _model_opts(c)
    c.opt("graph", "in", required=True)
    c.opt("observable", "choice:partition|probability|susceptibility|magnetization|vertex-edge", default="partition")
    c.opt("pin", "str", help="vertex=spin,... pins")
    c.opt("method", "choice:auto|enumerate|eliminate", default="auto")
    c.opt("csv", "out")

    crit = sub.add_parser("critical", help="critical thresholds and fixpoints").add_subparsers(dest="which", required=True)
    c = _Cmd(crit.add_parser("potts"), ("critical", "potts"))
    c.opt("q", "int", required=True).opt("delta", "int", required=True).opt("beta", "rational").opt("csv", "out")
    c = _Cmd(crit.add_parser("twospin"), ("critical", "twospin"))
    c.opt("beta", "rational", required=True).opt("gamma", "rational", required=True).opt("lambda", "rational")
    c.opt("delta", "int", required=True).opt("csv", "out")
    c = _Cmd(crit.add_parser("hardcore"), ("critical", "hardcore"))
    c.opt("delta", "int", required=True).opt("lambda", "rational").opt("csv", "out")

    gad = sub.add_parser("gadget", help="gadget statistics, paths, libraries, pairs").add_subparsers(dest="which", required=True)
    c = _Cmd(gad.add_parser("stats"), ("gadget", "stats"))
    _model_opts(c)
    c.opt("recipe", "in").opt("expr", "str", help="recipe text; ';' separates lines")
    c.opt("format", "choice:text|csv", default="text").opt("verify", "flag").opt("csv", "out")
    c = _Cmd(gad.add_parser("build-path"), ("gadget", "build-path"))
    c.opt("q", "int", required=True).opt("beta", "rational", required=True).opt("r", "rational", required=True)
    c.opt("csv", "out").opt("figure", "out")
    for name in ("library", "build", "pair"):
        c = _Cmd(gad.add_parser(name), ("gadget", name))
        _model_opts(c)
        c.opt("tau", "rational").opt("density", "rational").opt("csv", "out")
        if name != "pair":
            c.opt("figure", "out")
        if name == "build":
            c.opt("x", "rational").opt("t", "int", default="10")
        if name == "pair":
            c.opt("r", "rational", required=True).opt("gap-min", "rational", required=True).opt("max-depth", "int", default="5")

    ph = sub.add_parser("phase", help="phase gadgets").add_subparsers(dest="which", required=True)
    c = _Cmd(ph.add_parser("sample"), ("phase", "sample"))
    c.opt("n", "int", required=True).opt("t", "int", required=True).opt("delta", "int", required=True)
    c.opt("out", "out", short="-o")
    c = _Cmd(ph.add_parser("assess"), ("phase", "assess"))
    _model_opts(c)
    c.opt("graph", "in", required=True).opt("n", "int").opt("t", "int").opt("delta", "int")
    c.opt("mode", "choice:exact|mc", default="exact").opt("samples", "int", default="0")
    c.opt("burn-in", "int", default="2000").opt("thinning", "int").opt("csv", "out")

    red = sub.add_parser("reduce", help="plan and check an observable reduction").add_subparsers(dest="which", required=True)
    for name in ("potts", "twospin"):
        c = _Cmd(red.add_parser(name), ("reduce", name))
        _model_opts(c)
        c.opt("base", "str", help="base model as key=value list, e.g. q=3,beta=4")
        c.opt("graph", "in", required=True).opt("target", "rational", required=True)
        c.opt("delta", "int", default="3").opt("eta", "rational")
        c.opt("pair-r", "rational").opt("gap-min", "rational")
        c.opt("plan-out", "out").opt("csv", "out").opt("verify", "flag")
        c.p.set_defaults(model="potts" if name == "potts" else "twospin")

    c = _Cmd(sub.add_parser("interpolate", help="bracket log Z by integrating observable readings"), ("interpolate",))
    _model_opts(c)
    c.opt("graph", "in", required=True).opt("target", "rational", required=True)
    c.opt("grid", "int").opt("eps", "rational").opt("mode", "choice:tight|paper", default="tight")
    c.opt("oracle", "str", default="exact").opt("check-exact", "flag").opt("csv", "out").opt("figure", "out")

    c = _Cmd(sub.add_parser("sample", help="Glauber dynamics estimates"), ("sample",))
    _model_opts(c)
    c.opt("graph", "in", required=True).opt("steps", "int", required=True).opt("burn-in", "int", default="1000")
    c.opt("thinning", "int").opt("chains", "int", default="1")
    c.opt("observable", "choice:susceptibility|magnetization|vertex-edge", default="magnetization")
    c.opt("check-exact", "flag").opt("csv", "out")

    for name in ("run", "replay"):
        p = sub.add_parser(name, help="execute a config or replay file")
        p.add_argument("config")
    return top


def schema_for(words):
    if not _SCHEMAS:
        build_parser()
    return _SCHEMAS.get(tuple(words))


def _replay_text(args, words, argv_kinds, replay_path) -> str:
    from .config import ExperimentConfig

    base = os.path.dirname(os.path.abspath(replay_path))
    opts = {}
    for key, kind in argv_kinds.items():
        val = getattr(args, key.replace("-", "_"), None)
        if val is None or (kind == "flag" and not val):
            continue
        if kind == "flag":
            val = "true"
        elif kind in ("in", "out"):
            val = os.path.relpath(os.path.abspath(val), base)
        opts[key] = str(val)
    return ExperimentConfig(tuple(words), opts).render()


def _dispatch(args, out: Output):
    caps = {"grid": DEFAULT_GRID_CAP, "steps": DEFAULT_STEP_CAP}
    if args.budget is not None:
        b = int(args.budget)
        caps = {"grid": b, "steps": b}
        ctx = ex.budget(twospin_max_configs=b, potts_max_configs=b)
    else:
        import contextlib

        ctx = contextlib.nullcontext()
    args.seed = int(args.seed)
    args.threads = int(args.threads)
    with ctx:
        cmd = args.command
        if cmd == "exact":
            cmd_exact(args, out)
        elif cmd == "critical":
            cmd_critical(args, out)
        elif cmd == "gadget":
            cmd_gadget(args, out)
        elif cmd == "phase":
            cmd_phase(args, out)
        elif cmd == "reduce":
            cmd_reduce(args, out)
        elif cmd == "interpolate":
            cmd_interpolate(args, out, caps)
        elif cmd == "sample":
            cmd_sample(args, out, caps)


def _exit_code(exc: BaseException) -> int:
    from .gadgets.core import RecursionMismatch
    from .gadgets.library import LibraryError, SearchExhausted
    from .reduction import GapTooSmall

    if isinstance(exc, ex.BudgetExceeded):
        return EXIT_BUDGET
    if isinstance(exc, (SearchExhausted, LibraryError, RecursionMismatch, ex.ZeroWeightError, GapTooSmall,
                        ArithmeticError, RuntimeError, AssertionError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ParseError, ValueError, OSError, KeyError)):
        return EXIT_INPUT
    return EXIT_NUMERIC


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in ("run", "replay"):
        try:
            cfg = read_config(args.config, schema_for)
        except (ParseError, OSError) as exc:
            stderr.write(f"error: {exc}\n")
            return EXIT_INPUT
        inner = cfg.to_argv(schema_for(cfg.command))
        prefix = []
        for g in GLOBAL_KEYS:
            if g not in cfg.options and getattr(args, g) is not None:
                prefix += [f"--{g}", str(getattr(args, g))]
        if args.replay:
            prefix += ["--replay", args.replay]
        return main(prefix + inner, stdout, stderr)
    words = (args.command,) + ((args.which,) if hasattr(args, "which") else ())
    out = Output()
    try:
        _dispatch(args, out)
    except Exception as exc:  # mapped to exit codes below
        code = _exit_code(exc)
        label = {EXIT_INPUT: "invalid input", EXIT_BUDGET: "budget exceeded", EXIT_NUMERIC: "numerical failure"}[code]
        stderr.write(f"error ({label}): {exc}\n")
        return code
    if args.replay:
        kinds = dict(_SCHEMAS[words])
        out.file(args.replay, _replay_text(args, words, kinds, args.replay))
    out.flush(stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
