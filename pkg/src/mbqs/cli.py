"""Command-line pipeline: references, surge tables, synthetic shots, scoring, noise fits.

Every command validates its configuration before computing, writes its files
atomically into ``--out`` and finishes with a ``manifest.json`` echoing the
resolved parameters and the files written.

Exit codes: 0 success, 2 usage error, 3 malformed input file, 4 resource
limit, 5 numerical failure, 1 anything else.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import (ChannelNotInvertibleError, DetectionError, DivisionGuardError, EstimationError,
                     IntegrationError, PfaffianError, RecordFormatError, RegressionError, ResourceError)
from .freefermion import FreeFermionQuench
from .quench_model import A_RUBY, C6_RUBY, INITIAL_STATES, QuenchSpec, coupling_J, ising_to_rydberg
from .records import atomic_write, read_records, read_table, write_records, write_table
from . import ed, scoring, surge

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_FORMAT, EXIT_RESOURCE, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5

REFERENCE_COLUMNS = ["t_us", "ell", "g2_connected", "g2_disconnected", "one_point"]
SPACETIME_COLUMNS = ["Jt", "ell", "g2"]
TARGET_COLUMNS = ["L", "t_star_us", "Jt_star", "ell", "g2", "one_point"]
SURGE_COLUMNS = ["L", "Jt_star_numeric", "Jt_star_regression", "Jt_star_analytic", "peak_height", "width75_Jt"]
VOLUMETRIC_COLUMNS = ["L", "epsilon", "status"]

UNITS = {
    "t_us": "us", "t_star_us": "us", "Jt": "rad", "Jt_star": "rad", "Jt_star_numeric": "rad",
    "Jt_star_regression": "rad", "Jt_star_analytic": "rad", "width75_Jt": "rad", "ell": "sites",
    "L": "sites", "g2": "1", "g2_connected": "1", "g2_disconnected": "1", "one_point": "1",
    "peak_height": "1", "epsilon": "1", "status": "-", "gamma": "1/us", "g": "1", "eta": "1",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------


def parse_sizes(text):
    """'6..20', '6..20:2', '4,6,9' or a single integer."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, rest = part.split("..", 1)
            hi, _, step = rest.partition(":")
            try:
                out.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
            except ValueError:
                raise UsageError(f"bad size range {part!r}") from None
        else:
            try:
                out.append(int(part))
            except ValueError:
                raise UsageError(f"bad size {part!r}") from None
    if not out:
        raise UsageError("empty size list")
    return sorted(set(out))


def parse_floats(text):
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None
    if not vals:
        raise UsageError("empty number list")
    return vals


def parse_times(text):
    """'start:stop:num' (linspace, us) or a comma list of times in us."""
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("--times expects start:stop:num")
        try:
            return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError:
            raise UsageError(f"bad time grid {text!r}") from None
    return np.array(parse_floats(text))


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    conf = {}
    try:
        with open(path) as fh:
            for n, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise UsageError(f"{path}:{n}: expected key = value")
                conf[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    return conf


def _common(p, sizes=True, state="plus"):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--out", default="out", help="output directory")
    if sizes:
        p.add_argument("--L", dest="L", default="6..20", help="ring sizes, e.g. 6..20 or 4,6,8")
    p.add_argument("--g", type=float, default=1.0, help="transverse field in units of J")
    p.add_argument("--state", choices=INITIAL_STATES, default=state)


def build_parser():
    parser = argparse.ArgumentParser(prog="mbqs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("reference", help="free-fermion reference and spacetime tables")
    _common(p)
    p.add_argument("--J", type=float, default=None, help="coupling in rad/us (default: from --a-um)")
    p.add_argument("--a-um", type=float, default=A_RUBY)
    p.add_argument("--times", default=None, help="start:stop:num in us, or a list; default 0..1.3 t_F")

    p = sub.add_parser("surge", help="surge times, linear law and analytic estimate")
    _common(p)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--step-jt", type=float, default=surge.DEFAULT_STEP_JT)

    p = sub.add_parser("sample", help="synthetic shot records from the noisy ED sampler")
    _common(p, state="down")
    p.add_argument("--a-um", type=float, default=A_RUBY)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", choices=("none", "readout", "full"), default="full")
    p.add_argument("--hamiltonian", choices=("rydberg", "ising"), default="rydberg")
    p.add_argument("--times", default=None, help="one time per size in us; default: Ising surge times")

    p = sub.add_parser("score", help="P2, score S and volumetric grid from shot records")
    p.add_argument("--config")
    p.add_argument("--out", default="out")
    p.add_argument("--records", required=False, help="directory of shot record files")
    p.add_argument("--reference", required=False, help="directory written by 'reference'")
    p.add_argument("--epsilon", default="0.5", help="threshold or comma list; the first sets S")
    p.add_argument("--mitigate", action="store_true")
    p.add_argument("--p-fp", type=float, default=ed.NoiseParams().p_fp)
    p.add_argument("--p-fn", type=float, default=ed.NoiseParams().p_fn)
    p.add_argument("--policy", choices=scoring.POLICIES, default="strict")
    p.add_argument("--exclude-L", default="", help="sizes left out of the score rule")

    p = sub.add_parser("noise-fit", help="dephasing law beta and predicted score")
    _common(p, state="down")
    p.set_defaults(L="4,6,8")
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--gammas", default="0.02,0.05,0.1,0.2")
    p.add_argument("--g-list", default="0.5,1.0")
    p.add_argument("--epsilon", default="0.5")
    p.add_argument("--gamma-device", type=float, default=0.05, help="rate used for the prediction, 1/us")
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        conf = read_config(args.config)
        sub = parser.subcommands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(conf) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
        # argparse skips type conversion for defaults set after construction
        for a in sub._actions:
            v = getattr(args, a.dest, None)
            if a.dest in conf and isinstance(v, str) and a.type is not None:
                setattr(args, a.dest, a.type(v))
            if a.dest in conf and a.const is True and isinstance(v, str):
                setattr(args, a.dest, v.lower() in ("1", "true", "yes", "on"))
    return args


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


class Output:
    def __init__(self, root):
        self.root = root
        self.files = []
        os.makedirs(root, exist_ok=True)

    def path(self, name):
        return os.path.join(self.root, name)

    def table(self, name, columns, rows):
        write_table(self.path(name), columns, rows, UNITS)
        self.files += [name, os.path.splitext(name)[0] + ".json"]

    def json(self, name, obj):
        atomic_write(self.path(name), json.dumps(obj, indent=1, sort_keys=True) + "\n")
        self.files.append(name)

    def records(self, name, rec):
        write_records(self.path(name), rec)
        self.files.append(name)

    def manifest(self, command, params):
        self.json("manifest.json", {"command": command, "version": __version__,
                                    "parameters": params, "files": sorted(self.files)})


def _params(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config",)}


def _check_sizes(Ls, lo=3):
    bad = [L for L in Ls if L < lo]
    if bad:
        raise UsageError(f"sizes must be >= {lo}, got {bad}")


def _jt_fermi(L, g):
    """J t_F."""
    return math.inf if g == 0 else L / (4 * min(g, 1.0))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_reference(args):
    Ls = parse_sizes(args.L)
    _check_sizes(Ls)
    J = args.J if args.J is not None else coupling_J(C6_RUBY, args.a_um)
    if J <= 0 or args.g < 0:
        raise UsageError("J must be positive and g non-negative")
    if args.state == "afm":
        raise UsageError("free-fermion references support the plus and down states")
    grids = {}
    for L in Ls:
        if args.times is not None:
            grids[L] = parse_times(args.times)
        else:
            span = 1.3 * _jt_fermi(L, args.g) if args.g > 0 else 10.0
            grids[L] = np.linspace(0.0, span / J, 201)
        QuenchSpec(L, args.g, J, args.state, tuple(grids[L]))  # validation only

    out = Output(args.out)
    targets = []
    for L in Ls:
        ff = FreeFermionQuench(L, args.g, J, args.state)
        ts = grids[L]
        ells = list(range(1, L // 2 + 1))
        mz = ff.one_point_many(ts)
        rows, st = [], []
        for t, m in zip(ts, mz):
            zz = ff.two_point(t, ells)
            for ell, v in zip(ells, zz):
                rows.append((float(t), ell, float(v - m * m), float(v), float(m)))
                st.append((float(J * t), ell, float(v - m * m)))
        out.table(f"reference_L{L}.csv", REFERENCE_COLUMNS, rows)
        out.table(f"spacetime_L{L}.csv", SPACETIME_COLUMNS, st)
        if args.g > 0:
            res = surge.numeric_surge(L, args.g, J, args.state)
            m = float(ff.one_point_many([res.t_star])[0])
            for ell, v in zip(ells, ff.two_point(res.t_star, ells)):
                targets.append((L, res.t_star, J * res.t_star, ell, float(v - m * m), m))
    if targets:
        out.table("targets.csv", TARGET_COLUMNS, targets)
    out.manifest("reference", {**_params(args), "J_resolved": J, "sizes": Ls})


def cmd_surge(args):
    Ls = parse_sizes(args.L)
    _check_sizes(Ls)
    if args.g <= 0 or args.J <= 0:
        raise UsageError("g and J must be positive")
    if args.state == "afm":
        raise UsageError("surge analysis supports the plus and down states")
    results = [surge.numeric_surge(L, args.g, args.J, args.state, step_jt=args.step_jt) for L in Ls]
    pairs = [(r.L, args.J * r.t_star) for r in results]
    reg = surge.surge_regression(pairs) if len(pairs) >= 3 else None
    rows = []
    for r in results:
        jt_reg = reg.slope * r.L + reg.intercept if reg else math.nan
        jt_an = math.nan
        if args.g <= 1:
            jt_an = surge.surge_estimate(args.g, (r.L // 2) / r.L) * _jt_fermi(r.L, args.g)
        rows.append((r.L, args.J * r.t_star, jt_reg, jt_an, r.peak_height, args.J * r.peak_width_75))
    out = Output(args.out)
    out.table("surge_table.csv", SURGE_COLUMNS, rows)
    if reg:
        out.json("surge_regression.json", {**reg.to_dict(), "rule": "exact value if stored, else slope * L + intercept"})
    out.manifest("surge", {**_params(args), "sizes": Ls})


def _noise_model(name):
    if name == "none":
        return ed.NoiseParams.noiseless()
    if name == "readout":
        d = ed.NoiseParams()
        return ed.NoiseParams.noiseless().with_readout(d.p_fp, d.p_fn)
    return ed.NoiseParams()


def cmd_sample(args):
    Ls = parse_sizes(args.L)
    _check_sizes(Ls)
    big = [L for L in Ls if L > 12]
    if big:
        raise ResourceError(f"the shot sampler is limited to L <= 12, got {big}")
    if args.shots < 1:
        raise UsageError("--shots must be positive")
    if args.state == "plus":
        raise UsageError("the device sampler prepares product states in the sz basis (down, afm)")
    times = None
    if args.times is not None:
        times = parse_times(args.times)
        if len(times) != len(Ls):
            raise UsageError("--times needs one value per size")
    noise = _noise_model(args.noise)
    J = coupling_J(C6_RUBY, args.a_um)
    out = Output(args.out)
    for i, L in enumerate(Ls):
        if times is not None:
            t = float(times[i])
        elif args.state == "down":
            t = surge.numeric_surge(L, args.g, J, "down").t_star
        else:
            raise UsageError("--times is required for the afm state")
        spec = QuenchSpec(L, args.g, J, args.state, (t,))
        params = ising_to_rydberg(spec, C6_RUBY, args.a_um)
        rec = ed.noisy_shot_sampler(params, noise, t, args.shots, (args.seed, L), initial=args.state,
                                    g=args.g, hamiltonian=args.hamiltonian)
        rec.meta["noise"] = args.noise
        rec.meta["hamiltonian"] = args.hamiltonian
        out.records(f"shots_L{L}.txt", rec)
    out.manifest("sample", {**_params(args), "sizes": Ls, "J_resolved": J})


def _load_targets(ref_dir):
    _, rows = read_table(os.path.join(ref_dir, "targets.csv"), TARGET_COLUMNS)
    table = {}
    for L, t, _, ell, g2, _m in rows:
        entry = table.setdefault(int(L), {"t_us": float(t), "g2": {}})
        entry["g2"][int(ell)] = float(g2)
    return table


def cmd_score(args):
    if not args.records or not args.reference:
        raise UsageError("score needs --records and --reference")
    eps = parse_floats(args.epsilon)
    exclude = parse_sizes(args.exclude_L) if args.exclude_L else []
    targets = _load_targets(args.reference)
    files = sorted(f for f in os.listdir(args.records) if f.endswith(".txt"))
    if not files:
        raise RecordFormatError(f"no shot record files in {args.records}")
    p2 = {}
    for f in files:
        rec = read_records(os.path.join(args.records, f))
        L = rec.L
        if L not in targets:
            raise RecordFormatError(f"{f}: no reference for L = {L}")
        if abs(float(rec.meta["t_us"]) - targets[L]["t_us"]) > 1e-6 * max(1.0, targets[L]["t_us"]):
            raise RecordFormatError(f"{f}: record time {rec.meta['t_us']} us differs from the reference "
                                    f"surge time {targets[L]['t_us']} us")
        est = scoring.estimate_correlators(rec)
        pfp, pfn = (args.p_fp, args.p_fn) if args.mitigate else (0.0, 0.0)
        if args.mitigate:
            est = scoring.readout_mitigate(est, pfp, pfn)
        p2[L] = scoring.p2_score(est["g2"], targets[L]["g2"], L, records=rec, p_fp=pfp, p_fn=pfn)
    mitigation = {"enabled": bool(args.mitigate)}
    if args.mitigate:
        mitigation.update(p_fp=args.p_fp, p_fn=args.p_fn)
    report = scoring.mbqs_score(p2, eps[0], args.policy, exclude, eps, mitigation)
    out = Output(args.out)
    out.json("score_report.json", report.to_dict())
    out.table("volumetric.csv", VOLUMETRIC_COLUMNS, report.volumetric_rows())
    out.manifest("score", _params(args))
    return report


def cmd_noise_fit(args):
    Ls = parse_sizes(args.L)
    _check_sizes(Ls, lo=2)
    big = [L for L in Ls if L > 10]
    if big:
        raise ResourceError(f"dense dephasing is limited to L <= 10, got {big}")
    gammas = parse_floats(args.gammas)
    gs = parse_floats(args.g_list)
    eps = parse_floats(args.epsilon)[0]
    if any(x <= 0 for x in gammas + gs) or args.J <= 0:
        raise UsageError("rates, fields and J must be positive")
    rows, samples = [], []
    for L in Ls:
        for g in gs:
            for gm, eta in zip(gammas, ed.dephasing_eta(L, g, gammas, args.J, args.state)):
                rows.append((L, g, gm, eta))
                samples.append((gm, g, L, eta))
    beta = scoring.dephasing_fit(samples)
    S = scoring.predicted_score(args.gamma_device, eps, beta)
    out = Output(args.out)
    out.table("eta.csv", ["L", "g", "gamma", "eta"], rows)
    out.json("noise_fit.json", {"beta": beta, "gamma_device": args.gamma_device, "epsilon": eps,
                                "predicted_S": S, "J_rad_per_us": args.J, "state": args.state})
    out.manifest("noise-fit", {**_params(args), "sizes": Ls})
    return beta, S


COMMANDS = {"reference": cmd_reference, "surge": cmd_surge, "sample": cmd_sample,
            "score": cmd_score, "noise-fit": cmd_noise_fit}


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"mbqs: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RecordFormatError as exc:
        print(f"mbqs: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ResourceError as exc:
        print(f"mbqs: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (PfaffianError, IntegrationError, DetectionError, EstimationError, RegressionError,
            DivisionGuardError, ChannelNotInvertibleError) as exc:
        print(f"mbqs: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"mbqs: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mbqs: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
