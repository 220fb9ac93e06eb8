"""Command-line front end: seeded experiments with JSON/CSV reports.

Every command wraps its results as {"command", "seed", "config",
"results", "wall_time_s"}; rerunning with the same flags reproduces all
numeric fields (wall_time_s excepted).  All randomness flows from
--seed through named generator streams, so reports do not depend on
evaluation order.  Signals are the grid JSON of this package
(save_signal / load_signal).

Exit codes: 0 success, 2 usage, 3 bad data or config, 4 infeasible
size.

The equivalence-experiment CSV has the fixed columns

    kind,atom,base,translate,dilate,mesh_exponent,method,value

with one kind=result row per (atom, method) carrying the norm, and
kind=summary rows (ratio_min, ratio_max, ratio_spread between the first
two methods; translate_spread_max within translate orbits).  Any other
command under --format csv emits flattened key,value rows.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from .bmo import bmo_norm
from .grid import GridFunction, lp_norm, load_signal, make_grid_function, to_json_dict
from .kernel import decay_fit, kernel_norm, kernel_smoothness
from .lattice import (
    DyadicLattice1D,
    ProductLattice,
    SizeLimitError,
    enumerate_shifts,
    sample_lattice,
    sample_product_lattice,
)
from .lusin import (
    ConeQuadrature,
    cone_tail_bound,
    default_quadrature,
    lusin_square_function,
    multiparam_lusin,
)
from .seqspace import (
    CubeMatrix,
    almost_diagonal_constant,
    apply_children_sum_T,
    sequences_a_b,
    tl_norm,
)
from .sqfn import (
    averaged_square_function,
    fixed_h1_norm,
    randomized_h1_norm,
    randomized_square_mean,
    square_function,
    truncation_tail_bound,
)

H1_METHODS = ("dyadic-fixed", "randomized-exact", "randomized-mc", "lusin")

# kernel-check sweeps (1D, full shift enumeration); the regression
# windows sit well inside the asymptotic regime at the default m, K
KERNEL_DEFAULT_M = -8
KERNEL_DEFAULT_K = 2
KERNEL_SIZE_Y = 0.3
KERNEL_SIZE_DISTANCES = tuple(2.0**-j for j in range(5, 0, -1))
KERNEL_DX_BASE = (0.3, 0.8)  # (y, x0), |x0 - y| = 1/2
KERNEL_DX_SWEEP = tuple(2.0**-j for j in range(7, 3, -1))
KERNEL_DY_DX = 2.0**-7
KERNEL_DY_SWEEP = tuple(2.0**-j for j in range(4, 0, -1))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _flat_rows(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flat_rows(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flat_rows(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def _default_top(f: GridFunction) -> int:
    return f.mesh_exponent + max(1, math.ceil(math.log2(max(f.box.extent))))


def _axis_lattices(f: GridFunction, top_scale: int, seed) -> list[DyadicLattice1D]:
    if seed is None:
        return [DyadicLattice1D(f.mesh_exponent, top_scale, 0) for _ in range(f.dim)]
    return [
        sample_lattice(seed, stream, f.mesh_exponent, top_scale) for stream in range(f.dim)
    ]


def _grouped(lattices: list[DyadicLattice1D], params: int):
    if len(lattices) == 1:
        return lattices[0]
    if params == 1:
        return ProductLattice.one_parameter(lattices)
    return ProductLattice.multi_parameter(lattices)


def _check_params(params, dim: int) -> int:
    params = dim if params is None else int(params)
    if params not in (1, dim):
        raise ValueError(f"--params must be 1 or the axis count {dim}, got {params}")
    return params


def _lattice_dict(lat: DyadicLattice1D) -> dict:
    return {
        "mesh_exponent": lat.mesh_exponent,
        "top_scale": lat.top_scale,
        "shift": lat.shift,
    }


def cmd_sample_lattice(args) -> dict:
    dims = args.dims or 1
    if dims == 1:
        return _lattice_dict(sample_lattice(args.seed, 0, args.m, args.K))
    params = _check_params(args.params, dims)
    prod = sample_product_lattice(
        args.seed, range(dims), args.m, args.K, one_parameter=(params == 1)
    )
    return {
        "axes": [_lattice_dict(fac) for fac in prod.factors],
        "param_groups": [list(g) for g in prod.param_groups],
    }


def cmd_square_function(args) -> dict:
    f = load_signal(args.signal)
    top = args.K if args.K is not None else _default_top(f)
    params = _check_params(args.params, f.dim)
    lat = _grouped(_axis_lattices(f, top, args.seed), params)
    method = args.method or "plain"
    if method == "plain":
        s = square_function(f, lat)
    elif method == "averaged":
        s = averaged_square_function(f, lat)
    else:
        raise ValueError(f"method must be plain or averaged, got {method!r}")
    lats = [lat] if isinstance(lat, DyadicLattice1D) else list(lat.factors)
    return {
        "method": method,
        "lattice": [_lattice_dict(l) for l in lats],
        "l1_norm": lp_norm(s, 1),
        "square_function": to_json_dict(s),
    }


def cmd_h1_norm(args) -> dict:
    f = load_signal(args.signal)
    method = args.method
    if method not in H1_METHODS:
        raise ValueError(f"method must be one of {H1_METHODS}, got {method!r}")
    params = _check_params(args.params, f.dim)
    out: dict = {"method": method, "params": params}

    if method == "lusin":
        if f.dim == 1:
            quad = default_quadrature(f.box.extent[0], f.mesh_exponent)
            s = lusin_square_function(f, quad)
            out["tail_bound"] = cone_tail_bound(f, quad)
            out["quadrature"] = quad.to_dict()
        else:
            if params != f.dim:
                raise ValueError("cone reading is per axis; rerun with --params equal to dims")
            s = multiparam_lusin(f)
            out["tail_bound"] = None
        out["norm"] = lp_norm(s, 1)
        return out

    top = args.K if args.K is not None else _default_top(f)
    out["top_scale"] = top
    if method == "dyadic-fixed":
        lat = _grouped(
            [DyadicLattice1D(f.mesh_exponent, top, 0) for _ in range(f.dim)], params
        )
        rep = fixed_h1_norm(f, lat)
        out.update(norm=rep.norm, tail_bound=rep.tail_bound)
        return out
    if method == "randomized-exact":
        rep = randomized_h1_norm(f, top, "exact", one_parameter=(params == 1))
        out.update(norm=rep.norm, tail_bound=rep.tail_bound, n_shifts=rep.n_samples)
        return out
    # randomized-mc: report the norm of the estimated mean square plus a
    # first-order (delta method) standard error for the integrated norm
    seed = 0 if args.seed is None else args.seed
    n = args.samples or 4096
    mean = randomized_square_mean(
        f, top, "mc", n_samples=n, seed=seed, one_parameter=(params == 1)
    )
    root = mean.root()
    se_int = np.zeros_like(mean.se_sq.values)
    pos = root.values > 0
    se_int[pos] = mean.se_sq.values[pos] / (2.0 * root.values[pos])
    out.update(
        norm=lp_norm(root, 1),
        norm_se=float(se_int.sum()) * root.cell_volume,
        n_samples=n,
        seed=seed,
        tail_bound=truncation_tail_bound(f, top),
    )
    return out


def cmd_bmo_norm(args) -> dict:
    f = load_signal(args.signal)
    method = args.method or "all"
    if method == "all":
        rep = bmo_norm(f)
        return {"method": "all", "report": rep.to_dict()}
    if method != "dyadic":
        raise ValueError(f"method must be all or dyadic, got {method!r}")
    top = args.K if args.K is not None else _default_top(f)
    lat = _grouped(_axis_lattices(f, top, args.seed), 1)
    rep = bmo_norm(f, lat)
    lats = [lat] if isinstance(lat, DyadicLattice1D) else list(lat.factors)
    return {
        "method": "dyadic",
        "lattice": [_lattice_dict(l) for l in lats],
        "report": rep.to_dict(),
    }


def cmd_kernel_check(args) -> dict:
    m = args.m if args.m is not None else KERNEL_DEFAULT_M
    top = args.K if args.K is not None else KERNEL_DEFAULT_K
    fam = enumerate_shifts(m, top)

    y = KERNEL_SIZE_Y
    size_fit = decay_fit(
        KERNEL_SIZE_DISTANCES, [kernel_norm(fam, y, y + d) for d in KERNEL_SIZE_DISTANCES]
    )
    y, x0 = KERNEL_DX_BASE
    dx_fit = decay_fit(
        KERNEL_DX_SWEEP,
        [kernel_smoothness(fam, y, x0 + dx, x0) ** 2 for dx in KERNEL_DX_SWEEP],
    )
    dx = KERNEL_DY_DX
    dy_fit = decay_fit(
        KERNEL_DY_SWEEP,
        [kernel_smoothness(fam, y, y + d + dx, y + d) ** 2 for d in KERNEL_DY_SWEEP],
    )
    return {
        "mesh_exponent": m,
        "top_scale": top,
        "n_shifts": len(fam),
        "size_fit": size_fit.to_dict(),
        "smoothness_dx_fit": dx_fit.to_dict(),
        "smoothness_dy_fit": dy_fit.to_dict(),
    }


def cmd_seqspace_check(args) -> dict:
    if args.signal is not None:
        f = load_signal(args.signal)
    else:
        f = make_grid_function(np.r_[np.ones(4), -np.ones(4)], -3)
    if f.dim != 1:
        raise ValueError("seqspace-check runs on one-axis signals")
    top = args.K if args.K is not None else _default_top(f)
    (lat,) = _axis_lattices(f, top, args.seed)
    a, b = sequences_a_b(f, lat)
    norm_a = tl_norm(a, 0.0, 2.0, 1.0)
    norm_b = tl_norm(b, 0.0, 2.0, 1.0)
    t_abs_b, dropped = apply_children_sum_T(b.absolute())
    worst = 0.0
    for cell, v in a.entries.items():
        worst = max(worst, v - t_abs_b.entries.get(cell, 0.0))
    ad = None
    if a.entries:
        ident = CubeMatrix(lat, {(c, c): 1.0 for c in a.entries})
        ad = almost_diagonal_constant(ident, 1.0)
    return {
        "lattice": _lattice_dict(lat),
        "tl_norm_a": norm_a,
        "tl_norm_b": norm_b,
        "averaged_square_l1": lp_norm(averaged_square_function(f, lat), 1),
        "plain_square_l1": lp_norm(square_function(f, lat), 1),
        "chain_max_violation": worst,
        "children_sum_dropped": dropped,
        "ad_constant_identity": ad,
    }


def _base_atoms(m: int) -> list[tuple[str, GridFunction]]:
    h = 2.0**m
    haar = np.r_[np.ones(4), -np.ones(4)] / (8 * h)
    wave = np.array([1.0, 3.0, 3.0, 1.0, -1.0, -3.0, -3.0, -1.0]) / (16 * h)
    return [
        ("haar", make_grid_function(haar, m)),
        ("wave", make_grid_function(wave, m)),
    ]


def _dilate(f: GridFunction, j: int) -> GridFunction:
    # x -> 2^j x with L^1 normalization: same cell layout on a 2^j-finer
    # mesh, values scaled by 2^j
    return GridFunction(f.box, f.mesh_exponent - j, f.values * float(2**j))


def _atom_norm(f: GridFunction, method: str, window: int, args, stream: int) -> float:
    top = f.mesh_exponent + window
    if method == "lusin":
        return lp_norm(lusin_square_function(f), 1)
    if method == "dyadic-fixed":
        return fixed_h1_norm(f, DyadicLattice1D(f.mesh_exponent, top, 0)).norm
    if method == "randomized-exact":
        return randomized_h1_norm(f, top, "exact").norm
    if method == "randomized-mc":
        seed = 0 if args.seed is None else args.seed
        n = args.samples or 4096
        mean = randomized_square_mean(f, top, "mc", n_samples=n, seed=seed, stream=stream)
        return lp_norm(mean.root(), 1)
    raise ValueError(f"method must be one of {H1_METHODS}, got {method!r}")


def cmd_equivalence_experiment(args) -> dict:
    m = args.m if args.m is not None else -4
    top = args.K if args.K is not None else m + 4
    window = top - m
    if window < 1:
        raise ValueError(f"top scale {top} leaves no scales above mesh {m}")
    methods = [s.strip() for s in (args.method or "randomized-exact,lusin").split(",")]
    n_translates, n_dilates = 4, 3

    rows = []
    atom_id = 0
    for base_name, base in _base_atoms(m):
        n0 = base.box.extent[0]
        for jt in range(n_translates):
            shifted = make_grid_function(base.values, m, origin=(jt * n0,))
            for jd in range(n_dilates):
                atom = _dilate(shifted, jd)
                for method in methods:
                    rows.append(
                        {
                            "atom": atom_id,
                            "base": base_name,
                            "translate": jt,
                            "dilate": jd,
                            "mesh_exponent": atom.mesh_exponent,
                            "method": method,
                            "norm": _atom_norm(atom, method, window, args, atom_id),
                        }
                    )
                atom_id += 1

    summary = {"methods": methods, "n_atoms": atom_id}
    if len(methods) >= 2:
        m0, m1 = methods[0], methods[1]
        by_atom: dict = {}
        for r in rows:
            by_atom.setdefault(r["atom"], {})[r["method"]] = r["norm"]
        ratios = [v[m0] / v[m1] for v in by_atom.values() if v.get(m1)]
        summary["ratio_min"] = min(ratios)
        summary["ratio_max"] = max(ratios)
        summary["ratio_spread"] = max(ratios) / min(ratios)
    spread = 0.0
    orbit: dict = {}
    for r in rows:
        orbit.setdefault((r["base"], r["dilate"], r["method"]), []).append(r["norm"])
    for vals in orbit.values():
        mean = sum(vals) / len(vals)
        if mean > 0:
            spread = max(spread, max(abs(v - mean) for v in vals) / mean)
    summary["translate_spread_max"] = spread
    return {"rows": rows, "summary": summary}


def _equivalence_csv(results: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "atom", "base", "translate", "dilate", "mesh_exponent", "method", "value"])
    for r in results["rows"]:
        w.writerow(
            [
                "result",
                r["atom"],
                r["base"],
                r["translate"],
                r["dilate"],
                r["mesh_exponent"],
                r["method"],
                repr(r["norm"]),
            ]
        )
    for key in ("ratio_min", "ratio_max", "ratio_spread", "translate_spread_max"):
        if key in results["summary"]:
            w.writerow(["summary", "", "", "", "", "", key, repr(results["summary"][key])])
    return buf.getvalue()


COMMANDS = {
    "sample-lattice": cmd_sample_lattice,
    "square-function": cmd_square_function,
    "h1-norm": cmd_h1_norm,
    "bmo-norm": cmd_bmo_norm,
    "kernel-check": cmd_kernel_check,
    "seqspace-check": cmd_seqspace_check,
    "equivalence-experiment": cmd_equivalence_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyadlab",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, doc, signal=None):
        p = sub.add_parser(name, help=doc, description=doc)
        if signal == "required":
            p.add_argument("signal", help="grid-function JSON file")
        elif signal == "optional":
            p.add_argument("signal", nargs="?", default=None, help="grid-function JSON file")
        p.add_argument("--seed", type=int, default=None, help="random seed (named streams)")
        p.add_argument("--m", type=int, default=None, help="mesh exponent")
        p.add_argument("--K", type=int, default=None, help="top scale")
        p.add_argument("--dims", type=int, default=None, help="axis count")
        p.add_argument("--params", type=int, default=None, help="parameter groups: 1 or dims")
        p.add_argument("--method", type=str, default=None, help="method name (or comma list)")
        p.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
        p.add_argument("--out", type=str, default=None, help="write the report here")
        p.add_argument(
            "--format", choices=("json", "csv"), default=None, help="report format"
        )
        return p

    add("sample-lattice", "draw a random lattice (uniform shift) and print it")
    add("square-function", "martingale square function of a signal", signal="required")
    add("h1-norm", "H^1 norm of a signal by the chosen reading", signal="required")
    add("bmo-norm", "mean-oscillation norm, full cube scan or one lattice", signal="required")
    add("kernel-check", "kernel size/smoothness decay exponents (log-log fits)")
    add("seqspace-check", "coefficient-sequence norms and identities", signal="optional")
    add("equivalence-experiment", "atom-family norms across methods with ratio summary")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # in-process callers get a return code
        return int(exc.code or 0)
    if args.command == "sample-lattice":
        if args.seed is None or args.m is None or args.K is None:
            print("error: sample-lattice needs --seed, --m and --K", file=sys.stderr)
            return 2
    started = time.perf_counter()
    try:
        results = COMMANDS[args.command](args)
    except SizeLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except json.JSONDecodeError as exc:
        print(f"error: cannot parse signal: {exc.msg} at byte {exc.pos}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    fmt = args.format or ("csv" if args.command == "equivalence-experiment" else "json")
    if fmt == "csv" and args.command == "equivalence-experiment":
        text = _equivalence_csv(results)
    else:
        report = {
            "command": args.command,
            "seed": args.seed,
            "config": {
                k: v
                for k, v in vars(args).items()
                if k not in ("command", "out", "format") and v is not None
            },
            "results": _jsonable(results),
            "wall_time_s": time.perf_counter() - started,
        }
        if fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["key", "value"])
            for key, value in _flat_rows(report["results"]):
                w.writerow([key, value])
            text = buf.getvalue()
        else:
            text = json.dumps(report, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
