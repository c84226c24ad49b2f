"""Command-line front end: JSON in, JSON reports out.

Exit codes: 0 on success, 1 on input errors, 2 when a verification fails.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import classical, jsonio, quantum, thermo, typicality
from .errors import CatalyticError, DegenerateTruncation, DimensionCapExceeded, SchemaError
from .report import DISTANCE_SLACK
from .majorization import diagonal_residual, majorizes, partial_sums, schur_horn_unitary
from .statekit import (
    CAP_ENV_VAR,
    as_state,
    dimension_caps,
    entropy,
    surprisal_variance,
)

SUBCOMMANDS = (
    "entropy",
    "majorize",
    "schur-horn",
    "typical",
    "classical-transition",
    "quantum-transition",
    "verify",
    "work",
    "size-estimate",
)
EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 1, 2
SPARSE_LIMIT = 4096
DUMP_JOINT_LIMIT = 256


@dataclass
class RunConfig:
    subcommand: str
    input_path: str | None = None
    output_path: str | None = None
    epsilon: float | None = None
    forced_n: int | None = None
    seed: int | None = None
    dimension_cap_override: int | None = None
    timings: bool = False
    dump_path: str | None = None
    golden: str | None = None
    mode: str = "auto"

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        if self.epsilon is not None and self.forced_n is not None:
            raise ValueError("--epsilon and --n are mutually exclusive")


# --------------------------------------------------------------------------
# input helpers
# --------------------------------------------------------------------------


def _load(config: RunConfig):
    if config.golden:
        return jsonio.load_golden(f"three_level_{config.golden}")
    if config.input_path in (None, "-"):
        text = sys.stdin.read()
    else:
        with open(config.input_path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc.msg} at line {exc.lineno} column {exc.colno})") from None


def _field(data, key, path="$"):
    if not isinstance(data, dict):
        raise SchemaError("expected a JSON object", path)
    if key not in data:
        raise SchemaError(f'missing field "{key}"', path)
    return data[key]


def _state(data, key):
    return as_state(jsonio.state_from_json(_field(data, key), f"$.{key}"))


def _number(data, key, cast=float, default=None):
    if not isinstance(data, dict) or data.get(key) is None:
        return default
    try:
        return cast(data[key])
    except (TypeError, ValueError):
        raise SchemaError(f"expected a number for {key}", f"$.{key}") from None


def _epsilon_and_n(config: RunConfig, data):
    eps = config.epsilon if config.epsilon is not None else None
    n = config.forced_n if config.forced_n is not None else None
    if eps is None and n is None:
        eps = _number(data, "epsilon")
        n = _number(data, "n", int)
    if eps is not None and n is not None and config.epsilon is None and config.forced_n is None:
        raise SchemaError('give either "epsilon" or "n", not both')
    if eps is None and n is None:
        raise SchemaError('a transition needs "epsilon" or "n" (or --epsilon / --n)')
    return eps, n


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _cmd_entropy(config, data):
    state = _state(data, "state") if isinstance(data, dict) else as_state(jsonio.state_from_json(data))
    kind = "classical" if state.ndim == 1 else "quantum"
    return {
        "H": entropy(state),
        "units": "nats",
        "kind": kind,
        "dim": int(state.shape[0]),
        "surprisal_variance": surprisal_variance(state),
    }, EXIT_OK


def _spectrum_of(state):
    return state if state.ndim == 1 else typicality.spectral_data(state)[0]


def _cmd_majorize(config, data):
    p = _spectrum_of(_state(data, "p"))
    pp = _spectrum_of(_state(data, "p_prime"))
    return {
        "forward": majorizes(p, pp),
        "backward": majorizes(pp, p),
        "delta_H": entropy(pp) - entropy(p),
        "partial_sums": {"p": partial_sums(p).tolist(), "p_prime": partial_sums(pp).tolist()},
    }, EXIT_OK


def _cmd_schur_horn(config, data):
    omega = _state(data, "omega")
    omega_prime = _state(data, "omega_prime")
    plan = schur_horn_unitary(omega, omega_prime)
    unit = plan.unitarity_residual()
    diag = diagonal_residual(plan, omega, omega_prime)
    ok = unit <= 1e-9 and diag <= 1e-9
    return {
        "plan": jsonio.plan_to_json(plan),
        "chain_length": len(plan.steps),
        "unitarity_residual": unit,
        "diagonal_residual": diag,
        "pass": ok,
    }, EXIT_OK if ok else EXIT_VERIFY


def _cmd_typical(config, data):
    state = _state(data, "state")
    n = config.forced_n if config.forced_n is not None else _number(data, "n", int)
    delta = _number(data, "delta")
    if n is None or delta is None:
        raise SchemaError('typical needs "n" and "delta"')
    try:
        t = typicality.typical_truncate(state, n, delta)
        method = "tuples"
    except DimensionCapExceeded:
        t = typicality.typical_type_classes(state, n, delta)
        method = "type-classes"
    lower, upper, count = typicality.projector_size_bounds(t)
    out = {
        "n": n,
        "delta": delta,
        "method": method,
        "entropy": t.entropy,
        "kept_count": count,
        "tail_mass": t.tail_mass,
        "hoeffding_bound": t.hoeffding(),
        "size_bounds": {"lower": lower, "upper": upper},
    }
    if method == "tuples" and count <= SPARSE_LIMIT:
        out["kept"] = [{"tuple": tup, "p": v} for tup, v in t.to_sparse()]
    return out, EXIT_OK


def _with_fallback(build, eps, n):
    """Build at the requested accuracy, else at the largest copy number that fits."""
    try:
        return build(eps, n), "epsilon" if n is None else "forced", None
    except DimensionCapExceeded as exc:
        if n is not None or exc.max_n is None:
            raise
        best = exc.best_epsilon
        for m in range(exc.max_n, 0, -1):
            try:
                return build(None, m), "fallback", best
            except (DimensionCapExceeded, DegenerateTruncation):
                continue
        raise


def _check_requested(report, eps) -> None:
    # a fallback construction can pass at its certified error yet miss the request
    if eps is not None:
        report.checks["meets_requested_epsilon"] = bool(report.output_distance <= eps + DISTANCE_SLACK)


def _construction_info(target, n, perturbation, selection, best, eps):
    info = {"n": n, "n_selection": selection, "perturbation": perturbation}
    if eps is not None:
        info["epsilon_requested"] = eps
    if best is not None:
        info["best_certified_epsilon_under_cap"] = best
    if target is not None:
        info.update(
            {
                "mode": target.mode,
                "delta": target.delta,
                "epsilon_achieved_joint": target.epsilon_achieved,
                "chain_length": len(target.steps),
            }
        )
    return info


def _cmd_classical(config, data):
    p = _state(data, "p")
    pp = _state(data, "p_prime")
    eps, n = _epsilon_and_n(config, data)
    mode = data.get("mode", config.mode) if isinstance(data, dict) else config.mode

    def build(e, m):
        return classical.build_classical_catalyst(p, pp, epsilon=e, n=m, mode=mode)

    (cat, perm), selection, best = _with_fallback(build, eps, n)
    _, report = classical.apply_protocol(p, cat, perm, epsilon_claim=eps or 0.0)
    _check_requested(report, eps)
    out = report.to_dict(timings=config.timings)
    out["construction"] = _construction_info(cat.target, cat.n, cat.perturbation, selection, best, eps)
    out["construction"]["mixture_terms"] = len(cat.mixture)
    if config.dump_path:
        _write(
            config.dump_path,
            {
                "p": cat.p,
                "p_prime": cat.p_prime,
                "q": cat.q,
                "epsilon": cat.epsilon_certified,
                "layout": jsonio.layout_to_json(cat.joint_layout),
                "catalyst_layout": jsonio.layout_to_json(cat.layout),
                "permutation": perm.composed,
                "mixture": jsonio.mixture_to_json(cat.mixture),
            },
        )
    return out, EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_quantum(config, data):
    rho = _state(data, "rho")
    rp = _state(data, "rho_prime")
    eps, n = _epsilon_and_n(config, data)
    mode = data.get("mode", config.mode) if isinstance(data, dict) else config.mode

    def build(e, m):
        return quantum.build_quantum_catalyst(rho, rp, epsilon=e, n=m, mode=mode)

    cat, selection, best = _with_fallback(build, eps, n)
    _, report = quantum.apply_quantum_protocol(rho, cat, epsilon_claim=eps or 0.0)
    _check_requested(report, eps)
    out = report.to_dict(timings=config.timings)
    out["construction"] = _construction_info(cat.target, cat.n, cat.perturbation, selection, best, eps)
    if config.dump_path:
        dump = {
            "rho": jsonio.matrix_to_json(cat.rho),
            "rho_prime": jsonio.matrix_to_json(cat.rho_prime),
            "epsilon": cat.epsilon_certified,
            "sigma1": jsonio.matrix_to_json(cat.sigma1),
            "sigma2": jsonio.matrix_to_json(cat.sigma2),
            "W": jsonio.matrix_to_json(cat.w()),
            "V_dephase": jsonio.matrix_to_json(cat.v_dephase),
            "joint_layout": jsonio.layout_to_json(cat.layout),
        }
        # the joint form doubles as input for `verify`
        if cat.layout.total <= DUMP_JOINT_LIMIT:
            dump["sigma"] = jsonio.matrix_to_json(cat.sigma)
            dump["unitary"] = jsonio.matrix_to_json(cat.joint_unitary())
        _write(config.dump_path, dump)
    return out, EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_verify(config, data):
    eps = config.epsilon if config.epsilon is not None else (_number(data, "epsilon") or 0.0)
    if isinstance(data, dict) and "rho" in data:
        rho = _state(data, "rho")
        rp = _state(data, "rho_prime")
        sigma = _state(data, "sigma")
        u = jsonio.matrix_from_json(_field(data, "unitary"), "$.unitary")
        report = quantum.verify_transition(rho, rp, quantum.ExplicitCatalyst(sigma, u), eps)
    else:
        p = _state(data, "p")
        pp = _state(data, "p_prime")
        q = _state(data, "q")
        perm = np.asarray(_field(data, "permutation"), dtype=np.int64)
        if "layout" in data:
            layout = jsonio.layout_from_json(data["layout"], "$.layout")
        else:
            layout = jsonio.layout_from_json({"dims": [p.size, q.size], "labels": ["S1", "C"]})
        joint_in = np.kron(p, q)
        if perm.shape != joint_in.shape or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise SchemaError("permutation must be a bijection on the joint index set", "$.permutation")
        joint_out = np.empty_like(joint_in)
        joint_out[perm] = joint_in
        report = classical.verify_catalytic(joint_in, joint_out, layout, pp, eps)
    out = report.to_dict(timings=config.timings)
    return out, EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_work(config, data):
    h = jsonio.matrix_from_json(_field(data, "H"), "$.H")
    rho = _state(data, "rho")
    if rho.ndim == 1:
        rho = np.diag(rho).astype(complex)
    samples = _number(data, "samples", int, 1000)
    seed = config.seed if config.seed is not None else _number(data, "seed", int, 0)
    return thermo.work_report(rho, h, samples=samples, seed=seed), EXIT_OK


def _cmd_size_estimate(config, data):
    eps = config.epsilon if config.epsilon is not None else _number(data, "epsilon")
    if eps is None:
        raise SchemaError('size-estimate needs "epsilon" (or --epsilon)')
    if isinstance(data, dict) and "p" in data:
        p = _spectrum_of(_state(data, "p"))
        pp = _spectrum_of(_state(data, "p_prime"))
        dh = entropy(pp) - entropy(p)
        spread, spread_p, d = typicality.surprisal_spread(p), typicality.surprisal_spread(pp), p.size
    else:
        dh = _number(data, "delta_H")
        spread = _number(data, "spread")
        if dh is None or spread is None:
            raise SchemaError('size-estimate needs "p" and "p_prime", or "delta_H" and "spread"')
        spread_p = _number(data, "spread_prime", float, spread)
        d = _number(data, "d", int, 2)
    est = typicality.size_estimate(dh, eps, spread, d, spread_p)
    # exact integers beyond 64 bits make unreadable JSON; keep the logs instead
    if est["catalyst_dim_estimate"] >= 2**63:
        est["catalyst_dim_estimate"] = None
    est.update({"delta_H": dh, "epsilon": eps, "spread": spread, "spread_prime": spread_p, "d": d})
    return est, EXIT_OK


HANDLERS = {
    "entropy": _cmd_entropy,
    "majorize": _cmd_majorize,
    "schur-horn": _cmd_schur_horn,
    "typical": _cmd_typical,
    "classical-transition": _cmd_classical,
    "quantum-transition": _cmd_quantum,
    "verify": _cmd_verify,
    "work": _cmd_work,
    "size-estimate": _cmd_size_estimate,
}


# --------------------------------------------------------------------------
# entry points
# --------------------------------------------------------------------------


def _write(path, obj) -> None:
    text = jsonio.dumps(obj)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def run(config: RunConfig) -> int:
    t0 = time.perf_counter()
    cap = config.dimension_cap_override
    try:
        with dimension_caps(classical=cap, quantum=cap):
            data = _load(config)
            report, code = HANDLERS[config.subcommand](config, data)
    except (CatalyticError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if config.timings and isinstance(report, dict):
        report.setdefault("timings", {})["total"] = time.perf_counter() - t0
    _write(config.output_path, report)
    return code


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", "-i", help="input JSON file ('-' or omitted for stdin)")
    common.add_argument("--output", "-o", help="report file (stdout when omitted)")
    group = common.add_mutually_exclusive_group()
    group.add_argument("--epsilon", type=float, help="target accuracy")
    group.add_argument("--n", type=int, help="force the copy number")
    common.add_argument("--seed", type=int, help="seed for sampling steps")
    common.add_argument(
        "--cap", type=int, help=f"dimension cap for dense objects (default from ${CAP_ENV_VAR} or built-in)"
    )
    common.add_argument("--timings", action="store_true", help="include wall-clock timings (not byte-stable)")
    common.add_argument("--dump", help="write constructed catalyst and operations to this JSON file")
    common.add_argument("--mode", default="auto", choices=typicality.MODES, help="majorized-target strategy")

    parser = _Parser(prog="catalytic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "verify":
            p.add_argument("--golden", choices=("quantum", "classical"), help="verify a bundled golden example")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = RunConfig(
        subcommand=args.subcommand,
        input_path=args.input,
        output_path=args.output,
        epsilon=args.epsilon,
        forced_n=args.n,
        seed=args.seed,
        dimension_cap_override=args.cap,
        timings=args.timings,
        dump_path=args.dump,
        golden=getattr(args, "golden", None),
        mode=args.mode,
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
