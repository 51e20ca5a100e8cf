"""Command-line front end: file-based, reproducible certificate and verification runs.

Exit codes: 0 success, 1 malformed input, 2 infeasible computation
(enumeration cap exceeded, or a method that needs a mixing time when the
chain has none), 3 verification failure (an empirical quantity exceeded its
certified bound beyond Monte Carlo error). Code 3 is the highest-severity
outcome: it means the theory the certificate encodes was falsified.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .chain import ChainSpec, Distribution, chain_from_dict, tv_distance
from .concentration import (
    CONVENTION_CAVEAT,
    LipschitzWeights,
    TabularFunction,
    certify,
    gamma_contractive,
    gamma_ergodic,
    mixing_time,
)
from .coupling import goldstein_coupling, wasserstein_matrix_tv
from .errors import (
    ChainconcError,
    ConvergenceError,
    EnumerationCapError,
    NoMixError,
    ValidationError,
)
from .rl import (
    HammingMetric,
    MixingTimeMetric,
    dudley_bound,
    enumerate_policies,
    exact_value,
    finite_state_bound,
    induced_chain,
    maximal_bound,
    mdp_from_dict,
    policy_to_dict,
)
from .verify import empirical_sup_value, empirical_tail

EXIT_OK = 0
EXIT_MALFORMED = 1
EXIT_INFEASIBLE = 2
EXIT_VIOLATION = 3

POLICY_COUNT_CAVEAT = (
    "the maximal inequality uses the exact policy count |Pi| = A^S; the "
    "finite-state formulas take log(S*A) verbatim, which differs whenever "
    "ln|Pi| != ln(S*A)"
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; keep 2 reserved for infeasibility
    def error(self, message):
        self.exit(EXIT_MALFORMED, f"{self.prog}: error: {message}\n")


def _meta(args: argparse.Namespace) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None}
    return {"tool": "chainconc", "version": __version__, "config": config}


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError(f"input file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _csv_path(path: str) -> str:
    base, _ = os.path.splitext(path)
    return base + ".csv"


def _load_weights(doc: dict, spec: ChainSpec) -> LipschitzWeights:
    if "weights" in doc:
        w = LipschitzWeights.from_array(doc["weights"])
        if len(w) != spec.n:
            raise ValidationError(f"weights length {len(w)} does not match chain length {spec.n}")
        return w
    return LipschitzWeights.ones(spec.n)


def _load_function(doc: dict, spec: ChainSpec, cap: int | None) -> TabularFunction:
    if "function" not in doc:
        raise ValidationError('verification input needs a "function" field')
    f = doc["function"]
    if isinstance(f, list):
        values = np.asarray(f, dtype=float)
        if values.size != spec.joint_size():
            raise ValidationError(
                f"function table has {values.size} entries, joint space has {spec.joint_size()}"
            )
        return TabularFunction(values)
    if isinstance(f, dict) and f.get("name") == "indicator_count":
        value = int(f.get("value", 1))
        return TabularFunction.from_vectorized(
            spec, lambda grids: sum((g == value).astype(float) for g in grids), cap=cap
        )
    if isinstance(f, dict) and f.get("name") == "coordinate_sum":
        return TabularFunction.from_vectorized(
            spec, lambda grids: sum(g.astype(float) for g in grids), cap=cap
        )
    raise ValidationError(
        'function must be a flat value table or {"name": "indicator_count"|"coordinate_sum", ...}'
    )


# ---------------------------------------------------------------------------
# subcommands


def _cmd_certify(args) -> int:
    doc = _read_json(args.input)
    spec = chain_from_dict(doc)
    weights = _load_weights(doc, spec)
    report = certify(spec, weights, args.method, eps=args.eps,
                     convention=args.convention, cap=args.cap)
    out = {"meta": _meta(args), "report": report.to_dict()}
    _write_json(args.output, out)
    _write_text(_csv_path(args.output), report.tail_curve_csv())
    print(f"certified sigma2_{report.convention} = {report.sigma2_selected!r} "
          f"(method {report.method}); wrote {args.output}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    doc = _read_json(args.input)
    spec = chain_from_dict(doc)
    f = _load_function(doc, spec, args.cap)
    if args.certificate:
        cert = _read_json(args.certificate)
        report = cert.get("report", cert)
        key = f"sigma2_{args.convention}"
        if key not in report:
            raise ValidationError(f"certificate has no {key} field")
        sigma2 = float(report[key])
    else:
        weights = _load_weights(doc, spec)
        sigma2 = getattr(
            certify(spec, weights, args.method, eps=args.eps,
                    convention=args.convention, cap=args.cap),
            f"sigma2_{args.convention}",
        )
    est = empirical_tail(spec, f, sigma2, replicates=args.replicates, seed=args.seed,
                         cap=args.cap)
    out = {"meta": _meta(args), "convention": args.convention,
           "caveats": [CONVENTION_CAVEAT], "tail": est.to_dict()}
    _write_json(args.output, out)
    _write_text(_csv_path(args.output), est.to_csv())
    bad = est.violations()
    if bad:
        worst = max(bad, key=lambda i: est.empirical[i] - est.bound[i])
        print(f"VIOLATION: empirical tail exceeds bound + 2 SE at t = {est.t_grid[worst]!r} "
              f"({est.empirical[worst]!r} > {est.bound[worst]!r} + 2*{est.standard_errors[worst]!r})")
        return EXIT_VIOLATION
    print(f"verified: no tail violation at any of {est.t_grid.size} grid points; "
          f"wrote {args.output}")
    return EXIT_OK


def _cmd_coupling(args) -> int:
    doc = _read_json(args.input)
    try:
        p = Distribution.from_array(doc["p"], where="p")
        q = Distribution.from_array(doc["q"], where="q")
    except KeyError as exc:
        raise ValidationError(f'coupling input needs "p" and "q": {exc}') from exc
    table = goldstein_coupling(p, q)
    tv = tv_distance(p, q)
    out = {
        "meta": _meta(args),
        "coupling": table.to_dict(),
        "tv_distance": tv,
        "off_diagonal_mass": table.off_diagonal_mass(),
        "max_marginal_error": float(
            max(np.abs(table.row_marginal() - p.probs).max(),
                np.abs(table.col_marginal() - q.probs).max())
        ),
    }
    _write_json(args.output, out)
    print(f"coupling off-diagonal mass {table.off_diagonal_mass()!r} vs TV {tv!r}; "
          f"wrote {args.output}")
    return EXIT_OK


def _cmd_mix(args) -> int:
    spec = chain_from_dict(_read_json(args.input))
    tau = mixing_time(spec, args.eps)
    out = {"meta": _meta(args), "eps": args.eps, "tau": tau, "no_mix": tau is None}
    _write_json(args.output, out)
    print("no-mix" if tau is None else f"tau({args.eps}) = {tau}")
    return EXIT_OK


def _cmd_gamma(args) -> int:
    doc = _read_json(args.input)
    if args.method == "contractive":
        if "thetas" in doc:
            g = gamma_contractive(doc["thetas"])
        else:
            spec = chain_from_dict(doc)
            from .chain import dobrushin_coefficient

            g = gamma_contractive([dobrushin_coefficient(k) for k in spec.kernels])
    elif args.method == "ergodic":
        if args.eps is None:
            raise ValidationError("ergodic gamma requires --eps")
        if "n_blocks" in doc:
            g = gamma_ergodic(int(doc["n_blocks"]), args.eps)
        else:
            spec = chain_from_dict(doc)
            tau = mixing_time(spec, args.eps)
            if tau is None:
                raise NoMixError(f"chain does not mix to eps = {args.eps}")
            g = gamma_ergodic(-(-spec.n // tau), args.eps)
    else:
        spec = chain_from_dict(doc)
        g = wasserstein_matrix_tv(spec, cap=args.cap)
    out = {"meta": _meta(args), "gamma": g.to_dict()}
    _write_json(args.output, out)
    print(f"gamma ({g.provenance}) of size {g.n}; wrote {args.output}")
    return EXIT_OK


def _rl_metric(args, mdp):
    if args.metric == "mixing":
        return MixingTimeMetric(mdp, args.eps)
    return HammingMetric()


def _rl_report(args, mdp) -> dict:
    pc = enumerate_policies(mdp.n_states, mdp.n_actions, metric=_rl_metric(args, mdp))
    per_policy = []
    sigma2_max = 0.0
    taus = []
    for pi in pc.policies:
        chain_spec = induced_chain(mdp, pi)
        report = certify(chain_spec, LipschitzWeights(mdp.stage_caps), args.method,
                         eps=args.eps, convention=args.convention, cap=args.cap)
        tau = mixing_time(chain_spec, args.eps)
        taus.append(mdp.horizon if tau is None else tau)
        sigma2_max = max(sigma2_max, getattr(report, f"sigma2_{args.convention}"))
        per_policy.append({
            "policy": policy_to_dict(pi),
            "sigma2_exact": report.sigma2_exact,
            "sigma2_opnorm": report.sigma2_opnorm,
            "sigma2_paper": report.sigma2_paper,
            "tau": tau,
            "expected_value": exact_value(mdp, pi),
        })
    tau_mix = max(taus)
    class_size = len(pc)
    sa = mdp.n_states * mdp.n_actions
    bounds = {
        "sigma2_max": sigma2_max,
        "maximal": maximal_bound(sigma2_max, class_size),
        "dudley": dudley_bound(pc, scale=args.scale),
        "finite_state_max_mix": finite_state_bound(mdp.horizon, tau_mix, mdp.n_states,
                                                   mdp.n_actions, "max_mix"),
        "finite_state_union": finite_state_bound(mdp.horizon, tau_mix, mdp.n_states,
                                                 mdp.n_actions, "union"),
        "tau_mix": tau_mix,
        "class_size": class_size,
        "state_action_count": sa,
        "log_count_mismatch": class_size != sa,
    }
    caveats = [CONVENTION_CAVEAT, POLICY_COUNT_CAVEAT]
    if any(t == mdp.horizon for t in taus):
        caveats.append("some policies never mix within the horizon; tau = H used as surrogate")
    return {"meta": _meta(args), "metric": args.metric, "per_policy": per_policy,
            "bounds": bounds, "caveats": caveats}


def _cmd_rl_bound(args) -> int:
    mdp = mdp_from_dict(_read_json(args.input))
    out = _rl_report(args, mdp)
    _write_json(args.output, out)
    b = out["bounds"]
    print(f"|Pi| = {b['class_size']}, sigma2_max = {b['sigma2_max']!r}, "
          f"maximal = {b['maximal']!r}, dudley = {b['dudley']!r}; wrote {args.output}")
    return EXIT_OK


def _cmd_rl_verify(args) -> int:
    mdp = mdp_from_dict(_read_json(args.input))
    out = _rl_report(args, mdp)
    pc = enumerate_policies(mdp.n_states, mdp.n_actions, metric=_rl_metric(args, mdp))
    est = empirical_sup_value(mdp, pc, replicates=args.replicates, seed=args.seed)
    out["empirical_sup"] = est.to_dict()
    _write_json(args.output, out)
    bound = out["bounds"]["maximal"]
    slack = bound + 2.0 * est.standard_error - est.estimate
    if slack < 0:
        print(f"VIOLATION: empirical E sup = {est.estimate!r} exceeds maximal bound "
              f"{bound!r} + 2 SE")
        return EXIT_VIOLATION
    print(f"empirical E sup = {est.estimate!r} <= maximal bound {bound!r} (+2 SE slack "
          f"{slack!r}); wrote {args.output}")
    return EXIT_OK


def _cmd_demo(args) -> int:
    """End-to-end worked example on the two-state demo chain."""
    os.makedirs(args.output, exist_ok=True)
    demo_doc = {"kernel": [[0.9, 0.1], [0.2, 0.8]], "n": 20, "initial": [0.5, 0.5]}
    spec = chain_from_dict(demo_doc)
    weights = LipschitzWeights.ones(spec.n)
    cap = args.cap if args.cap is not None else 2**21  # joint size 2^20 needs headroom

    cert = certify(spec, weights, "contractive", convention=args.convention, cap=cap)
    cert_path = os.path.join(args.output, "demo_certificate.json")
    _write_json(cert_path, {"meta": _meta(args), "chain": demo_doc, "report": cert.to_dict()})
    _write_text(_csv_path(cert_path), cert.tail_curve_csv())

    ergodic = certify(spec, weights, "ergodic", eps=0.25, convention=args.convention, cap=cap)
    _write_json(os.path.join(args.output, "demo_certificate_ergodic.json"),
                {"meta": _meta(args), "report": ergodic.to_dict()})

    f = TabularFunction.from_vectorized(
        spec, lambda grids: sum((g == 1).astype(float) for g in grids), cap=cap
    )
    est = empirical_tail(spec, f, cert.sigma2_selected, replicates=args.replicates,
                         seed=args.seed, cap=cap)
    tail_path = os.path.join(args.output, "demo_tail.json")
    _write_json(tail_path, {"meta": _meta(args), "convention": args.convention,
                            "caveats": [CONVENTION_CAVEAT], "tail": est.to_dict()})
    _write_text(_csv_path(tail_path), est.to_csv())

    tau = mixing_time(spec, 0.25)
    print(f"demo chain: n = {spec.n}, theta = 0.7, tau(0.25) = {tau}")
    print(f"sigma2_exact = {cert.sigma2_exact!r}, sigma2_opnorm = {cert.sigma2_opnorm!r}, "
          f"sigma2_paper = {cert.sigma2_paper!r}")
    print(f"ergodic-block sigma2_{args.convention} = {ergodic.sigma2_selected!r}")
    if est.violations():
        print("VIOLATION: empirical tail exceeded the certified bound")
        return EXIT_VIOLATION
    print(f"tail verification: no violation at any grid point; reports in {args.output}/")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, seeded: bool = False,
                out_default: str | None = None) -> None:
    p.add_argument("--output", default=out_default, help="output report path")
    p.add_argument("--cap", type=int, default=None,
                   help="enumeration cap override (also via CHAINCONC_CAP)")
    if seeded:
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--replicates", type=int, default=10**5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chainconc",
                     description="Concentration certificates for Markov chains, verified.")
    parser.add_argument("--version", action="version", version=f"chainconc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="chain + weights -> concentration certificate")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=["contractive", "ergodic", "brute"], default="contractive")
    p.add_argument("--convention", choices=["exact", "opnorm", "paper"], default="opnorm")
    p.add_argument("--eps", type=float, default=None, help="mixing level for the ergodic method")
    _add_common(p, out_default="certificate.json")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("verify", help="chain + function + certificate -> empirical tail check")
    p.add_argument("--input", required=True)
    p.add_argument("--certificate", default=None, help="certify output to check against")
    p.add_argument("--method", choices=["contractive", "ergodic", "brute"], default="contractive")
    p.add_argument("--convention", choices=["exact", "opnorm", "paper"], default="opnorm")
    p.add_argument("--eps", type=float, default=None)
    _add_common(p, seeded=True, out_default="tail.json")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("coupling", help="two distributions -> maximal coupling + TV check")
    p.add_argument("--input", required=True)
    _add_common(p, out_default="coupling.json")
    p.set_defaults(func=_cmd_coupling)

    p = sub.add_parser("mix", help="chain + eps -> mixing time")
    p.add_argument("--input", required=True)
    p.add_argument("--eps", type=float, required=True)
    _add_common(p, out_default="mix.json")
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("gamma", help="method + parameters -> Gamma matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=["contractive", "ergodic", "brute"], default="contractive")
    p.add_argument("--eps", type=float, default=None)
    _add_common(p, out_default="gamma.json")
    p.set_defaults(func=_cmd_gamma)

    p = sub.add_parser("rl-bound", help="MDP -> per-policy certificates + sup bounds")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=["contractive", "ergodic", "brute"], default="contractive")
    p.add_argument("--convention", choices=["exact", "opnorm", "paper"], default="opnorm")
    p.add_argument("--metric", choices=["hamming", "mixing"], default="hamming")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--scale", type=float, default=1.0, help="policy-metric scale for Dudley")
    _add_common(p, out_default="rl_bounds.json")
    p.set_defaults(func=_cmd_rl_bound)

    p = sub.add_parser("rl-verify", help="MDP -> empirical E sup vs certified bounds")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=["contractive", "ergodic", "brute"], default="contractive")
    p.add_argument("--convention", choices=["exact", "opnorm", "paper"], default="opnorm")
    p.add_argument("--metric", choices=["hamming", "mixing"], default="hamming")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--scale", type=float, default=1.0)
    _add_common(p, seeded=True, out_default="rl_verify.json")
    p.set_defaults(func=_cmd_rl_verify)

    p = sub.add_parser("demo", help="built-in two-state worked example, end to end")
    p.add_argument("--convention", choices=["exact", "opnorm", "paper"], default="opnorm")
    _add_common(p, seeded=True, out_default="chainconc-demo")
    p.set_defaults(func=_cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # normalize method aliases: the flag uses "brute", the library "brute_force"
    if getattr(args, "method", None) == "brute":
        args.method = "brute_force"
    try:
        return args.func(args)
    except (EnumerationCapError, NoMixError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, ConvergenceError, ChainconcError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
