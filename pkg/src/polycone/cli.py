"""Command-line front end: polycone <command> [options].

Exit codes: 0 success, 1 validation error, 2 certification failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import zlib

EXIT_OK, EXIT_INVALID, EXIT_CERT = 0, 1, 2


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_artifact(path, obj):
    text = dumps(obj)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {what} file {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{what} file {path!r} is not valid JSON: {exc}") from None


class ValidationError(Exception):
    pass


class CertificationFailure(Exception):
    def __init__(self, message, artifact=None):
        super().__init__(message)
        self.artifact = artifact


def sub_seed(master, label):
    """Module seed derived from the master seed and a fixed label."""
    import numpy as np

    ss = np.random.SeedSequence([int(master) & (2 ** 64 - 1), zlib.crc32(label.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def config_hash(config):
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def _config(args):
    # output locations do not change the result
    skip = {"func", "threads", "out", "out_p", "csv"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _stamp(obj, args):
    cfg = _config(args)
    obj["run"] = {"command": args.command, "seed": args.seed, "config": cfg, "config_hash": config_hash(cfg)}
    return obj


def _load_subspace(path):
    from .kernel import Subspace

    obj = read_json(path, "subspace")
    return Subspace.from_json(obj.get("subspace", obj))


def _check_ref(E, obj, path):
    ref = obj.get("basis_ref")
    if ref and ref != E.basis_ref():
        raise ValidationError(
            f"field 'basis_ref' of {path!r} is {ref}, but the subspace basis is {E.basis_ref()}"
        )


# -- commands ------------------------------------------------------------------


def cmd_subspace(args):
    from .kernel import Subspace, even_symmetric_sextics, full_space
    from .polyspace import HomogeneousPolynomial

    if args.family == "full":
        if args.n is None or args.d is None:
            raise ValidationError("--family full needs --n and --d")
        E = full_space(args.n, args.d)
    elif args.family == "sextic":
        if args.n is None:
            raise ValidationError("--family sextic needs --n")
        E = even_symmetric_sextics(args.n)
    else:
        if not args.generators:
            raise ValidationError("--family custom needs --generators FILE")
        gens = read_json(args.generators, "generators")
        if isinstance(gens, dict):
            gens = gens.get("generators", [])
        E = Subspace([HomogeneousPolynomial.from_json(g) for g in gens])
    out = {"subspace": E.to_json(), "basis_ref": E.basis_ref(), "n": E.n, "degree": E.two_d, "m": E.m}
    write_artifact(args.out, _stamp(out, args))
    return EXIT_OK


def cmd_build_det(args):
    from .polytope import build_deterministic

    E = _load_subspace(args.subspace)
    P, Q, bound = build_deterministic(E, args.epsilon, args.grid_size, sub_seed(args.seed, "build-det"),
                                      directions=args.directions)
    if args.out_p:
        write_artifact(args.out_p, _stamp(P.to_json(), args))
    write_artifact(args.out, _stamp(Q.to_json(), args))
    return EXIT_OK


def cmd_build_tensor(args):
    from .polytope import build_tensorized

    E = _load_subspace(args.subspace)
    eps = args.epsilon if args.epsilon is not None else 1.0 / (2.0 * math.e)
    Q, bound = build_tensorized(E, args.k, eps, args.grid_size, sub_seed(args.seed, "build-tensor"),
                                directions=args.directions)
    write_artifact(args.out, _stamp(Q.to_json(), args))
    return EXIT_OK


def cmd_build_random(args):
    from .polytope import build_random, default_sample_count

    E = _load_subspace(args.subspace)
    t = args.t if args.t is not None else default_sample_count(E.m, args.alpha)
    K, _ = build_random(E, args.alpha, t_override=t, M_bound=args.m_bound,
                        seed=sub_seed(args.seed, "build-random"))
    write_artifact(args.out, _stamp(K.to_json(), args))
    return EXIT_OK


def cmd_verify(args):
    from .polytope import PolytopeH, PolytopeV
    from .verifier import SupportOracle, certify_containment

    E = _load_subspace(args.subspace)
    obj = read_json(args.polytope, "polytope")
    _check_ref(E, obj, args.polytope)
    K = PolytopeH.from_json(obj) if "normals" in obj else PolytopeV.from_json(obj)
    oracle = SupportOracle(args.oracle) if args.oracle else SupportOracle.default_for(E)
    oracle.validate(E)
    rep = certify_containment(E, K, directions=args.directions, oracle=oracle,
                              seed=sub_seed(args.seed, "verify"), ratio_claimed=args.ratio)
    out = rep.to_json()
    out["alpha_requested"] = args.alpha
    problems = []
    if not rep.inner_inclusion_ok:
        problems.append("inner inclusion fails")
    if args.alpha is not None and rep.alpha_achieved < args.alpha:
        problems.append(f"alpha_achieved {rep.alpha_achieved:.6g} < requested {args.alpha:g}")
    if args.ratio is not None and rep.certified_ratio > args.ratio:
        problems.append(f"certified ratio {rep.certified_ratio:.6g} > claimed {args.ratio:g}")
    out["certified"] = not problems
    write_artifact(args.out, _stamp(out, args))
    if problems:
        raise CertificationFailure("; ".join(problems))
    return EXIT_OK


def cmd_ngon(args):
    from .verifier import ngon_check

    if args.n < 3:
        raise ValidationError(f"--n must be at least 3, got {args.n}")
    rep = ngon_check(args.n, tol=args.tol)
    write_artifact(args.out, _stamp(rep.to_json(), args))
    print(f"n={rep.n}: {rep.count} extreme points, regularity residual {rep.regularity_residual:.3g}",
          file=sys.stderr)
    if not rep.passed:
        raise CertificationFailure(
            f"cross-section is not a regular {args.n}-gon within tol {args.tol:g}"
            f" ({rep.count} extreme points, residual {rep.regularity_residual:.3g})"
        )
    return EXIT_OK


def cmd_bench(args):
    import numpy as np

    from .gaussbench import facet_lower_bound_estimate, lemma1_experiment, lemma2_experiment
    from .kernel import full_space

    seed = sub_seed(args.seed, "bench-" + args.experiment)
    if args.experiment == "lemma2":
        eps = args.eps or [0.1, 0.2, 0.3, 0.4, 0.5]
        rep = lemma2_experiment(args.n, eps, args.samples, seed)
    elif args.experiment == "lemma1":
        E = full_space(args.n, args.d)
        f = E.mean_zero_basis.basis[0]
        base = math.sqrt(args.n + 2 * args.d)
        rep = lemma1_experiment(f, base * np.sqrt([1.0, 1.5, 2.0, 2.5, 3.0]), args.samples, seed)
    else:
        E = full_space(args.n, args.d)
        if args.polytope:
            obj = read_json(args.polytope, "polytope")
            _check_ref(E, obj, args.polytope)
            V = np.asarray(obj["vertices"], dtype=float)
        else:
            V = E.phi_many(np.eye(args.n))
            V = np.vstack([V, -V])
        res = facet_lower_bound_estimate(E, V, samples=args.samples, seed=seed)
        out = res.to_json()
        if res.infinite:
            out["estimate"] = "inf"
        write_artifact(args.out, _stamp(out, args))
        return EXIT_OK
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(rep.to_csv())
    out = rep.to_json()
    out["fit_slope"] = None if math.isnan(rep.fit_slope) else rep.fit_slope
    write_artifact(args.out, _stamp(out, args))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="polycone", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", default="-", help="output JSON path ('-' for stdout)")
    common.add_argument("--threads", type=int, default=None, help="cap on numeric worker threads")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("subspace", parents=[common], help="build and orthonormalize a subspace E")
    s.add_argument("--family", choices=["full", "sextic", "custom"], default="full")
    s.add_argument("--n", type=int, help="number of variables")
    s.add_argument("--d", type=int, help="half degree (polynomials of degree 2d)")
    s.add_argument("--generators", help="JSON file with a list of generator polynomials")
    s.set_defaults(func=cmd_subspace)

    s = sub.add_parser("build-det", parents=[common], help="deterministic facet polytope Q")
    s.add_argument("--subspace", required=True, help="subspace JSON from 'polycone subspace'")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--grid-size", type=int, default=None, help="sphere samples (default 10(m-1)/eps^2)")
    s.add_argument("--directions", type=int, default=1000, help="directions for the certified ratio")
    s.add_argument("--out-p", default=None, help="also write the vertex polytope P here")
    s.set_defaults(func=cmd_build_det)

    s = sub.add_parser("build-tensor", parents=[common], help="tensor-power facet polytope Q_k")
    s.add_argument("--subspace", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--epsilon", type=float, default=None, help="default 1/(2e)")
    s.add_argument("--grid-size", type=int, default=None)
    s.add_argument("--directions", type=int, default=1000)
    s.set_defaults(func=cmd_build_tensor)

    s = sub.add_parser("build-random", parents=[common], help="random facet polytope K_alpha")
    s.add_argument("--subspace", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--t", "--samples", dest="t", type=int, default=None,
                   help="number of facets (default 50 m/(1-alpha)^2; the closed-form count is logged)")
    s.add_argument("--m-bound", type=float, default=None, help="bound on M(E) (default 2^(2d))")
    s.set_defaults(func=cmd_build_random)

    s = sub.add_parser("verify", parents=[common], help="certify containment of a polytope")
    s.add_argument("--subspace", "--body", dest="subspace", required=True,
                   help="subspace JSON defining the body B(E)")
    s.add_argument("--polytope", required=True)
    s.add_argument("--alpha", type=float, default=None, help="required alpha_achieved")
    s.add_argument("--ratio", type=float, default=None, help="claimed approximation ratio")
    s.add_argument("--directions", type=int, default=1000)
    s.add_argument("--oracle", choices=["eigen", "grid", "sextic", "eigen_exact", "grid_ascent",
                                        "symmetric_sextic_exact"],
                   help="support oracle (default chosen from the subspace)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("ngon", parents=[common], help="cross-section of the even symmetric sextics")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--tol", type=float, default=1e-5)
    s.set_defaults(func=cmd_ngon)

    s = sub.add_parser("bench", parents=[common], help="Gaussian tail experiments")
    s.add_argument("experiment", choices=["lemma1", "lemma2", "facet-bound"])
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--eps", type=float, nargs="+", default=None, help="eps grid for lemma2")
    s.add_argument("--polytope", default=None, help="V-polytope JSON for facet-bound")
    s.add_argument("--csv", default=None, help="write the series as CSV")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be positive")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    from .errors import PolyconeError

    try:
        return args.func(args)
    except CertificationFailure as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (ValidationError, PolyconeError, ValueError, KeyError, TypeError) as exc:
        msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
