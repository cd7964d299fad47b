"""Command-line entry point.

Every subcommand writes one CSV (to ``--out`` or standard output).  When
``--out`` is a file, experiment commands also write ``<out>.summary.csv``
(medians in dB) and ``<out>.meta.json``.  Fatal errors exit nonzero after a
single line on standard error of the form::

    qgamp: error kind=<ExceptionName> code=<exit code> msg="<text>"
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .channels import GaussianPrior, prior_from_dict
from .qdesign import MODULO_FAMILY, REGULAR_FAMILY, DesignObjective, optimize_family
from .quantizer import ScalarQuantizer
from .state_evolution import SeConfig, SeProblem, se_run
from .harness.experiment import ExperimentSpec, SpecError, run_experiment
from .harness.figures import FIGURES, run_specs

EXIT_USAGE = 2
EXIT_FAILURE = 1


class CliError(ValueError):
    pass


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"{path}: {exc}") from None


def _check_keys(data: dict, allowed: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise CliError(f"unknown keys in {where}: {sorted(unknown)}")


def _se_config(data) -> SeConfig:
    data = dict(data or {})
    _check_keys(data, set(asdict(SeConfig())), "[se]")
    return SeConfig(**data)


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    Path(out).write_text(text)


def _sidecars(out: str | None, summary: str, meta) -> None:
    if out is None or out == "-":
        return
    Path(f"{out}.summary.csv").write_text(summary)
    Path(f"{out}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


# -- subcommands ---------------------------------------------------------------


def cmd_run(args) -> None:
    data = _load_toml(args.spec)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    spec = ExperimentSpec.from_dict(data)
    res = run_experiment(spec, threads=args.threads)
    _emit(res.trials_csv(), args.out)
    _sidecars(args.out, res.summary_csv(), res.metadata)


def cmd_figure(args) -> None:
    kwargs = {"seed": args.seed if args.seed is not None else 0}
    if args.trials is not None:
        kwargs["trials"] = args.trials
    specs = FIGURES[args.command](**kwargs)
    text, results = run_specs(specs, threads=args.threads)
    _emit(text, args.out)
    summary = "".join(
        r.summary_csv() if i == 0 else r.summary_csv().split("\n", 1)[1] for i, r in enumerate(results)
    )
    _sidecars(args.out, summary, {"figure": args.command, "experiments": [r.metadata for r in results]})


SE_KEYS = {"beta", "sigma2", "prior", "quantizer", "se"}


def cmd_se(args) -> None:
    data = _load_toml(args.spec) if args.spec else {}
    _check_keys(data, SE_KEYS, "SE spec")
    beta = float(data.get("beta", args.beta))
    prior = prior_from_dict(data["prior"]) if "prior" in data else GaussianPrior()
    if "quantizer" in data:
        q = ScalarQuantizer.from_dict(data["quantizer"])
    else:
        z_std = math.sqrt(beta * prior.tau_init)
        q = ScalarQuantizer.uniform(args.levels, args.loading * z_std)
    traj = se_run(SeProblem(beta, float(data.get("sigma2", 0.0)), prior, q), _se_config(data.get("se")))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "tau"))
    for t, tau in enumerate(traj.taus):
        w.writerow((t, repr(float(tau))))
    _emit(buf.getvalue(), args.out)
    for note in traj.notes:
        logging.getLogger("qgamp").warning("state evolution: %s", note)


DESIGN_KEYS = {"beta", "sigma2", "prior", "families", "levels", "se", "grid_points"}


def cmd_design(args) -> None:
    data = _load_toml(args.spec) if args.spec else {}
    _check_keys(data, DESIGN_KEYS, "design spec")
    prior = prior_from_dict(data["prior"]) if "prior" in data else GaussianPrior()
    objective = DesignObjective(
        float(data.get("beta", args.beta)), float(data.get("sigma2", 0.0)), prior, _se_config(data.get("se"))
    )
    families = data.get("families", [REGULAR_FAMILY, MODULO_FAMILY])
    levels = data.get("levels", args.levels)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("family", "levels", "param", "predicted_mse_db"))
    for fam in families:
        if fam not in (REGULAR_FAMILY, MODULO_FAMILY):
            raise CliError(f"unknown design family {fam!r}")
        for k in levels:
            d = optimize_family(fam, int(k), objective, grid_points=int(data.get("grid_points", 25)))
            w.writerow((fam, k, repr(d.param), repr(d.predicted_mse_db)))
    _emit(buf.getvalue(), args.out)


# -- parser ----------------------------------------------------------------------


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help="base seed (u64)")
    common.add_argument("--trials", type=_positive, default=None, help="Monte Carlo trials per ratio")
    common.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    common.add_argument("--threads", type=_positive, default=1, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qgamp", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"qgamp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run an experiment spec (TOML)")
    r.add_argument("spec")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("se", parents=[common], help="state-evolution trajectory (t,tau)")
    s.add_argument("spec", nargs="?")
    s.add_argument("--beta", type=float, default=0.5, help="n/m")
    s.add_argument("--levels", type=_positive, default=16)
    s.add_argument("--loading", type=float, default=3.0, help="half-width in std of z")
    s.set_defaults(func=cmd_se)

    d = sub.add_parser("design", parents=[common], help="SE-optimized uniform quantizers")
    d.add_argument("spec", nargs="?")
    d.add_argument("--beta", type=float, default=0.5)
    d.add_argument("--levels", type=_positive, nargs="+", default=[4, 8, 16])
    d.set_defaults(func=cmd_design)

    for name in FIGURES:
        f = sub.add_parser(name, parents=[common], help=f"canned {name} recipe")
        f.set_defaults(func=cmd_figure)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except (CliError, SpecError, ValueError, KeyError, TypeError) as exc:
        _fail(exc, EXIT_USAGE)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 -- report every fatal error uniformly
        _fail(exc, EXIT_FAILURE)
        return EXIT_FAILURE
    return 0


def _fail(exc: BaseException, code: int) -> None:
    msg = str(exc).replace('"', "'").replace("\n", " ")
    print(f'qgamp: error kind={type(exc).__name__} code={code} msg="{msg}"', file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
