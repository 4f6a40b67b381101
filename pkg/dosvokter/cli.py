"""
Kommandolinje for DosVokter

    python -m dosvokter run scenario.scn --out out/
    python -m dosvokter verify example4.scn --bd 0.49 --bf 0.5
    python -m dosvokter corpus list
    python -m dosvokter corpus run example1
    python -m dosvokter deadline example4.scn --bd 0.5 --kappa 1.5 --bf 0.5 --lambda 1.5

Exit-koder: 0 ok, 1 valideringsfeil (scenario, argumenter, manglende fil),
2 kjøretidsfeil.
"""
import argparse
import json
import logging
import math
import os
import sys
from typing import List, Optional, Sequence

from pydantic import ValidationError

from . import corpus, dos_model
from .errors import DosVokterError, ScenarioError
from .estimator import IMMEDIATE, DeadlineInput, reliability_deadline
from .outputs import write_outputs
from .runner import RunResult, run_batch
from .scenario import ScenarioConfig, load_scenario
from .settings import CORPUS_DIR, DEFAULT_OUT_DIR

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse avslutter med 2 ved bruksfeil; vi vil ha 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _duration_bound(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"duration bound must be in [0, 1], got {text}")
    return value


def _frequency_bound(text: str) -> float:
    value = float(text)
    if not (math.isfinite(value) and value >= 0.0):
        raise argparse.ArgumentTypeError(f"frequency bound must be >= 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dosvokter", description="DoS-estimator og sikre kontrollere")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug-logging")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="kjør en scenariofil")
    run.add_argument("file")
    run.add_argument("--out", default=DEFAULT_OUT_DIR, help="mappe for CSV/JSON")
    run.add_argument("--json", action="store_true", help="skriv oppsummering som JSON")

    verify = sub.add_parser("verify", help="sjekk kandidat-bounds mot sekvensen i en scenariofil")
    verify.add_argument("file")
    verify.add_argument("--bd", type=_duration_bound, required=True, help="duration-bound")
    verify.add_argument("--bf", type=_frequency_bound, required=True, help="frequency-bound")
    verify.add_argument("--horizon", type=float, default=None, help="standard: run.horizon fra filen")
    verify.add_argument("--json", action="store_true")

    corpus_cmd = sub.add_parser("corpus", help="innebygde scenarier")
    corpus_sub = corpus_cmd.add_subparsers(dest="corpus_command", parser_class=_Parser)
    corpus_sub.required = True
    corpus_sub.add_parser("list", help="list scenariene")
    corpus_run = corpus_sub.add_parser("run", help="kjør et scenario (eller alle med samme prefiks)")
    corpus_run.add_argument("name")
    corpus_run.add_argument("--out", default=DEFAULT_OUT_DIR)
    corpus_run.add_argument("--json", action="store_true")

    deadline = sub.add_parser("deadline", help="øvre grense for når estimatene blir pålitelige")
    deadline.add_argument("file")
    deadline.add_argument("--bd", type=float, required=True, help="nedre duration-rate b_d")
    deadline.add_argument("--kappa", type=float, required=True, help="offset kappa'")
    deadline.add_argument("--bf", type=float, required=True, help="nedre frequency-rate b_f")
    deadline.add_argument("--lambda", dest="lam", type=float, required=True, help="offset Lambda'")
    deadline.add_argument("--horizon", type=float, default=None)
    deadline.add_argument("--json", action="store_true")

    return parser


def resolve_path(path: str) -> str:
    """Filen selv, ellers en korpusfil med samme navn"""
    if os.path.isfile(path):
        return path
    candidate = os.path.join(CORPUS_DIR, os.path.basename(path))
    if not candidate.endswith(".scn"):
        candidate += ".scn"
    if os.path.isfile(candidate):
        logger.debug("resolved %s to corpus file %s", path, candidate)
        return candidate
    raise FileNotFoundError(f"no such scenario file: {path}")


def _load(path: str) -> ScenarioConfig:
    return load_scenario(resolve_path(path))


def _report(results: List[RunResult], out_dir: str, as_json: bool) -> None:
    written = []
    for result in results:
        written.extend(write_outputs(result, out_dir))

    if as_json:
        payload = [r.summary.model_dump() for r in results]
        print(json.dumps(payload[0] if len(payload) == 1 else payload, indent=2))
        return

    for result in results:
        s = result.summary
        print(f"✅ {s.scenario}: reliability {s.reliability_time}, "
              f"bd_hat {s.final_bd_hat:.4f}, bf_hat {s.final_bf_hat:.4f}")
        if s.settling_time is not None:
            print(f"   settling time: {s.settling_time:.3f}")
    print(f"📁 {len(written)} filer skrevet til {out_dir}/")


def cmd_run(args) -> int:
    config = _load(args.file)
    _report(run_batch(config), args.out, args.json)
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _load(args.file)
    seq = config.build_sequence()
    horizon = config.run.horizon if args.horizon is None else args.horizon
    verdicts = {
        "duration": (args.bd, dos_model.verify_duration_bound(seq, args.bd, horizon)),
        "frequency": (args.bf, dos_model.verify_frequency_bound(seq, args.bf, horizon)),
    }

    if args.json:
        payload = {
            kind: {
                "bound": bound,
                "holds": v.holds,
                "witnessed_offset": v.witnessed_offset,
                "worst_time": v.worst_time,
                "conclusive": v.conclusive,
            }
            for kind, (bound, v) in verdicts.items()
        }
        print(json.dumps(payload, indent=2))
        return EXIT_OK

    for kind, (bound, v) in verdicts.items():
        mark = "✅" if v.holds else "❌"
        print(f"{mark} {kind} bound {bound}: holds={str(v.holds).lower()}, "
              f"offset {v.witnessed_offset:.6g} (worst t = {v.worst_time:.6g})"
              + ("" if v.conclusive else " [horizon-limited]"))
    return EXIT_OK


def cmd_deadline(args) -> int:
    config = _load(args.file)
    seq = config.build_sequence()
    horizon = config.run.horizon if args.horizon is None else args.horizon
    params = DeadlineInput(
        theta=config.estimator.theta,
        b_d=args.bd,
        kappa_prime=args.kappa,
        b_f=args.bf,
        lambda_prime=args.lam,
        inf_d=dos_model.limsup_duration_ratio(seq, horizon),
        inf_f=dos_model.limsup_frequency(seq, horizon),
    )
    result = reliability_deadline(params, seq, horizon)

    if result == IMMEDIATE:
        payload = {"n1": None, "deadline": IMMEDIATE}
    else:
        n1, deadline = result
        payload = {"n1": n1, "deadline": deadline}

    if args.json:
        print(json.dumps(payload, indent=2))
    elif result == IMMEDIATE:
        print("✅ estimatene er pålitelige fra start")
    else:
        print(f"✅ N1 = {payload['n1']}, deadline = {payload['deadline']:.6g}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    if args.corpus_command == "list":
        for name, description in corpus.list_scenarios():
            print(f"{name:<22} {description}")
        return EXIT_OK

    results = []
    for name in corpus.select(args.name):
        results.extend(run_batch(corpus.load(name)))
    _report(results, args.out, args.json)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "verify": cmd_verify,
    "deadline": cmd_deadline,
    "corpus": cmd_corpus,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, ValidationError, FileNotFoundError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DosVokterError as exc:
        where = f" [{exc.scenario}]" if exc.scenario else ""
        print(f"❌{where} {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
