"""Command-line front end.

Subcommands: analyze, simulate, distribution, reconstruct, compare,
export-protocol.  All outputs are plain CSV/JSON with the run configuration
embedded (protocol name and hash, n, trials, seed, model), no timestamps,
so identical invocations produce byte-identical files.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import fidstats, qstate, sampler, spectral
from .errors import NumericalError, ValidationError
from .reconstruct import MLEOptions, reconstruct as run_reconstruction
from .protocol import (BUILTIN_PROTOCOLS, Protocol, assemble, protocol_to_dict,
                       resolve_protocol, save_protocol)
from .qstate import DensityMatrix, StateVector, bell_phi_minus, family_state

BAND_TRIALS = 200000
BAND_PROBS = (0.01, 0.99)

NAMED_STATES = {
    "phi-minus": bell_phi_minus,
    "hh": lambda: family_state(1.0, 0.0, 0.0),
    "vv": lambda: family_state(0.0, 1.0, 0.0),
}


def protocol_hash(protocol: Protocol) -> str:
    blob = json.dumps(protocol_to_dict(protocol), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def parse_state(spec: str):
    """Named state, 'family:c1,c2,phi', or a state-file path."""
    key = spec.lower()
    if key in NAMED_STATES:
        return NAMED_STATES[key]()
    if key.startswith("family:"):
        parts = spec.split(":", 1)[1].split(",")
        if len(parts) != 3:
            raise ValidationError(f"family spec needs c1,c2,phi; got {spec!r}")
        try:
            c1, c2, phi = (float(p) for p in parts)
        except ValueError as exc:
            raise ValidationError(f"bad family parameters in {spec!r}: {exc}") from exc
        return family_state(c1, c2, phi)
    return qstate.load_state(spec)


def state_density(state) -> DensityMatrix:
    return state.density() if isinstance(state, StateVector) else state


def _config_lines(cfg: dict) -> list[str]:
    return [f"# {k}={cfg[k]}" for k in sorted(cfg)]


def _write_csv(path: Path, cfg: dict, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        for line in _config_lines(cfg):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")


def _seed_for(seed: int, *tags) -> np.random.SeedSequence:
    blob = json.dumps([seed] + [str(t) for t in tags]).encode()
    sub = int.from_bytes(hashlib.sha256(blob).digest()[:4], "big")
    return np.random.SeedSequence([seed, sub])


# --- subcommands -------------------------------------------------------------

def cmd_analyze(args) -> int:
    try:
        protocol = resolve_protocol(args.protocol)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = spectral.analyze(assemble(protocol), threshold=args.threshold)
    print(f"protocol: {protocol.name or args.protocol}")
    print(report.table())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = report.to_dict()
        payload["protocol"] = protocol.name or args.protocol
        payload["protocol_hash"] = protocol_hash(protocol)
        path = out / f"analyze_{protocol.name or 'custom'}.json"
        path.write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {path}")
    return 0


def _campaign_states(args):
    state = parse_state(args.state)
    return state, state_density(state)


def cmd_simulate(args) -> int:
    ns = [int(x) for x in args.n.split(",")]
    state, rho = _campaign_states(args)
    rows = []
    for ref in args.protocol:
        protocol = resolve_protocol(ref)
        name = protocol.name or ref
        for n in ns:
            spec = fidstats.loss_spectrum(protocol, state, n, model=args.model)
            f_theory = 1.0 - fidstats.mean_loss(spec)
            ss = _seed_for(args.seed, name, n, "simulate")
            dist = fidstats.empirical_loss(protocol, state, n, args.trials,
                                           seed=ss, model=args.model)
            losses = dist.samples
            stderr = losses.std(ddof=1) / np.sqrt(len(losses)) if len(losses) > 1 else 0.0
            if dist.failures > 0.05 * args.trials:
                print(f"warning: {name} n={n}: {dist.failures}/{args.trials} "
                      f"reconstructions did not converge", file=sys.stderr)
            rows.append([name, n, f"{f_theory:.10g}", f"{1.0 - losses.mean():.10g}",
                         f"{stderr:.6g}", args.trials, args.seed, dist.failures])
    cfg = {"command": "simulate", "state": args.state, "trials": args.trials,
           "seed": args.seed, "model": args.model or "auto",
           "protocols": "+".join(args.protocol)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "simulate.csv"
    _write_csv(path, cfg,
               ["protocol", "n", "F_theory", "F_empirical", "stderr", "trials",
                "seed", "failures"], rows)
    print(f"wrote {path}")
    return 0


def cmd_distribution(args) -> int:
    n = int(args.n)
    state, rho = _campaign_states(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for ref in args.protocol:
        protocol = resolve_protocol(ref)
        name = protocol.name or ref
        spec = fidstats.loss_spectrum(protocol, state, n, model=args.model)
        theo = fidstats.sample_loss(spec, max(args.trials, 20000),
                                    seed=_seed_for(args.seed, name, n, "theo"))
        emp = fidstats.empirical_loss(protocol, state, n, args.trials,
                                      seed=_seed_for(args.seed, name, n, "emp"),
                                      model=args.model)
        cfg = {"command": "distribution", "protocol": name,
               "protocol_hash": protocol_hash(protocol), "state": args.state,
               "n": n, "trials": args.trials, "seed": args.seed,
               "model": args.model or "auto"}
        for tag, dist in (("theoretical", theo), ("empirical", emp)):
            hist = fidstats.density_over_z(dist, bins=args.bins)
            _write_csv(out / f"distribution_{name}_{tag}_hist.csv", cfg,
                       ["bin_center", "density"],
                       [[f"{c:.10g}", f"{d:.10g}"]
                        for c, d in zip(hist.centers, hist.density)])
            _write_csv(out / f"distribution_{name}_{tag}_samples.csv", cfg,
                       ["one_minus_F", "z"],
                       [[f"{x:.10g}", f"{qstate.loss_scale(1 - x):.10g}"]
                        for x in dist.samples])
        qt = fidstats.quantiles(theo, [0.01, 0.5, 0.99])
        qe = fidstats.quantiles(emp, [0.01, 0.5, 0.99])
        summary = dict(cfg)
        summary.update({
            "quantiles_theoretical": {"q01": qt[0], "median": qt[1], "q99": qt[2]},
            "quantiles_empirical": {"q01": qe[0], "median": qe[1], "q99": qe[2]},
            "mean_loss_theory": fidstats.mean_loss(spec),
            "mean_loss_empirical": float(emp.samples.mean()),
            "failures": emp.failures,
        })
        (out / f"distribution_{name}_summary.json").write_text(
            json.dumps(summary, indent=2) + "\n")
        print(f"{name}: median z (theory) = "
              f"{qstate.loss_scale(1 - qt[1]):.3f}, wrote 5 files to {out}")
    return 0


def cmd_reconstruct(args) -> int:
    protocol = resolve_protocol(args.protocol)
    counts = sampler.load_counts(args.counts)
    if counts.m != protocol.m:
        print(f"error: counts file has {counts.m} entries, protocol "
              f"{protocol.name or args.protocol} expects {protocol.m}", file=sys.stderr)
        return 2
    opts = MLEOptions(model=args.model or "mixed")
    result = run_reconstruction(protocol, counts, opts)
    payload = result.to_dict()
    payload["config"] = {"command": "reconstruct", "protocol": protocol.name or args.protocol,
                         "protocol_hash": protocol_hash(protocol),
                         "counts_total": counts.total, "model": opts.model,
                         "seed": args.seed}
    if args.reference:
        ref = state_density(parse_state(args.reference))
        f = qstate.fidelity(ref, result.rho_mle)
        n_obs = counts.total
        # ideal statistical band at the reference state (pure model for a
        # pure reference), the paper's instrumental-error detector
        spec = fidstats.loss_spectrum(protocol, parse_state(args.reference), n_obs)
        theo = fidstats.sample_loss(spec, BAND_TRIALS, seed=_seed_for(args.seed, "band"))
        q01, q99 = fidstats.quantiles(theo, BAND_PROBS)
        verdict = "below-band" if (1.0 - f) > q99 else "within-band"
        payload["fidelity"] = f
        payload["band"] = {"n": n_obs, "q01_loss": float(q01), "q99_loss": float(q99),
                           "verdict": verdict}
        print(f"fidelity to reference: {f:.8f} (1-F = {1 - f:.3e}); "
              f"band [{q01:.3e}, {q99:.3e}] at n = {n_obs} -> {verdict}")
    print(f"log-likelihood {result.loglik:.6f}, iterations {result.iterations}, "
          f"converged {result.converged}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "reconstruct.json"
        path.write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {path}")
    else:
        json.dump(payload, sys.stdout, indent=2)
        print()
    return 0


def cmd_compare(args) -> int:
    if len(args.protocol) < 2:
        print("error: compare needs at least two --protocol entries", file=sys.stderr)
        return 2
    n = int(args.n)
    state, rho = _campaign_states(args)
    entries = []
    for ref in args.protocol:
        protocol = resolve_protocol(ref)
        name = protocol.name or ref
        report = spectral.analyze(assemble(protocol))
        spec = fidstats.loss_spectrum(protocol, state, n, model=args.model)
        dist = fidstats.empirical_loss(protocol, state, n, args.trials,
                                       seed=_seed_for(args.seed, name, n, "cmp"),
                                       model=args.model)
        theo = fidstats.sample_loss(spec, max(args.trials, 20000),
                                    seed=_seed_for(args.seed, name, n, "cmpq"))
        q01, q99 = fidstats.quantiles(theo, BAND_PROBS)
        entries.append({
            "protocol": name, "K": report.condition_number,
            "complete": report.complete, "adequate": report.adequate,
            "mean_loss_theory": fidstats.mean_loss(spec),
            "mean_loss_empirical": float(dist.samples.mean()),
            "q01_loss": float(q01), "q99_loss": float(q99),
            "failures": dist.failures,
        })
    entries.sort(key=lambda e: e["K"])
    hdr = ["protocol", "K", "complete", "adequate", "mean_loss_theory",
           "mean_loss_empirical", "q01_loss", "q99_loss", "failures"]
    widths = [10, 12, 9, 9, 17, 20, 12, 12, 8]
    print("  ".join(h.ljust(w) for h, w in zip(hdr, widths)))
    for e in entries:
        cells = [e["protocol"], f"{e['K']:.4g}", str(e["complete"]),
                 str(e["adequate"]), f"{e['mean_loss_theory']:.6g}",
                 f"{e['mean_loss_empirical']:.6g}", f"{e['q01_loss']:.4g}",
                 f"{e['q99_loss']:.4g}", str(e["failures"])]
        print("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg = {"command": "compare", "state": args.state, "n": n,
               "trials": args.trials, "seed": args.seed,
               "model": args.model or "auto",
               "protocols": "+".join(args.protocol)}
        _write_csv(out / "compare.csv", cfg, hdr,
                   [[e[h] for h in hdr] for e in entries])
        print(f"wrote {out / 'compare.csv'}")
    return 0


def cmd_export_protocol(args) -> int:
    protocol = resolve_protocol(args.protocol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{protocol.name or 'protocol'}.json"
    save_protocol(protocol, path)
    print(f"wrote {path}")
    return 0


# --- argument plumbing -------------------------------------------------------

def _apply_config_defaults(args, parser):
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config file {args.config}: {exc}") from exc
        alias = {"protocols": "protocol", "out_dir": "out"}
        for key, val in cfg.items():
            dest = alias.get(key, key)
            if getattr(args, dest, None) in (None, [], parser.get_default(dest)):
                if dest == "n" and isinstance(val, list):
                    val = ",".join(str(v) for v in val)
                setattr(args, dest, val)
    return args


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tomokit",
        description="Design, score, and simulate quantum state tomography protocols.")
    parser.add_argument("--list-protocols", action="store_true",
                        help="list built-in protocols and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p, multi_protocol=False, needs_state=True):
        if multi_protocol:
            p.add_argument("--protocol", action="append", required=True,
                           help="built-in name or protocol file (repeatable)")
        else:
            p.add_argument("--protocol", required=True,
                           help="built-in name or protocol file")
        if needs_state:
            p.add_argument("--state", default="phi-minus",
                           help="named state, family:c1,c2,phi, or state file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--model", choices=["pure", "mixed"], default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--config", default=None,
                       help="JSON config file; flags take precedence")

    p = sub.add_parser("analyze", help="spectral report for one protocol")
    p.add_argument("--protocol", required=True)
    p.add_argument("--threshold", type=float, default=spectral.DEFAULT_SV_THRESHOLD)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze, config=None)

    p = sub.add_parser("simulate", help="fidelity vs sample size table")
    common(p, multi_protocol=True)
    p.add_argument("--n", default="1000,3000,10000",
                   help="comma-separated sample sizes")
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distribution", help="z-scale loss densities and quantiles")
    common(p, multi_protocol=True)
    p.add_argument("--n", default="3000")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--bins", type=int, default=40)
    p.set_defaults(func=cmd_distribution)

    p = sub.add_parser("reconstruct", help="estimate a state from a counts file")
    p.add_argument("--protocol", required=True)
    p.add_argument("--counts", required=True, help="counts JSON file")
    p.add_argument("--reference", default=None,
                   help="reference state for fidelity and band verdict")
    p.add_argument("--model", choices=["pure", "mixed"], default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_reconstruct, config=None)

    p = sub.add_parser("compare", help="rank protocols by condition number")
    common(p, multi_protocol=True)
    p.add_argument("--n", default="3000")
    p.add_argument("--trials", type=int, default=500)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-protocol", help="write a built-in protocol to JSON")
    p.add_argument("--protocol", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_export_protocol, config=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_protocols:
        for name in sorted(BUILTIN_PROTOCOLS):
            print(name)
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        args = _apply_config_defaults(args, parser)
        return args.func(args)
    except ValidationError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
