"""Command-line entry point: ``captrade {eval,tradeoff,scst-sim,kl-check}``.

Exit codes: 0 success, 1 internal error or failed check, 2 invalid input.
``CAPTRADE_THREADS`` caps the worker threads used by ``eval``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import rng as _rng
from .corpus import CaptionSet, CorpusError, ReferenceSet, load_caption_file, load_reference_file
from .ngram_metrics import DfStats, bleu, cider, compute_df, div_n, mbleu, rouge_l, uniqueness
from .scst_lab import (BASELINE_KINDS, CSV_COLUMNS, DEFAULT_K, DEFAULT_LR, DEFAULT_STEPS,
                       CandidatePool, random_reward_pool, rmr_baseline, run_sim)
from .spectral import self_cider
from .tradeoff import (TradeoffError, TradeoffPoint, boundary_to_csv, report_to_json,
                       tradeoff_report)
from .variational import DiagGaussian, Gmm, gmm_kl_upper_bound, mc_gmm_kl, vat_loss

log = logging.getLogger("captrade")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Invalid user input; maps to exit code 2."""


def _write(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# --- eval ----------------------------------------------------------------------

def _image_scores(cs: CaptionSet, refs: ReferenceSet, df: DfStats) -> dict:
    top = cs.captions[0]
    row = {
        "image_id": cs.image_id,
        "k": cs.k,
        "cider": cider(top, refs, df),
        "rouge_l": rouge_l(top, refs),
        "div_1": div_n(cs, 1) if any(c.tokens for c in cs.captions) else None,
        "div_2": div_n(cs, 2) if any(c.tokens for c in cs.captions) else None,
        "mbleu_4": mbleu(cs, 4) if cs.k >= 2 else None,
        "uniqueness": uniqueness([cs]),
        "self_cider": None,
    }
    if cs.k >= 2:
        try:
            row["self_cider"] = self_cider(cs, df)
        except ValueError as exc:
            log.warning("self-CIDEr undefined for image %s: %s", cs.image_id, exc)
    return row


def _mean(rows, key):
    vals = [r[key] for r in rows if r[key] is not None]
    return math.fsum(vals) / len(vals) if vals else None


def cmd_eval(candidates_path, references_path, out_path) -> int:
    sets = load_caption_file(candidates_path)
    refsets = load_reference_file(references_path)
    if not sets:
        raise InputError(f"{candidates_path}: no caption sets")
    if not refsets:
        raise InputError(f"{references_path}: no reference sets")
    by_id = {r.image_id: r for r in refsets}
    missing = [s.image_id for s in sets if s.image_id not in by_id]
    if missing:
        raise InputError(f"no references for image_id {missing[0]!r}")
    df = compute_df(refsets)
    paired = [by_id[s.image_id] for s in sets]

    threads = max(1, int(os.environ.get("CAPTRADE_THREADS", "1") or 1))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(lambda a: _image_scores(*a, df), zip(sets, paired)))

    tops = [s.captions[0] for s in sets]
    report = {
        "schema_version": SCHEMA_VERSION,
        "num_images": len(sets),
        "scales": {"bleu": "0-100", "rouge_l": "0-100", "cider": "0-10", "mbleu": "0-100",
                   "div_n": "ratio", "uniqueness": "ratio", "self_cider": "0-1"},
        "accuracy": {
            "bleu_1": bleu(tops, paired, 1),
            "bleu_4": bleu(tops, paired, 4),
            "rouge_l": _mean(rows, "rouge_l"),
            "cider": _mean(rows, "cider"),
        },
        "diversity": {
            "div_1": _mean(rows, "div_1"),
            "div_2": _mean(rows, "div_2"),
            "mbleu_4": _mean(rows, "mbleu_4"),
            "uniqueness": uniqueness(sets),
            "self_cider": _mean(rows, "self_cider"),
        },
        "images": rows,
    }
    _write(out_path, _dump(report))
    return EXIT_OK


# --- tradeoff ------------------------------------------------------------------

def _point(label, obj) -> TradeoffPoint:
    try:
        return TradeoffPoint(str(label), obj["acc"], obj["div"])
    except KeyError as exc:
        raise InputError(f"point {label!r} lacks field {exc.args[0]!r}") from None


def cmd_tradeoff(points_path, baseline_label, out_path, boundary_csv=None) -> int:
    try:
        data = json.loads(Path(points_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{points_path}: {exc}") from None
    try:
        points = [_point(p.get("label"), p) for p in data.get("points", [])]
        pairs = [(pr["label"], _point(pr["label"] + "/ce", pr["ce"]), _point(pr["label"] + "/rl", pr["rl"]))
                 for pr in data.get("ce_rl_pairs", [])]
    except TradeoffError as exc:
        raise InputError(str(exc)) from None
    if not points:
        raise InputError(f"{points_path}: no points")
    if baseline_label is None:
        flagged = [p for p, raw in zip(points, data["points"]) if raw.get("baseline")]
        baseline_label = data.get("baseline") or (flagged[0].label if flagged else None)
    matches = [p for p in points if p.label == baseline_label]
    if not matches:
        raise InputError(f"baseline label {baseline_label!r} not among the points")
    try:
        report = tradeoff_report(points, matches[0], pairs)
    except TradeoffError as exc:
        raise InputError(str(exc)) from None
    _write(out_path, report_to_json(report))
    boundary_csv = boundary_csv or str(Path(out_path).with_suffix("")) + "_boundary.csv"
    _write(boundary_csv, boundary_to_csv(report))
    for row in report["tpr"]:
        print(f"{row['label']:<28} TPR {100 * row['tpr']:+.3f}%")
    for row in report["tcr"]:
        print(f"{row['label']:<28} TCR {row['tcr']:.3f}")
    return EXIT_OK


# --- scst-sim ------------------------------------------------------------------

def _load_pool(cfg: dict, base: Path) -> CandidatePool:
    pool_cfg = cfg.get("pool")
    if not isinstance(pool_cfg, dict):
        raise InputError("config needs a 'pool' object")
    if "rewards" in pool_cfg:
        try:
            return CandidatePool(np.asarray(pool_cfg["rewards"], dtype=float))
        except ValueError as exc:
            raise InputError(f"pool: {exc}") from None
    if "random" in pool_cfg:
        r = pool_cfg["random"]
        return random_reward_pool(int(r.get("n", 20)), int(r.get("seed", 0)), float(r.get("high", 10.0)))
    if "captions" in pool_cfg:
        ref_file = pool_cfg.get("references_file")
        if ref_file is None or "image_id" not in pool_cfg:
            raise InputError("caption pools need 'references_file' and 'image_id'")
        refsets = load_reference_file(base / ref_file)
        by_id = {r.image_id: r for r in refsets}
        if pool_cfg["image_id"] not in by_id:
            raise InputError(f"no references for image_id {pool_cfg['image_id']!r}")
        return CandidatePool.from_captions(pool_cfg["captions"], by_id[pool_cfg["image_id"]], compute_df(refsets))
    raise InputError("pool must give 'rewards', 'random' or 'captions'")


def cmd_scst_sim(config_path, out_csv, overrides: dict | None = None) -> int:
    path = Path(config_path)
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{config_path}: {exc}") from None
    cfg.update({k: v for k, v in (overrides or {}).items() if v is not None})
    kind = cfg.get("baseline", "rmr")
    if kind not in BASELINE_KINDS:
        raise InputError(f"unknown baseline kind {kind!r}; valid kinds: {', '.join(BASELINE_KINDS)}")
    k = int(cfg.get("k", DEFAULT_K))
    if kind in ("avg", "rmr") and k < 2:
        raise InputError(f"baseline {kind!r} needs K >= 2, got K={k}")
    if k < 1:
        raise InputError(f"K must be >= 1, got {k}")
    steps = int(cfg.get("steps", DEFAULT_STEPS))
    if steps < 0:
        raise InputError(f"steps must be >= 0, got {steps}")
    pool = _load_pool(cfg, path.parent)
    traj = run_sim(pool, kind, k, float(cfg.get("lr", DEFAULT_LR)), steps,
                   int(cfg.get("seed", 0)), int(cfg.get("snapshot_every", 0)))
    _write(out_csv, traj.to_csv())

    if kind == "rmr":
        print(f"pool group baseline (rmr): {rmr_baseline(pool.rewards)!r}")
    if traj.first_baselines is not None:
        print("first-step sampled baselines: " + " ".join(repr(float(b)) for b in traj.first_baselines))
    print(f"final expected reward: {traj.final_expected_reward!r}")
    print(f"final entropy: {traj.final_entropy!r}")
    return EXIT_OK


# --- kl-check ------------------------------------------------------------------

def _random_gmm(gen: np.random.Generator, k: int, d: int) -> Gmm:
    comps = tuple(DiagGaussian(gen.normal(0.0, 1.5, d), gen.uniform(-1.0, 1.0, d)) for _ in range(k))
    return Gmm(comps, gen.normal(0.0, 1.0, k))


def random_gmm_pair(seed: int, case: int, max_kernels: int = 4, max_dims: int = 3,
                    identical: bool = False) -> tuple[Gmm, Gmm]:
    gen = _rng.make_rng(seed, _rng.KL_CHECK_CASE, case)
    k = int(gen.integers(1, max_kernels + 1))
    d = int(gen.integers(1, max_dims + 1))
    p = _random_gmm(gen, k, d)
    return (p, p) if identical else (p, _random_gmm(gen, k, d))


def cmd_kl_check(seed: int = 0, cases: int = 100, kernels: int = 4, dims: int = 3,
                 samples: int = 100_000, beta: float = 1.0, identical: bool = False,
                 out_path=None) -> int:
    if cases < 1:
        raise InputError(f"--cases must be >= 1, got {cases}")
    if kernels < 1 or dims < 1:
        raise InputError("--kernels and --dims must be >= 1")
    if samples < 10_000:
        raise InputError(f"--samples must be >= 10000, got {samples}")
    rows = []
    violations = 0
    print(f"{'case':>4} {'K':>2} {'d':>2} {'bound':>12} {'mc':>12} {'stderr':>10} {'beta*bound':>12}  ok")
    for i in range(cases):
        p, q = random_gmm_pair(seed, i, kernels, dims, identical)
        bd = gmm_kl_upper_bound(p, q)
        est, se = mc_gmm_kl(p, q, samples, seed, stream=i)
        ok = bd.total >= est - 3.0 * se
        violations += not ok
        rows.append({"case": i, "k": p.k, "d": p.dim, "bound": bd.total, "mc": est,
                     "stderr": se, "weighted": vat_loss(0.0, bd, beta), "ok": ok})
        print(f"{i:>4} {p.k:>2} {p.dim:>2} {bd.total:>12.6f} {est:>12.6f} {se:>10.2e} "
              f"{rows[-1]['weighted']:>12.6f}  {'yes' if ok else 'NO'}")
    print(f"{cases - violations}/{cases} bounds hold (bound >= mc - 3*stderr)")
    if out_path:
        _write(out_path, _dump({"schema_version": SCHEMA_VERSION, "seed": seed, "samples": samples,
                                "beta": beta, "violations": violations, "cases": rows}))
    return EXIT_OK if violations == 0 else EXIT_INTERNAL


# --- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="captrade", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="accuracy and diversity metrics for caption sets",
                        description="Writes a JSON report: corpus BLEU-1/4, ROUGE-L and CIDEr-D of "
                                    "each image's first caption, plus per-image and mean Div-1, "
                                    "Div-2, mBLEU-4, uniqueness and self-CIDEr.")
    ev.add_argument("--candidates", required=True)
    ev.add_argument("--references", required=True)
    ev.add_argument("--out", required=True)

    tr = sub.add_parser("tradeoff", help="TPR/TCR report for labeled (acc, div) points",
                        description="Writes a JSON report and a boundary CSV with columns acc,div "
                                    "(the zero-TPR line of the baseline).")
    tr.add_argument("--points", required=True)
    tr.add_argument("--baseline-label", default=None,
                    help="label of the baseline point (default: the point flagged in the file)")
    tr.add_argument("--out", required=True)
    tr.add_argument("--boundary-csv", default=None)

    sc = sub.add_parser("scst-sim", help="policy-gradient baseline simulator",
                        description="Writes a CSV with columns " + ",".join(CSV_COLUMNS)
                                    + "; snapshot columns are blank on non-snapshot steps.")
    sc.add_argument("--config", required=True)
    sc.add_argument("--out", required=True)
    sc.add_argument("--baseline", choices=BASELINE_KINDS, default=None)
    sc.add_argument("--k", type=int, default=None)
    sc.add_argument("--lr", type=float, default=None)
    sc.add_argument("--steps", type=int, default=None)
    sc.add_argument("--seed", type=int, default=None)
    sc.add_argument("--snapshot-every", type=int, default=None)

    kl = sub.add_parser("kl-check", help="mixture KL bound vs Monte-Carlo on random GMM pairs")
    kl.add_argument("--seed", type=int, default=0)
    kl.add_argument("--cases", type=int, default=100)
    kl.add_argument("--kernels", type=int, default=4, help="maximum components per mixture")
    kl.add_argument("--dims", type=int, default=3, help="maximum dimension")
    kl.add_argument("--samples", type=int, default=100_000)
    kl.add_argument("--beta", type=float, default=1.0, help="KL weight for the reported beta*bound")
    kl.add_argument("--identical", action="store_true", help="use q = p in every case")
    kl.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "eval":
            return cmd_eval(args.candidates, args.references, args.out)
        if args.command == "tradeoff":
            return cmd_tradeoff(args.points, args.baseline_label, args.out, args.boundary_csv)
        if args.command == "scst-sim":
            return cmd_scst_sim(args.config, args.out, {
                "baseline": args.baseline, "k": args.k, "lr": args.lr, "steps": args.steps,
                "seed": args.seed, "snapshot_every": args.snapshot_every})
        return cmd_kl_check(args.seed, args.cases, args.kernels, args.dims, args.samples,
                            args.beta, args.identical, args.out)
    except (InputError, CorpusError, OSError) as exc:
        print(f"captrade: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"captrade: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
