"""Command-line front end: simulate | train | bench | plot.

Exit codes: 0 on success, 2 for invalid configuration or refusal to
overwrite existing outputs, 3 for runtime failures. Outputs are plain CSV,
JSON and SVG; a run is fully reproducible from its echoed effective config.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, check_tier_budget, load_config
from .field import GridSpec, squared_snr_kernel
from .planner import snr_score_map_bruteforce, snr_score_map_fft
from .rl.train import MODES, curves_to_csv, read_curves_csv, train
from .swarm import POLICIES, read_episode_csv, run_episode
from .svgplot import PALETTE, Series, line_chart, write_svg

POLICY_COLORS = {"info": "#1f77b4", "cost-only": "#ff7f0e", "random": "#2ca02c"}
MODE_COLORS = {"individual": "#d62728", "communicating": "#1f77b4"}
BENCH_SIZES = (8, 16, 32, 64)
BENCH_FFT_MAX_RATIO = 4.5
BENCH_BRUTE_MIN_RATIO = 10.0


def _echo_config(cfg: RunConfig) -> None:
    print(json.dumps(cfg.effective_dict(), indent=2, sort_keys=True))


def _refuse_nonempty(out_dir: Path, force: bool) -> None:
    if force:
        return
    if out_dir.exists() and any(out_dir.iterdir()):
        raise ConfigError(
            f"output directory {out_dir} is not empty; pass --force to overwrite"
        )


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _simulate_job(args):
    cfg, policy, seed, out_dir = args
    log = run_episode(cfg.sim_config(seed, policy))
    pol_dir = Path(out_dir) / policy
    pol_dir.mkdir(parents=True, exist_ok=True)
    log.to_csv(pol_dir / f"episode_{seed}.csv")
    return policy, seed, log.summary()


def _ig_curves_svg(out_dir: Path) -> bool:
    series = []
    for k, policy in enumerate(POLICIES):
        for path in sorted((out_dir / policy).glob("episode_*.csv")):
            recs = read_episode_csv(path)
            by_step: dict[int, float] = {}
            for r in recs:
                by_step[r.step] = r.ig_bits
            steps = sorted(by_step)
            series.append(
                Series(
                    label=f"{policy} {path.stem.split('_')[-1]}",
                    xs=steps,
                    ys=[by_step[s] for s in steps],
                    color=POLICY_COLORS.get(policy, PALETTE[k % len(PALETTE)]),
                )
            )
    if not series:
        return False
    svg = line_chart(
        series,
        title="Shared information gain",
        x_label="step",
        y_label="bits",
    )
    write_svg(out_dir / "ig_curves.svg", svg)
    return True


def cmd_simulate(ns) -> int:
    cfg = load_config(ns.config)
    check_tier_budget(cfg, ns.force)
    out_dir = Path(ns.out)
    _refuse_nonempty(out_dir, ns.force)
    _echo_config(cfg)

    seeds = tuple(ns.seed) if ns.seed else cfg.seeds
    policies = tuple(ns.policy) if ns.policy else tuple(cfg.sim["policies"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "effective_config.json", cfg.effective_dict())

    jobs = [(cfg, policy, seed, str(out_dir)) for policy in policies for seed in seeds]
    if ns.threads > 1:
        with ProcessPoolExecutor(max_workers=ns.threads) as pool:
            results = list(pool.map(_simulate_job, jobs))
    else:
        results = [_simulate_job(job) for job in jobs]

    summaries = [summary for _, _, summary in results]
    _write_json(out_dir / "summary.json", {"runs": summaries})
    _ig_curves_svg(out_dir)
    print(f"wrote {len(jobs)} episode(s) under {out_dir}")
    return 0


def _train_job(args):
    cfg, mode, seed, out_dir = args
    result = train(cfg.train_config(seed, mode))
    out = Path(out_dir)
    curves_to_csv(result, out / f"curves_{mode}_{seed}.csv")
    for j, net in enumerate(result.nets):
        net.save(out / f"qnet_{mode}_{seed}_agent{j}.json")
    mean_curve = result.curves.mean(axis=1) if result.curves.size else np.zeros(0)
    quarter = max(1, len(mean_curve) // 4)
    summary = {
        "mode": mode,
        "seed": seed,
        "n_episodes": result.n_episodes,
        "train_steps": int(result.curves.shape[0]),
        "mean_reward_first_quarter": float(mean_curve[:quarter].mean())
        if mean_curve.size
        else 0.0,
        "mean_reward_last_quarter": float(mean_curve[-quarter:].mean())
        if mean_curve.size
        else 0.0,
    }
    return mode, seed, summary


def _reward_curves_svg(out_dir: Path) -> bool:
    series = []
    for path in sorted(out_dir.glob("curves_*.csv")):
        curves = read_curves_csv(path)
        if curves.size == 0:
            continue
        tag = path.stem[len("curves_") :]
        mode = tag.rsplit("_", 1)[0]
        mean_curve = curves.mean(axis=1)
        series.append(
            Series(
                label=tag,
                xs=list(range(len(mean_curve))),
                ys=[float(v) for v in mean_curve],
                color=MODE_COLORS.get(mode, PALETTE[len(series) % len(PALETTE)]),
            )
        )
    if not series:
        return False
    svg = line_chart(
        series,
        title="Smoothed reward (agent mean)",
        x_label="training step",
        y_label="reward",
    )
    write_svg(out_dir / "reward_curves.svg", svg)
    return True


def cmd_train(ns) -> int:
    cfg = load_config(ns.config)
    out_dir = Path(ns.out)
    _refuse_nonempty(out_dir, ns.force)
    _echo_config(cfg)

    seeds = tuple(ns.seed) if ns.seed else cfg.seeds
    modes = tuple(MODES) if ns.mode == "both" else (ns.mode,)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "effective_config.json", cfg.effective_dict())

    jobs = [(cfg, mode, seed, str(out_dir)) for mode in modes for seed in seeds]
    if ns.threads > 1:
        with ProcessPoolExecutor(max_workers=ns.threads) as pool:
            results = list(pool.map(_train_job, jobs))
    else:
        results = [_train_job(job) for job in jobs]

    _write_json(out_dir / "train_summary.json", {"runs": [s for _, _, s in results]})
    _reward_curves_svg(out_dir)
    print(f"wrote {len(jobs)} training run(s) under {out_dir}")
    return 0


def bench_grid(side: int, world: float = 64.0) -> GridSpec:
    return GridSpec(0.0, world, 0.0, world, side, side, side, side)


def _time_call(fn, repeats: int) -> float:
    fn()  # warm-up outside the clock
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t0)
    return float(np.median(best)) * 1e3


def cmd_bench(ns) -> int:
    from .belief import posterior_from_weights

    cfg = load_config(ns.config)
    out_dir = Path(ns.out)
    _refuse_nonempty(out_dir, ns.force)
    _echo_config(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)

    sizes = [int(s) for s in ns.sizes.split(",")]
    if sorted(sizes) != sizes or len(set(sizes)) != len(sizes):
        raise ConfigError("bench sizes must be strictly increasing")
    rng = np.random.default_rng(0)
    rows = []
    for side in sizes:
        grid = bench_grid(side)
        post = posterior_from_weights(grid, rng.random(grid.n_src_cells) + 1e-3)
        kernel = squared_snr_kernel(cfg.plume, grid)
        fft_ms = _time_call(lambda: snr_score_map_fft(post, kernel), ns.repeats)
        brute_ms = _time_call(
            lambda: snr_score_map_bruteforce(post, cfg.plume, grid), ns.repeats
        )
        rows.append((side, fft_ms, brute_ms))
        print(f"{side:>4}x{side:<4} fft {fft_ms:10.3f} ms   brute {brute_ms:10.3f} ms")

    with open(out_dir / "bench.csv", "w") as fh:
        fh.write("size,fft_ms,brute_ms\n")
        for side, fft_ms, brute_ms in rows:
            fh.write(f"{side},{repr(fft_ms)},{repr(brute_ms)}\n")

    if len(rows) >= 2:
        (s0, fft0, brute0), (s1, fft1, brute1) = rows[-2], rows[-1]
        fft_ratio = fft1 / fft0
        brute_ratio = brute1 / brute0
        print(
            f"{s0}->{s1} doubling: fft x{fft_ratio:.2f} (limit {BENCH_FFT_MAX_RATIO}), "
            f"brute x{brute_ratio:.2f} (floor {BENCH_BRUTE_MIN_RATIO})"
        )
        if fft_ratio > BENCH_FFT_MAX_RATIO or brute_ratio < BENCH_BRUTE_MIN_RATIO:
            print("bench: relative-growth invariant violated", file=sys.stderr)
            return 3
    return 0


def cmd_plot(ns) -> int:
    out_dir = Path(ns.out)
    if not out_dir.is_dir():
        raise ConfigError(f"not a directory: {out_dir}")
    made_ig = _ig_curves_svg(out_dir)
    made_reward = _reward_curves_svg(out_dir)
    if not (made_ig or made_reward):
        raise ConfigError(f"no episode or curves CSVs found under {out_dir}")
    names = [
        name
        for made, name in ((made_ig, "ig_curves.svg"), (made_reward, "reward_curves.svg"))
        if made
    ]
    print(f"regenerated {', '.join(names)} under {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plumeseek",
        description="Multi-agent plume source search: simulate, train, bench, plot.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--threads", type=int, default=1, help="parallel worker count")
        p.add_argument(
            "--seed", type=int, action="append", help="override config seeds (repeatable)"
        )

    p_sim = sub.add_parser("simulate", help="run heuristic search episodes")
    add_common(p_sim)
    p_sim.add_argument(
        "--policy", choices=POLICIES, action="append", help="restrict motion policies"
    )
    p_sim.set_defaults(fn=cmd_simulate)

    p_train = sub.add_parser("train", help="train the hybrid RL layer")
    add_common(p_train)
    p_train.add_argument("--mode", choices=(*MODES, "both"), default="both")
    p_train.set_defaults(fn=cmd_train)

    p_bench = sub.add_parser("bench", help="time FFT vs brute-force score maps")
    add_common(p_bench)
    p_bench.add_argument("--sizes", default=",".join(str(s) for s in BENCH_SIZES))
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.set_defaults(fn=cmd_bench)

    p_plot = sub.add_parser("plot", help="regenerate SVGs from CSV outputs")
    p_plot.add_argument("--out", required=True, help="directory holding run outputs")
    p_plot.set_defaults(fn=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.fn(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, not a usage problem
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
