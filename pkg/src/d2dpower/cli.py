"""Command-line interface: train, eval, powermap, gradcheck, oracle.

Heavy imports happen inside the command handlers so --threads can pin
the BLAS thread pools before numpy loads. The seed resolves in the order
--seed flag > D2DPOWER_SEED environment variable > config file, and the
effective configuration is echoed to <out-dir>/config_resolved.json so
any run can be reproduced from its own output directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3
EXIT_NUMERIC = 4
EXIT_ORACLE = 5

SEED_ENV_VAR = "D2DPOWER_SEED"

_METRICS_COLUMNS = (
    "iteration",
    "cost_total",
    "mean_eta",
    "ct_p",
    "ct_if",
    "pmax_violation_rate",
    "q_exceed_rate",
)


def _fmt(value) -> str:
    """Full round-trip decimal representation for numeric CSV cells."""
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _set_thread_env(threads: int) -> None:
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        os.environ[var] = str(threads)


def _resolve(args):
    """Load the config and fold in CLI/environment overrides."""
    from .config import load_config

    cfg = load_config(args.config)
    seed = args.seed
    if seed is None and SEED_ENV_VAR in os.environ:
        try:
            seed = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            from .errors import ConfigurationError

            raise ConfigurationError(
                f"{SEED_ENV_VAR} must be an integer, got {os.environ[SEED_ENV_VAR]!r}"
            )
    cfg = cfg.with_overrides(seed=seed, out_dir=args.out_dir, threads=args.threads)
    if cfg.threads is not None:
        _set_thread_env(cfg.threads)
    return cfg


def _prepare_out(cfg) -> Path:
    from .config import dump_config

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config_resolved.json")
    return out


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def cmd_train(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(cfg)
    from .network import save_checkpoint
    from .training import train

    params, stats, metrics = train(cfg.train_config())
    log_every = cfg.log_every
    n_epoch = len(metrics)
    rows = [
        (
            rec.iteration,
            rec.cost_total,
            rec.mean_eta,
            rec.ct_p,
            rec.ct_if,
            rec.pmax_violation_rate,
            rec.q_exceed_rate,
        )
        for rec in metrics
        if (rec.iteration - 1) % log_every == 0 or rec.iteration == n_epoch
    ]
    _write_csv(out / "metrics.csv", _METRICS_COLUMNS, rows)
    save_checkpoint(params, stats, out / "checkpoint.bin")
    last = metrics[-1]
    print(
        f"trained {n_epoch} iterations: cost={last.cost_total:.4f} "
        f"eta={last.mean_eta:.4f} ct_p={last.ct_p:.4f} ct_if={last.ct_if:.4f}"
    )
    print(f"wrote {out / 'metrics.csv'} and {out / 'checkpoint.bin'}")
    return EXIT_OK


def _load_checkpoint_or_raise(path, expect_config):
    from .errors import CheckpointError
    from .network import load_checkpoint

    if path is None:
        raise CheckpointError("a checkpoint path is required (--checkpoint)")
    if not Path(path).is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return load_checkpoint(path, expect_config)


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(cfg)
    import numpy as np

    from .evaluation import evaluate
    from .topology import build_hex_layout

    params, stats = _load_checkpoint_or_raise(args.checkpoint, cfg.network())
    topo = cfg.topology()
    layout = build_hex_layout(topo.cells, topo.radius_m)
    report = evaluate(
        params,
        stats,
        layout,
        cfg.channel(),
        cfg.constraints(),
        topo.pairs_per_cell,
        topo.dmax_m,
        cfg.evaluation["n_drops"],
        np.random.default_rng(cfg.seed),
    )
    fields = (
        ("mean_eta", report.mean_eta),
        ("eta_std", report.eta_std),
        ("mean_total_power_per_tx_w", report.mean_total_power_per_tx_w),
        ("pmax_violation_rate", report.pmax_violation_rate),
        ("q_exceed_rate", report.q_exceed_rate),
        ("n_drops", report.n_drops),
    )
    with open(out / "eval_report.txt", "w", encoding="utf-8", newline="\n") as f:
        for name, value in fields:
            f.write(f"{name} = {_fmt(value)}\n")
    _write_csv(
        out / "eval_report.csv",
        [name for name, _ in fields],
        [tuple(value for _, value in fields)],
    )
    for name, value in fields:
        print(f"{name} = {_fmt(value)}")
    return EXIT_OK


def cmd_powermap(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(cfg)
    from .evaluation import power_map
    from .topology import build_hex_layout

    params, stats = _load_checkpoint_or_raise(args.checkpoint, cfg.network())
    topo = cfg.topology()
    layout = build_hex_layout(topo.cells, topo.radius_m)
    raster = power_map(
        params,
        stats,
        layout,
        grid_step=cfg.evaluation["grid_step_m"],
        rx_offset=cfg.evaluation["rx_offset_m"],
    )
    _write_csv(out / "power_map.csv", ("x", "y", "mean_dbm"), raster.iter_points())
    n_cells = int((raster.values == raster.values).sum())
    print(f"wrote {out / 'power_map.csv'} ({n_cells} grid points)")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = _resolve(args)
    import numpy as np

    from .channel import build_gain_table
    from .network import init_params
    from .topology import build_hex_layout, sample_batch
    from .training import finite_difference_check

    topo = cfg.topology()
    channel = cfg.channel()
    rng = np.random.default_rng(cfg.seed)
    layout = build_hex_layout(topo.cells, topo.radius_m)
    batch = sample_batch(
        layout, topo.pairs_per_cell, topo.dmax_m,
        cfg.resolved["training"]["batch_size"], rng,
    )
    n_ch = cfg.network().output_size if channel.per_channel_shadowing else None
    tables = [build_gain_table(d, channel, rng, n_ch) for d in batch.drops]
    params = init_params(cfg.network(), rng)
    max_err, n_entries = finite_difference_check(
        params, batch, tables, cfg.constraints(), channel.noise_dbw
    )
    threshold = 1e-4
    ok = max_err < threshold
    print(
        f"gradient check over {n_entries} parameters: max relative error "
        f"{max_err:.3e} ({'PASS' if ok else 'FAIL'}, threshold {threshold:g})"
    )
    return EXIT_OK if ok else 1


def cmd_oracle(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(cfg)
    import numpy as np

    from .channel import build_gain_table
    from .evaluation import oracle_direct_opt, oracle_grid_search
    from .network import forward
    from .objective import drop_cost
    from .topology import build_hex_layout, sample_drop

    topo = cfg.topology()
    channel = cfg.channel()
    constraints = cfg.constraints()
    n = cfg.network().output_size
    rng = np.random.default_rng(cfg.seed)
    layout = build_hex_layout(topo.cells, topo.radius_m)
    drop = sample_drop(layout, topo.pairs_per_cell, topo.dmax_m, rng)
    n_ch = n if channel.per_channel_shadowing else None
    gains = build_gain_table(drop, channel, rng, n_ch)

    levels = np.linspace(-150.0, 20.0, cfg.evaluation["oracle_levels"])
    _, grid_cost = oracle_grid_search(gains, constraints, channel.noise_dbw, levels, n)
    _, direct_cost = oracle_direct_opt(
        gains,
        constraints,
        channel.noise_dbw,
        n,
        cfg.evaluation["oracle_direct_iters"],
        cfg.evaluation["oracle_direct_lr"],
    )
    rows = [("grid_search", grid_cost), ("direct_opt", direct_cost)]
    if args.checkpoint is not None:
        params, stats = _load_checkpoint_or_raise(args.checkpoint, cfg.network())
        p, _ = forward(params, drop.coords(), "infer", stats)
        rows.append(("checkpoint", drop_cost(gains, p, constraints, channel.noise_dbw).total))
    _write_csv(out / "oracle_comparison.csv", ("method", "cost_total"), rows)
    for method, cost in rows:
        print(f"{method}: cost_total = {_fmt(cost)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d2dpower",
        description="Distributed D2D power allocation: training, evaluation, and oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (
        ("train", cmd_train, "train a network and write metrics + checkpoint", False),
        ("eval", cmd_eval, "evaluate a checkpoint on held-out drops", True),
        ("powermap", cmd_powermap, "raster of mean output power over the layout", True),
        ("gradcheck", cmd_gradcheck, "finite-difference gradient gate", False),
        ("oracle", cmd_oracle, "grid-search / direct-opt reference costs", True),
    )
    for name, func, help_text, takes_checkpoint in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--out-dir", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
        if takes_checkpoint:
            p.add_argument(
                "--checkpoint",
                default=None,
                required=name in ("eval", "powermap"),
                help="path to a trained checkpoint",
            )
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        _set_thread_env(args.threads)
    from .errors import (
        CheckpointError,
        ConfigurationError,
        NumericError,
        SearchSpaceTooLargeError,
    )

    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as e:
        print(f"checkpoint error: {e}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except SearchSpaceTooLargeError as e:
        print(f"oracle error: {e}", file=sys.stderr)
        return EXIT_ORACLE
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
