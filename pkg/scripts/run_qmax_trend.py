"""Desk-scale interference-cap sweep: trains one small network per QMAX
value and seed, then evaluates each on held-out drops.

Reproduces the qualitative trend of the full-scale system (tighter caps
cost spectral efficiency) in a few minutes on a laptop.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from d2dpower.channel import ChannelParams
from d2dpower.evaluation import evaluate
from d2dpower.network import NetworkConfig
from d2dpower.objective import ConstraintConfig
from d2dpower.topology import TopologyConfig, build_hex_layout
from d2dpower.training import TrainConfig, train


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--qmax-dbw", type=float, nargs="+", default=[-120.0, -135.0, -150.0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    parser.add_argument("--iters", type=int, default=5000)
    parser.add_argument("--eval-drops", type=int, default=1000)
    args = parser.parse_args()

    topo = TopologyConfig(cells=1, radius_m=500.0, pairs_per_cell=4, dmax_m=100.0)
    channel = ChannelParams()
    layout = build_hex_layout(topo.cells, topo.radius_m)
    print(f"{'QMAX dBW':>9} {'seed':>5} {'eta':>7} {'pmax_viol':>10} {'q_exceed':>9} {'secs':>6}")
    for q in args.qmax_dbw:
        etas = []
        for seed in args.seeds:
            cons = ConstraintConfig(p_max_w=0.25, q_max_dbw=q, c_p=3000.0, c_if=100.0)
            cfg = TrainConfig(
                network=NetworkConfig(width=64, depth=3, output_size=4),
                constraints=cons, channel=channel, topology=topo,
                n_epoch=args.iters, batch_size=16, lr=1e-3, seed=seed,
            )
            t0 = time.perf_counter()
            params, stats, _ = train(cfg)
            report = evaluate(
                params, stats, layout, channel, cons,
                topo.pairs_per_cell, topo.dmax_m, args.eval_drops,
                np.random.default_rng(99),
            )
            etas.append(report.mean_eta)
            print(
                f"{q:9.0f} {seed:5d} {report.mean_eta:7.3f} "
                f"{report.pmax_violation_rate:10.4f} {report.q_exceed_rate:9.4f} "
                f"{time.perf_counter() - t0:6.1f}"
            )
        print(f"{q:9.0f}   median eta = {sorted(etas)[len(etas) // 2]:.3f}")


if __name__ == "__main__":
    main()
