"""Tabulate achievability, converse and second-order rates over n_B.

    python3 scripts/bound_check.py --slots 1,2 --n 300,1000,10000,100000
"""

import argparse
import math
import sys
import warnings

import numpy as np

from twentyq.bounds import BoundQuery, achievability_bound, best_eta, second_order_rates
from twentyq.channels import ChannelModel, SizeFunction
from twentyq.infodensity import capacity
from twentyq.kinematics import SlotSchedule

ETA_GRID = tuple(np.geomspace(1e-4, 1.0, 13))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", default="1,2")
    ap.add_argument("--n", default="300,1000,10000,100000")
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--zeta", type=float, default=0.2)
    ap.add_argument("--M", type=int, default=4, help="resolution parameter for the finite-n bounds")
    ap.add_argument("--rcu-max", type=int, default=400,
                    help="skip rcu_exact above this n_B (the exact sum costs O(n^3) per eta)")
    args = ap.parse_args(argv)

    ch = ChannelModel.bsc(args.zeta, SizeFunction(2.0, 0.5))
    cap = capacity(ch)
    print(f"C = {cap.C:.10f} nats at p* = {cap.p_star:.6f}, V = {cap.variances[0]:.6f}")
    print(f"{'B':>2} {'n_B':>7} {'achievable':>11} {'converse':>11} {'C/(B+1)':>11} {'gap %':>7} "
          f"{'rcu(M)':>9} {'gauss(M)':>9}")
    for B in (int(b) for b in args.slots.split(",")):
        for nB in (int(x) for x in args.n.split(",")):
            nB -= nB % (B + 1)
            sched = SlotSchedule.equal_split(nB, B, 1, 1.0 / nB)
            rep = second_order_rates(sched, args.eps, ch, cap=cap)
            gap = max(abs(rep.achievable_rate - rep.corollary_rate),
                      abs(rep.converse_rate - rep.corollary_rate)) / rep.corollary_rate
            finite = []
            for mode in ("rcu_exact", "gaussian_approx"):
                if nB > args.rcu_max and mode == "rcu_exact":
                    finite.append(math.nan)
                    continue
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    eta = best_eta(sched, args.M, cap.p_star, ch, mode, grid=ETA_GRID)
                    finite.append(achievability_bound(BoundQuery(sched, args.M, cap.p_star, eta, ch, mode)).value)
            print(f"{B:>2} {nB:>7} {rep.achievable_rate:>11.6f} {rep.converse_rate:>11.6f} "
                  f"{rep.corollary_rate:>11.6f} {100 * gap:>7.3f} {finite[0]:>9.3g} {finite[1]:>9.3g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
