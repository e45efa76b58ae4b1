"""Break the fixed-redundancy sweep into waiting, service and thread availability.

For each m this prints the mean delay, the mean service time (first chunk
start to departure), the unlimited-bandwidth service time (k-th order
statistic of m draws) and the fraction of arrivals that find the system empty.
When m exceeds L/2 a request arriving behind a busy one starts with only
the L - m leftover threads, which is what pushes the measured service time
above the unlimited-bandwidth curve.
"""
import argparse

import numpy as np
from scipy import integrate

from fecsim import scenarios
from fecsim.engine import replicate
from fecsim.oracles import order_statistic_ccdf


def unlimited_service(model, m, k):
    value, _ = integrate.quad(lambda t: order_statistic_ccdf(model, m, k, t), 0, np.inf, limit=200)
    return value


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--replications", type=int, default=10)
    parser.add_argument("--arrivals", type=int, default=20000)
    parser.add_argument("--seed", type=int, default=scenarios.DEFAULT_SEED)
    args = parser.parse_args()

    scenario = scenarios.preset("fig9", args.seed, args.replications, args.arrivals)
    k = scenario.base.coding.k
    print(f"{'m':>3} {'delay':>9} {'service':>9} {'unlimited':>9} {'queueing':>9} {'alone':>7}")
    for m in scenario.values:
        cfg = scenario.config(m, scenario.policies[0])
        sets = replicate(cfg)
        delay = np.mean([s.delays.mean() for s in sets])
        service = np.mean([s.service_times.mean() for s in sets])
        # fraction of requests that found no other request in the system
        alone = np.mean([np.mean(s.queue_trace[:, 1] == 0) for s in sets])
        print(f"{m:3d} {delay:9.2f} {service:9.2f} {unlimited_service(cfg.service_model, m, k):9.2f} "
              f"{delay - service:9.2f} {alone:7.3f}")


if __name__ == "__main__":
    main()
