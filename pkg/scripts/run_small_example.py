"""Solve the bundled eight-station network, then rerun it with a one-period
capacity withdrawal on link E-F and print both capacity-usage tables."""

from pathlib import Path

from railflow.scenario import TcrOverride, apply_tcr, load_scenario, run

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "small_network.json"


def print_table(tag, output):
    report = output.capacity
    print(f"\n== {tag}: objective {output.result.objective:.4f}, "
          f"{output.result.nodes} nodes, {output.result.iterations} simplex iterations ==")
    header = "link   " + "".join(f"{t:>7}" for t in range(1, report.t_max + 1))
    print(header)
    for lname in report.link_names:
        cells = "".join(f"{report.total[(lname, t)]:7.2f}" for t in range(1, report.t_max + 1))
        print(f"{lname:<7}{cells}")
    for rep_name, other in report.setup_pairs:
        cells = "".join(f"{report.setup[(rep_name, t)]:7.2f}" for t in range(1, report.t_max + 1))
        print(f"setup  {cells}   ({rep_name}/{other})")


def main():
    doc = load_scenario(SCENARIO)
    base = run(doc)
    print_table("base", base)

    restricted = apply_tcr(doc, [TcrOverride(link="E-F", period=4, capacity=0.0)])
    blocked = run(restricted)
    print_table("E-F closed in period 4", blocked)

    print("\nobjective increase:", f"{blocked.result.objective - base.result.objective:.6f}")
    for name in blocked.demands.demand_names:
        split = {
            route: round(
                sum(blocked.demands.departures[(name, route, t)] for t in range(1, doc.t_max + 1)), 3
            )
            for route in blocked.demands.routes_of[name]
        }
        print(f"  {name}: served via {split}, cancelled {blocked.demands.cancel_total[name]:.0f}")


if __name__ == "__main__":
    main()
