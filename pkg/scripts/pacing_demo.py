"""Show how one unit of volume paces along A-B-C (9 and 12 minute links).

With 60-minute periods the volume splits 0.85/0.15 over A-B and the capacity
charge counts each period-crossing flow half on each side, giving the familiar
0.925 on A-B and 0.25 on B-C one period later.
"""

from pathlib import Path

from railflow.scenario import load_scenario, report_capacity_csv, run

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "three_station_line.json"


def main():
    output = run(load_scenario(SCENARIO))
    model, values = output.model, output.result.values
    route = model.catalog.route_named("A-C-r1")

    print("objective:", round(output.result.objective, 6))
    for t in (1, 2):
        dep = values[model.var("dep", route.id, t)]
        arr = values[model.var("arr", route.id, t)]
        print(f"period {t}: departures {dep:.2f}, arrivals {arr:.2f}")
    print()
    print(report_capacity_csv(output.capacity).decode(), end="")


if __name__ == "__main__":
    main()
