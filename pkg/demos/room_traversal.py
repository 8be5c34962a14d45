"""Six-direction traversal against a bounce-off-the-walls baseline.

Both planners run on the bundled worlds with a 3-unit robot. The traversal
scans six directions at every stop and takes the longest open one. The
baseline drives straight and turns left at each obstacle. Paths are saved
as SVG next to the script.
"""
from pathlib import Path

from roomscan.planner import BounceConfig, TraversalConfig, naive_bounce, run_traversal
from roomscan.simworld import SimRobot, coverage, find_start, load_fixture, render_paths

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)
radius = 1.5

for name in ("figure6", "trap", "empty"):
    world = load_fixture(name)
    start = world.start or find_start(world, radius)
    runs = []
    print(f"{name}: start ({start.x:.2f}, {start.y:.2f})")
    for label, plan, cfg in (("traversal", run_traversal, TraversalConfig(base_threshold=20.0)),
                             ("bounce", naive_bounce, BounceConfig(step_cap=20_000))):
        bot = SimRobot(world, start, radius, sensor_max=100.0)
        res = plan(bot, bot, cfg)
        cov = coverage(world, res.path, radius)
        runs.append(res)
        print(f"  {label:9s} {res.termination.value:16s} coverage {cov.fraction:.3f} "
              f"steps {res.steps_taken:6d} distance {res.distance_traveled:8.1f}")
    (out / f"{name}.svg").write_bytes(render_paths(world, runs, "svg"))

# In the trap world the start sits inside the loop the bounce robot follows
# around the outer wall, so it never passes the start again and only the
# step cap stops it. The traversal notices it has closed a loop and heads home.
print(f"wrote SVGs to {out}")
