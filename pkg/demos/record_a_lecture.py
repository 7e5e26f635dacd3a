"""Record the bundled demo lecture and look around the result.

A scripted 30-second session: the lecturer places a 12-page deck on the wall,
pages through it, draws with the laser pointer, pins a slide, tries the three
display styles, marks two retakes, and finally walks out of frame. Everything
runs on the virtual clock, so the exported timeline is byte-stable.
"""

from collections import Counter

from arlecture.director import export_timeline
from arlecture.scenario import demo_scenario, run_scenario

eng, issuer = run_scenario(demo_scenario(), seed=0)
timeline = eng.timeline()

print(f"recorded {len(timeline.frames)} frames at {timeline.header['tick_hz']} Hz")
print(f"commands applied: {sum(1 for a in issuer.acks if a.applied)}/{len(issuer.acks)}")

modes = Counter(f["camera"]["mode"] for f in timeline.frames)
print("\ncamera time by mode:")
for mode, n in modes.most_common():
    print(f"  {mode:<18} {n / 30:.1f} s")

print("\nvirtual camera cuts:")
for t, mode in eng.director.camera.changes:
    print(f"  {t / 1000.0:6.2f} s -> {mode}")

print("\nassistant popups as they appeared:")
seen = set()
for f in timeline.frames:
    for p in f["overlays"]["popups"]:
        key = (p["text"], f["tick"] // 120)  # dedupe while one popup persists
        if p["text"] not in seen:
            seen.add(p["text"])
            print(f"  {f['t_ms'] / 1000.0:6.2f} s  \"{p['text']}\"")

print(f"\nretake markers: {[ (m['tick'], m['method']) for m in timeline.markers ]}")

export_timeline(timeline, "demo_timeline.jsonl")
eng.director.write_retake_log("demo_retakes.jsonl")
print("\nwrote demo_timeline.jsonl and demo_retakes.jsonl")
print("rerun this script: both files come out byte-identical")
