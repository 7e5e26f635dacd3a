"""Command-line front end: latency and tracking benches, scripted scenario
export, noise calibration, and the live TCP server."""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

from ..director import export_timeline
from ..protocol import DEFAULT_PORT
from ..scenario import demo_scenario, load_scenario, run_scenario
from . import calibration, latency, tracking


def _cmd_latency(args) -> int:
    results = latency.run_latency_bench(
        seed=args.seed, trials=args.trials, delay_ms=args.delay_ms
    )
    print(latency.format_stats(results))
    if args.csv:
        latency.write_csv(results, args.csv)
        print(f"wrote {args.csv}")
    if args.no_check:
        return 0
    return 0 if all(s.passed for s in results) else 1


def _tracking_csv(reports, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["case", "trial", "t_ms", "error_cm"])
        for r in reports:
            for i, (t, e) in enumerate(zip(r.trial_times_ms, r.errors_cm)):
                w.writerow([r.case, i, t, e])


def _cmd_tracking(args) -> int:
    reports = []
    if args.case in ("1", "both"):
        reports.append(tracking.run_case1(seed=args.seed, sigma=args.sigma))
    if args.case in ("2", "both"):
        reports.append(tracking.run_case2(seed=args.seed, sigma=args.sigma))
    for r in reports:
        print(tracking.format_report(r))
    if args.csv:
        _tracking_csv(reports, args.csv)
        print(f"wrote {args.csv}")
    if args.no_check:
        return 0
    return 0 if all(r.passed for r in reports) else 1


def _cmd_scenario(args) -> int:
    sc = load_scenario(args.script) if args.script else demo_scenario()
    eng, issuer = run_scenario(sc, seed=args.seed)
    rejected = [a for a in issuer.acks if not a.applied]
    export_timeline(eng.timeline(), args.out)
    print(
        f"{len(eng.director.frames)} frames, {len(eng.director.markers)} retake "
        f"markers, {len(rejected)} rejected commands -> {args.out}"
    )
    if args.retake_log:
        eng.director.write_retake_log(args.retake_log)
        print(f"retake log -> {args.retake_log}")
    return 0


def _cmd_calibrate(args) -> int:
    sigma, measured = calibration.calibrate_sigma(
        target_cm=args.target_cm, tol_cm=args.tol_cm, seed=args.seed
    )
    print(f"sigma={sigma:.6f}  case1 mean={measured:.3f} cm (target {args.target_cm})")
    print(f"analytic prediction: {calibration.predicted_mean_cm(sigma):.3f} cm")
    committed = calibration.verify_committed_sigma(seed=args.seed)
    state = "ok" if committed["within_tolerance"] else "STALE"
    print(
        f"committed constant {committed['sigma']:.6f} -> "
        f"{committed['measured_mean_cm']:.3f} cm [{state}]"
    )
    return 0 if committed["within_tolerance"] else 1


def _cmd_serve(args) -> int:
    import signal
    import threading

    from ..server import EngineServer
    from ..store import MaterialStore

    store = MaterialStore(args.store) if args.store else None
    srv = EngineServer(
        host=args.host, port=args.port, tick_hz=args.hz, seed=args.seed, store=store
    )

    def _interrupt(signum, frame):
        raise KeyboardInterrupt

    # so supervisors that send SIGTERM still get a clean shutdown + export
    # (handlers can only be installed from the main thread)
    if threading.current_thread() is threading.main_thread():
        signal.signal(signal.SIGTERM, _interrupt)
    with srv:
        host, port = srv.address
        print(f"engine listening on {host}:{port} at {args.hz} Hz")
        try:
            while True:
                time.sleep(0.5)
        except KeyboardInterrupt:
            print("shutting down")
    if args.timeline_out:
        export_timeline(srv.engine.timeline(), args.timeline_out)
        print(f"timeline -> {args.timeline_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    lat = sub.add_parser("latency", help="command latency/accuracy bench")
    lat.add_argument("--trials", type=int, default=latency.TRIALS_PER_KIND)
    lat.add_argument("--seed", type=int, default=0)
    lat.add_argument("--delay-ms", type=float, default=0.0,
                     help="injected one-way transport delay")
    lat.add_argument("--csv", default=None)
    lat.add_argument("--no-check", action="store_true")
    lat.set_defaults(fn=_cmd_latency)

    tr = sub.add_parser("tracking", help="remote tracking accuracy bench")
    tr.add_argument("--case", choices=["1", "2", "both"], default="both")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--sigma", type=float, default=tracking.CALIBRATED_SIGMA)
    tr.add_argument("--csv", default=None)
    tr.add_argument("--no-check", action="store_true")
    tr.set_defaults(fn=_cmd_tracking)

    sc = sub.add_parser("scenario", help="replay a scripted session to a timeline")
    sc.add_argument("--script", default=None, help="scenario JSON (default: built-in demo)")
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--out", default="timeline.jsonl")
    sc.add_argument("--retake-log", default=None)
    sc.set_defaults(fn=_cmd_scenario)

    cal = sub.add_parser("calibrate-sigma", help="re-derive the noise scale")
    cal.add_argument("--target-cm", type=float, default=calibration.TARGET_MEAN_CM)
    cal.add_argument("--tol-cm", type=float, default=calibration.TOLERANCE_CM)
    cal.add_argument("--seed", type=int, default=0)
    cal.set_defaults(fn=_cmd_calibrate)

    srv = sub.add_parser("serve", help="run the live TCP engine")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=DEFAULT_PORT)
    srv.add_argument("--hz", type=int, default=30)
    srv.add_argument("--seed", type=int, default=0)
    srv.add_argument("--store", default=os.environ.get("ARLECTURE_STORE_DIR"))
    srv.add_argument("--timeline-out", default=None,
                     help="export the session timeline here on shutdown")
    srv.set_defaults(fn=_cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
