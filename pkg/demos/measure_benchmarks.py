"""Reproduce the reference performance tables.

Two benches: command latency/accuracy for each remote-control function over
loopback (with an optional injected transport delay so the numbers resemble a
real link), and remote-device tracking error with the calibrated localization
noise, both right after setup and spread over thirty simulated minutes.
"""

from arlecture.bench.calibration import predicted_mean_cm, verify_committed_sigma
from arlecture.bench.latency import format_stats, run_latency_bench
from arlecture.bench.tracking import (
    CALIBRATED_SIGMA,
    format_report,
    run_case1,
    run_case2,
)

print("command latency, zero-delay loopback (pure engine cost):")
print(format_stats(run_latency_bench(seed=0)))

print("\nsame bench with 25 ms injected each way:")
print(format_stats(run_latency_bench(seed=0, delay_ms=25.0)))

print("\ntracking error, 100 placements shortly after alignment:")
print(format_report(run_case1(seed=0)))

print("\ntracking error, 54 placements across 30 simulated minutes:")
print(format_report(run_case2(seed=0)))

check = verify_committed_sigma()
print(
    f"\ncalibration: sigma={check['sigma']} gives mean "
    f"{check['measured_mean_cm']:.2f} cm (analytic {check['predicted_mean_cm']:.2f} cm, "
    f"target {check['target_cm']:.0f} cm)"
)
print(
    "the analytic line: smoothing averages 50 samples, so the mean error is "
    f"sigma/sqrt(50) * 2*sqrt(2/pi) = {predicted_mean_cm(CALIBRATED_SIGMA):.2f} cm"
)
