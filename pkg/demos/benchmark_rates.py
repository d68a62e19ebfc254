"""
Crashed-vehicle rates, intervals, and safety impact
===================================================

Walks the core rate arithmetic on the bundled 2023 freeway benchmark
figures for five urban areas: rates per million miles, exact Poisson
intervals, the any-injury underreporting adjustment, and the percent
difference of a hypothetical ADS deployment against its local benchmark.
"""

from crashbench import (
    adjust_underreporting,
    compute_rate,
    poisson_ci,
    safety_impact,
)
from crashbench.rates import format_rate

# Freeway benchmark inputs: annual passenger-vehicle mileage (million
# miles) and crashed passenger vehicle counts by outcome level, 2023.
MILEAGE_MMI = {
    "Atlanta": 10_180.0,
    "Austin": 4_279.0,
    "Los Angeles": 30_700.0,
    "Phoenix": 31_285.0,
    "San Francisco to San Jose": 9_965.0,
}
CRASHED_VEHICLES = {
    "PoliceReported": {"Atlanta": 57_103, "Austin": 6_722, "Los Angeles": 72_034,
                       "Phoenix": 48_501, "San Francisco to San Jose": 20_648},
    "AnyInjuryReported": {"Atlanta": 23_398, "Austin": 4_176, "Los Angeles": 36_445,
                          "Phoenix": 23_342, "San Francisco to San Jose": 9_562},
    "AnyAirbagDeployment": {"Atlanta": 10_519, "Austin": 3_157, "Los Angeles": 20_786,
                            "Phoenix": 11_122, "San Francisco to San Jose": 6_695},
    "SuspectedSeriousInjuryPlus": {"Atlanta": 812, "Austin": 199, "Los Angeles": 1_093,
                                   "Phoenix": 491, "San Francisco to San Jose": 337},
    "Fatal": {"Atlanta": 140, "Austin": 47, "Los Angeles": 179,
              "Phoenix": 169, "San Francisco to San Jose": 71},
}

# A rate is just count / VMT scaled to incidents per million miles, but
# printing the whole grid shows the geographic spread at a glance.
print("Freeway crashed-vehicle rates (IPMM), 2023")
print(f"{'outcome':<28}" + "".join(f"{geo[:12]:>14}" for geo in MILEAGE_MMI))
for outcome, counts in CRASHED_VEHICLES.items():
    row = [
        format_rate(compute_rate(counts[geo], MILEAGE_MMI[geo] * 1e6))
        for geo in MILEAGE_MMI
    ]
    print(f"{outcome:<28}" + "".join(f"{value:>14}" for value in row))

# The airbag level has identical definitions everywhere, which makes the
# geographic spread directly comparable: Atlanta vs Phoenix is ~2.9x.
atlanta = compute_rate(10_519, 10_180e6)
phoenix = compute_rate(11_122, 31_285e6)
print(f"\nairbag-deployment spread: {atlanta / phoenix:.1f}x (Atlanta vs Phoenix)")

# Exact Poisson intervals: even the sparsest cells get honest bounds.
for geo in ("Atlanta", "Phoenix"):
    count = CRASHED_VEHICLES["Fatal"][geo]
    vmt = MILEAGE_MMI[geo] * 1e6
    low, high = poisson_ci(count, vmt)
    print(f"fatal rate {geo}: {compute_rate(count, vmt):.4f} IPMM, "
          f"95% CI [{low:.4f}, {high:.4f}]  ({count} events)")

# Any-injury counts are corrected for crashes never reported to police:
# the non-fatal portion scales by 1/(1-u) with u = 0.32; fatal counts
# pass through untouched, and no other outcome level is adjusted.
raw_injury = 23_398.0
fatal = 140.0
adjusted = adjust_underreporting(raw_injury - fatal, fatal, 0.32)
print(f"\nAtlanta any-injury count {raw_injury:.0f} -> {adjusted:.1f} after correction")

# Safety impact is the percent difference against the matching local
# benchmark. The same ADS fatal rate reads very differently against the
# right and wrong geography: against Phoenix's benchmark an ADS at
# 0.015 IPMM runs nearly three times the human rate, while Atlanta's
# higher benchmark would hide exactly that.
ads_fatal_rate = 0.015
for geo in ("Phoenix", "Atlanta"):
    benchmark = compute_rate(CRASHED_VEHICLES["Fatal"][geo], MILEAGE_MMI[geo] * 1e6)
    impact = safety_impact(ads_fatal_rate, benchmark)
    print(f"ADS fatal 0.015 IPMM vs {geo} benchmark {benchmark:.3f}: {impact:+.0f}%")
