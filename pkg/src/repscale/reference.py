"""Published reference parameter sets for the two weight-decay studies.

These are fitted constants reported for FineWeb pretraining sweeps at the
standard (lambda = 0.1) and strong (lambda = 1.0) weight-decay settings,
plus the refit on the public C4 deduplicated run table.  They are inputs
for allocation and crossover analysis, not outputs of this package.
"""

from .laws import (
    AddPenalty1,
    AddPenalty2,
    AddPenalty4,
    ChinchillaParams,
    EffectiveParam,
    ExpDecayData,
    LawSpec,
)

STANDARD_WD_BASE = ChinchillaParams(E=1.8383, A=216.58, alpha=0.2999, B=4964.42, beta=0.4274)
STRONG_WD_BASE = ChinchillaParams(E=2.0422, A=214.64, alpha=0.2922, B=29370.43, beta=0.5333)
C4_DEDUP_BASE = ChinchillaParams(E=1.9031, A=432.63, alpha=0.3362, B=5360.24, beta=0.3868)

STANDARD_WD_EXP_DECAY = ExpDecayData(r_star_d=7.756)
STANDARD_WD_EFF_PARAM = EffectiveParam(r_star_d=7.765, r_star_n=9593.0)
STANDARD_WD_ADD1 = AddPenalty1(p=0.02305)
STANDARD_WD_ADD2 = AddPenalty2(p=0.02186, kappa=1.051)
STANDARD_WD_ADD4 = AddPenalty4(p=3.27e-7, delta=1.674, kappa=1.345, gamma=0.635)

STRONG_WD_EXP_DECAY = ExpDecayData(r_star_d=12.731)
STRONG_WD_EFF_PARAM = EffectiveParam(r_star_d=13.749, r_star_n=1_706_066.0)
STRONG_WD_ADD1 = AddPenalty1(p=0.00681)
STRONG_WD_ADD2 = AddPenalty2(p=0.00569, kappa=1.350)
STRONG_WD_ADD4 = AddPenalty4(p=0.00257, delta=1.563, kappa=1.391, gamma=1.024)

STANDARD_WD_ADD4_SPEC = LawSpec(base=STANDARD_WD_BASE, rep=STANDARD_WD_ADD4)
STRONG_WD_ADD4_SPEC = LawSpec(base=STRONG_WD_BASE, rep=STRONG_WD_ADD4)

REFERENCE_SPECS = {
    "std-chinchilla": LawSpec(base=STANDARD_WD_BASE),
    "std-exp-decay": LawSpec(base=STANDARD_WD_BASE, rep=STANDARD_WD_EXP_DECAY),
    "std-eff-param": LawSpec(base=STANDARD_WD_BASE, rep=STANDARD_WD_EFF_PARAM),
    "std-add1": LawSpec(base=STANDARD_WD_BASE, rep=STANDARD_WD_ADD1),
    "std-add2": LawSpec(base=STANDARD_WD_BASE, rep=STANDARD_WD_ADD2),
    "std-add4": STANDARD_WD_ADD4_SPEC,
    "wd-chinchilla": LawSpec(base=STRONG_WD_BASE),
    "wd-exp-decay": LawSpec(base=STRONG_WD_BASE, rep=STRONG_WD_EXP_DECAY),
    "wd-eff-param": LawSpec(base=STRONG_WD_BASE, rep=STRONG_WD_EFF_PARAM),
    "wd-add1": LawSpec(base=STRONG_WD_BASE, rep=STRONG_WD_ADD1),
    "wd-add2": LawSpec(base=STRONG_WD_BASE, rep=STRONG_WD_ADD2),
    "wd-add4": STRONG_WD_ADD4_SPEC,
}
