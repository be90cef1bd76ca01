"""noniid: certification experiments beyond the iid assumption.

A numpy toolkit for studying what sequential black-box tests can and cannot
certify when devices are allowed to remember past rounds.  It bundles:

* single- and multi-round probability objects (:mod:`noniid.correlations`),
* device samplers including triangle-network local models and deterministic
  memory strategies (:mod:`noniid.devices`),
* binary hypothesis tests with exact and Monte Carlo acceptance, an iid
  K-sigma frequency test and a sound sequential witness test
  (:mod:`noniid.hypothesis`),
* convex-hull membership with LP certificates (:mod:`noniid.convexity`),
* the two-copy state witness and its exposedness scan (:mod:`noniid.selftest`),
* triangle-scenario attacks and demos (:mod:`noniid.triangle`).
"""

from .correlations import (
    Alphabet,
    AlphabetMismatch,
    Behavior,
    BehaviorError,
    FrequencyTable,
    LinearWitness,
    Transcript,
    evaluate_witness,
    frequency_estimate,
    l1_distance,
    product_behavior,
    validate_behavior,
)

__version__ = "0.1.0"
