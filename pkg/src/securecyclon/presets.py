"""Named scenario presets for the headline experiments.

Each preset is a scenario-file dict (base config + sweep/grid axes) that
``securecyclon run <name>`` accepts in place of a path. Names follow the
figure-reproduction convention used throughout the experiment tooling.
"""

from __future__ import annotations

PRESETS: dict[str, dict] = {
    # converged overlay, indegree distribution
    "fig2": {
        "base": {"mode": "legacy", "n": 1000, "view_len": 20, "swap_len": 3,
                 "cycles": 120, "attack": "none"},
    },
    # hub attack against the unprotected baseline, smallest takeover party
    "fig3": {
        "base": {"mode": "legacy", "swap_len": 3, "cycles": 150,
                 "attack": "hub", "attack_start": 50},
        "grid": [
            {"n": 1000, "view_len": 20, "malicious_fraction": 0.02},
            {"n": 10000, "view_len": 50, "malicious_fraction": 0.005},
        ],
    },
    # same attack, shielded overlay
    "fig5-top": {
        "base": {"mode": "secure", "n": 1000, "view_len": 20, "swap_len": 3,
                 "cycles": 160, "attack": "hub", "attack_start": 50,
                 "malicious_fraction": 0.02},
    },
    # shielded overlay versus a 40% malicious population, swap-length sweep
    "fig5-bottom": {
        "base": {"mode": "secure", "n": 1000, "view_len": 20, "cycles": 160,
                 "attack": "hub", "attack_start": 50, "malicious_fraction": 0.4},
        "sweep": {"swap_len": [2, 3, 5, 8, 10]},
    },
    # link-depletion attack: tit-for-tat off/on, small and massive parties
    "fig6": {
        "base": {"mode": "secure", "n": 1000, "view_len": 20, "swap_len": 3,
                 "cycles": 150, "attack": "deplete", "attack_start": 50},
        "grid": [
            {"titfortat": False, "malicious_fraction": 0.02},
            {"titfortat": False, "malicious_fraction": 0.5},
            {"titfortat": True, "malicious_fraction": 0.02},
            {"titfortat": True, "malicious_fraction": 0.5},
        ],
    },
    # descriptor cloning at configurable age, redemption-cache sweep
    "fig7": {
        "base": {"mode": "secure", "n": 1000, "view_len": 20, "swap_len": 3,
                 "cycles": 150, "attack": "clone", "attack_start": 30},
        "sweep": {"clone_age": [2, 14]},
        "grid": [
            {"malicious_fraction": 0.05, "redemption_cache_len": 5},
            {"malicious_fraction": 0.20, "redemption_cache_len": 5},
            {"malicious_fraction": 0.50, "redemption_cache_len": 10},
        ],
    },
}
