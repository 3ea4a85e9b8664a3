"""scikit-learn style facade over a single scenario run.

``BeamTracer`` has no training data: ``fit`` runs the configured scenario and
stores the trajectory log, ``predict`` interpolates ray positions at arbitrary
times and ``score`` reports the worst relative envelope error when the
scenario carries an envelope oracle.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .scenarios import build_scenario, metrics_table, run_scenario


class BeamTracer(BaseEstimator):
    """Trace one named scenario.

    Parameters
    ----------
    scenario : str
        Registered scenario name (see :func:`wavetraj.list_scenarios`).
    wavelength_ratio : float, optional
        lambda / w0; ``None`` keeps the scenario default.
    n_rays, dt : optional
        Numerics overrides; ``None`` keeps the defaults.
    eikonal_mode : bool
        Drop the Wave Potential (W = 0).
    strict_projection : bool
        Use the literal ``(px/pz)^2`` projection factor.
    workers : int
        Threads for the ray update; results do not depend on it.
    overrides : dict, optional
        Any further ``key -> value`` overrides, applied last.
    """

    def __init__(self, scenario="free_gaussian", wavelength_ratio=None, n_rays=None, dt=None,
                 eikonal_mode=False, strict_projection=False, workers=1, overrides=None):
        self.scenario = scenario
        self.wavelength_ratio = wavelength_ratio
        self.n_rays = n_rays
        self.dt = dt
        self.eikonal_mode = eikonal_mode
        self.strict_projection = strict_projection
        self.workers = workers
        self.overrides = overrides

    def _overrides(self):
        out = {k: v for k, v in (("wavelength_ratio", self.wavelength_ratio),
                                 ("n_rays", self.n_rays), ("dt", self.dt)) if v is not None}
        out.update(eikonal_mode=self.eikonal_mode, strict_projection=self.strict_projection,
                   workers=self.workers)
        out.update(self.overrides or {})
        return out

    def fit(self, X=None, y=None):
        """Run the scenario. ``X`` and ``y`` are accepted for API symmetry and ignored."""
        self.config_ = build_scenario(self.scenario, self._overrides())
        result = run_scenario(self.config_)
        self.result_ = result
        self.log_ = result.log
        self.metrics_ = metrics_table(result.metrics)
        self.checks_ = result.checks
        self.n_rays_ = result.log.n_rays
        return self

    def _check_fitted(self):
        if not hasattr(self, "log_"):
            raise NotFittedError("BeamTracer is not fitted yet; call fit() first")

    def predict(self, t):
        """Ray positions at times ``t``, shape ``(len(t), n_rays, 2)``.

        Linear interpolation between recorded samples; times outside the run
        are clipped to its ends.
        """
        self._check_fitted()
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lg = self.log_
        flat = lg.pos.reshape(lg.n_samples, -1)
        out = np.stack([np.interp(t, lg.t, col) for col in flat.T], axis=-1)
        return out.reshape(len(t), lg.n_rays, 2)

    def score(self, X=None, y=None):
        """Negative worst relative envelope error (higher is better)."""
        self._check_fitted()
        if "envelope" not in self.checks_:
            raise ValueError(f"scenario {self.scenario!r} has no envelope oracle to score against")
        return -float(self.checks_["envelope"]["max_rel_err"])
