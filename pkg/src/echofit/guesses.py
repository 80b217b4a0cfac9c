"""Data-driven starting values for the catalogued models.

These are deliberately crude; they only need to land inside the basin of
the global minimum, with multi-start jitter covering the rest.
"""

from dataclasses import dataclass

import numpy as np

from .constants import MU_B_OVER_K_B

# sech^2(k) = 1/2 at k = ln(1 + sqrt(2)).
_SECH2_HALF_ARG = float(np.log(1.0 + np.sqrt(2.0)))


@dataclass(frozen=True)
class GuessResult:
    params: dict
    degenerate: bool = False
    note: str = ""


def _positive(v, fallback):
    return float(v) if np.isfinite(v) and v > 0 else float(fallback)


def _guess_mims(t_us, y):
    y0 = _positive(y[0], max(np.max(y), 1e-12))
    yn = y / y0
    below = np.nonzero(yn < np.exp(-2.0))[0]
    spread = (np.max(y) - np.min(y)) / max(abs(np.max(y)), 1e-300)
    degenerate = False
    note = ""
    if below.size:
        k = below[0]
        if k == 0:
            t_cross = t_us[0]
        else:
            # log-linear interpolation between the bracketing samples
            la, lb = np.log(max(yn[k - 1], 1e-300)), np.log(max(yn[k], 1e-300))
            frac = (-2.0 - la) / (lb - la) if lb != la else 0.5
            t_cross = t_us[k - 1] + frac * (t_us[k] - t_us[k - 1])
        tm = 2.0 * max(t_cross, 1e-9)
    elif yn[-1] < 1.0 and spread > 1e-3:
        tm = -4.0 * t_us[-1] / np.log(yn[-1])
    else:
        tm = 10.0 * max(t_us[-1], 1.0)
        degenerate = True
        note = "no decay visible; phase-memory time unconstrained"
    return GuessResult({"i0": y0, "tm_us": float(tm), "x": 1.0},
                       degenerate, note)


def _guess_field(b_t, y, temp_k):
    c = MU_B_OVER_K_B / temp_k
    span = max(np.max(y) - np.min(y), 1e-12)
    gamma0 = _positive(np.min(y), 1e-3)
    alpha1 = _positive(y[0] - gamma0, 0.1 * span)
    alpha2 = _positive(y[-1] - gamma0, 0.1 * span)

    half1 = np.nonzero(y <= gamma0 + 0.5 * alpha1)[0]
    b_half1 = b_t[half1[0]] if half1.size and b_t[half1[0]] > 0 else np.median(b_t)
    g1 = np.log(2.0) / (c * max(b_half1, 1e-12))

    rise = y - gamma0 - alpha1 * np.exp(-np.clip(g1 * c * b_t, 0, 700))
    half2 = np.nonzero(rise >= 0.5 * alpha2)[0]
    b_half2 = b_t[half2[0]] if half2.size and b_t[half2[0]] > 0 else np.max(b_t)
    g2 = np.log(2.0) / (c * max(b_half2, 1e-12))
    g2 = min(g2, 0.9 * g1)

    degenerate = span < 1e-9 * max(abs(np.max(y)), 1.0)
    return GuessResult(
        {"gamma0_khz": gamma0, "alpha1_khz": alpha1, "alpha2_khz": alpha2,
         "g1": float(g1), "g2": float(max(g2, 1e-6))},
        degenerate,
        "flat linewidth curve" if degenerate else "",
    )


def _guess_temp(temp_k, y):
    floor = _positive(np.min(y), 1e-3)
    n = 1.3
    amp = _positive((y[-1] - floor) / np.max(temp_k) ** n, 1.0)
    return GuessResult({"floor_khz": floor, "amp_khz": amp, "exponent_n": n})


def _guess_sech2(b_t, y, temp_k):
    c = MU_B_OVER_K_B / temp_k
    gmax = _positive(y[np.argmin(np.abs(b_t))], max(np.max(y), 1e-12))
    half = np.nonzero(y <= 0.5 * gmax)[0]
    b_half = b_t[half[0]] if half.size and b_t[half[0]] > 0 else np.max(b_t)
    g = 2.0 * _SECH2_HALF_ARG / (c * max(b_half, 1e-12))
    return GuessResult({"gamma_max_khz": gmax, "g": float(g)})


def _linewidth_vs_t23_guesses(t23_us, gamma, t0_us):
    """Shared decomposition of an effective-linewidth-vs-waiting-time curve."""
    order = np.argsort(t23_us)
    t23 = t23_us[order]
    gam = gamma[order]
    gamma0 = _positive(gam[0], 1e-3)
    # Slope per decade over the late half of the waiting-time range.
    mid = len(t23) // 2
    dec = np.log10(t23[-1] / t23[mid]) if t23[mid] > 0 else 1.0
    gamma_tls = _positive((gam[-1] - gam[mid]) / max(dec, 1e-6), 1.0)
    tls_at_max = gamma_tls * np.log10(max(t23[-1] / t0_us, 1.0))
    gamma_sd = _positive(np.max(gam) - gamma0 - tls_at_max, 1.0)
    r_sd = 1.0 / max(np.median(t23) * 1e-3, 1e-9)
    return gamma0, gamma_sd, r_sd, gamma_tls


def _guess_sd(x, y, t0_us):
    gamma0, gamma_sd, r_sd, gamma_tls = _linewidth_vs_t23_guesses(
        x[:, 1], np.asarray(y, dtype=float), t0_us)
    return GuessResult({"gamma0_khz": gamma0, "gamma_sd_khz": gamma_sd,
                        "r_sd_khz": r_sd, "gamma_tls_khz": gamma_tls})


def _guess_echo3(x, y, fixed, free_t1):
    t12 = x[:, 0]
    t23 = x[:, 1]
    uniq = np.unique(t12)
    degenerate = uniq.size < 2
    note = "single t12 value: dephasing and population terms degenerate" \
        if degenerate else ""
    t0_us = fixed["t0_us"]
    if degenerate:
        gamma = np.full(t23.shape, 10.0)
        gamma0, gamma_sd, r_sd, gamma_tls = 8.0, 20.0, 1.0, 10.0
    else:
        # Intensity ratio between the extreme t12 traces cancels the
        # population factor, exposing Gamma_eff(t23) directly.
        lo, hi = uniq[0], uniq[-1]
        mask_lo, mask_hi = t12 == lo, t12 == hi
        common, ia, ib = np.intersect1d(t23[mask_lo], t23[mask_hi],
                                        return_indices=True)
        if common.size >= 3:
            y_lo = np.asarray(y)[mask_lo][ia]
            y_hi = np.asarray(y)[mask_hi][ib]
            ratio = np.maximum(y_hi, 1e-300) / np.maximum(y_lo, 1e-300)
            gamma = -np.log(ratio) / (4.0 * np.pi * (hi - lo) * 1e-3)
            gamma = np.maximum(gamma, 1e-3)
            gamma0, gamma_sd, r_sd, gamma_tls = _linewidth_vs_t23_guesses(
                common, gamma, t0_us)
        else:
            gamma0, gamma_sd, r_sd, gamma_tls = 8.0, 20.0, 1.0, 10.0
    params = {
        "i0": _positive(np.max(y), 1.0),
        "beta": 0.1,
        "gamma0_khz": gamma0,
        "gamma_sd_khz": gamma_sd,
        "r_sd_khz": r_sd,
        "gamma_tls_khz": gamma_tls,
    }
    if free_t1:
        params["t1_ms"] = 9.0
    return GuessResult(params, degenerate, note)


def initial_guess(model_id, x, y, fixed=None):
    """Heuristic starting parameters for ``model_id`` given data (x, y).

    Raises ValueError for fewer than 3 points.  The returned GuessResult
    carries a degenerate flag when the data cannot constrain the model
    (constant decay traces, single-t12 stimulated-echo sets).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0] if x.ndim == 2 else x.size
    if n < 3:
        raise ValueError("initial_guess needs at least 3 points")
    fixed = dict(fixed or {})
    if model_id == "mims":
        return _guess_mims(x, y)
    if model_id == "field":
        return _guess_field(x, y, fixed.get("temp_k", 0.007))
    if model_id == "temp":
        return _guess_temp(x, y)
    if model_id == "sech2":
        return _guess_sech2(x, y, fixed.get("temp_k", 0.007))
    if model_id == "sd":
        return _guess_sd(x, y, fixed.get("t0_us", float(np.min(x[:, 1]))))
    if model_id in ("echo3", "echo3-free-t1"):
        if "t0_us" not in fixed:
            fixed["t0_us"] = float(np.min(x[:, 1]))
        return _guess_echo3(x, y, fixed, model_id == "echo3-free-t1")
    raise ValueError(f"unknown model id {model_id!r}")
