"""Streaming Monte Carlo engine: many paths, many kappas, one pass.

Each path owns a counter-based RNG stream keyed by (experiment seed, path
index) and is advanced chunk by chunk; the unwrapped position carry uses the
same sequential accumulation as ``TorusPath.unwrapped``, so the phase computed
here is bit-identical to integrating a materialized path.  Phases are recorded
at checkpoint times (chunk boundaries are aligned to them).  No state is
shared between paths, so the result does not depend on the worker count.
"""

from __future__ import annotations

import math
import os

import numba
import numpy as np

from . import kernels
from .errors import DomainError
from .paths import EnvelopeProfile, initial_position, make_generator
from .torusfield import TorusFunction

_DEFAULT_CHUNK = 8192


def apply_worker_override():
    """Honor the DOSFLUCT_WORKERS env var (clamped to the numba thread pool)."""
    raw = os.environ.get("DOSFLUCT_WORKERS")
    if not raw:
        return
    try:
        workers = int(raw)
    except ValueError as exc:
        raise DomainError(f"DOSFLUCT_WORKERS must be an integer, got {raw!r}") from exc
    if workers >= 1:
        numba.set_num_threads(min(workers, numba.config.NUMBA_NUM_THREADS))


def checkpoint_steps(checkpoint_times, dt: float) -> list[int]:
    steps = []
    for T in checkpoint_times:
        step = int(round(T / dt))
        if abs(step * dt - T) > 1e-6 * max(1.0, abs(T)) or step <= 0:
            raise DomainError(
                f"checkpoint {T} is not a positive multiple of dt={dt}"
            )
        steps.append(step)
    if sorted(set(steps)) != steps:
        raise DomainError(f"checkpoint times must be strictly increasing, got {checkpoint_times}")
    return steps


def simulate_theta_checkpoints(
    F: TorusFunction,
    env: EnvelopeProfile,
    kappas,
    dt: float,
    checkpoint_times,
    paths: int,
    seed: int,
    chunk_steps: int = _DEFAULT_CHUNK,
) -> np.ndarray:
    """theta values, shape (paths, len(kappas), len(checkpoint_times))."""
    apply_worker_override()
    kappas = np.asarray(kappas, dtype=np.float64)
    if np.any(kappas <= 0):
        raise DomainError("all kappas must be positive")
    steps = checkpoint_steps(checkpoint_times, dt)
    gens = [make_generator(seed, p) for p in range(paths)]
    x0 = np.array([initial_position(g) for g in gens])
    carry = np.zeros(paths)
    theta = np.zeros((paths, len(kappas)))
    out = np.empty((paths, len(kappas), len(steps)))
    sqrt_dt = math.sqrt(dt)
    f0, fks, fre, fim = F.real_mode_arrays()
    dW = np.empty((paths, chunk_steps))
    step_done = 0
    for icp, boundary in enumerate(steps):
        while step_done < boundary:
            cs = min(chunk_steps, boundary - step_done)
            block = dW[:, :cs]
            for p, gen in enumerate(gens):
                block[p] = gen.standard_normal(cs)
            block *= sqrt_dt
            buf = np.concatenate([carry[:, None], block], axis=1)
            cums = np.cumsum(buf, axis=1)
            xs = x0[:, None] + cums
            tg = dt * np.arange(step_done, step_done + cs + 1)
            tm = tg[:-1] + 0.5 * dt
            ag = env.values(tg)
            am = env.values(tm)
            kernels.rk4_sweep_ensemble(theta, xs, ag, am, dt, kappas,
                                       f0, fks, fre, fim)
            carry = cums[:, -1].copy()
            step_done += cs
        out[:, :, icp] = theta
    return out
