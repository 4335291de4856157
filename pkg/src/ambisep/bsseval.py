"""SDR / SIR / SAR via the time-invariant-filter BSS-eval decomposition.

An estimate is split into a target part (its projection onto the target
reference and ``L - 1`` delayed copies), an interference part (the extra
energy captured when all references' delays are allowed) and an artifact
residual. The estimate is zero-padded by ``L - 1`` samples so the filtered
references fit; all three components have length ``N + L - 1`` and sum to
the padded estimate.

The Gram matrix of the delayed references is Toeplitz-by-block, so it is
assembled from FFT cross-correlations instead of the explicit delay matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.signal import fftconvolve

from .audio_io import AudioClip
from .errors import DataError, UndefinedMetricError

REGULARIZATION = 1e-10


@dataclass(frozen=True)
class DecompositionConfig:
    filter_len: int = 512
    cap_db: float = 100.0

    def __post_init__(self):
        if self.filter_len < 1:
            raise ValueError("filter_len must be >= 1")


@dataclass
class Decomposition:
    s_target: np.ndarray
    e_interf: np.ndarray
    e_artif: np.ndarray
    regularized: bool = False


@dataclass
class EvalMetrics:
    sdr: float
    sir: float
    sar: float
    sdr_i: float | None = None
    sir_i: float | None = None
    regularized: bool = False


def _as_array(x) -> np.ndarray:
    return x.samples if isinstance(x, AudioClip) else np.asarray(x, dtype=np.float64)


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


class Projector:
    """Least-squares projections onto delayed references, factorised once."""

    def __init__(self, references, filter_len: int = 512):
        refs = np.atleast_2d(np.stack([_as_array(r) for r in references]))
        if refs.ndim != 2:
            raise DataError("references must be 1-D signals")
        self.refs = refs
        self.L = int(filter_len)
        n_src, n = refs.shape
        if self.L >= n:
            raise DataError(f"filter length {self.L} must be shorter than the signals ({n})")
        self.n_fft = _next_pow2(n + self.L - 1)
        self.spectra = np.fft.rfft(refs, self.n_fft, axis=1)

        L = self.L
        G = np.empty((n_src * L, n_src * L))
        for i in range(n_src):
            for j in range(n_src):
                # corr[k] = sum_s r_i(s) r_j(s + k)
                corr = np.fft.irfft(np.conj(self.spectra[i]) * self.spectra[j], self.n_fft)
                col = corr[:L]
                row = np.concatenate([[corr[0]], corr[::-1][:L - 1]])
                G[i * L:(i + 1) * L, j * L:(j + 1) * L] = scipy.linalg.toeplitz(col, row)
        self.gram = G
        self._factors = {}

    def _factor(self, key, G):
        if key not in self._factors:
            try:
                self._factors[key] = (scipy.linalg.cho_factor(G), False)
            except np.linalg.LinAlgError:
                reg = REGULARIZATION * max(np.trace(G) / G.shape[0], np.finfo(float).tiny)
                Greg = G + reg * np.eye(G.shape[0])
                self._factors[key] = (scipy.linalg.cho_factor(Greg), True)
        return self._factors[key]

    def project(self, estimate: np.ndarray, sources) -> tuple[np.ndarray, bool]:
        """Projection of ``estimate`` onto the delays of the given source indices."""
        sources = list(sources)
        L = self.L
        est_spec = np.fft.rfft(estimate, self.n_fft)
        D = np.concatenate([
            np.fft.irfft(np.conj(self.spectra[j]) * est_spec, self.n_fft)[:L] for j in sources])
        idx = np.concatenate([np.arange(j * L, (j + 1) * L) for j in sources])
        factor, regularized = self._factor(tuple(sources), self.gram[np.ix_(idx, idx)])
        coef = scipy.linalg.cho_solve(factor, D)
        n_out = self.refs.shape[1] + L - 1
        proj = np.zeros(n_out)
        for k, j in enumerate(sources):
            proj += fftconvolve(self.refs[j], coef[k * L:(k + 1) * L])[:n_out]
        return proj, regularized

    def decompose(self, estimate, target: int = 0) -> Decomposition:
        est = _as_array(estimate)
        if est.shape[0] != self.refs.shape[1]:
            raise DataError(f"estimate has {est.shape[0]} samples, references {self.refs.shape[1]}")
        padded = np.concatenate([est, np.zeros(self.L - 1)])
        s_target, reg_t = self.project(est, [target])
        p_all, reg_a = self.project(est, range(self.refs.shape[0]))
        e_interf = p_all - s_target
        e_artif = padded - p_all
        return Decomposition(s_target, e_interf, e_artif, reg_t or reg_a)


def decompose(estimate, references, cfg: DecompositionConfig = DecompositionConfig(),
              target: int = 0) -> Decomposition:
    return Projector(references, cfg.filter_len).decompose(estimate, target)


def _ratio_db(num: float, den: float, cap: float) -> float:
    if den <= 0:
        return cap
    return float(min(10.0 * np.log10(num / den), cap)) if num > 0 else -cap


def metrics(dec: Decomposition, cfg: DecompositionConfig = DecompositionConfig()) -> EvalMetrics:
    target = float(np.sum(dec.s_target ** 2))
    if target == 0.0:
        raise UndefinedMetricError("target projection has zero energy; SDR/SIR/SAR undefined")
    interf = float(np.sum(dec.e_interf ** 2))
    artif = float(np.sum(dec.e_artif ** 2))
    distortion = float(np.sum((dec.e_interf + dec.e_artif) ** 2))
    signal = float(np.sum((dec.s_target + dec.e_interf) ** 2))
    return EvalMetrics(
        sdr=_ratio_db(target, distortion, cfg.cap_db),
        sir=_ratio_db(target, interf, cfg.cap_db),
        sar=_ratio_db(signal, artif, cfg.cap_db),
        regularized=dec.regularized,
    )


def improvements(estimate, mixture, references, cfg: DecompositionConfig = DecompositionConfig(),
                 target: int = 0) -> EvalMetrics:
    """Metrics of ``estimate`` plus SDR/SIR gains over using the raw mixture as the estimate."""
    proj = Projector(references, cfg.filter_len)
    est = metrics(proj.decompose(estimate, target), cfg)
    base = metrics(proj.decompose(mixture, target), cfg)
    est.sdr_i = est.sdr - base.sdr
    est.sir_i = est.sir - base.sir
    return est
