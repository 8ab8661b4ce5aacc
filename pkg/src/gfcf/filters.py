"""Spectral responses ``h(lam)`` of the item-graph filters.

All gains are written over eigenvalues ``lam`` of the item Laplacian
``L~ = I - P~``, which lie in ``[0, 1]``; an eigenvalue ``v`` of ``P~``
enters as ``lam = 1 - v``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotLowPassMeasurable, ParseError, ValidationError

SPECTRUM_TOL = 1e-9
CUTOFF_TIE_TOL = 1e-12


def _check_coeffs(coeffs):
    c = tuple(float(x) for x in coeffs)
    if not c or not all(np.isfinite(c)):
        raise ValidationError("coefficient vector must be finite and non-empty")
    return c


def _poly_in_pass(coeffs, lam):
    # sum_k c_k (1 - lam)^k by Horner's rule
    x = 1.0 - lam
    out = np.zeros_like(lam)
    for c in reversed(coeffs):
        out = out * x + c
    return out


@dataclass(frozen=True)
class Linear:
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _check_coeffs(self.coeffs))

    def gain(self, lam):
        return _poly_in_pass(self.coeffs, lam)


@dataclass(frozen=True)
class LgcnIde(Linear):
    """Same response family as :class:`Linear`; kept distinct for reporting."""


@dataclass(frozen=True)
class Neighborhood:
    def gain(self, lam):
        return 1.0 - lam


@dataclass(frozen=True)
class Diffusion:
    mu: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ValidationError(f"diffusion requires mu > 0, got {self.mu}")

    def gain(self, lam):
        return (1.0 - lam) / (1.0 + self.mu - lam)


@dataclass(frozen=True)
class IdealLowPass:
    """Pass the ``cutoff_dim`` lowest frequencies, or all ``lam <= cutoff_value``."""

    cutoff_dim: int | None = None
    cutoff_value: float | None = None

    def __post_init__(self):
        if (self.cutoff_dim is None) == (self.cutoff_value is None):
            raise ValidationError("ideal low-pass needs exactly one of cutoff_dim or cutoff_value")
        if self.cutoff_dim is not None and self.cutoff_dim < 1:
            raise ValidationError(f"cutoff_dim must be >= 1, got {self.cutoff_dim}")
        if self.cutoff_value is not None and not 0.0 <= self.cutoff_value <= 1.0:
            raise ValidationError(f"cutoff_value must lie in [0, 1], got {self.cutoff_value}")

    def gain(self, lam):
        if self.cutoff_value is not None:
            return (lam <= self.cutoff_value + CUTOFF_TIE_TOL).astype(np.float64)
        g = np.zeros_like(lam)
        g[np.argsort(lam, kind="stable")[: self.cutoff_dim]] = 1.0
        return g


FILTER_KINDS = {
    "linear": Linear,
    "lgcn-ide": LgcnIde,
    "neighborhood": Neighborhood,
    "diffusion": Diffusion,
    "ideal": IdealLowPass,
}


@dataclass(frozen=True)
class FilterResponse:
    eigenvalues: np.ndarray
    gains: np.ndarray


def evaluate_response(spec, eigenvalues):
    lam = np.asarray(eigenvalues, dtype=np.float64).ravel()
    if lam.size and (lam.min() < -SPECTRUM_TOL or lam.max() > 1.0 + SPECTRUM_TOL):
        raise ValidationError(
            f"eigenvalues must lie in [0, 1] (got [{lam.min():.3g}, {lam.max():.3g}])"
        )
    gains = np.asarray(spec.gain(lam), dtype=np.float64)
    return FilterResponse(eigenvalues=lam, gains=gains)


def low_pass_ratio(response, k):
    """``max |h| over the n-k highest frequencies / min |h| over the k lowest``."""
    n = response.gains.size
    if not 1 <= k <= n - 1:
        raise ValidationError(f"k must lie in [1, {n - 1}], got {k}")
    order = np.argsort(response.eigenvalues, kind="stable")
    mag = np.abs(response.gains[order])
    denom = mag[:k].min()
    if denom == 0:
        raise NotLowPassMeasurable(f"zero gain among the {k} lowest frequencies")
    return float(mag[k:].max() / denom)


def is_low_pass(response, k):
    try:
        return low_pass_ratio(response, k) < 1.0
    except NotLowPassMeasurable:
        return False


def apply_spectral_filter(basis, spec, signal):
    """``signal U diag(h) U^T`` over the eigenpairs held in ``basis``.

    ``basis`` holds eigenpairs of ``P~``. Unless it is complete, only a
    rank-specified ideal low-pass (``cutoff_dim <= basis.k``) is accepted,
    since any other response also weighs the eigenvectors that are missing.
    """
    U = basis.vectors
    n = U.shape[0]
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[-1] != n:
        raise DimensionError(f"signal length {x.shape[-1]} does not match basis dimension {n}")
    complete = basis.k == n
    if not complete:
        ok = isinstance(spec, IdealLowPass) and spec.cutoff_dim is not None and spec.cutoff_dim <= basis.k
        if not ok:
            raise ValidationError("this filter needs a complete eigendecomposition")
    lam = np.clip(1.0 - np.asarray(basis.values, dtype=np.float64), 0.0, None)
    h = evaluate_response(spec, lam).gains
    return ((x @ U) * h) @ U.T


# --------------------------------------------------------------------------
# key=value text form, e.g. "filter=diffusion mu=0.5"
# --------------------------------------------------------------------------


def _parse_kv(text):
    out = {}
    for tok in text.split():
        key, sep, val = tok.partition("=")
        if not sep or not key:
            raise ParseError(f"expected key=value, got {tok!r}")
        out[key.strip().lower()] = val.strip()
    return out


def parse_filter(text):
    kv = _parse_kv(text)
    kind = kv.pop("filter", None)
    if kind is None:
        raise ParseError("missing filter= key")
    try:
        if kind in ("linear", "lgcn-ide"):
            spec = FILTER_KINDS[kind](tuple(float(x) for x in kv.pop("coeffs").split(",")))
        elif kind == "neighborhood":
            spec = Neighborhood()
        elif kind == "diffusion":
            spec = Diffusion(float(kv.pop("mu")))
        elif kind == "ideal":
            dim = kv.pop("dim", None)
            cut = kv.pop("cutoff", None)
            spec = IdealLowPass(
                cutoff_dim=int(dim) if dim is not None else None,
                cutoff_value=float(cut) if cut is not None else None,
            )
        else:
            raise ParseError(f"unknown filter kind {kind!r}")
    except KeyError as exc:
        raise ParseError(f"filter={kind} needs key {exc.args[0]}") from None
    except ValueError as exc:
        if isinstance(exc, (ParseError, ValidationError)):
            raise
        raise ParseError(f"bad numeric value in {text!r}") from None
    if kv:
        raise ParseError(f"unexpected keys for filter={kind}: {sorted(kv)}")
    return spec


def format_filter(spec):
    if isinstance(spec, (Linear, LgcnIde)):
        kind = "lgcn-ide" if isinstance(spec, LgcnIde) else "linear"
        return f"filter={kind} coeffs=" + ",".join(repr(c) for c in spec.coeffs)
    if isinstance(spec, Neighborhood):
        return "filter=neighborhood"
    if isinstance(spec, Diffusion):
        return f"filter=diffusion mu={spec.mu!r}"
    if isinstance(spec, IdealLowPass):
        if spec.cutoff_dim is not None:
            return f"filter=ideal dim={spec.cutoff_dim}"
        return f"filter=ideal cutoff={spec.cutoff_value!r}"
    raise TypeError(f"not a filter spec: {spec!r}")
