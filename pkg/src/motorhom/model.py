"""Periodic coefficient fields and the two-state motor model.

A :class:`PeriodicField` stores uniform samples of a smooth 1-periodic function on
``y_k = k / N`` (one or two axes).  Everything else is derived spectrally: values
at arbitrary points come from trigonometric interpolation, derivatives from
multiplication by ``2*pi*i*k`` in Fourier space.
"""

from __future__ import annotations

import ast
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .defaults import CELL_GRID
from .errors import InvalidField, NonPositiveRate, SpecFileError

FIELD_NAMES = ("psi", "psi2", "nu1", "nu2")


def _wavenumbers(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def _dirichlet_weights(y: np.ndarray, n: int) -> np.ndarray:
    """Weights ``S_N(y - y_j)`` of the even-N trigonometric interpolant (shape ``(P, N)``)."""
    x = np.subtract.outer(np.mod(y, 1.0), np.arange(n) / n)
    s = np.sin(np.pi * x)
    on_node = np.abs(s) < 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.sin(n * np.pi * x) * np.cos(np.pi * x) / (n * s)
    return np.where(on_node, 1.0, w)


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Uniform samples of a 1-periodic function of ``ndim`` variables."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        if arr.ndim not in (1, 2):
            raise InvalidField(f"fields must be 1-D or 2-D sample grids, got ndim={arr.ndim}")
        n = arr.shape[0]
        if any(s != n for s in arr.shape):
            raise InvalidField(f"2-D fields need a square grid, got shape {arr.shape}")
        if n < 8 or n % 2:
            raise InvalidField(f"grid size must be even and >= 8, got {n}")
        if not np.all(np.isfinite(arr)):
            raise InvalidField("field samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def ndim(self) -> int:
        return self.samples.ndim

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def mean(self) -> float:
        return float(np.mean(self.samples))

    def __call__(self, y) -> np.ndarray | float:
        """Evaluate the trigonometric interpolant.

        For 1-D fields ``y`` is a scalar or array of points; for 2-D fields it is an
        array whose last axis has length 2.  Periodicity holds by construction since
        coordinates are reduced modulo 1 before evaluation.
        """
        base = self.mean()
        dev = self.samples - base
        if self.ndim == 1:
            y_arr = np.asarray(y, dtype=float)
            w = _dirichlet_weights(y_arr.ravel(), self.n)
            out = base + w @ dev
            return float(out[0]) if y_arr.ndim == 0 else out.reshape(y_arr.shape)
        pts = np.asarray(y, dtype=float)
        flat = pts.reshape(-1, 2)
        w0 = _dirichlet_weights(flat[:, 0], self.n)
        w1 = _dirichlet_weights(flat[:, 1], self.n)
        out = base + np.einsum("pi,ij,pj->p", w0, dev, w1)
        return float(out[0]) if pts.ndim == 1 else out.reshape(pts.shape[:-1])

    def shifted(self, axis: int = 0, shift: float = 0.5) -> np.ndarray:
        """Samples of the interpolant at ``y_k + shift / N`` along ``axis``."""
        n = self.n
        k = _wavenumbers(n)
        phase = np.exp(2j * np.pi * k * shift / n)
        phase[n // 2] = np.cos(np.pi * shift)  # Nyquist mode interpolates as a cosine
        shape = [1] * self.ndim
        shape[axis] = n
        spec = np.fft.fft(self.samples, axis=axis) * phase.reshape(shape)
        return np.fft.ifft(spec, axis=axis).real

    def resample(self, n: int) -> "PeriodicField":
        if n == self.n:
            return self
        grid = np.arange(n) / n
        if self.ndim == 1:
            return PeriodicField(self(grid))
        yy = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1)
        return PeriodicField(self(yy))


def make_periodic_field(samples) -> PeriodicField:
    return PeriodicField(np.asarray(samples, dtype=float))


def differentiate(f: PeriodicField, order: int, axis: int | None = None) -> PeriodicField:
    """Spectral derivative of a periodic field.

    ``order=1`` returns the partial derivative along ``axis`` (default 0).
    ``order=2`` returns ``d^2/dy_axis^2`` if ``axis`` is given, otherwise the
    Laplacian (which for a 1-D field is the plain second derivative).  The Nyquist
    mode is dropped for first derivatives, as usual for even grids.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    n = f.n
    k = 2 * np.pi * _wavenumbers(n)
    if order == 1:
        k = k.copy()
        k[n // 2] = 0.0
        mult = 1j * k
    else:
        mult = -(k**2)
    axes = [0 if axis is None else axis] if (order == 1 or axis is not None) else list(range(f.ndim))
    out = np.zeros(f.samples.shape)
    for ax in axes:
        shape = [1] * f.ndim
        shape[ax] = n
        out += np.fft.ifft(np.fft.fft(f.samples, axis=ax) * mult.reshape(shape), axis=ax).real
    return PeriodicField(out)


def gradient(f: PeriodicField) -> tuple[PeriodicField, ...]:
    return tuple(differentiate(f, 1, axis=ax) for ax in range(f.ndim))


def fourier_samples(n: int, const: float = 0.0, cos=(), sin=()) -> np.ndarray:
    """Sample ``const + sum_k cos[k-1] cos(2 pi k y) + sin[k-1] sin(2 pi k y)``."""
    y = np.arange(n) / n
    out = np.full(n, float(const))
    for k, a in enumerate(cos, start=1):
        out += a * np.cos(2 * np.pi * k * y)
    for k, b in enumerate(sin, start=1):
        out += b * np.sin(2 * np.pi * k * y)
    return out


def sample_function(func: Callable, n: int, d: int = 1) -> PeriodicField:
    """Sample a callable on the uniform grid (``func(y)`` or ``func(y1, y2)``)."""
    y = np.arange(n) / n
    if d == 1:
        return PeriodicField(np.asarray(func(y), dtype=float) * np.ones(n))
    y1, y2 = np.meshgrid(y, y, indexing="ij")
    return PeriodicField(np.asarray(func(y1, y2), dtype=float) * np.ones((n, n)))


@dataclass(frozen=True, eq=False)
class MotorModel:
    """Coefficients of the two-state system.

    ``psi2`` is ``None`` for the single-potential system, in which the second
    conformation feels no drift.
    """

    psi1: PeriodicField
    nu1: PeriodicField
    nu2: PeriodicField
    psi2: PeriodicField | None = None
    name: str = "custom"
    _fingerprint: str = field(default="", repr=False)

    def __post_init__(self):
        fields = [self.psi1, self.nu1, self.nu2] + ([self.psi2] if self.psi2 is not None else [])
        dims = {f.ndim for f in fields}
        sizes = {f.n for f in fields}
        if len(dims) != 1:
            raise InvalidField("all coefficient fields must share the same dimension")
        if len(sizes) != 1:
            raise InvalidField("all coefficient fields must share the same grid size")
        for label, nu in (("nu1", self.nu1), ("nu2", self.nu2)):
            lo = float(nu.samples.min())
            if lo <= 0:
                raise NonPositiveRate(f"{label} must be positive; min over samples is {lo:.6g}")
        h = hashlib.sha256()
        for f in fields:
            h.update(np.ascontiguousarray(f.samples).tobytes())
        h.update(b"psi2" if self.psi2 is not None else b"-")
        object.__setattr__(self, "_fingerprint", h.hexdigest()[:16])

    @property
    def psi(self) -> PeriodicField:
        return self.psi1

    @property
    def d(self) -> int:
        return self.psi1.ndim

    @property
    def n(self) -> int:
        return self.psi1.n

    @property
    def fingerprint(self) -> str:
        return self._fingerprint

    @property
    def potentials(self) -> tuple[PeriodicField, PeriodicField | None]:
        return self.psi1, self.psi2

    def resample(self, n: int) -> "MotorModel":
        if n == self.n:
            return self
        return MotorModel(
            psi1=self.psi1.resample(n),
            nu1=self.nu1.resample(n),
            nu2=self.nu2.resample(n),
            psi2=None if self.psi2 is None else self.psi2.resample(n),
            name=self.name,
        )

    def drift_bound(self) -> float:
        """max |D psi| over both potentials (zero for the undriven species)."""
        vals = [np.max(np.abs(np.stack([g.samples for g in gradient(p)]))) for p in self.potentials if p is not None]
        return float(max(vals))

    def laplacian_bound(self) -> float:
        vals = [differentiate(p, 2).max_abs() for p in self.potentials if p is not None]
        return float(max(vals))


PRESETS: dict[str, dict[str, Any]] = {
    "flat": {
        "psi": {"const": 0.0},
        "nu1": {"const": 1.0},
        "nu2": {"const": 1.0},
    },
    "symmetric": {
        "psi": {"cos": [1.0]},
        "nu1": {"const": 1.0},
        "nu2": {"const": 1.0},
    },
    "asymmetric-ratchet": {
        "psi": {"sin": [0.7, 0.35]},
        "nu1": {"const": 1.5, "cos": [1.0]},
        "nu2": {"const": 1.5, "cos": [-1.0]},
    },
    # two potentials: both conformations are driven, by shifted asymmetric profiles
    "two-potential": {
        "psi": {"sin": [0.7, 0.35]},
        "psi2": {"cos": [0.5], "sin": [0.0, 0.25]},
        "nu1": {"const": 1.5, "cos": [1.0]},
        "nu2": {"const": 1.5, "sin": [0.5]},
    },
}


def _field_from_entry(entry, n: int, label: str) -> PeriodicField:
    if isinstance(entry, PeriodicField):
        return entry.resample(n)
    if callable(entry):
        return sample_function(entry, n)
    if isinstance(entry, Mapping):
        if "samples" in entry:
            f = make_periodic_field(entry["samples"])
            return f.resample(n)
        unknown = set(entry) - {"const", "cos", "sin"}
        if unknown:
            raise SpecFileError(f"{label}: unknown Fourier keys {sorted(unknown)}")
        return PeriodicField(
            fourier_samples(n, entry.get("const", 0.0), entry.get("cos", ()), entry.get("sin", ()))
        )
    return make_periodic_field(entry).resample(n)


def build_model(spec: Mapping[str, Any] | str, n: int | None = None) -> MotorModel:
    """Assemble and validate a model.

    ``spec`` is a preset name or a mapping with keys ``psi`` (alias ``psi1``),
    optional ``psi2``, ``nu1``, ``nu2``.  Each value is a Fourier description
    ``{"const": c, "cos": [...], "sin": [...]}``, ``{"samples": [...]}``, a raw sample
    array, a callable, or a :class:`PeriodicField`.  A ``preset`` key pulls in a
    preset and lets the remaining keys override it.
    """
    if isinstance(spec, str):
        spec = {"preset": spec}
    spec = dict(spec)
    name = "custom"
    if "preset" in spec:
        preset = spec.pop("preset")
        if preset not in PRESETS:
            raise SpecFileError(f"unknown preset {preset!r}; known: {', '.join(sorted(PRESETS))}")
        merged = dict(PRESETS[preset])
        merged.update(spec)
        spec = merged
        name = preset
    if "psi1" in spec:
        spec["psi"] = spec.pop("psi1")
    n_spec = spec.pop("N", None)
    n = int(n or n_spec or CELL_GRID)
    spec.pop("d", None)
    name = str(spec.pop("name", name))
    missing = {"psi", "nu1", "nu2"} - set(spec)
    if missing:
        raise SpecFileError(f"model description lacks {sorted(missing)}")
    unknown = set(spec) - set(FIELD_NAMES)
    if unknown:
        raise SpecFileError(f"unknown model keys {sorted(unknown)}")
    fields = {k: _field_from_entry(v, n, k) for k, v in spec.items() if v is not None}
    return MotorModel(
        psi1=fields["psi"],
        nu1=fields["nu1"],
        nu2=fields["nu2"],
        psi2=fields.get("psi2"),
        name=name,
    )


def parse_spec_text(text: str) -> dict[str, Any]:
    """Parse the flat key-value coefficient format.

    One ``key = value`` per line, ``#`` starts a comment.  Dotted keys address a
    field component (``psi.sin = [0.7, 0.35]``, ``nu1.const = 1.5``,
    ``nu2.samples = [...]``); top-level keys are ``N``, ``preset`` and ``name``.
    Values are Python/JSON literals; bare words are read as strings.
    """
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecFileError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            parsed = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            parsed = value
        if "." in key:
            head, comp = key.split(".", 1)
            if head not in FIELD_NAMES and head != "psi1":
                raise SpecFileError(f"line {lineno}: unknown field {head!r}")
            if comp not in ("const", "cos", "sin", "samples"):
                raise SpecFileError(f"line {lineno}: unknown component {comp!r}")
            out.setdefault("psi" if head == "psi1" else head, {})[comp] = parsed
        elif key in ("N", "preset", "name"):
            out[key] = parsed
        else:
            raise SpecFileError(f"line {lineno}: unknown key {key!r}")
    return out


def load_model(source: str | Path, n: int | None = None) -> MotorModel:
    """Load a preset by name or a coefficient file by path."""
    if isinstance(source, str) and source in PRESETS:
        return build_model(source, n)
    path = Path(source)
    if not path.exists():
        raise SpecFileError(f"{source!r} is neither a preset nor a readable file")
    return build_model(parse_spec_text(path.read_text()), n)
