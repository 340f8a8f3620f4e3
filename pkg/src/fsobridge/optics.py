"""Paraxial Gaussian-beam optics and fiber coupling efficiencies.

All lengths are in metres and all angles in radians. Coupling functions
accept numpy arrays for the misalignment fields so whole campaigns can be
evaluated in one call.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.stats import ncx2

PARAXIAL_LIMIT = 10e-3  # rad


class BeamTruncationError(ValueError):
    """Raised when a collimated beam would overfill its lens."""


class FiberKind(str, enum.Enum):
    SINGLE_MODE = "single_mode"
    MULTI_MODE = "multi_mode"
    DCF_CORE = "dcf_core"
    DCF_INNER_CLADDING = "dcf_inner_cladding"

    @property
    def is_single_mode(self) -> bool:
        return self in (FiberKind.SINGLE_MODE, FiberKind.DCF_CORE)


def marcuse_mode_radius(core_radius: float, numerical_aperture: float, wavelength: float) -> float:
    """Mode-field radius of a step-index single-mode fiber.

    Uses the Marcuse fit ``w/a = 0.65 + 1.619 V^-1.5 + 2.879 V^-6``, valid for
    roughly ``0.8 < V < 2.5``.
    """
    v = 2 * math.pi * core_radius * numerical_aperture / wavelength
    return core_radius * (0.65 + 1.619 * v**-1.5 + 2.879 * v**-6)


@dataclass(frozen=True)
class FiberSpec:
    kind: FiberKind
    core_diameter: float
    numerical_aperture: float
    cutoff_wavelength: float | None = None
    mode_field_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FiberKind(self.kind))
        if not self.core_diameter > 0:
            raise ValueError(f"core_diameter must be positive, got {self.core_diameter}")
        if not 0 < self.numerical_aperture < 1:
            raise ValueError(f"numerical_aperture must lie in (0, 1), got {self.numerical_aperture}")
        if self.kind.is_single_mode and self.mode_field_radius is None:
            raise ValueError(f"{self.kind.value} fiber needs a mode_field_radius")
        if not self.kind.is_single_mode and self.mode_field_radius is not None:
            raise ValueError(f"{self.kind.value} fiber must not carry a mode_field_radius")

    @property
    def core_radius(self) -> float:
        return self.core_diameter / 2

    @classmethod
    def single_mode(cls, core_diameter, numerical_aperture, wavelength, cutoff_wavelength=None,
                    mode_field_radius=None, kind=FiberKind.SINGLE_MODE) -> "FiberSpec":
        """Build a single-mode entry, deriving the mode radius if not given."""
        if mode_field_radius is None:
            mode_field_radius = marcuse_mode_radius(core_diameter / 2, numerical_aperture, wavelength)
        return cls(kind, core_diameter, numerical_aperture, cutoff_wavelength, mode_field_radius)


@dataclass(frozen=True)
class LensSpec:
    focal_length: float
    aperture_diameter: float

    def __post_init__(self):
        if not self.focal_length > 0:
            raise ValueError(f"focal_length must be positive, got {self.focal_length}")
        if not self.aperture_diameter > 0:
            raise ValueError(f"aperture_diameter must be positive, got {self.aperture_diameter}")


@dataclass(frozen=True)
class Misalignment:
    """Lateral offset and tilt at a coupling plane. Fields may be arrays."""

    lateral_offset: float | np.ndarray = 0.0
    angular_error: float | np.ndarray = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.lateral_offset)) and np.all(np.isfinite(self.angular_error))):
            raise ValueError("misalignment components must be finite")


ALIGNED = Misalignment()


@dataclass(frozen=True)
class GaussianBeam:
    """Fundamental-mode Gaussian beam referenced to a plane on the axis.

    ``waist_position`` is the axial coordinate of the waist relative to the
    current reference plane (negative once the beam has propagated past its
    waist).
    """

    wavelength: float
    waist_radius: float
    waist_position: float = 0.0
    power: float = 1.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.waist_radius > 0:
            raise ValueError(f"waist_radius must be positive, got {self.waist_radius}")
        if not self.power >= 0:
            raise ValueError(f"power must be non-negative, got {self.power}")

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.waist_radius**2 / self.wavelength

    @property
    def divergence(self) -> float:
        """Far-field half-angle divergence (1/e^2 intensity)."""
        return self.wavelength / (math.pi * self.waist_radius)

    def radius_at(self, z):
        """1/e^2 radius at axial coordinate ``z`` from the reference plane."""
        dz = np.asarray(z) - self.waist_position
        return self.waist_radius * np.sqrt(1 + (dz / self.rayleigh_range) ** 2)

    @property
    def radius(self) -> float:
        return float(self.radius_at(0.0))


def collimate(mode_field_radius: float, wavelength: float, lens: LensSpec, power: float = 1.0) -> GaussianBeam:
    """Collimate a fiber mode placed at the front focal plane of ``lens``.

    The output waist sits at the lens with radius ``wavelength * f / (pi * w0)``.

    Raises
    ------
    BeamTruncationError
        If the collimated 1/e^2 diameter exceeds the lens aperture.
    """
    if not mode_field_radius > 0:
        raise ValueError(f"mode_field_radius must be positive, got {mode_field_radius}")
    waist = wavelength * lens.focal_length / (math.pi * mode_field_radius)
    if 2 * waist > lens.aperture_diameter:
        raise BeamTruncationError(
            f"collimated diameter {2 * waist * 1e3:.2f} mm exceeds lens aperture "
            f"{lens.aperture_diameter * 1e3:.2f} mm"
        )
    return GaussianBeam(wavelength, waist, 0.0, power)


def propagate(beam: GaussianBeam, distance: float) -> GaussianBeam:
    """Free-space step; moves the reference plane ``distance`` downstream."""
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    return replace(beam, waist_position=beam.waist_position - distance)


def lateral_offset_from_angle(angular_error, span: float):
    """Small-angle walk-off ``span * angle`` of a pointing error over a span."""
    angular_error = np.asarray(angular_error, dtype=float)
    if np.any(np.abs(angular_error) >= PARAXIAL_LIMIT):
        raise ValueError(f"|angular_error| must stay below {PARAXIAL_LIMIT} rad for the paraxial model")
    out = span * angular_error
    return float(out) if out.ndim == 0 else out


def focused_spot_radius(beam_radius: float, focal_length: float, wavelength: float) -> float:
    """Waist produced by a lens focusing a collimated beam of ``beam_radius``."""
    return wavelength * focal_length / (math.pi * beam_radius)


def focused_numerical_aperture(beam_radius: float, focal_length: float) -> float:
    return math.sin(math.atan(beam_radius / focal_length))


def facet_misalignment(pointing_angle, span: float, focal_length: float) -> Misalignment:
    """Map a link pointing error onto the receive fiber facet.

    A tilt ``theta`` at the receive lens displaces the focus by ``f*theta``;
    the accompanying walk-off ``L*theta`` at the lens becomes a facet tilt of
    ``L*theta/f``.
    """
    theta = np.abs(np.asarray(pointing_angle, dtype=float))
    return Misalignment(focal_length * theta, span * theta / focal_length)


def smf_coupling_efficiency(incident_waist, fiber_mode_radius, mis: Misalignment = ALIGNED,
                            wavelength: float = 1550e-9):
    """Power overlap of a Gaussian spot with a Gaussian fiber mode.

    Parameters
    ----------
    incident_waist, fiber_mode_radius : float or array
        1/e^2 radii of the incident spot and of the fiber mode, both at the
        facet plane.
    mis : Misalignment
        Lateral offset between the two centres and relative tilt.
    wavelength : float
        Vacuum wavelength, sets the angular width of the mode.

    Returns
    -------
    float or ndarray
        Coupling efficiency in [0, 1].
    """
    w1 = np.asarray(incident_waist, dtype=float)
    w2 = np.asarray(fiber_mode_radius, dtype=float)
    if np.any(w1 <= 0) or np.any(w2 <= 0):
        raise ValueError("beam and mode radii must be positive")
    s = w1**2 + w2**2
    d = np.asarray(mis.lateral_offset, dtype=float)
    tilt = np.asarray(mis.angular_error, dtype=float)
    eta = (2 * w1 * w2 / s) ** 2
    eta = eta * np.exp(-2 * d**2 / s)
    eta = eta * np.exp(-2 * (math.pi * tilt * w1 * w2 / wavelength) ** 2 / s)
    return float(eta) if np.ndim(eta) == 0 else eta


def encircled_fraction(beam_radius, aperture_radius, offset=0.0):
    """Fraction of a Gaussian spot's power inside a displaced circular aperture.

    Equals ``1 - Q1(d/s, a/s)`` with ``s = w/2`` (Marcum Q), evaluated as a
    non-central chi-square CDF with two degrees of freedom.
    """
    sigma = np.asarray(beam_radius, dtype=float) / 2
    a = np.asarray(aperture_radius, dtype=float)
    d = np.asarray(offset, dtype=float)
    frac = ncx2.cdf((a / sigma) ** 2, 2, (d / sigma) ** 2)
    frac = np.clip(frac, 0.0, 1.0)
    return float(frac) if np.ndim(frac) == 0 else frac


def na_acceptance(focused_na: float, tilt, fiber_na: float):
    """Angular acceptance factor of a multi-mode aperture.

    Unity while the tilted focusing cone stays inside ``asin(fiber_na)``,
    then a linear roll-off to zero over one cone half-angle.
    """
    cone = math.asin(min(focused_na, 1.0))
    accept = math.asin(fiber_na)
    tilt = np.abs(np.asarray(tilt, dtype=float))
    margin = accept - cone
    if cone == 0:
        factor = np.where(tilt <= accept, 1.0, 0.0)
        return float(factor) if np.ndim(factor) == 0 else factor
    if margin >= 0:
        factor = 1 - (tilt - margin) / cone
    else:
        # overfilled cone: only the fraction inside the acceptance survives
        factor = accept / cone - tilt / cone
    factor = np.clip(np.where(tilt <= max(margin, 0.0), min(1.0, accept / cone), factor), 0.0, 1.0)
    return float(factor) if np.ndim(factor) == 0 else factor


def mmf_coupling_efficiency(incident_beam_radius, aperture: FiberSpec, mis: Misalignment = ALIGNED,
                            focused_na: float = 0.0):
    """Geometric capture into a multi-mode core or inner cladding."""
    if aperture.kind.is_single_mode:
        raise ValueError(f"mmf coupling needs a multi-mode aperture, got {aperture.kind.value}")
    frac = encircled_fraction(incident_beam_radius, aperture.core_radius, mis.lateral_offset)
    eta = frac * na_acceptance(focused_na, mis.angular_error, aperture.numerical_aperture)
    return float(eta) if np.ndim(eta) == 0 else eta


def offset_for_loss(efficiency: Callable[[float], float], loss_db: float = 3.0, upper: float = 1.0) -> float:
    """Lateral offset at which ``efficiency(offset)`` falls ``loss_db`` below its aligned value."""
    target = efficiency(0.0) * 10 ** (-loss_db / 10)
    return brentq(lambda d: efficiency(d) - target, 0.0, upper, xtol=1e-15, rtol=1e-12)
