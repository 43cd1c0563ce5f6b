"""Eckart frame binding, index-ambiguity resolution, and symmetry enumeration.

A distorted molecule is described relative to a rigid reference configuration
by (i) putting the frame origin at the molecular center of mass, which kills
the mass-weighted sum of displacements, and (ii) rotating the reference so
the mass-weighted cross products of reference positions with displacements
cancel.  The rotation is found as the quaternion eigenproblem of the
mass-weighted superposition problem (the stationary points of the
mass-weighted squared displacement are exactly the rotations satisfying the
cross-product condition), then polished by Newton steps on the residual.

Atoms of equal mass are interchangeable; the assignment that minimizes the
sum of displacement norms is found either by exhaustive enumeration (small
classes) or by alternating frame binding with a linear assignment solve.

Symmetry operations of a reference configuration are enumerated as pairs
(orthogonal transformation, index permutation) by matching anchor atom pairs
onto candidate images and keeping the transformations that map the whole
configuration onto itself.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ComputationError, SedlabError, ValidationError

DEFAULT_MASS_RTOL = 1e-6
DEFAULT_FRAME_TOL = 1e-10
EXHAUSTIVE_CLASS_CAP = 6
EXHAUSTIVE_TOTAL_CAP = 40_000


class FrameNotFound(ComputationError):
    """Rotation solver could not reach the requested residual."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class ContinuousAxis(SedlabError):
    """The configuration has a continuous symmetry axis; the operation list
    would be infinite.  ``axis`` is a unit vector, or None for a single atom
    (full rotation group)."""

    def __init__(self, axis: np.ndarray | None):
        self.axis = axis
        desc = "full rotation group" if axis is None else f"axis {axis}"
        super().__init__(f"continuous symmetry detected: {desc}")


def mass_classes(masses: np.ndarray, rtol: float = DEFAULT_MASS_RTOL) -> np.ndarray:
    """Class id per atom; masses within relative tolerance share a class.

    Grouping is by sorted-mass bands: a new band starts wherever the gap to
    the previous mass exceeds rtol times the mass.
    """
    masses = np.asarray(masses, dtype=float)
    order = np.argsort(masses, kind="stable")
    ids = np.empty(masses.size, dtype=int)
    current = 0
    prev = None
    for idx in order:
        m = masses[idx]
        if prev is not None and (m - prev) > rtol * m:
            current += 1
        ids[idx] = current
        prev = m
    return ids


def _check_labels_match_classes(labels, class_ids) -> None:
    by_label: dict[str, int] = {}
    for lab, cid in zip(labels, class_ids):
        if lab in by_label and by_label[lab] != cid:
            raise ValidationError(f"label {lab!r} spans several mass classes")
        by_label[lab] = cid
    by_class: dict[int, str] = {}
    for lab, cid in zip(labels, class_ids):
        if cid in by_class and by_class[cid] != lab:
            raise ValidationError(f"atoms of equal mass carry labels "
                                  f"{by_class[cid]!r} and {lab!r}")
        by_class[cid] = lab


@dataclass(frozen=True)
class AtomSet:
    """A molecule snapshot: masses (amu), lab-frame positions (angstrom)."""

    masses: np.ndarray
    positions: np.ndarray
    labels: tuple[str, ...] | None = None
    mass_rtol: float = DEFAULT_MASS_RTOL

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        positions = np.asarray(self.positions, dtype=float)
        if masses.ndim != 1 or masses.size == 0:
            raise ValidationError("masses must be a nonempty 1-D array")
        if positions.shape != (masses.size, 3):
            raise ValidationError("positions must have shape (n_atoms, 3)")
        if np.any(masses <= 0) or not np.all(np.isfinite(masses)):
            raise ValidationError("masses must be positive and finite")
        if not np.all(np.isfinite(positions)):
            raise ValidationError("positions must be finite")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "positions", positions)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != masses.size:
                raise ValidationError("one label per atom required")
            object.__setattr__(self, "labels", labels)
            _check_labels_match_classes(labels, self.class_ids)

    @property
    def class_ids(self) -> np.ndarray:
        return mass_classes(self.masses, self.mass_rtol)


@dataclass(frozen=True)
class EquilibriumConfiguration:
    """Reference coordinates in the mobile frame, mass centroid at origin."""

    masses: np.ndarray
    coordinates: np.ndarray
    labels: tuple[str, ...] | None = None
    mass_rtol: float = DEFAULT_MASS_RTOL

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        coords = np.asarray(self.coordinates, dtype=float)
        if masses.ndim != 1 or masses.size == 0:
            raise ValidationError("masses must be a nonempty 1-D array")
        if coords.shape != (masses.size, 3):
            raise ValidationError("coordinates must have shape (n_atoms, 3)")
        if np.any(masses <= 0) or not np.all(np.isfinite(masses)):
            raise ValidationError("masses must be positive and finite")
        if not np.all(np.isfinite(coords)):
            raise ValidationError("coordinates must be finite")
        centroid = masses @ coords / masses.sum()
        if np.linalg.norm(centroid) > 1e-10:
            raise ValidationError(
                f"mass-weighted centroid {centroid} not at origin (>1e-10); "
                "use EquilibriumConfiguration.centered(...)"
            )
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "coordinates", coords)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != masses.size:
                raise ValidationError("one label per atom required")
            object.__setattr__(self, "labels", labels)
            _check_labels_match_classes(labels, self.class_ids)

    @classmethod
    def centered(cls, masses, coordinates, labels=None,
                 mass_rtol: float = DEFAULT_MASS_RTOL) -> "EquilibriumConfiguration":
        """Build a configuration after shifting the mass centroid to the origin."""
        masses = np.asarray(masses, dtype=float)
        coords = np.asarray(coordinates, dtype=float)
        com = center_of_mass(coords, masses)
        return cls(masses, coords - com, labels, mass_rtol)

    @property
    def class_ids(self) -> np.ndarray:
        return mass_classes(self.masses, self.mass_rtol)

    def permuted(self, perm) -> "EquilibriumConfiguration":
        """Reorder reference points so entry i is the old entry perm[i]."""
        perm = np.asarray(perm, dtype=int)
        labels = None if self.labels is None else tuple(self.labels[p] for p in perm)
        return EquilibriumConfiguration(self.masses[perm], self.coordinates[perm],
                                        labels, self.mass_rtol)


@dataclass(frozen=True)
class EckartFrame:
    """Origin + rotation binding a reference to a molecule, with displacements.

    ``rotation`` maps reference coordinates into the lab: a reference point r
    sits at origin + rotation @ r.  ``displacements`` are expressed in the
    bound (reference) frame: d_a = rotation^T (x_a - origin) - r_a.
    """

    origin: np.ndarray
    rotation: np.ndarray
    displacements: np.ndarray
    masses: np.ndarray
    reference_coordinates: np.ndarray
    rotational_residual: float
    tolerance: float = DEFAULT_FRAME_TOL
    collinear_reference: bool = False

    def __post_init__(self):
        for name in ("origin", "rotation", "displacements", "masses",
                     "reference_coordinates"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        rot = self.rotation
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-12:
            raise ValidationError("rotation is not orthogonal to 1e-12")
        if abs(np.linalg.det(rot) - 1.0) > 1e-10:
            raise ValidationError("rotation must be proper (det +1)")
        if self.translational_residual > 1e-10:
            raise ValidationError("mass-weighted displacement sum exceeds 1e-10")
        if self.rotational_residual > self.tolerance:
            raise ValidationError("stored rotational residual exceeds tolerance")

    @property
    def translational_residual(self) -> float:
        """Norm of sum(m_a * d_a), amu*angstrom."""
        return float(np.linalg.norm(self.masses @ self.displacements))

    @property
    def displacements_lab(self) -> np.ndarray:
        """Displacements rotated into the lab frame."""
        return self.displacements @ np.asarray(self.rotation).T

    def displacement_norm_sum(self) -> float:
        return float(np.sum(np.linalg.norm(self.displacements, axis=1)))


def center_of_mass(points, masses) -> np.ndarray:
    """Mass-weighted mean position."""
    points = np.asarray(points, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValidationError("points must be a nonempty (n, 3) array")
    if np.any(masses <= 0):
        raise ValidationError("masses must be positive")
    return masses @ points / masses.sum()


def rotational_residual(rotation, molecule_centered, reference_coords, masses) -> float:
    """Norm of sum over atoms of r_a x (m_a d_a), amu*angstrom^2."""
    u = molecule_centered @ rotation  # = rotation.T applied per row
    d = u - reference_coords
    return float(np.linalg.norm(np.sum(np.cross(reference_coords, masses[:, None] * d), axis=0)))


def _quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _rotation_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0:
        return np.eye(3)
    k = axis / n
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * (kx @ kx)


def _minimal_rotation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Shortest rotation carrying unit vector a onto unit vector b."""
    c = float(np.dot(a, b))
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    if s < 1e-14:
        if c > 0:
            return np.eye(3)
        # Antiparallel: rotate by pi about a deterministic axis orthogonal to a.
        helper = np.zeros(3)
        helper[int(np.argmin(np.abs(a)))] = 1.0
        perp = helper - np.dot(helper, a) * a
        return _rotation_from_axis_angle(perp, math.pi)
    return _rotation_from_axis_angle(axis, math.atan2(s, c))


def _superposition_quaternion(mx: np.ndarray, mr: np.ndarray) -> np.ndarray:
    """Max eigenvector of the quaternion form of sum m x . (R r).

    mx, mr: sqrt-mass-weighted molecule and reference coordinates.  The
    returned quaternion's rotation maps reference onto molecule coordinates.
    """
    s = mr.T @ mx  # correlation matrix, reference rows x molecule columns
    sxx, sxy, sxz = s[0]
    syx, syy, syz = s[1]
    szx, szy, szz = s[2]
    n = np.array([
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
    ])
    _, vecs = np.linalg.eigh(n)
    return vecs[:, -1]


def _newton_polish(rotation, x_centered, ref, masses, target) -> tuple[np.ndarray, float]:
    """Drive the cross-product residual to zero with Newton steps on the
    rotation (left-multiplication by exp of a skew generator in the bound
    frame).  Singular Jacobians (collinear references) are handled by
    least-squares steps, which leave the vacuous axis component untouched."""
    best_rot = rotation
    best_res = rotational_residual(rotation, x_centered, ref, masses)
    for _ in range(6):
        if best_res <= target:
            break
        u = x_centered @ best_rot
        mref = masses[:, None] * ref
        res_vec = np.sum(np.cross(ref, masses[:, None] * (u - ref)), axis=0)
        jac = np.sum(masses * np.einsum("ij,ij->i", ref, u)) * np.eye(3) - u.T @ mref
        delta, *_ = np.linalg.lstsq(jac, res_vec, rcond=None)
        candidate = best_rot @ _rotation_from_axis_angle(delta, float(np.linalg.norm(delta)))
        # Re-orthonormalize to keep the orthogonality invariant at 1e-12.
        uu, _, vv = np.linalg.svd(candidate)
        candidate = uu @ vv
        res = rotational_residual(candidate, x_centered, ref, masses)
        if res >= best_res:
            break
        best_rot, best_res = candidate, res
    return best_rot, best_res


def _collinear_axis(coords: np.ndarray, tol: float) -> np.ndarray | None:
    """Axis of the best line through the origin if every point lies within
    ``tol`` of it, else None.  Degenerate all-at-origin inputs return None."""
    _, sing, vt = np.linalg.svd(coords, full_matrices=False)
    if sing[0] == 0.0:
        return None
    axis = vt[0]
    perp = coords - np.outer(coords @ axis, axis)
    if float(np.max(np.linalg.norm(perp, axis=1))) <= tol:
        return axis
    return None


def bind_frame(molecule: AtomSet, reference: EquilibriumConfiguration,
               tol: float = DEFAULT_FRAME_TOL) -> EckartFrame:
    """Bind the reference configuration to the molecule.

    The origin is the molecular center of mass (the mass-weighted
    displacement sum then vanishes identically); the rotation is the
    minimizer of the mass-weighted squared displacement, obtained from the
    4x4 quaternion eigenproblem and polished until the cross-product residual
    is below ``tol`` (amu*angstrom^2 units).

    For collinear references the cross-product condition has only two
    independent components (the component along the molecular axis is
    vacuous); the rotation returned is the tilt-only map carrying the
    reference axis onto the mass-weighted image direction, with no spin
    about the axis.
    """
    if molecule.masses.size != reference.masses.size:
        raise ValidationError("molecule and reference have different atom counts")
    if not np.allclose(molecule.masses, reference.masses,
                       rtol=max(molecule.mass_rtol, reference.mass_rtol), atol=0.0):
        raise ValidationError("molecule and reference masses do not match")
    masses = reference.masses
    ref = reference.coordinates
    origin = center_of_mass(molecule.positions, molecule.masses)
    x_centered = molecule.positions - origin

    scale = float(np.max(np.linalg.norm(ref, axis=1)))
    axis = _collinear_axis(ref, tol=1e-12 * max(scale, 1.0))
    if axis is not None:
        rho = ref @ axis
        direction = (masses * rho) @ x_centered
        norm = np.linalg.norm(direction)
        if norm <= 1e-14 * float(np.sum(masses * np.abs(rho))):
            raise FrameNotFound("collinear reference with vanishing image direction",
                                best_residual=math.inf)
        rotation = _minimal_rotation(axis, direction / norm)
        residual = rotational_residual(rotation, x_centered, ref, masses)
        collinear = True
    else:
        sqm = np.sqrt(masses)[:, None]
        q = _superposition_quaternion(sqm * x_centered, sqm * ref)
        rotation = _quaternion_to_matrix(q)
        rotation, residual = _newton_polish(rotation, x_centered, ref, masses,
                                            target=tol * 1e-3)
        collinear = False

    if residual > tol:
        raise FrameNotFound("rotation solver did not reach tolerance", residual)
    displacements = x_centered @ rotation - ref
    return EckartFrame(origin=origin, rotation=rotation, displacements=displacements,
                       masses=masses, reference_coordinates=ref,
                       rotational_residual=residual, tolerance=tol,
                       collinear_reference=collinear)


def permutation_objective(molecule: AtomSet, reference: EquilibriumConfiguration,
                          perm, tol: float = DEFAULT_FRAME_TOL) -> float:
    """Sum of displacement norms after binding with the given assignment."""
    frame = bind_frame(molecule, reference.permuted(perm), tol=tol)
    return frame.displacement_norm_sum()


def _class_index_lists(class_ids: np.ndarray) -> list[np.ndarray]:
    return [np.flatnonzero(class_ids == cid) for cid in np.unique(class_ids)]


def resolve_permutation(molecule: AtomSet, reference: EquilibriumConfiguration,
                        method: str = "auto",
                        tol: float = DEFAULT_FRAME_TOL,
                        max_iterations: int = 50) -> np.ndarray:
    """Assignment of reference points to molecule atoms, within mass classes,
    minimizing the sum of displacement norms after frame binding.

    ``perm[i]`` is the reference index bound to molecule atom ``i``; indices
    move only inside their own mass class.  ``method="exhaustive"``
    enumerates all within-class permutations (classes of size <= 6, bounded
    total count) and breaks exact objective ties toward the lexicographically
    smallest permutation.  ``method="assignment"`` alternates frame binding
    with per-class linear-assignment solves until the assignment repeats.
    ``"auto"`` picks exhaustive whenever the enumeration fits the caps.
    """
    if molecule.masses.size != reference.masses.size:
        raise ValidationError("molecule and reference have different atom counts")
    class_ids = reference.class_ids
    if not np.array_equal(class_ids, molecule.class_ids):
        raise ValidationError("molecule and reference class structures differ")
    groups = _class_index_lists(class_ids)

    if method == "auto":
        total = 1
        feasible = True
        for g in groups:
            if g.size > EXHAUSTIVE_CLASS_CAP:
                feasible = False
                break
            total *= math.factorial(g.size)
            if total > EXHAUSTIVE_TOTAL_CAP:
                feasible = False
                break
        method = "exhaustive" if feasible else "assignment"

    if method == "exhaustive":
        return _resolve_exhaustive(molecule, reference, groups, tol)
    if method == "assignment":
        return _resolve_assignment(molecule, reference, groups, tol, max_iterations)
    raise ValidationError(f"unknown method {method!r}")


def _resolve_exhaustive(molecule, reference, groups, tol) -> np.ndarray:
    n = molecule.masses.size
    for g in groups:
        if g.size > EXHAUSTIVE_CLASS_CAP:
            raise ValidationError(
                f"class of size {g.size} exceeds exhaustive cap {EXHAUSTIVE_CLASS_CAP}")
    best_perm: tuple[int, ...] | None = None
    best_obj = math.inf
    for combo in itertools.product(*[itertools.permutations(g.tolist()) for g in groups]):
        perm = np.empty(n, dtype=int)
        for g, assigned in zip(groups, combo):
            perm[g] = assigned
        obj = permutation_objective(molecule, reference, perm, tol=tol)
        key = tuple(int(p) for p in perm)
        if obj < best_obj or (obj == best_obj and (best_perm is None or key < best_perm)):
            best_obj = obj
            best_perm = key
    assert best_perm is not None
    return np.asarray(best_perm, dtype=int)


def _cubic_rotations() -> list[np.ndarray]:
    """The 24 proper signed permutation matrices (rotation group of the cube)."""
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            if np.linalg.det(m) > 0:
                mats.append(m)
    return mats


def _lap_perm(bound_mol, ref_coords, groups) -> np.ndarray:
    perm = np.arange(bound_mol.shape[0])
    for g in groups:
        cost = np.linalg.norm(bound_mol[g][:, None, :] -
                              ref_coords[g][None, :, :], axis=2)
        rows, cols = linear_sum_assignment(cost)
        perm[g[rows]] = g[cols]
    return perm


def _resolve_assignment(molecule, reference, groups, tol, max_iterations) -> np.ndarray:
    """Alternate frame binding and per-class linear assignment from a fixed
    set of starting orientations; keep the best objective ever visited."""
    n = molecule.masses.size
    origin = center_of_mass(molecule.positions, molecule.masses)
    x_centered = molecule.positions - origin

    starts: list[np.ndarray] = [np.arange(n)]
    for q in _cubic_rotations():
        starts.append(_lap_perm(x_centered @ q, reference.coordinates, groups))

    best_perm: tuple[int, ...] | None = None
    best_obj = math.inf

    def consider(perm: np.ndarray) -> float:
        nonlocal best_perm, best_obj
        obj = permutation_objective(molecule, reference, perm, tol=tol)
        key = tuple(int(p) for p in perm)
        if obj < best_obj or (obj == best_obj and (best_perm is None or key < best_perm)):
            best_obj, best_perm = obj, key
        return obj

    for perm in starts:
        seen: set[tuple[int, ...]] = set()
        for _ in range(max_iterations):
            key = tuple(int(p) for p in perm)
            if key in seen:
                break
            seen.add(key)
            consider(perm)
            frame = bind_frame(molecule, reference.permuted(perm), tol=tol)
            bound_mol = x_centered @ frame.rotation
            new_perm = _lap_perm(bound_mol, reference.coordinates, groups)
            if np.array_equal(new_perm, perm):
                break
            perm = new_perm
    assert best_perm is not None
    return np.asarray(best_perm, dtype=int)


@dataclass(frozen=True)
class SymmetryOp:
    """Orthogonal transformation + index permutation mapping a reference onto
    itself: matrix @ r_a lands on r_{permutation[a]}."""

    matrix: np.ndarray
    permutation: tuple[int, ...]

    @property
    def is_proper(self) -> bool:
        return np.linalg.det(self.matrix) > 0


def _match_permutation(coords, images, class_ids, tol) -> tuple[int, ...] | None:
    """Permutation p with |images[a] - coords[p[a]]| <= tol, or None."""
    n = coords.shape[0]
    perm = np.full(n, -1, dtype=int)
    taken = np.zeros(n, dtype=bool)
    for a in range(n):
        dists = np.linalg.norm(coords - images[a], axis=1)
        dists[class_ids != class_ids[a]] = np.inf
        dists[taken] = np.inf
        b = int(np.argmin(dists))
        if dists[b] > tol:
            return None
        perm[a] = b
        taken[b] = True
    return tuple(int(p) for p in perm)


def _orthonormal_triad(v1: np.ndarray, v2: np.ndarray, normal_sign: float) -> np.ndarray:
    e1 = v1 / np.linalg.norm(v1)
    rej = v2 - np.dot(v2, e1) * e1
    e2 = rej / np.linalg.norm(rej)
    e3 = normal_sign * np.cross(e1, e2)
    return np.column_stack([e1, e2, e3])


def symmetry_operations(reference: EquilibriumConfiguration,
                        tol: float = 1e-6) -> list[SymmetryOp]:
    """All orthogonal maps (proper and improper) sending the reference onto
    itself within ``tol`` (angstrom), paired with their index permutations.

    The list is closed under composition, contains the identity, and is
    sorted canonically (proper operations first, then lexicographically on
    rounded matrix entries).  A continuous rotation axis (collinear
    configuration or a single atom) raises ``ContinuousAxis`` instead.
    """
    coords = reference.coordinates
    class_ids = reference.class_ids
    n = coords.shape[0]
    if n == 1:
        raise ContinuousAxis(None)
    axis = _collinear_axis(coords, tol=tol)
    if axis is not None:
        raise ContinuousAxis(axis)

    norms = np.linalg.norm(coords, axis=1)
    i1 = int(np.argmax(norms))
    rejections = np.linalg.norm(
        coords - np.outer(coords @ coords[i1], coords[i1]) / (norms[i1] ** 2), axis=1)
    i2 = int(np.argmax(rejections))
    anchor_dot = float(np.dot(coords[i1], coords[i2]))
    dot_tol = tol * (norms[i1] + norms[i2] + 1.0)

    ops: list[SymmetryOp] = []
    basis = _orthonormal_triad(coords[i1], coords[i2], 1.0)
    for j1 in np.flatnonzero(class_ids == class_ids[i1]):
        if abs(norms[j1] - norms[i1]) > tol:
            continue
        for j2 in np.flatnonzero(class_ids == class_ids[i2]):
            if j2 == j1 or abs(norms[j2] - norms[i2]) > tol:
                continue
            if abs(float(np.dot(coords[j1], coords[j2])) - anchor_dot) > dot_tol:
                continue
            rej = coords[j2] - np.dot(coords[j2], coords[j1]) * coords[j1] / (norms[j1] ** 2)
            if np.linalg.norm(rej) <= tol:
                continue
            for sign in (1.0, -1.0):
                image_basis = _orthonormal_triad(coords[j1], coords[j2], sign)
                candidate = image_basis @ basis.T
                images = coords @ candidate.T
                perm = _match_permutation(coords, images, class_ids, tol)
                if perm is None:
                    continue
                if any(p.permutation == perm and
                       np.max(np.abs(p.matrix - candidate)) <= max(1e-9, tol)
                       for p in ops):
                    continue
                ops.append(SymmetryOp(candidate, perm))

    ops.sort(key=lambda op: (-round(float(np.linalg.det(op.matrix))),
                             tuple(np.round(op.matrix, 9).ravel().tolist()),
                             op.permutation))
    _verify_group(ops, tol)
    return ops


def _verify_group(ops: list[SymmetryOp], tol: float) -> None:
    match_tol = max(3.0 * tol, 1e-8)

    def find(matrix, perm) -> bool:
        return any(op.permutation == perm and
                   np.max(np.abs(op.matrix - matrix)) <= match_tol for op in ops)

    if not find(np.eye(3), tuple(range(len(ops[0].permutation)))):
        raise ComputationError("symmetry enumeration lost the identity")
    for a in ops:
        inv_perm = tuple(int(p) for p in np.argsort(np.asarray(a.permutation)))
        if not find(a.matrix.T, inv_perm):
            raise ComputationError("symmetry enumeration is missing an inverse")
        for b in ops:
            comp = a.matrix @ b.matrix
            comp_perm = tuple(a.permutation[p] for p in b.permutation)
            if not find(comp, comp_perm):
                raise ComputationError("symmetry enumeration is not closed")


def read_xyz(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Parse extended XYZ: count line, comment line, then
    'label mass_amu x y z' per atom (whitespace-delimited, angstrom)."""
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip() or True]
    if not lines:
        raise ValidationError(f"{path}: empty file")
    try:
        count = int(lines[0].split()[0])
    except (ValueError, IndexError):
        raise ValidationError(f"{path}: first line must be the atom count")
    body = lines[2:2 + count]
    if len(body) < count:
        raise ValidationError(f"{path}: expected {count} atom lines")
    labels: list[str] = []
    masses: list[float] = []
    rows: list[list[float]] = []
    for k, line in enumerate(body):
        parts = line.split()
        if len(parts) < 5:
            raise ValidationError(f"{path}: atom line {k + 3} needs 'label mass x y z'")
        labels.append(parts[0])
        masses.append(float(parts[1]))
        rows.append([float(parts[2]), float(parts[3]), float(parts[4])])
    return labels, np.asarray(masses), np.asarray(rows)


def atom_set_from_xyz(path: str | Path) -> AtomSet:
    labels, masses, positions = read_xyz(path)
    return AtomSet(masses, positions, tuple(labels))


def equilibrium_from_xyz(path: str | Path) -> EquilibriumConfiguration:
    """Read a reference configuration; coordinates are recentered so the mass
    centroid sits at the origin."""
    labels, masses, coords = read_xyz(path)
    return EquilibriumConfiguration.centered(masses, coords, tuple(labels))


def write_xyz(path: str | Path, labels, masses, positions, comment: str = "") -> None:
    positions = np.asarray(positions, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{positions.shape[0]}\n{comment}\n")
        for lab, m, row in zip(labels, masses, positions):
            fh.write(f"{lab} {m!r} {row[0]!r} {row[1]!r} {row[2]!r}\n")


def displacements_to_csv(frame: EckartFrame, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["atom_index", "mass_amu",
                         "disp_x_angstrom", "disp_y_angstrom", "disp_z_angstrom"])
        for i, (m, d) in enumerate(zip(frame.masses, frame.displacements)):
            writer.writerow([i, repr(float(m)), repr(float(d[0])),
                             repr(float(d[1])), repr(float(d[2]))])


def frame_to_csv(frame: EckartFrame, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["quantity", "x", "y", "z"])
        writer.writerow(["origin"] + [repr(float(v)) for v in frame.origin])
        for name, row in zip(("rotation_row_0", "rotation_row_1", "rotation_row_2"),
                             frame.rotation):
            writer.writerow([name] + [repr(float(v)) for v in row])


def symmetry_to_csv(ops: list[SymmetryOp], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["op_index", "determinant",
                         "m00", "m01", "m02", "m10", "m11", "m12", "m20", "m21", "m22",
                         "permutation"])
        for k, op in enumerate(ops):
            det = round(float(np.linalg.det(op.matrix)))
            flat = [repr(float(v)) for v in op.matrix.ravel()]
            writer.writerow([k, det] + flat + [" ".join(str(p) for p in op.permutation)])
